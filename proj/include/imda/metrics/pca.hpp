#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace imda::metrics {

class PcaError : public std::runtime_error {
 public:
  PcaError(const std::string& what, double residual) : std::runtime_error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

struct PcaOptions {
  double tolerance = 1e-10;
  std::size_t max_iterations = 10'000;
};

struct PcaResult {
  std::vector<double> mean;
  std::vector<std::vector<double>> components;  // unit vectors, one per output dimension
  std::vector<double> eigenvalues;
  double total_variance = 0.0;
  std::vector<std::vector<double>> coords;

  double explained(std::size_t k) const;
};

/// Deflated power iteration on the sample covariance (divisor n - 1).
/// Each component's first loading above 1e-12 in magnitude is positive.
PcaResult pca_project(const std::vector<std::vector<double>>& features, std::size_t dims = 2,
                      const PcaOptions& options = {});

}  // namespace imda::metrics
