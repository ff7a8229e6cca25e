#include "imda/metrics/pca.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace imda::metrics {

namespace {

using Matrix = std::vector<std::vector<double>>;

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void normalize(std::vector<double>& v) {
  const double n = std::sqrt(dot(v, v));
  if (n > 0.0) {
    for (double& x : v) x /= n;
  }
}

std::vector<double> multiply(const Matrix& m, const std::vector<double>& v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = dot(m[i], v);
  return out;
}

void orthogonalize(std::vector<double>& v, const Matrix& against) {
  for (const auto& u : against) {
    const double c = dot(v, u);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= c * u[i];
  }
}

void fix_sign(std::vector<double>& v) {
  for (double x : v) {
    if (std::abs(x) > 1e-12) {
      if (x < 0.0) {
        for (double& y : v) y = -y;
      }
      return;
    }
  }
}

}  // namespace

double PcaResult::explained(std::size_t k) const {
  if (k >= eigenvalues.size() || total_variance <= 0.0) return 0.0;
  return eigenvalues[k] / total_variance;
}

PcaResult pca_project(const Matrix& features, std::size_t dims, const PcaOptions& options) {
  const std::size_t n = features.size();
  if (n < 2) throw PcaError("pca needs at least 2 samples", 0.0);
  const std::size_t d = features.front().size();
  if (d < 2) throw PcaError("pca needs feature dimension >= 2", 0.0);
  if (dims == 0 || dims > d) throw PcaError("pca output dimension must be in [1, feature dimension]", 0.0);
  for (const auto& f : features) {
    if (f.size() != d) throw PcaError("pca features differ in length", 0.0);
  }

  PcaResult out;
  out.mean.assign(d, 0.0);
  for (const auto& f : features) {
    for (std::size_t j = 0; j < d; ++j) out.mean[j] += f[j];
  }
  for (double& m : out.mean) m /= static_cast<double>(n);

  Matrix cov(d, std::vector<double>(d, 0.0));
  std::vector<double> centered(d);
  for (const auto& f : features) {
    for (std::size_t j = 0; j < d; ++j) centered[j] = f[j] - out.mean[j];
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = a; b < d; ++b) cov[a][b] += centered[a] * centered[b];
    }
  }
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a; b < d; ++b) {
      cov[a][b] /= static_cast<double>(n - 1);
      cov[b][a] = cov[a][b];
    }
    out.total_variance += cov[a][a];
  }

  const double tol = options.tolerance * std::max(1.0, out.total_variance);
  for (std::size_t k = 0; k < dims; ++k) {
    std::vector<double> v(d);
    for (std::size_t j = 0; j < d; ++j) v[j] = 1.0 / std::sqrt(static_cast<double>(j + 1 + k));
    orthogonalize(v, out.components);
    normalize(v);
    double lambda = 0.0;
    double residual = 0.0;
    bool converged = false;
    for (std::size_t it = 0; it < options.max_iterations; ++it) {
      std::vector<double> w = multiply(cov, v);
      lambda = dot(v, w);
      residual = 0.0;
      for (std::size_t j = 0; j < d; ++j) residual += (w[j] - lambda * v[j]) * (w[j] - lambda * v[j]);
      residual = std::sqrt(residual);
      if (residual <= tol) {
        converged = true;
        break;
      }
      orthogonalize(w, out.components);
      normalize(w);
      v = std::move(w);
    }
    if (!converged) {
      char msg[128];
      std::snprintf(msg, sizeof msg, "pca component %zu did not converge, residual %.3g", k + 1, residual);
      throw PcaError(msg, residual);
    }
    fix_sign(v);
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = 0; b < d; ++b) cov[a][b] -= lambda * v[a] * v[b];
    }
    out.components.push_back(std::move(v));
    out.eigenvalues.push_back(lambda);
  }

  out.coords.assign(n, std::vector<double>(dims, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) centered[j] = features[i][j] - out.mean[j];
    for (std::size_t k = 0; k < dims; ++k) out.coords[i][k] = dot(centered, out.components[k]);
  }
  return out;
}

}  // namespace imda::metrics
