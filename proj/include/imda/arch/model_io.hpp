#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "imda/arch/network.hpp"

namespace imda::arch {

class ModelFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint16_t kModelFormatVersion = 1;

/// Model file layout (all integers little-endian):
///
///   "IMDA"                      4 bytes magic
///   version                     u16
///   header_length               u32
///   header                      header_length bytes of NetworkSpec::to_text()
///   weights                     f32 values of every buffer in
///                               Network::for_each_buffer order (conv weight,
///                               conv bias, bn gamma, beta, running mean,
///                               running var, ..., head weight, head bias)
///   checksum                    u32 CRC-32 (zlib polynomial) of the weight bytes
std::vector<std::uint8_t> serialize_model(Network<float>& net);
Network<float> deserialize_model(const std::vector<std::uint8_t>& bytes);

void save_model(const std::filesystem::path& path, Network<float>& net);
Network<float> load_model(const std::filesystem::path& path);

/// CRC-32 of the weight section of a serialized model.
std::uint32_t weight_checksum(const std::vector<std::uint8_t>& model_bytes);

}  // namespace imda::arch
