#include "imda/arch/model_io.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace imda::arch {

namespace {

constexpr char kMagic[4] = {'I', 'M', 'D', 'A'};

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<std::uint8_t>((v >> shift) & 0xFF));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t size) {
  uLong crc = crc32(0L, Z_NULL, 0);
  return static_cast<std::uint32_t>(crc32(crc, data, static_cast<uInt>(size)));
}

struct Layout {
  std::size_t header_begin = 0;
  std::size_t header_size = 0;
  std::size_t weights_begin = 0;
};

Layout parse_prefix(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 10 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw ModelFormatError("not an IMDA model file (bad magic)");
  }
  const std::uint16_t version = static_cast<std::uint16_t>(bytes[4] | (bytes[5] << 8));
  if (version != kModelFormatVersion) {
    throw ModelFormatError("unsupported model format version " + std::to_string(version));
  }
  Layout layout;
  layout.header_size = get_u32(bytes.data() + 6);
  layout.header_begin = 10;
  layout.weights_begin = layout.header_begin + layout.header_size;
  if (layout.weights_begin + 4 > bytes.size()) throw ModelFormatError("model file truncated in header");
  return layout;
}

}  // namespace

std::vector<std::uint8_t> serialize_model(Network<float>& net) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_u16(out, kModelFormatVersion);
  const std::string header = net.spec().to_text();
  put_u32(out, static_cast<std::uint32_t>(header.size()));
  out.insert(out.end(), header.begin(), header.end());
  const std::size_t weights_begin = out.size();
  net.for_each_buffer([&out](ParamRef<float> ref) {
    for (float v : ref.value) put_u32(out, std::bit_cast<std::uint32_t>(v));
  });
  const std::uint32_t crc = crc32_of(out.data() + weights_begin, out.size() - weights_begin);
  put_u32(out, crc);
  return out;
}

Network<float> deserialize_model(const std::vector<std::uint8_t>& bytes) {
  const Layout layout = parse_prefix(bytes);
  const std::string header(reinterpret_cast<const char*>(bytes.data() + layout.header_begin),
                           layout.header_size);
  NetworkSpec spec;
  try {
    spec = NetworkSpec::from_text(header);
  } catch (const ConfigError& e) {
    throw ModelFormatError(std::string("bad model header: ") + e.what());
  }
  Network<float> net = build_imda<float>(spec);
  std::size_t expected = 0;
  net.for_each_buffer([&expected](ParamRef<float> ref) { expected += ref.value.size(); });
  const std::size_t weight_bytes = bytes.size() - layout.weights_begin - 4;
  if (weight_bytes != expected * 4) {
    throw ModelFormatError("model weight section has " + std::to_string(weight_bytes) +
                           " bytes, header implies " + std::to_string(expected * 4));
  }
  const std::uint8_t* weights = bytes.data() + layout.weights_begin;
  if (crc32_of(weights, weight_bytes) != get_u32(weights + weight_bytes)) {
    throw ModelFormatError("model weight checksum mismatch");
  }
  std::size_t pos = 0;
  net.for_each_buffer([&](ParamRef<float> ref) {
    for (float& v : ref.value) {
      v = std::bit_cast<float>(get_u32(weights + pos));
      pos += 4;
    }
  });
  net.mark_stats_initialized();
  return net;
}

void save_model(const std::filesystem::path& path, Network<float>& net) {
  const auto bytes = serialize_model(net);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Network<float> load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

std::uint32_t weight_checksum(const std::vector<std::uint8_t>& model_bytes) {
  parse_prefix(model_bytes);
  return get_u32(model_bytes.data() + model_bytes.size() - 4);
}

}  // namespace imda::arch
