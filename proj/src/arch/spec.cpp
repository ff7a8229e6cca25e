#include "imda/arch/spec.hpp"

#include <charconv>
#include <map>
#include <sstream>

namespace imda::arch {

const char* to_string(BlockId id) {
  switch (id) {
    case BlockId::A: return "A";
    case BlockId::B: return "B";
    case BlockId::C: return "C";
    case BlockId::D: return "D";
    case BlockId::E: return "E";
  }
  return "?";
}

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv3x3: return "conv3x3";
    case LayerKind::conv1x1: return "conv1x1";
    case LayerKind::batch_norm: return "batch_norm";
    case LayerKind::relu: return "relu";
    case LayerKind::avg_pool: return "avg_pool";
    case LayerKind::max_pool: return "max_pool";
  }
  return "?";
}

const std::vector<LayerKind>& block_layout(BlockId id) {
  using K = LayerKind;
  static const std::vector<K> a{K::conv3x3, K::batch_norm, K::relu, K::conv3x3, K::batch_norm, K::relu, K::max_pool};
  static const std::vector<K> b{K::conv3x3, K::batch_norm, K::relu, K::conv1x1, K::batch_norm, K::relu, K::max_pool};
  static const std::vector<K> c{K::conv3x3, K::batch_norm, K::relu, K::conv1x1, K::batch_norm, K::relu, K::avg_pool};
  static const std::vector<K> d{K::conv3x3, K::batch_norm, K::relu, K::avg_pool, K::conv3x3, K::batch_norm,
                                K::relu,    K::conv1x1,    K::batch_norm, K::relu, K::max_pool};
  static const std::vector<K> e{K::conv3x3, K::batch_norm, K::relu, K::max_pool, K::conv3x3, K::batch_norm,
                                K::relu,    K::conv1x1,    K::batch_norm, K::relu, K::avg_pool};
  switch (id) {
    case BlockId::A: return a;
    case BlockId::B: return b;
    case BlockId::C: return c;
    case BlockId::D: return d;
    case BlockId::E: return e;
  }
  return a;
}

BlockSpec make_block(BlockId id, std::size_t wide, std::size_t squeeze, std::size_t dilation) {
  const auto& layout = block_layout(id);
  BlockSpec block{id, {}};
  // The last pool halves the extent. In D and E the earlier pool only smooths
  // (window 3, stride 1, same padding) so that all four branches stay aligned.
  const std::size_t last = layout.size() - 1;
  for (std::size_t k = 0; k < layout.size(); ++k) {
    LayerDesc layer;
    layer.kind = layout[k];
    switch (layer.kind) {
      case LayerKind::conv3x3:
        layer.out_channels = wide;
        layer.dilation = dilation;
        break;
      case LayerKind::conv1x1:
        layer.out_channels = squeeze;
        break;
      case LayerKind::avg_pool:
      case LayerKind::max_pool: {
        const PoolKind kind = layer.kind == LayerKind::avg_pool ? PoolKind::avg : PoolKind::max;
        layer.pool = k == last ? PoolSpec{kind, 2, 2, Padding::valid} : PoolSpec{kind, 3, 1, Padding::same};
        break;
      }
      default:
        break;
    }
    block.layers.push_back(layer);
  }
  return block;
}

StmSpec make_stm(const NetworkSpec& spec, std::size_t depth) {
  const std::size_t scale = std::size_t{1} << depth;
  const std::size_t wide = spec.branch_width * scale;
  const std::size_t squeeze = spec.squeeze_width * scale;
  return StmSpec{{make_block(BlockId::B, wide, squeeze, spec.dilation_bc),
                  make_block(BlockId::C, wide, squeeze, spec.dilation_bc),
                  make_block(BlockId::D, wide, squeeze, spec.dilation_de),
                  make_block(BlockId::E, wide, squeeze, spec.dilation_de)}};
}

std::size_t stm_output_channels(const NetworkSpec& spec, std::size_t depth) {
  return 4 * spec.squeeze_width * (std::size_t{1} << depth);
}

std::size_t NetworkSpec::downsample_factor() const noexcept {
  return std::size_t{1} << ((stem ? 1 : 0) + stm_count);
}

void NetworkSpec::validate() const {
  if (input_h == 0 || input_w == 0) throw ConfigError("input extents must be positive");
  if (stm_count > 8) throw ConfigError("stm_count above 8 is not supported");
  const std::size_t f = downsample_factor();
  if (input_h % f != 0 || input_w % f != 0) {
    throw ConfigError("input extents " + std::to_string(input_h) + "x" + std::to_string(input_w) +
                      " must be divisible by " + std::to_string(f) + " (2^" +
                      std::to_string((stem ? 1 : 0) + stm_count) + " pooling stages)");
  }
  if (stem && stem_width == 0) throw ConfigError("stem_width must be positive");
  if (stm_count > 0) {
    if (branch_width == 0 || squeeze_width == 0) throw ConfigError("branch widths must be positive");
    if (squeeze_width >= branch_width) {
      throw ConfigError("squeeze_width (" + std::to_string(squeeze_width) +
                        ") must be smaller than branch_width (" + std::to_string(branch_width) + ")");
    }
  }
  if (dilation_bc == 0 || dilation_de == 0) throw ConfigError("dilation rates must be positive");
  if (classes < 2) throw ConfigError("classes must be at least 2");
}

std::string NetworkSpec::to_text() const {
  std::ostringstream out;
  out << "input_h=" << input_h << '\n'
      << "input_w=" << input_w << '\n'
      << "stem=" << (stem ? 1 : 0) << '\n'
      << "stem_width=" << stem_width << '\n'
      << "stm_count=" << stm_count << '\n'
      << "branch_width=" << branch_width << '\n'
      << "squeeze_width=" << squeeze_width << '\n'
      << "dilation_bc=" << dilation_bc << '\n'
      << "dilation_de=" << dilation_de << '\n'
      << "classes=" << classes << '\n';
  return out.str();
}

NetworkSpec NetworkSpec::from_text(std::string_view text) {
  std::map<std::string, std::size_t, std::less<>> values;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("network header line " + std::to_string(line_no) + " lacks '='");
    }
    std::size_t value = 0;
    const auto digits = line.substr(eq + 1);
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
    if (ec != std::errc{} || ptr != digits.data() + digits.size()) {
      throw ConfigError("network header line " + std::to_string(line_no) + " has a non-integer value");
    }
    values[std::string(line.substr(0, eq))] = value;
  }
  NetworkSpec spec;
  auto take = [&](const char* key, std::size_t& field) {
    auto it = values.find(key);
    if (it == values.end()) throw ConfigError(std::string("network header missing key ") + key);
    field = it->second;
    values.erase(it);
  };
  std::size_t stem = 0;
  take("input_h", spec.input_h);
  take("input_w", spec.input_w);
  take("stem", stem);
  take("stem_width", spec.stem_width);
  take("stm_count", spec.stm_count);
  take("branch_width", spec.branch_width);
  take("squeeze_width", spec.squeeze_width);
  take("dilation_bc", spec.dilation_bc);
  take("dilation_de", spec.dilation_de);
  take("classes", spec.classes);
  if (!values.empty()) throw ConfigError("network header has unknown key " + values.begin()->first);
  spec.stem = stem != 0;
  spec.validate();
  return spec;
}

}  // namespace imda::arch
