#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "imda/tensor/ops.hpp"

namespace imda::arch {

/// Invalid network configuration (bad extents, misaligned branches, ...).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class BlockId { A, B, C, D, E };

enum class LayerKind { conv3x3, conv1x1, batch_norm, relu, avg_pool, max_pool };

const char* to_string(BlockId id);
const char* to_string(LayerKind kind);

struct LayerDesc {
  LayerKind kind = LayerKind::relu;
  std::size_t out_channels = 0;  // convolutions only
  std::size_t dilation = 1;      // convolutions only
  PoolSpec pool{};               // pooling only

  bool is_conv() const noexcept { return kind == LayerKind::conv3x3 || kind == LayerKind::conv1x1; }
  bool is_pool() const noexcept { return kind == LayerKind::avg_pool || kind == LayerKind::max_pool; }
};

struct BlockSpec {
  BlockId id = BlockId::A;
  std::vector<LayerDesc> layers;
};

/// Four-branch split-transform-merge block. Branch outputs are concatenated
/// along channels in B, C, D, E order.
struct StmSpec {
  std::array<BlockSpec, 4> branches;
};

/// Layer-kind sequence for each block, one entry per row of the block table:
///   A: C3 BN ReLU C3 BN ReLU MaxP
///   B: C3 BN ReLU C1 BN ReLU MaxP
///   C: C3 BN ReLU C1 BN ReLU AvgP
///   D: C3 BN ReLU AvgP C3 BN ReLU C1 BN ReLU MaxP
///   E: C3 BN ReLU MaxP C3 BN ReLU C1 BN ReLU AvgP
const std::vector<LayerKind>& block_layout(BlockId id);

/// Network-level configuration. Defaults build the three-STM detector at
/// 128x128.
struct NetworkSpec {
  std::size_t input_h = 128;
  std::size_t input_w = 128;
  bool stem = true;
  std::size_t stem_width = 16;
  std::size_t stm_count = 3;
  std::size_t branch_width = 16;  // 3x3 convs in STM 1; doubled per later STM
  std::size_t squeeze_width = 8;  // 1x1 convs in STM 1; doubled per later STM
  std::size_t dilation_bc = 1;
  std::size_t dilation_de = 2;
  std::size_t classes = 2;

  /// 2^(stem + stm_count): every pooling stage halves the extent once.
  std::size_t downsample_factor() const noexcept;
  /// Throws ConfigError naming the failing constraint.
  void validate() const;

  /// `key=value` lines, one per field, in declaration order.
  std::string to_text() const;
  static NetworkSpec from_text(std::string_view text);

  bool operator==(const NetworkSpec&) const = default;
};

/// Block with the verbatim layer order, given its widths and dilation.
/// `wide` is the 3x3 width, `squeeze` the 1x1 width (unused by block A).
BlockSpec make_block(BlockId id, std::size_t wide, std::size_t squeeze, std::size_t dilation);

/// Default STM block at `depth` (0, 1, 2, ...): widths scale by 2^depth.
StmSpec make_stm(const NetworkSpec& spec, std::size_t depth);

/// Channels leaving STM block `depth`: four squeezed branches.
std::size_t stm_output_channels(const NetworkSpec& spec, std::size_t depth);

}  // namespace imda::arch
