#include "imda/arch/network.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "imda/rng.hpp"

namespace imda::arch {

// ---------------------------------------------------------------------------
// Layer

template <typename T>
Tensor<T> Layer<T>::forward(const Tensor<T>& x, Mode mode, bool record) {
  if (record) input = x;
  switch (desc.kind) {
    case LayerKind::conv3x3:
    case LayerKind::conv1x1:
      return conv2d(x, conv);
    case LayerKind::batch_norm:
      if (mode == Mode::train) {
        auto out = batchnorm_train(x, bn);
        update_running_stats<T>(bn, out.batch_mean, out.batch_var);
        return std::move(out.y);
      }
      return batchnorm_infer(x, bn);
    case LayerKind::relu:
      return relu(x);
    case LayerKind::avg_pool:
    case LayerKind::max_pool:
      return pool2d(x, desc.pool);
  }
  return x;
}

template <typename T>
Tensor<T> Layer<T>::backward(const Tensor<T>& upstream) {
  if (input.empty()) throw std::logic_error("backward without a recorded train-mode forward");
  switch (desc.kind) {
    case LayerKind::conv3x3:
    case LayerKind::conv1x1: {
      auto g = conv2d_grad(input, conv, upstream);
      grad_w = std::move(g.grad_w);
      grad_b = std::move(g.grad_b);
      return std::move(g.grad_x);
    }
    case LayerKind::batch_norm: {
      auto g = batchnorm_grad(input, bn, upstream);
      grad_gamma = std::move(g.grad_gamma);
      grad_beta = std::move(g.grad_beta);
      return std::move(g.grad_x);
    }
    case LayerKind::relu:
      return relu_grad(input, upstream);
    case LayerKind::avg_pool:
    case LayerKind::max_pool:
      return pool2d_grad(input, desc.pool, upstream);
  }
  return upstream;
}

template <typename T>
std::size_t Layer<T>::param_count() const noexcept {
  if (desc.is_conv()) return conv.weights.size() + conv.bias.size();
  if (desc.kind == LayerKind::batch_norm) return bn.gamma.size() + bn.beta.size();
  return 0;
}

// ---------------------------------------------------------------------------
// Block / STM

template <typename T>
Tensor<T> Block<T>::forward(const Tensor<T>& x, Mode mode, bool record) {
  Tensor<T> h = layers.front().forward(x, mode, record);
  for (std::size_t k = 1; k < layers.size(); ++k) h = layers[k].forward(h, mode, record);
  return h;
}

template <typename T>
Tensor<T> Block<T>::backward(const Tensor<T>& upstream) {
  Tensor<T> g = layers.back().backward(upstream);
  for (std::size_t k = layers.size() - 1; k-- > 0;) g = layers[k].backward(g);
  return g;
}

template <typename T>
Tensor<T> Stm<T>::forward(const Tensor<T>& x, Mode mode, bool record) {
  std::array<Tensor<T>, 4> parts;
  for (std::size_t b = 0; b < 4; ++b) parts[b] = branches[b].forward(x, mode, record);
  return concat_channels<T>(parts);
}

template <typename T>
Tensor<T> Stm<T>::backward(const Tensor<T>& upstream) {
  auto parts = split_channels<T>(upstream, widths);
  Tensor<T> grad = branches[0].backward(parts[0]);
  for (std::size_t b = 1; b < 4; ++b) {
    Tensor<T> g = branches[b].backward(parts[b]);
    auto dst = grad.data();
    auto src = g.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Building

namespace {

template <typename T>
Block<T> instantiate_block(const BlockSpec& spec, Shape& shape, const std::string& label) {
  if (spec.layers.empty()) throw ConfigError("block " + label + " has no layers");
  Block<T> block;
  block.id = spec.id;
  for (std::size_t k = 0; k < spec.layers.size(); ++k) {
    const LayerDesc& desc = spec.layers[k];
    Layer<T> layer;
    layer.desc = desc;
    try {
      switch (desc.kind) {
        case LayerKind::conv3x3:
        case LayerKind::conv1x1: {
          const std::size_t k_ext = desc.kind == LayerKind::conv3x3 ? 3 : 1;
          if (desc.out_channels == 0) throw ConfigError("zero-width convolution");
          layer.conv = ConvSpec<T>::make(shape.c, desc.out_channels, k_ext, k_ext, desc.dilation,
                                         Padding::same);
          shape = conv2d_output_shape(shape, shape.c, desc.out_channels, k_ext, k_ext, 1,
                                      desc.dilation, Padding::same);
          break;
        }
        case LayerKind::batch_norm:
          layer.bn = BatchNormSpec<T>::make(shape.c);
          break;
        case LayerKind::relu:
          break;
        case LayerKind::avg_pool:
        case LayerKind::max_pool:
          shape = pool2d_output_shape(shape, desc.pool);
          break;
      }
    } catch (const DimensionError& e) {
      throw ConfigError("block " + label + " layer " + std::to_string(k) + " (" +
                        to_string(desc.kind) + "): " + e.what());
    }
    layer.out_shape = shape;
    block.layers.push_back(std::move(layer));
  }
  return block;
}

}  // namespace

template <typename T>
Network<T> build_network(const NetworkSpec& spec, const std::optional<BlockSpec>& stem,
                         const std::vector<StmSpec>& stms) {
  if (spec.input_h == 0 || spec.input_w == 0) throw ConfigError("input extents must be positive");
  Network<T> net;
  net.spec_ = spec;
  Shape shape{1, 1, spec.input_h, spec.input_w};
  if (stem) net.stem_ = instantiate_block<T>(*stem, shape, "A");
  for (std::size_t s = 0; s < stms.size(); ++s) {
    Stm<T> stm;
    stm.in_shape = shape;
    std::optional<Shape> merged;
    std::size_t channels = 0;
    for (std::size_t b = 0; b < 4; ++b) {
      Shape branch_shape = shape;
      const std::string label = "STM" + std::to_string(s + 1) + "/" + to_string(stms[s].branches[b].id);
      stm.branches[b] = instantiate_block<T>(stms[s].branches[b], branch_shape, label);
      if (merged && (merged->h != branch_shape.h || merged->w != branch_shape.w)) {
        throw ConfigError("STM" + std::to_string(s + 1) + " branch " + label + " outputs " +
                          std::to_string(branch_shape.h) + "x" + std::to_string(branch_shape.w) +
                          " but branch 0 outputs " + std::to_string(merged->h) + "x" +
                          std::to_string(merged->w) + "; branches must align for the merge");
      }
      merged = branch_shape;
      stm.widths[b] = branch_shape.c;
      channels += branch_shape.c;
    }
    shape = Shape{1, channels, merged->h, merged->w};
    net.stms_.push_back(std::move(stm));
  }
  net.head_ = DenseSpec<T>::make(shape.c, spec.classes);
  net.head_grad_w_.assign(net.head_.weights.size(), T{0});
  net.head_grad_b_.assign(net.head_.bias.size(), T{0});
  return net;
}

template <typename T>
Network<T> build_imda(const NetworkSpec& spec) {
  spec.validate();
  std::optional<BlockSpec> stem;
  if (spec.stem) stem = make_block(BlockId::A, spec.stem_width, 0, 1);
  std::vector<StmSpec> stms;
  for (std::size_t s = 0; s < spec.stm_count; ++s) stms.push_back(make_stm(spec, s));
  return build_network<T>(spec, stem, stms);
}

// ---------------------------------------------------------------------------
// Network

template <typename T>
ForwardResult<T> Network<T>::forward(const Tensor<T>& batch, Mode mode) {
  const Shape& s = batch.shape();
  if (s.c != 1 || s.h != spec_.input_h || s.w != spec_.input_w) {
    throw DimensionError(s.c != 1 ? "channel" : s.h != spec_.input_h ? "height" : "width",
                         "network expects (N, 1, " + std::to_string(spec_.input_h) + ", " +
                             std::to_string(spec_.input_w) + ") input, got " + s.str());
  }
  const bool record = mode == Mode::train;
  Tensor<T> h = stem_ ? stem_->forward(batch, mode, record) : batch;
  for (auto& stm : stms_) h = stm.forward(h, mode, record);
  pooled_shape_ = h.shape();
  ForwardResult<T> out;
  out.features = global_avg_pool(h);
  if (record) head_input_ = out.features;
  out.logits = dense(out.features, head_);
  out.probs = softmax(out.logits);
  return out;
}

template <typename T>
Tensor<T> Network<T>::backward(const Tensor<T>& grad_logits) {
  if (head_input_.empty()) throw std::logic_error("backward without a recorded train-mode forward");
  auto dg = dense_grad(head_input_, head_, grad_logits);
  head_grad_w_ = std::move(dg.grad_w);
  head_grad_b_ = std::move(dg.grad_b);
  Tensor<T> g = global_avg_pool_grad(pooled_shape_, dg.grad_x);
  for (std::size_t s = stms_.size(); s-- > 0;) g = stms_[s].backward(g);
  if (stem_) g = stem_->backward(g);
  return g;
}

template <typename T>
void Network<T>::clear_cache() {
  auto clear_block = [](Block<T>& block) {
    for (auto& layer : block.layers) layer.input = Tensor<T>();
  };
  if (stem_) clear_block(*stem_);
  for (auto& stm : stms_)
    for (auto& branch : stm.branches) clear_block(branch);
  head_input_ = Tensor<T>();
}

namespace {

template <typename T>
void visit_block(Block<T>& block, const std::string& prefix, bool with_stats,
                 const std::function<void(ParamRef<T>)>& visit) {
  for (std::size_t k = 0; k < block.layers.size(); ++k) {
    Layer<T>& layer = block.layers[k];
    const std::string name = prefix + "." + std::to_string(k);
    if (layer.desc.is_conv()) {
      if (layer.grad_w.size() != layer.conv.weights.size()) layer.grad_w = Tensor<T>(layer.conv.weights.shape());
      if (layer.grad_b.size() != layer.conv.bias.size()) layer.grad_b.assign(layer.conv.bias.size(), T{0});
      visit({name + ".weight", layer.conv.weights.data(), layer.grad_w.data()});
      visit({name + ".bias", layer.conv.bias, layer.grad_b});
    } else if (layer.desc.kind == LayerKind::batch_norm) {
      if (layer.grad_gamma.size() != layer.bn.channels) layer.grad_gamma.assign(layer.bn.channels, T{0});
      if (layer.grad_beta.size() != layer.bn.channels) layer.grad_beta.assign(layer.bn.channels, T{0});
      visit({name + ".gamma", layer.bn.gamma, layer.grad_gamma});
      visit({name + ".beta", layer.bn.beta, layer.grad_beta});
      if (with_stats) {
        visit({name + ".running_mean", layer.bn.running_mean, {}});
        visit({name + ".running_var", layer.bn.running_var, {}});
      }
    }
  }
}

template <typename T>
void visit_all(Network<T>& net, bool with_stats, std::vector<T>& head_gw, std::vector<T>& head_gb,
               const std::function<void(ParamRef<T>)>& visit) {
  if (net.stem()) visit_block(*net.stem(), "A", with_stats, visit);
  for (std::size_t s = 0; s < net.stms().size(); ++s) {
    for (auto& branch : net.stms()[s].branches) {
      visit_block(branch, "STM" + std::to_string(s + 1) + "/" + to_string(branch.id), with_stats, visit);
    }
  }
  visit({"head.weight", net.head().weights, head_gw});
  visit({"head.bias", net.head().bias, head_gb});
}

}  // namespace

template <typename T>
void Network<T>::for_each_param(const std::function<void(ParamRef<T>)>& visit) {
  visit_all(*this, false, head_grad_w_, head_grad_b_, visit);
}

template <typename T>
void Network<T>::for_each_buffer(const std::function<void(ParamRef<T>)>& visit) {
  visit_all(*this, true, head_grad_w_, head_grad_b_, visit);
}

template <typename T>
void Network<T>::initialize(std::uint64_t seed) {
  Rng rng(seed);
  auto fill_normal = [&rng](std::span<T> values, double stddev) {
    for (auto& v : values) v = static_cast<T>(rng.normal() * stddev);
  };
  auto init_block = [&](Block<T>& block) {
    for (auto& layer : block.layers) {
      if (layer.desc.is_conv()) {
        const Shape& ws = layer.conv.weights.shape();
        fill_normal(layer.conv.weights.data(), std::sqrt(2.0 / static_cast<double>(ws.c * ws.h * ws.w)));
        std::fill(layer.conv.bias.begin(), layer.conv.bias.end(), T{0});
      } else if (layer.desc.kind == LayerKind::batch_norm) {
        layer.bn = BatchNormSpec<T>::make(layer.bn.channels);
      }
    }
  };
  if (stem_) init_block(*stem_);
  for (auto& stm : stms_)
    for (auto& branch : stm.branches) init_block(branch);
  fill_normal(head_.weights, std::sqrt(2.0 / static_cast<double>(head_.in_features)));
  std::fill(head_.bias.begin(), head_.bias.end(), T{0});
}

template <typename T>
std::size_t Network<T>::param_count() const {
  std::size_t total = 0;
  auto count_block = [&total](const Block<T>& block) {
    for (const auto& layer : block.layers) total += layer.param_count();
  };
  if (stem_) count_block(*stem_);
  for (const auto& stm : stms_)
    for (const auto& branch : stm.branches) count_block(branch);
  return total + head_.weights.size() + head_.bias.size();
}

template <typename T>
std::vector<LayerRow> Network<T>::describe() const {
  std::vector<LayerRow> rows;
  auto add_block = [&rows](const Block<T>& block, const std::string& label) {
    for (const auto& layer : block.layers) {
      rows.push_back({label, to_string(layer.desc.kind), layer.out_shape, layer.param_count()});
    }
  };
  Shape shape{1, 1, spec_.input_h, spec_.input_w};
  if (stem_) {
    add_block(*stem_, "A");
    shape = stem_->layers.back().out_shape;
  }
  for (std::size_t s = 0; s < stms_.size(); ++s) {
    const std::string stm_label = "STM" + std::to_string(s + 1);
    std::size_t channels = 0;
    for (const auto& branch : stms_[s].branches) {
      add_block(branch, stm_label + "/" + to_string(branch.id));
      channels += branch.layers.back().out_shape.c;
    }
    const Shape& last = stms_[s].branches[0].layers.back().out_shape;
    shape = Shape{1, channels, last.h, last.w};
    rows.push_back({stm_label, "concat", shape, 0});
  }
  rows.push_back({"head", "global_avg_pool", Shape{1, shape.c, 1, 1}, 0});
  rows.push_back({"head", "dense", Shape{1, head_.out_features, 1, 1},
                  head_.weights.size() + head_.bias.size()});
  rows.push_back({"head", "softmax", Shape{1, head_.out_features, 1, 1}, 0});
  return rows;
}

template <typename T>
void Network<T>::mark_stats_initialized() {
  auto mark = [](Block<T>& block) {
    for (auto& layer : block.layers)
      if (layer.desc.kind == LayerKind::batch_norm) layer.bn.stats_initialized = true;
  };
  if (stem_) mark(*stem_);
  for (auto& stm : stms_)
    for (auto& branch : stm.branches) mark(branch);
}

std::string format_layer_table(const std::vector<LayerRow>& rows) {
  std::ostringstream out;
  out << std::left << std::setw(10) << "block" << std::setw(17) << "layer" << std::setw(20)
      << "output (C,H,W)" << std::right << std::setw(10) << "params" << '\n';
  std::size_t total = 0;
  for (const auto& row : rows) {
    std::ostringstream shape;
    shape << row.out_shape.c << "x" << row.out_shape.h << "x" << row.out_shape.w;
    out << std::left << std::setw(10) << row.block << std::setw(17) << row.kind << std::setw(20)
        << shape.str() << std::right << std::setw(10) << row.params << '\n';
    total += row.params;
  }
  out << "total parameters: " << total << '\n';
  return out.str();
}

#define IMDA_INSTANTIATE_NETWORK(T)                                                             \
  template struct Layer<T>;                                                                     \
  template struct Block<T>;                                                                     \
  template struct Stm<T>;                                                                       \
  template class Network<T>;                                                                    \
  template Network<T> build_imda<T>(const NetworkSpec&);                                        \
  template Network<T> build_network<T>(const NetworkSpec&, const std::optional<BlockSpec>&,     \
                                       const std::vector<StmSpec>&);

IMDA_INSTANTIATE_NETWORK(float)
IMDA_INSTANTIATE_NETWORK(double)

}  // namespace imda::arch
