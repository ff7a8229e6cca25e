#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <numeric>

#include "gradcheck.hpp"
#include "gradient_suite.hpp"
#include "imda/arch/model_io.hpp"
#include "imda/arch/network.hpp"

using namespace imda;
using namespace imda::arch;

namespace {

using K = LayerKind;

NetworkSpec small_spec(std::size_t extent = 32) {
  NetworkSpec spec;
  spec.input_h = extent;
  spec.input_w = extent;
  spec.stem_width = 4;
  spec.branch_width = 4;
  spec.squeeze_width = 2;
  return spec;
}

Tensor<float> random_batch(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  Tensor<float> t(shape);
  for (auto& v : t.data()) v = static_cast<float>(rng.uniform());
  return t;
}

// Parameter count of the default topology, tallied from the block stacks:
// conv k x k: k*k*in*out + out, batch norm: 2*out, dense: in*out + out.
std::size_t expected_params(const NetworkSpec& s) {
  auto conv = [](std::size_t k, std::size_t in, std::size_t out) { return k * k * in * out + out; };
  auto bn = [](std::size_t out) { return 2 * out; };
  std::size_t total = 0;
  std::size_t channels = 1;
  if (s.stem) {
    total += conv(3, 1, s.stem_width) + bn(s.stem_width) + conv(3, s.stem_width, s.stem_width) + bn(s.stem_width);
    channels = s.stem_width;
  }
  for (std::size_t d = 0; d < s.stm_count; ++d) {
    const std::size_t w = s.branch_width << d;
    const std::size_t q = s.squeeze_width << d;
    const std::size_t short_branch = conv(3, channels, w) + bn(w) + conv(1, w, q) + bn(q);
    const std::size_t long_branch = short_branch + conv(3, w, w) + bn(w);
    total += 2 * short_branch + 2 * long_branch;
    channels = 4 * q;
  }
  return total + channels * s.classes + s.classes;
}

}  // namespace

TEST_SUITE("block layouts") {
  TEST_CASE("stacks follow the published block table") {
    CHECK(block_layout(BlockId::A) == std::vector<K>{K::conv3x3, K::batch_norm, K::relu, K::conv3x3, K::batch_norm, K::relu, K::max_pool});
    CHECK(block_layout(BlockId::B) == std::vector<K>{K::conv3x3, K::batch_norm, K::relu, K::conv1x1, K::batch_norm, K::relu, K::max_pool});
    CHECK(block_layout(BlockId::C) == std::vector<K>{K::conv3x3, K::batch_norm, K::relu, K::conv1x1, K::batch_norm, K::relu, K::avg_pool});
    CHECK(block_layout(BlockId::D) == std::vector<K>{K::conv3x3, K::batch_norm, K::relu, K::avg_pool, K::conv3x3, K::batch_norm, K::relu, K::conv1x1, K::batch_norm, K::relu, K::max_pool});
    CHECK(block_layout(BlockId::E) == std::vector<K>{K::conv3x3, K::batch_norm, K::relu, K::max_pool, K::conv3x3, K::batch_norm, K::relu, K::conv1x1, K::batch_norm, K::relu, K::avg_pool});
  }

  TEST_CASE("edge/region pairing of the final pools") {
    CHECK(block_layout(BlockId::B).back() == K::max_pool);
    CHECK(block_layout(BlockId::D).back() == K::max_pool);
    CHECK(block_layout(BlockId::C).back() == K::avg_pool);
    CHECK(block_layout(BlockId::E).back() == K::avg_pool);
  }

  TEST_CASE("default widths and dilations") {
    NetworkSpec spec;
    for (std::size_t depth = 0; depth < 3; ++depth) {
      auto stm = make_stm(spec, depth);
      for (const auto& branch : stm.branches) {
        const bool dilated = branch.id == BlockId::D || branch.id == BlockId::E;
        std::size_t in = 0;
        for (const auto& layer : branch.layers) {
          if (layer.kind == K::conv3x3) {
            CHECK(layer.out_channels == (16u << depth));
            CHECK(layer.dilation == (dilated ? 2u : 1u));
          }
          if (layer.kind == K::conv1x1) {
            CHECK(layer.out_channels == (8u << depth));
            CHECK(layer.out_channels < in);  // squeeze
          }
          if (layer.is_conv()) in = layer.out_channels;
          if (layer.is_pool() && &layer != &branch.layers.back()) {
            CHECK(layer.pool.window == 3);
            CHECK(layer.pool.stride == 1);
            CHECK(layer.pool.padding == Padding::same);
          }
        }
        CHECK(branch.layers.back().pool.window == 2);
        CHECK(branch.layers.back().pool.stride == 2);
      }
      CHECK(stm_output_channels(spec, depth) == (32u << depth));
    }
  }
}

TEST_SUITE("build_imda") {
  TEST_CASE("default network: probabilities sum to one, spatial trace 128 to 8") {
    auto net = build_imda<float>(NetworkSpec{});
    net.initialize(1);
    auto out = net.forward(random_batch({1, 1, 128, 128}, 2), Mode::train);
    REQUIRE(out.probs.shape() == Shape{1, 2, 1, 1});
    CHECK(std::abs(out.probs.data()[0] + out.probs.data()[1] - 1.0) < 1e-6);

    CHECK(net.stem()->layers.back().out_shape.h == 64);
    const std::vector<std::size_t> trace{32, 16, 8};
    REQUIRE(net.stms().size() == 3);
    for (std::size_t s = 0; s < 3; ++s) {
      for (const auto& branch : net.stms()[s].branches) {
        CHECK(branch.layers.back().out_shape.h == trace[s]);
        CHECK(branch.layers.back().out_shape.w == trace[s]);
      }
    }
  }

  TEST_CASE("each STM merges four 8-channel-per-width branches into 4x the squeeze width") {
    auto net = build_imda<float>(NetworkSpec{});
    auto rows = net.describe();
    std::vector<std::size_t> merged;
    for (const auto& row : rows)
      if (row.kind == "concat") merged.push_back(row.out_shape.c);
    CHECK(merged == std::vector<std::size_t>{32, 64, 128});
    for (std::size_t s = 0; s < 3; ++s)
      for (const auto& branch : net.stms()[s].branches) CHECK(merged[s] > branch.layers.back().out_shape.c);
  }

  TEST_CASE("indivisible extents name the required divisibility") {
    NetworkSpec spec;
    spec.input_h = 100;
    try {
      build_imda<float>(spec);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("divisible by 16") != std::string::npos);
    }
  }

  TEST_CASE("misaligned branches are rejected while building") {
    NetworkSpec spec = small_spec();
    spec.stem = false;
    spec.stm_count = 1;
    auto stm = make_stm(spec, 0);
    for (auto& branch : stm.branches) {
      if (branch.id != BlockId::D) continue;
      branch.layers[3].pool = PoolSpec{PoolKind::avg, 2, 2, Padding::valid};  // the printed double pooling
    }
    CHECK_THROWS_AS(build_network<float>(spec, std::nullopt, {stm}), ConfigError);
  }

  TEST_CASE("input shape mismatch at forward") {
    auto net = build_imda<float>(small_spec());
    net.initialize(3);
    CHECK_THROWS_AS(net.forward(Tensor<float>({1, 1, 16, 32}), Mode::train), DimensionError);
    CHECK_THROWS_AS(net.forward(Tensor<float>({1, 2, 32, 32}), Mode::train), DimensionError);
  }
}

TEST_SUITE("forward") {
  TEST_CASE("all-zero input gives probabilities [0.5, 0.5]") {
    auto net = build_imda<float>(small_spec());
    net.initialize(4);
    auto out = net.forward(Tensor<float>({2, 1, 32, 32}), Mode::train);
    for (double p : out.probs.data()) CHECK(p == 0.5);
  }

  TEST_CASE("infer mode with stats from the same batch matches train mode") {
    auto net = build_imda<double>(small_spec());
    net.initialize(5);
    Rng rng(6);
    auto x = imda::testing::random_tensor({3, 1, 32, 32}, rng, 0, 1);
    auto train = net.forward(x, Mode::train);  // first update copies batch statistics
    auto infer = net.forward(x, Mode::infer);
    for (std::size_t i = 0; i < train.probs.size(); ++i)
      CHECK(train.probs.data()[i] == doctest::Approx(infer.probs.data()[i]).epsilon(1e-6));
  }

  TEST_CASE("infer before any training step is refused") {
    auto net = build_imda<float>(small_spec());
    net.initialize(7);
    CHECK_THROWS_AS(net.forward(Tensor<float>({1, 1, 32, 32}), Mode::infer), StatsUninitialized);
  }

  TEST_CASE("duplicated samples give identical outputs in infer mode") {
    auto net = build_imda<float>(small_spec());
    net.initialize(8);
    net.forward(random_batch({4, 1, 32, 32}, 9), Mode::train);
    auto one = random_batch({1, 1, 32, 32}, 10);
    auto other = random_batch({1, 1, 32, 32}, 11);
    Tensor<float> batch({3, 1, 32, 32});
    std::copy(one.data().begin(), one.data().end(), batch.data().begin());
    std::copy(other.data().begin(), other.data().end(), batch.data().begin() + 1024);
    std::copy(one.data().begin(), one.data().end(), batch.data().begin() + 2048);
    auto out = net.forward(batch, Mode::infer);
    CHECK(out.logits(0, 0, 0, 0) == out.logits(2, 0, 0, 0));
    CHECK(out.logits(0, 1, 0, 0) == out.logits(2, 1, 0, 0));
    auto alone = net.forward(one, Mode::infer);
    CHECK(alone.logits(0, 0, 0, 0) == out.logits(0, 0, 0, 0));
    CHECK(out.features.shape() == Shape{3, 4 * 2 * 4, 1, 1});
  }

  TEST_CASE("deterministic") {
    auto a = build_imda<float>(small_spec());
    auto b = build_imda<float>(small_spec());
    a.initialize(12);
    b.initialize(12);
    auto x = random_batch({2, 1, 32, 32}, 13);
    CHECK(a.forward(x, Mode::train).logits == b.forward(x, Mode::train).logits);
  }

  TEST_CASE("removing dilation changes outputs but not shapes") {
    NetworkSpec dilated = small_spec();
    NetworkSpec flat = small_spec();
    flat.dilation_de = 1;
    auto a = build_imda<float>(dilated);
    auto b = build_imda<float>(flat);
    a.initialize(14);
    b.initialize(14);
    auto ra = a.describe();
    auto rb = b.describe();
    REQUIRE(ra.size() == rb.size());
    for (std::size_t i = 0; i < ra.size(); ++i) {
      CHECK(ra[i].out_shape == rb[i].out_shape);
      CHECK(ra[i].params == rb[i].params);
    }
    auto x = random_batch({2, 1, 32, 32}, 15);
    CHECK_FALSE(a.forward(x, Mode::train).logits == b.forward(x, Mode::train).logits);
  }
}

TEST_SUITE("describe") {
  TEST_CASE("default net row count follows the block stacks") {
    auto rows = build_imda<float>(NetworkSpec{}).describe();
    // A (7) + 3 x (B 7 + C 7 + D 11 + E 11 + concat) + GAP, dense, softmax
    CHECK(rows.size() == 7 + 3 * (7 + 7 + 11 + 11 + 1) + 3);
  }

  TEST_CASE("empty stem and no STMs leaves the head rows") {
    NetworkSpec spec;
    spec.stem = false;
    spec.stm_count = 0;
    auto rows = build_imda<float>(spec).describe();
    REQUIRE(rows.size() == 3);
    for (const auto& row : rows) CHECK(row.block == "head");
  }

  TEST_CASE("per-layer params sum to the total, which matches a hand tally") {
    for (const NetworkSpec& spec : {NetworkSpec{}, small_spec()}) {
      auto net = build_imda<float>(spec);
      auto rows = net.describe();
      const std::size_t sum = std::accumulate(rows.begin(), rows.end(), std::size_t{0},
                                              [](std::size_t acc, const LayerRow& r) { return acc + r.params; });
      CHECK(sum == net.param_count());
      CHECK(net.param_count() == expected_params(spec));
      std::size_t visited = 0;
      net.for_each_param([&visited](ParamRef<float> p) { visited += p.value.size(); });
      CHECK(visited == net.param_count());
    }
    auto table = format_layer_table(build_imda<float>(small_spec()).describe());
    CHECK(table.find("total") != std::string::npos);
  }
}

TEST_SUITE("network gradients") {
  TEST_CASE("one-STM network against finite differences") {
    auto r = imda::testing::check_network_gradients(31);
    MESSAGE("worst relative error " << r.worst);
    CHECK(r.worst < 1e-3);
  }
}

TEST_SUITE("model file") {
  TEST_CASE("round trip reproduces outputs bit for bit") {
    auto net = build_imda<float>(small_spec());
    net.initialize(16);
    auto x = random_batch({2, 1, 32, 32}, 17);
    net.forward(x, Mode::train);
    auto before = net.forward(x, Mode::infer);
    auto bytes = serialize_model(net);
    REQUIRE(bytes.size() > 4);
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "IMDA");
    auto loaded = deserialize_model(bytes);
    CHECK(loaded.spec() == net.spec());
    auto after = loaded.forward(x, Mode::infer);
    CHECK(before.logits == after.logits);
    CHECK(serialize_model(loaded) == bytes);
  }

  TEST_CASE("save and load through the filesystem") {
    auto net = build_imda<float>(small_spec());
    net.initialize(18);
    net.forward(random_batch({2, 1, 32, 32}, 19), Mode::train);
    const auto path = std::filesystem::temp_directory_path() / "imda_test_model.bin";
    save_model(path, net);
    auto loaded = load_model(path);
    CHECK(serialize_model(loaded) == serialize_model(net));
    std::filesystem::remove(path);
  }

  TEST_CASE("corruption is detected") {
    auto net = build_imda<float>(small_spec());
    net.initialize(20);
    auto bytes = serialize_model(net);
    auto flipped = bytes;
    flipped[flipped.size() / 2] ^= 0x01;
    CHECK_THROWS_AS(deserialize_model(flipped), ModelFormatError);
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(deserialize_model(bad_magic), ModelFormatError);
    auto bad_version = bytes;
    bad_version[4] = 9;
    CHECK_THROWS_AS(deserialize_model(bad_version), ModelFormatError);
    auto truncated = bytes;
    truncated.resize(truncated.size() - 7);
    CHECK_THROWS_AS(deserialize_model(truncated), ModelFormatError);
  }
}
