#include "imda/train/split.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "imda/rng.hpp"

namespace imda::train {

using data::DataError;
using data::Label;

const char* to_string(Side side) { return side == Side::test ? "test" : "train"; }

std::vector<std::size_t> SplitManifest::indices(Side side) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < sides.size(); ++i)
    if (sides[i] == side) out.push_back(i);
  return out;
}

namespace {

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::size_t label_index(Label label) { return static_cast<std::size_t>(label); }

}  // namespace

SplitManifest stratified_split(std::span<const std::string> paths, std::span<const Label> labels,
                               double test_fraction, std::uint64_t seed) {
  if (paths.size() != labels.size()) throw DataError("split: paths and labels differ in length");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw DataError("split: test fraction must lie in (0, 1)");
  SplitManifest split;
  split.seed = seed;
  split.test_fraction = test_fraction;
  split.sides.assign(paths.size(), Side::train);
  for (Label label : {Label::benign, Label::malware}) {
    std::vector<std::pair<std::uint64_t, std::size_t>> ranked;
    for (std::size_t i = 0; i < paths.size(); ++i) {
      if (labels[i] == label) ranked.emplace_back(derive_seed(seed, {fnv1a(paths[i])}), i);
    }
    if (ranked.empty()) throw DataError(std::string("split: class ") + data::to_string(label) + " is empty");
    // Ties on the key (duplicate paths) fall back to the path text.
    std::sort(ranked.begin(), ranked.end(), [&paths](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first < b.first;
      return paths[a.second] < paths[b.second];
    });
    const auto n = ranked.size();
    const auto test = static_cast<std::size_t>(std::lround(static_cast<double>(n) * test_fraction));
    for (std::size_t k = 0; k < test; ++k) split.sides[ranked[k].second] = Side::test;
    split.test_count[label_index(label)] = test;
    split.train_count[label_index(label)] = n - test;
  }
  return split;
}

SplitManifest stratified_split(const data::Dataset& dataset, double test_fraction, std::uint64_t seed) {
  std::vector<std::string> paths;
  std::vector<Label> labels;
  for (const auto& s : dataset.samples) {
    paths.push_back(s.source_path);
    labels.push_back(s.label);
  }
  return stratified_split(paths, labels, test_fraction, seed);
}

void write_split(const std::filesystem::path& path, const data::Dataset& dataset, const SplitManifest& split) {
  if (split.sides.size() != dataset.samples.size()) throw DataError("split does not match dataset size");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write split manifest " + path.string());
  out << "path,class,split\n";
  for (std::size_t i = 0; i < split.sides.size(); ++i) {
    out << dataset.samples[i].source_path << ',' << data::to_string(dataset.samples[i].label) << ','
        << to_string(split.sides[i]) << '\n';
  }
}

SplitManifest read_split(const std::filesystem::path& path, const data::Dataset& dataset) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read split manifest " + path.string());
  std::unordered_map<std::string, Side> by_path;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue;
    const auto last = line.rfind(',');
    const auto mid = last == std::string::npos ? std::string::npos : line.rfind(',', last - 1);
    if (mid == std::string::npos) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected path,class,split");
    }
    const std::string side = line.substr(last + 1);
    if (side != "train" && side != "test") {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": unknown split '" + side + "'");
    }
    by_path[line.substr(0, mid)] = side == "test" ? Side::test : Side::train;
  }
  SplitManifest split;
  split.sides.resize(dataset.samples.size());
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    const auto it = by_path.find(dataset.samples[i].source_path);
    if (it == by_path.end()) throw DataError("sample " + dataset.samples[i].source_path + " missing from " + path.string());
    split.sides[i] = it->second;
    auto& counts = it->second == Side::test ? split.test_count : split.train_count;
    ++counts[label_index(dataset.samples[i].label)];
  }
  return split;
}

}  // namespace imda::train
