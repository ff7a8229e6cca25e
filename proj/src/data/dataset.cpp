#include "imda/data/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

#include "imda/data/png_io.hpp"

namespace imda::data {

namespace fs = std::filesystem;

const char* to_string(InputMode mode) { return mode == InputMode::binaries ? "binaries" : "images"; }

InputMode parse_input_mode(std::string_view text) {
  if (text == "images") return InputMode::images;
  if (text == "binaries") return InputMode::binaries;
  throw DataError("unknown input mode '" + std::string(text) + "' (expected images or binaries)");
}

std::vector<fs::path> list_class_files(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw DataError("missing class directory " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw DataError("read error on " + path.string());
  return bytes;
}

Dataset load_dataset(const fs::path& root, const LoadOptions& options) {
  if (!fs::is_directory(root)) throw DataError("dataset root " + root.string() + " is not a directory");
  Dataset data;
  data.root = root;
  for (Label label : {Label::benign, Label::malware}) {
    const auto files = list_class_files(root / to_string(label));
    std::size_t loaded = 0;
    for (const auto& file : files) {
      const std::string relative = fs::relative(file, root).generic_string();
      try {
        ImageSample image;
        if (options.mode == InputMode::images) {
          image = read_png(file);
        } else {
          image = bytes_to_image({read_file_bytes(file), label, relative}, options.width);
        }
        image.label = label;
        image.source_path = relative;
        data.manifest.push_back({relative, label, image.width, image.height, options.mode});
        if (options.resize_h != 0 && options.resize_w != 0) {
          image = resize(image, options.resize_h, options.resize_w);
        }
        data.samples.push_back(std::move(image));
        ++loaded;
      } catch (const DataError& e) {
        ++data.skipped;
        data.warnings.push_back(std::string("skipped ") + relative + ": " + e.what());
      }
    }
    if (loaded == 0) {
      throw DataError("class directory " + (root / to_string(label)).string() + " has no readable samples");
    }
    (label == Label::benign ? data.benign : data.malware) = loaded;
  }
  return data;
}

void write_manifest(const fs::path& path, const std::vector<ManifestRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write manifest " + path.string());
  out << "path,class,width,height,mode\n";
  for (const auto& row : rows) {
    out << row.path << ',' << to_string(row.label) << ',' << row.width << ',' << row.height << ','
        << to_string(row.mode) << '\n';
  }
}

}  // namespace imda::data
