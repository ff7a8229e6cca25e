#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "imda/data/image.hpp"

namespace imda::data {

enum class InputMode { images, binaries };

const char* to_string(InputMode mode);
InputMode parse_input_mode(std::string_view text);

struct LoadOptions {
  InputMode mode = InputMode::images;
  std::size_t resize_h = 0;  // 0 keeps the stored extents
  std::size_t resize_w = 0;
  std::optional<std::size_t> width;  // binaries only; default is the size table
};

struct ManifestRow {
  std::string path;  // relative to the dataset root
  Label label = Label::benign;
  std::size_t width = 0;
  std::size_t height = 0;
  InputMode mode = InputMode::images;
};

struct Dataset {
  std::filesystem::path root;
  std::vector<ImageSample> samples;
  std::vector<ManifestRow> manifest;
  std::size_t benign = 0;
  std::size_t malware = 0;
  std::size_t skipped = 0;
  std::vector<std::string> warnings;
};

/// Loads root/benign and root/malware in lexicographic path order. Files that
/// cannot be read are skipped with a warning. Missing or empty class
/// directories raise DataError.
Dataset load_dataset(const std::filesystem::path& root, const LoadOptions& options = {});

/// Lists regular files of one class directory in lexicographic order.
std::vector<std::filesystem::path> list_class_files(const std::filesystem::path& dir);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

/// CSV with header path,class,width,height,mode.
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows);

}  // namespace imda::data
