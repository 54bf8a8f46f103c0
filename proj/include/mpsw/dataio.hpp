#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mpsw/errors.hpp"

namespace mpsw {

constexpr int kNoLabel = -1;

// A binarized image: one bit per pixel, row-major raster order.
struct BinaryImage {
  std::vector<std::uint8_t> bits;
  int height = 0;
  int width = 0;
  int label = kNoLabel;

  int n_pixels() const { return height * width; }
  int count_ones() const;
};

struct GrayImage {
  std::vector<std::uint8_t> pixels;  // row-major, 0..255
  int height = 0;
  int width = 0;
  int label = kNoLabel;
};

enum class SplitTag { train, validation, test, sampled };

std::string to_string(SplitTag tag);

struct Dataset {
  std::vector<BinaryImage> images;
  SplitTag split_tag = SplitTag::train;

  size_t size() const { return images.size(); }
  bool empty() const { return images.empty(); }
  Dataset filter_label(int label) const;
};

// IDX (MNIST distribution format) ingestion. Gzip-compressed input is
// inflated transparently. Labels are attached when a label stream is given.
std::vector<GrayImage> parse_idx_images(const std::vector<std::uint8_t>& bytes);
std::vector<int> parse_idx_labels(const std::vector<std::uint8_t>& bytes);
std::vector<GrayImage> load_idx_images(const std::string& image_path,
                                       const std::string& label_path = "");

std::vector<std::uint8_t> read_file_maybe_gzip(const std::string& path);

// bit = 1 where intensity >= threshold.
BinaryImage binarize(const GrayImage& image, int threshold);
Dataset binarize_all(const std::vector<GrayImage>& images, int threshold,
                     SplitTag tag = SplitTag::train);

// Seeded shuffle then partition; first part gets ceil(fraction * N) images.
std::pair<Dataset, Dataset> split(const Dataset& dataset, double fraction,
                                  std::uint64_t seed);

// Basis-state encoding is the identity on bits in row-major order.
std::vector<std::uint8_t> encode(const BinaryImage& image);

// Packed 1-bit-per-pixel dataset container.
void save_dataset(const Dataset& dataset, std::ostream& out);
void save_dataset_file(const Dataset& dataset, const std::string& path);
Dataset load_dataset(std::istream& in);
Dataset load_dataset_file(const std::string& path);

// One printable char per pixel ('#' for 1, '.' for 0), one image per block.
std::string render_text(const BinaryImage& image);

}  // namespace mpsw
