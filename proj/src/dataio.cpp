#include "mpsw/dataio.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace mpsw {

namespace {

std::uint32_t read_be32(const std::vector<std::uint8_t>& b, size_t off) {
  if (off + 4 > b.size())
    throw ParseError("idx: truncated header at byte offset " +
                     std::to_string(off));
  return (std::uint32_t(b[off]) << 24) | (std::uint32_t(b[off + 1]) << 16) |
         (std::uint32_t(b[off + 2]) << 8) | std::uint32_t(b[off + 3]);
}

std::vector<std::uint8_t> gunzip(const std::vector<std::uint8_t>& in) {
  z_stream zs{};
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK)
    throw ParseError("gzip: inflateInit failed");
  std::vector<std::uint8_t> out;
  std::vector<std::uint8_t> buf(1 << 16);
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = buf.data();
    zs.avail_out = static_cast<uInt>(buf.size());
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw ParseError("gzip: corrupt stream (zlib rc " + std::to_string(rc) +
                       ")");
    }
    out.insert(out.end(), buf.data(), buf.data() + (buf.size() - zs.avail_out));
  }
  inflateEnd(&zs);
  return out;
}

constexpr char kDatasetMagic[4] = {'M', 'P', 'S', 'D'};

void write_u32le(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32le(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw ParseError("dataset: truncated stream");
  return v;
}

}  // namespace

int BinaryImage::count_ones() const {
  return static_cast<int>(std::count(bits.begin(), bits.end(), 1));
}

std::string to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::train: return "train";
    case SplitTag::validation: return "validation";
    case SplitTag::test: return "test";
    case SplitTag::sampled: return "sampled";
  }
  return "?";
}

Dataset Dataset::filter_label(int label) const {
  Dataset out;
  out.split_tag = split_tag;
  for (const auto& im : images)
    if (im.label == label) out.images.push_back(im);
  return out;
}

std::vector<GrayImage> parse_idx_images(const std::vector<std::uint8_t>& bytes) {
  if (read_be32(bytes, 0) != 0x00000803u)
    throw ParseError("idx: bad image magic at byte offset 0");
  std::uint64_t n = read_be32(bytes, 4);
  std::uint64_t h = read_be32(bytes, 8);
  std::uint64_t w = read_be32(bytes, 12);
  if (h == 0 || w == 0 || h > 4096 || w > 4096)
    throw ParseError("idx: implausible image dimensions at byte offset 8");
  std::uint64_t need = 16 + n * h * w;
  if (need > bytes.size())
    throw ParseError("idx: truncated payload, need " + std::to_string(need) +
                     " bytes, have " + std::to_string(bytes.size()) +
                     " (payload starts at byte offset 16)");
  std::vector<GrayImage> out(n);
  size_t off = 16;
  for (auto& im : out) {
    im.height = static_cast<int>(h);
    im.width = static_cast<int>(w);
    im.pixels.assign(bytes.begin() + off, bytes.begin() + off + h * w);
    off += h * w;
  }
  return out;
}

std::vector<int> parse_idx_labels(const std::vector<std::uint8_t>& bytes) {
  if (read_be32(bytes, 0) != 0x00000801u)
    throw ParseError("idx: bad label magic at byte offset 0");
  std::uint64_t n = read_be32(bytes, 4);
  if (8 + n > bytes.size())
    throw ParseError("idx: truncated label payload at byte offset 8");
  std::vector<int> out(n);
  for (std::uint64_t i = 0; i < n; ++i) out[i] = bytes[8 + i];
  return out;
}

std::vector<std::uint8_t> read_file_maybe_gzip(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b)
    return gunzip(bytes);
  return bytes;
}

std::vector<GrayImage> load_idx_images(const std::string& image_path,
                                       const std::string& label_path) {
  auto images = parse_idx_images(read_file_maybe_gzip(image_path));
  if (!label_path.empty()) {
    auto labels = parse_idx_labels(read_file_maybe_gzip(label_path));
    if (labels.size() != images.size())
      throw ParseError("idx: image/label count mismatch: " +
                       std::to_string(images.size()) + " vs " +
                       std::to_string(labels.size()));
    for (size_t i = 0; i < images.size(); ++i) images[i].label = labels[i];
  }
  return images;
}

BinaryImage binarize(const GrayImage& image, int threshold) {
  if (threshold < 0 || threshold > 255)
    throw InputError("binarize: threshold must be in 0..255");
  BinaryImage out;
  out.height = image.height;
  out.width = image.width;
  out.label = image.label;
  out.bits.resize(image.pixels.size());
  for (size_t i = 0; i < image.pixels.size(); ++i)
    out.bits[i] = image.pixels[i] >= threshold ? 1 : 0;
  return out;
}

Dataset binarize_all(const std::vector<GrayImage>& images, int threshold,
                     SplitTag tag) {
  Dataset out;
  out.split_tag = tag;
  out.images.reserve(images.size());
  for (const auto& im : images) out.images.push_back(binarize(im, threshold));
  return out;
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, double fraction,
                                  std::uint64_t seed) {
  if (dataset.empty()) throw InputError("split: empty dataset");
  if (!(fraction > 0.0 && fraction < 1.0))
    throw InputError("split: fraction must be in (0,1)");
  std::vector<size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  size_t n_first = static_cast<size_t>(std::llround(fraction * dataset.size()));
  n_first = std::clamp<size_t>(n_first, 1, dataset.size() - 1);
  Dataset a, b;
  a.split_tag = dataset.split_tag;
  b.split_tag = dataset.split_tag;
  for (size_t i = 0; i < order.size(); ++i)
    (i < n_first ? a : b).images.push_back(dataset.images[order[i]]);
  return {std::move(a), std::move(b)};
}

std::vector<std::uint8_t> encode(const BinaryImage& image) {
  return image.bits;
}

void save_dataset(const Dataset& dataset, std::ostream& out) {
  out.write(kDatasetMagic, 4);
  write_u32le(out, 1);  // version
  write_u32le(out, static_cast<std::uint32_t>(dataset.size()));
  int h = dataset.empty() ? 0 : dataset.images[0].height;
  int w = dataset.empty() ? 0 : dataset.images[0].width;
  write_u32le(out, static_cast<std::uint32_t>(h));
  write_u32le(out, static_cast<std::uint32_t>(w));
  write_u32le(out, static_cast<std::uint32_t>(dataset.split_tag));
  size_t n_bytes = (static_cast<size_t>(h) * w + 7) / 8;
  for (const auto& im : dataset.images) {
    if (im.height != h || im.width != w)
      throw InputError("dataset: mixed image shapes");
    std::vector<std::uint8_t> packed(n_bytes, 0);
    for (size_t i = 0; i < im.bits.size(); ++i)
      if (im.bits[i]) packed[i / 8] |= std::uint8_t(1u << (i % 8));
    out.write(reinterpret_cast<const char*>(packed.data()), packed.size());
  }
  for (const auto& im : dataset.images) {
    std::int16_t lab = static_cast<std::int16_t>(im.label);
    out.write(reinterpret_cast<const char*>(&lab), sizeof(lab));
  }
  if (!out) throw ParseError("dataset: write failure");
}

Dataset load_dataset(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kDatasetMagic, 4) != 0)
    throw ParseError("dataset: bad magic");
  if (read_u32le(in) != 1) throw ParseError("dataset: unsupported version");
  std::uint32_t n = read_u32le(in);
  std::uint32_t h = read_u32le(in);
  std::uint32_t w = read_u32le(in);
  std::uint32_t tag = read_u32le(in);
  if (tag > 3) throw ParseError("dataset: bad split tag");
  Dataset out;
  out.split_tag = static_cast<SplitTag>(tag);
  size_t n_px = static_cast<size_t>(h) * w;
  size_t n_bytes = (n_px + 7) / 8;
  out.images.resize(n);
  std::vector<std::uint8_t> packed(n_bytes);
  for (auto& im : out.images) {
    in.read(reinterpret_cast<char*>(packed.data()), packed.size());
    if (!in) throw ParseError("dataset: truncated pixel payload");
    im.height = static_cast<int>(h);
    im.width = static_cast<int>(w);
    im.bits.resize(n_px);
    for (size_t i = 0; i < n_px; ++i)
      im.bits[i] = (packed[i / 8] >> (i % 8)) & 1u;
  }
  for (auto& im : out.images) {
    std::int16_t lab;
    in.read(reinterpret_cast<char*>(&lab), sizeof(lab));
    if (!in) throw ParseError("dataset: truncated label payload");
    im.label = lab;
  }
  return out;
}

void save_dataset_file(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open " + path + " for writing");
  save_dataset(dataset, out);
}

Dataset load_dataset_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  return load_dataset(in);
}

std::string render_text(const BinaryImage& image) {
  std::string out;
  out.reserve(static_cast<size_t>(image.height) * (image.width + 1));
  for (int r = 0; r < image.height; ++r) {
    for (int c = 0; c < image.width; ++c)
      out += image.bits[static_cast<size_t>(r) * image.width + c] ? '#' : '.';
    out += '\n';
  }
  return out;
}

}  // namespace mpsw
