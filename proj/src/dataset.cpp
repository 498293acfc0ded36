#include "ppfl/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <string>

#include "ppfl/rng.hpp"

namespace ppfl::dataset {

using numkit::Batch;
using numkit::Matrix;

std::vector<int> Dataset::class_ids() const {
  std::vector<int> out(static_cast<std::size_t>(labels.rows));
  for (int r = 0; r < labels.rows; ++r) {
    int best = 0;
    for (int c = 1; c < labels.cols; ++c) {
      if (labels.at(r, c) > labels.at(r, best)) best = c;
    }
    out[static_cast<std::size_t>(r)] = best;
  }
  return out;
}

Dataset synth_blobs(const BlobConfig& cfg) {
  if (cfg.classes < 1 || cfg.dim < 1 || cfg.per_class < 1) {
    throw ParamError("synth_blobs: classes, dim and per_class must be >= 1");
  }
  if (cfg.dim < cfg.classes) {
    throw ParamError("synth_blobs: dim must be >= classes so every class mean is distinct");
  }
  if (cfg.sigma < 0.0) throw ParamError("synth_blobs: sigma must be >= 0");

  const int n = cfg.classes * cfg.per_class;
  Dataset out;
  out.inputs = Matrix(n, cfg.dim);
  out.labels = Matrix(n, cfg.classes);

  RngStream noise = RngStream::derive(cfg.seed, 0xb10b5ull, 1);
  int row = 0;
  for (int c = 0; c < cfg.classes; ++c) {
    for (int k = 0; k < cfg.per_class; ++k, ++row) {
      for (int j = 0; j < cfg.dim; ++j) {
        const double mean = j == c ? cfg.mean_scale : 0.0;
        out.inputs.at(row, j) = std::clamp(mean + cfg.sigma * noise.normal(), 0.0, 1.0);
      }
      out.labels.at(row, c) = 1.0;
    }
  }

  // Fisher-Yates over rows; generation order is class-sorted, which would
  // otherwise make contiguous client shards single-class.
  RngStream shuffle = RngStream::derive(cfg.seed, 0xb10b5ull, 2);
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(shuffle.below(static_cast<std::uint64_t>(i) + 1));
    for (int col = 0; col < cfg.dim; ++col) std::swap(out.inputs.at(i, col), out.inputs.at(j, col));
    for (int col = 0; col < cfg.classes; ++col) std::swap(out.labels.at(i, col), out.labels.at(j, col));
  }
  return out;
}

namespace {

// Big-endian reader that carries its byte offset into every error message.
class IdxReader {
 public:
  explicit IdxReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw FormatError("idx: cannot open " + path);
  }

  std::uint32_t read_u32() {
    unsigned char b[4];
    read_bytes(b, 4);
    return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
           (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
  }

  void read_bytes(unsigned char* dst, std::size_t n) {
    in_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw FormatError("idx: " + path_ + " truncated at byte offset " +
                        std::to_string(offset_ + static_cast<std::size_t>(std::max<std::streamsize>(in_.gcount(), 0))));
    }
    offset_ += n;
  }

  std::size_t offset() const { return offset_; }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ifstream in_;
  std::size_t offset_ = 0;
};

constexpr std::uint32_t kImagesMagic = 0x00000803u;
constexpr std::uint32_t kLabelsMagic = 0x00000801u;

std::string hex_magic(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08x", v);
  return buf;
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 bool downsample_8x8) {
  IdxReader images(images_path);
  const std::uint32_t img_magic = images.read_u32();
  if (img_magic != kImagesMagic) {
    throw FormatError("idx: " + images_path + " has magic " + hex_magic(img_magic) +
                      ", expected " + hex_magic(kImagesMagic) + " at byte offset 0");
  }
  const std::uint32_t count = images.read_u32();
  const std::uint32_t rows = images.read_u32();
  const std::uint32_t cols = images.read_u32();
  if (count == 0 || rows == 0 || cols == 0) {
    throw FormatError("idx: " + images_path + " declares an empty image block");
  }

  IdxReader labels(labels_path);
  const std::uint32_t lab_magic = labels.read_u32();
  if (lab_magic != kLabelsMagic) {
    throw FormatError("idx: " + labels_path + " has magic " + hex_magic(lab_magic) +
                      ", expected " + hex_magic(kLabelsMagic) + " at byte offset 0");
  }
  const std::uint32_t lab_count = labels.read_u32();
  if (lab_count != count) {
    throw FormatError("idx: image count " + std::to_string(count) + " does not match label count " +
                      std::to_string(lab_count));
  }

  const int side = static_cast<int>(std::min(rows, cols));
  int target_rows = static_cast<int>(rows);
  int target_cols = static_cast<int>(cols);
  int pool = 1, off_r = 0, off_c = 0;
  if (downsample_8x8 && side >= 8) {
    pool = side / 8;
    target_rows = target_cols = 8;
    off_r = (static_cast<int>(rows) - 8 * pool) / 2;
    off_c = (static_cast<int>(cols) - 8 * pool) / 2;
  }

  std::vector<unsigned char> pixels(static_cast<std::size_t>(rows) * cols);
  std::vector<unsigned char> raw_labels(count);
  Dataset out;
  out.inputs = Matrix(static_cast<int>(count), target_rows * target_cols);

  int max_label = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    images.read_bytes(pixels.data(), pixels.size());
    for (int r = 0; r < target_rows; ++r) {
      for (int c = 0; c < target_cols; ++c) {
        double acc = 0.0;
        for (int dr = 0; dr < pool; ++dr) {
          for (int dc = 0; dc < pool; ++dc) {
            const std::size_t src = static_cast<std::size_t>(off_r + r * pool + dr) * cols +
                                    static_cast<std::size_t>(off_c + c * pool + dc);
            acc += pixels[src];
          }
        }
        out.inputs.at(static_cast<int>(i), r * target_cols + c) = acc / (255.0 * pool * pool);
      }
    }
  }
  labels.read_bytes(raw_labels.data(), raw_labels.size());
  for (unsigned char l : raw_labels) max_label = std::max(max_label, static_cast<int>(l));

  const int num_classes = max_label + 1;
  out.labels = Matrix(static_cast<int>(count), num_classes);
  for (std::uint32_t i = 0; i < count; ++i) {
    out.labels.at(static_cast<int>(i), raw_labels[i]) = 1.0;
  }
  return out;
}

std::vector<Dataset> split_even(const Dataset& data, int parts) {
  if (parts < 1) throw ParamError("split_even: parts must be >= 1");
  if (data.size() < parts) throw ParamError("split_even: fewer rows than parts");

  std::vector<Dataset> out;
  out.reserve(static_cast<std::size_t>(parts));
  const int base = data.size() / parts;
  const int extra = data.size() % parts;
  int row = 0;
  for (int p = 0; p < parts; ++p) {
    const int take = base + (p < extra ? 1 : 0);
    Dataset shard;
    shard.inputs = Matrix(take, data.inputs.cols);
    shard.labels = Matrix(take, data.labels.cols);
    for (int r = 0; r < take; ++r, ++row) {
      for (int c = 0; c < data.inputs.cols; ++c) shard.inputs.at(r, c) = data.inputs.at(row, c);
      for (int c = 0; c < data.labels.cols; ++c) shard.labels.at(r, c) = data.labels.at(row, c);
    }
    out.push_back(std::move(shard));
  }
  return out;
}

std::vector<Batch> to_batches(const Dataset& data, int batch_size) {
  if (batch_size < 1) throw ParamError("to_batches: batch size must be >= 1");
  std::vector<Batch> out;
  for (int start = 0; start < data.size(); start += batch_size) {
    const int take = std::min(batch_size, data.size() - start);
    Batch b;
    b.inputs = Matrix(take, data.inputs.cols);
    b.labels = Matrix(take, data.labels.cols);
    for (int r = 0; r < take; ++r) {
      for (int c = 0; c < data.inputs.cols; ++c) b.inputs.at(r, c) = data.inputs.at(start + r, c);
      for (int c = 0; c < data.labels.cols; ++c) b.labels.at(r, c) = data.labels.at(start + r, c);
    }
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace ppfl::dataset
