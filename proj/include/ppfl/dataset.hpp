#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ppfl/numkit.hpp"

namespace ppfl::dataset {

// A labelled split, one example per row, labels one-hot.
struct Dataset {
  numkit::Matrix inputs;
  numkit::Matrix labels;

  int size() const { return inputs.rows; }
  int num_classes() const { return labels.cols; }
  std::vector<int> class_ids() const;
};

struct BlobConfig {
  int classes = 4;
  int dim = 8;
  int per_class = 8;
  double sigma = 0.3;
  double mean_scale = 1.25;  // class c is centered on mean_scale * e_c
  std::uint64_t seed = 1;
};

// Gaussian blobs with class means on the scaled simplex vertices (the unit
// basis vectors), isotropic noise, features clamped to [0,1].  Rows are
// shuffled so contiguous shards come out class-mixed instead of class-sorted.
// Needs dim >= classes, otherwise two classes would share a mean.
Dataset synth_blobs(const BlobConfig& cfg);

// IDX image/label pair (big-endian magic 0x00000803 / 0x00000801).  Pixels
// are scaled to [0,1].  With downsample_8x8 the images are center-cropped to
// the largest multiple of 8 and average-pooled down to 8x8.
Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 bool downsample_8x8 = true);

// Contiguous shards of near-equal size; the first size%parts shards take one
// extra row.
std::vector<Dataset> split_even(const Dataset& data, int parts);

std::vector<numkit::Batch> to_batches(const Dataset& data, int batch_size);

}  // namespace ppfl::dataset
