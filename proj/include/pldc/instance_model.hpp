// Copyright 2026 The PLDC Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Core value types shared by every stage of the pseudo-label pipeline:
// per-instance class logits, per-pixel mask logits, binary masks and ground
// truth, plus the elementary math (sigmoid, softmax, IoU) and the COCO-style
// run-length codec used for persistence.
//
// Rasters are stored row-major. The RLE codec walks them column-major.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace pldc {

class ClassLogits {
 public:
  ClassLogits() = default;
  explicit ClassLogits(std::vector<double> values);

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const { return values_; }

  bool operator==(const ClassLogits&) const = default;

 private:
  std::vector<double> values_;
};

class MaskLogitGrid {
 public:
  MaskLogitGrid() = default;
  MaskLogitGrid(std::size_t height, std::size_t width, std::vector<double> values);
  /// Grid filled with a constant logit.
  static MaskLogitGrid filled(std::size_t height, std::size_t width, double value);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t pixel_count() const { return values_.size(); }
  double at(std::size_t row, std::size_t col) const { return values_[row * width_ + col]; }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const { return values_; }

  /// Element-wise negation; used by the symmetry checks on uncertainty.
  MaskLogitGrid negated() const;

  bool operator==(const MaskLogitGrid&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> values_;
};

struct InstancePrediction {
  ClassLogits class_logits;
  MaskLogitGrid mask_logits;

  bool operator==(const InstancePrediction&) const = default;
};

class BinaryMask {
 public:
  BinaryMask() = default;
  /// Empty (all background) mask.
  BinaryMask(std::size_t height, std::size_t width);
  BinaryMask(std::size_t height, std::size_t width, std::vector<std::uint8_t> bits);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t pixel_count() const { return bits_.size(); }

  bool at(std::size_t row, std::size_t col) const { return bits_[row * width_ + col] != 0; }
  bool operator[](std::size_t i) const { return bits_[i] != 0; }
  void set(std::size_t row, std::size_t col, bool value = true) {
    bits_[row * width_ + col] = value ? 1 : 0;
  }
  void set_index(std::size_t i, bool value) { bits_[i] = value ? 1 : 0; }

  std::size_t area() const;
  bool empty() const { return area() == 0; }
  std::span<const std::uint8_t> bits() const { return bits_; }

  bool operator==(const BinaryMask&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<std::uint8_t> bits_;
};

struct GroundTruthInstance {
  int class_id = 0;
  BinaryMask mask;

  bool operator==(const GroundTruthInstance&) const = default;
};

/// Throws ValidationError unless class_id is in [0, num_classes) and the mask
/// has at least one foreground pixel.
void validate_ground_truth(const GroundTruthInstance& gt, std::size_t num_classes);

/// Throws ValidationError unless all predictions share one (H, W).
void validate_same_shape(std::span<const InstancePrediction> predictions);

double sigmoid(double x);

/// Max-shifted softmax.
std::vector<double> softmax(std::span<const double> logits);
inline std::vector<double> softmax(const ClassLogits& logits) { return softmax(logits.values()); }

/// Index of the largest entry; ties resolve to the lowest index.
std::size_t argmax(std::span<const double> values);

/// |A ∩ B| / |A ∪ B|; 0 when both masks are empty.
double mask_iou(const BinaryMask& a, const BinaryMask& b);

/// Foreground iff sigmoid(q) > threshold (strict).
BinaryMask binarize(const MaskLogitGrid& mask_logits, double threshold = 0.5);

struct RunLengthCounts {
  std::vector<std::uint32_t> counts;

  bool operator==(const RunLengthCounts&) const = default;
};

/// Alternating background/foreground runs over a column-major walk. The first
/// run is background and may be zero.
RunLengthCounts rle_encode(const BinaryMask& mask);
BinaryMask rle_decode(const RunLengthCounts& rle, std::size_t height, std::size_t width);

}  // namespace pldc
