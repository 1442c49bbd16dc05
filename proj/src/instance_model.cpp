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

#include "pldc/instance_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "pldc/error.hpp"

namespace pldc {

namespace {

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace

ClassLogits::ClassLogits(std::vector<double> values) : values_(std::move(values)) {
  PLDC_CHECK(!values_.empty(), "class logits must have at least one entry");
  PLDC_CHECK(all_finite(values_), "class logits must be finite");
}

MaskLogitGrid::MaskLogitGrid(std::size_t height, std::size_t width, std::vector<double> values)
    : height_(height), width_(width), values_(std::move(values)) {
  PLDC_CHECK(height_ >= 1 && width_ >= 1, "mask grid must be at least 1x1");
  PLDC_CHECK(values_.size() == height_ * width_,
             "mask grid has " + std::to_string(values_.size()) + " values, expected " +
                 std::to_string(height_ * width_));
  PLDC_CHECK(all_finite(values_), "mask logits must be finite");
}

MaskLogitGrid MaskLogitGrid::filled(std::size_t height, std::size_t width, double value) {
  return MaskLogitGrid(height, width, std::vector<double>(height * width, value));
}

MaskLogitGrid MaskLogitGrid::negated() const {
  std::vector<double> out(values_.size());
  std::transform(values_.begin(), values_.end(), out.begin(), [](double v) { return -v; });
  return MaskLogitGrid(height_, width_, std::move(out));
}

BinaryMask::BinaryMask(std::size_t height, std::size_t width)
    : height_(height), width_(width), bits_(height * width, 0) {}

BinaryMask::BinaryMask(std::size_t height, std::size_t width, std::vector<std::uint8_t> bits)
    : height_(height), width_(width), bits_(std::move(bits)) {
  PLDC_CHECK(bits_.size() == height_ * width_, "mask bit count does not match height*width");
  for (auto& b : bits_) b = b ? 1 : 0;
}

std::size_t BinaryMask::area() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

void validate_ground_truth(const GroundTruthInstance& gt, std::size_t num_classes) {
  PLDC_CHECK(gt.class_id >= 0 && static_cast<std::size_t>(gt.class_id) < num_classes,
             "ground-truth class id " + std::to_string(gt.class_id) + " outside [0, " +
                 std::to_string(num_classes) + ")");
  PLDC_CHECK(!gt.mask.empty(), "ground-truth mask has no foreground pixel");
}

void validate_same_shape(std::span<const InstancePrediction> predictions) {
  if (predictions.empty()) return;
  const auto h = predictions.front().mask_logits.height();
  const auto w = predictions.front().mask_logits.width();
  for (const auto& p : predictions) {
    PLDC_CHECK(p.mask_logits.height() == h && p.mask_logits.width() == w,
               "instances in one image must share (H, W)");
  }
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<double> softmax(std::span<const double> logits) {
  PLDC_CHECK(!logits.empty(), "softmax of an empty vector");
  const double shift = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - shift);
    total += out[i];
  }
  for (auto& v : out) v /= total;
  return out;
}

std::size_t argmax(std::span<const double> values) {
  PLDC_CHECK(!values.empty(), "argmax of an empty vector");
  // max_element returns the first maximum.
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  PLDC_CHECK(a.height() == b.height() && a.width() == b.width(), "mask_iou: shape mismatch");
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < a.pixel_count(); ++i) {
    inter += (a[i] && b[i]) ? 1 : 0;
    uni += (a[i] || b[i]) ? 1 : 0;
  }
  if (uni == 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

BinaryMask binarize(const MaskLogitGrid& mask_logits, double threshold) {
  BinaryMask out(mask_logits.height(), mask_logits.width());
  for (std::size_t i = 0; i < mask_logits.pixel_count(); ++i) {
    out.set_index(i, sigmoid(mask_logits[i]) > threshold);
  }
  return out;
}

RunLengthCounts rle_encode(const BinaryMask& mask) {
  RunLengthCounts rle;
  const auto h = mask.height();
  const auto w = mask.width();
  bool current = false;
  std::uint32_t run = 0;
  for (std::size_t col = 0; col < w; ++col) {
    for (std::size_t row = 0; row < h; ++row) {
      const bool bit = mask.at(row, col);
      if (bit != current) {
        rle.counts.push_back(run);
        run = 0;
        current = bit;
      }
      ++run;
    }
  }
  rle.counts.push_back(run);
  return rle;
}

BinaryMask rle_decode(const RunLengthCounts& rle, std::size_t height, std::size_t width) {
  const std::uint64_t total =
      std::accumulate(rle.counts.begin(), rle.counts.end(), std::uint64_t{0});
  PLDC_CHECK(total == static_cast<std::uint64_t>(height) * width,
             "RLE counts sum to " + std::to_string(total) + ", expected " +
                 std::to_string(height * width));
  BinaryMask out(height, width);
  std::size_t pos = 0;
  bool value = false;
  for (const auto run : rle.counts) {
    for (std::uint32_t j = 0; j < run; ++j, ++pos) {
      if (value) out.set(pos % height, pos / height, true);
    }
    value = !value;
  }
  return out;
}

}  // namespace pldc
