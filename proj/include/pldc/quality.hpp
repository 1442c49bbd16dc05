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

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pldc/instance_model.hpp"

namespace pldc {

struct QualityScores {
  double class_quality = 0.0;
  double mask_quality = 0.0;
  double coupled_score = 0.0;
};

class UncertaintyMap {
 public:
  UncertaintyMap() = default;
  UncertaintyMap(std::size_t height, std::size_t width, std::vector<double> values);
  static UncertaintyMap filled(std::size_t height, std::size_t width, double value);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t pixel_count() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const { return values_; }

  bool operator==(const UncertaintyMap&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> values_;
};

/// Largest softmax probability of the class logits.
double class_quality(const ClassLogits& logits);

/// Mean sigmoid over the pixels whose sigmoid exceeds 0.5. An instance with no
/// such pixel scores 0 so it can never pass a mask threshold.
double mask_quality(const MaskLogitGrid& mask_logits);

inline double coupled_score(double class_q, double mask_q) { return class_q * mask_q; }

QualityScores score_instance(const InstancePrediction& prediction);
std::vector<QualityScores> score_instances(std::span<const InstancePrediction> predictions);

/// u = 1 - 2 |sigmoid(q) - 0.5| per pixel, taken from the teacher logits.
UncertaintyMap uncertainty_map(const MaskLogitGrid& mask_logits);

}  // namespace pldc
