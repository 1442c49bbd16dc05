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

#include "pldc/quality.hpp"

#include <algorithm>
#include <cmath>

#include "pldc/error.hpp"

namespace pldc {

UncertaintyMap::UncertaintyMap(std::size_t height, std::size_t width, std::vector<double> values)
    : height_(height), width_(width), values_(std::move(values)) {
  PLDC_CHECK(values_.size() == height_ * width_, "uncertainty map size does not match height*width");
  for (const double v : values_) {
    PLDC_CHECK(v >= 0.0 && v <= 1.0, "uncertainty values must lie in [0, 1]");
  }
}

UncertaintyMap UncertaintyMap::filled(std::size_t height, std::size_t width, double value) {
  return UncertaintyMap(height, width, std::vector<double>(height * width, value));
}

double class_quality(const ClassLogits& logits) {
  const auto probs = softmax(logits);
  return *std::max_element(probs.begin(), probs.end());
}

double mask_quality(const MaskLogitGrid& mask_logits) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const double q : mask_logits.values()) {
    const double p = sigmoid(q);
    if (p > 0.5) {
      sum += p;
      ++count;
    }
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

QualityScores score_instance(const InstancePrediction& prediction) {
  QualityScores s;
  s.class_quality = class_quality(prediction.class_logits);
  s.mask_quality = mask_quality(prediction.mask_logits);
  s.coupled_score = coupled_score(s.class_quality, s.mask_quality);
  return s;
}

std::vector<QualityScores> score_instances(std::span<const InstancePrediction> predictions) {
  std::vector<QualityScores> out;
  out.reserve(predictions.size());
  for (const auto& p : predictions) out.push_back(score_instance(p));
  return out;
}

UncertaintyMap uncertainty_map(const MaskLogitGrid& mask_logits) {
  std::vector<double> u(mask_logits.pixel_count());
  for (std::size_t i = 0; i < u.size(); ++i) {
    u[i] = 1.0 - 2.0 * std::abs(sigmoid(mask_logits[i]) - 0.5);
  }
  return UncertaintyMap(mask_logits.height(), mask_logits.width(), std::move(u));
}

}  // namespace pldc
