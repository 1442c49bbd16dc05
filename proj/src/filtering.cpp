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

#include "pldc/filtering.hpp"

#include <cmath>

#include "pldc/error.hpp"

namespace pldc {

std::string_view to_string(FilterMode mode) {
  return mode == FilterMode::kCoupled ? "coupled" : "decoupled";
}

std::string_view to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::kClassBelow:
      return "class_below";
    case RejectReason::kMaskBelow:
      return "mask_below";
    case RejectReason::kScoreBelow:
      return "score_below";
  }
  return "unknown";
}

FilterMode parse_filter_mode(std::string_view text) {
  if (text == "coupled") return FilterMode::kCoupled;
  if (text == "decoupled") return FilterMode::kDecoupled;
  throw ValidationError("unknown filter mode '" + std::string(text) +
                        "' (expected coupled|decoupled)");
}

void FilterConfig::validate() const {
  for (const double t : {mask_threshold, class_threshold, coupled_threshold}) {
    PLDC_CHECK(std::isfinite(t) && t >= 0.0, "filter thresholds must be finite and >= 0");
  }
}

std::vector<std::size_t> FilteredSet::kept_indices() const {
  std::vector<std::size_t> out;
  out.reserve(kept.size());
  for (const auto& k : kept) out.push_back(k.index);
  return out;
}

FilteredSet filter_ddtf(std::span<const QualityScores> scores, const FilterConfig& config) {
  PLDC_CHECK(config.mode == FilterMode::kDecoupled, "filter_ddtf requires decoupled mode");
  config.validate();
  FilteredSet out;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto& s = scores[i];
    if (s.class_quality < config.class_threshold) {
      out.rejected.push_back({i, s, RejectReason::kClassBelow});
    } else if (s.mask_quality < config.mask_threshold) {
      out.rejected.push_back({i, s, RejectReason::kMaskBelow});
    } else {
      out.kept.push_back({i, s});
    }
  }
  return out;
}

FilteredSet filter_coupled(std::span<const QualityScores> scores, const FilterConfig& config) {
  PLDC_CHECK(config.mode == FilterMode::kCoupled, "filter_coupled requires coupled mode");
  config.validate();
  FilteredSet out;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto& s = scores[i];
    if (s.class_quality * s.mask_quality >= config.coupled_threshold) {
      out.kept.push_back({i, s});
    } else {
      out.rejected.push_back({i, s, RejectReason::kScoreBelow});
    }
  }
  return out;
}

FilteredSet filter_ddtf(std::span<const InstancePrediction> predictions,
                        const FilterConfig& config) {
  const auto scores = score_instances(predictions);
  return filter_ddtf(std::span<const QualityScores>(scores), config);
}

FilteredSet filter_coupled(std::span<const InstancePrediction> predictions,
                           const FilterConfig& config) {
  const auto scores = score_instances(predictions);
  return filter_coupled(std::span<const QualityScores>(scores), config);
}

FilteredSet filter_scores(std::span<const QualityScores> scores, const FilterConfig& config) {
  return config.mode == FilterMode::kCoupled ? filter_coupled(scores, config)
                                             : filter_ddtf(scores, config);
}

FilteredSet filter_predictions(std::span<const InstancePrediction> predictions,
                               const FilterConfig& config) {
  const auto scores = score_instances(predictions);
  return filter_scores(std::span<const QualityScores>(scores), config);
}

}  // namespace pldc
