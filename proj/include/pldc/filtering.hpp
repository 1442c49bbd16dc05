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

// Pseudo-label selection. Two modes:
//
//   coupled    keep iff c * m >= s_t          (single score threshold baseline)
//   decoupled  keep iff c >= c_t and m >= m_t (dual threshold)
//
// Both thresholds are inclusive. Output order follows input order.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pldc/instance_model.hpp"
#include "pldc/quality.hpp"

namespace pldc {

enum class FilterMode { kCoupled, kDecoupled };

enum class RejectReason { kClassBelow, kMaskBelow, kScoreBelow };

std::string_view to_string(FilterMode mode);
std::string_view to_string(RejectReason reason);
FilterMode parse_filter_mode(std::string_view text);

struct FilterConfig {
  FilterMode mode = FilterMode::kDecoupled;
  double mask_threshold = 0.9;
  double class_threshold = 0.85;
  double coupled_threshold = 0.765;

  /// Throws ValidationError if any threshold is non-finite or negative.
  void validate() const;
};

struct KeptInstance {
  std::size_t index = 0;
  QualityScores scores;
};

struct RejectedInstance {
  std::size_t index = 0;
  QualityScores scores;
  RejectReason reason = RejectReason::kScoreBelow;
};

struct FilteredSet {
  std::vector<KeptInstance> kept;
  std::vector<RejectedInstance> rejected;

  std::vector<std::size_t> kept_indices() const;
};

// Score-level entry points. The prediction overloads score each instance
// with the quality module first.
FilteredSet filter_ddtf(std::span<const QualityScores> scores, const FilterConfig& config);
FilteredSet filter_coupled(std::span<const QualityScores> scores, const FilterConfig& config);
FilteredSet filter_ddtf(std::span<const InstancePrediction> predictions, const FilterConfig& config);
FilteredSet filter_coupled(std::span<const InstancePrediction> predictions,
                           const FilterConfig& config);

/// Dispatches on config.mode.
FilteredSet filter_scores(std::span<const QualityScores> scores, const FilterConfig& config);
FilteredSet filter_predictions(std::span<const InstancePrediction> predictions,
                               const FilterConfig& config);

}  // namespace pldc
