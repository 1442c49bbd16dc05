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
#include <utility>
#include <vector>

#include "pldc/instance_model.hpp"

namespace pldc {

/// Dense row-major matrix of assignment costs. Rows are student predictions,
/// columns are (pseudo-)ground-truth instances.
class CostMatrix {
 public:
  CostMatrix() = default;
  CostMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  CostMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct MatchResult {
  /// (student index, target index), sorted by student index.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  double total_cost = 0.0;

  /// Target matched to `student`, or npos.
  std::size_t target_of(std::size_t student) const;
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

/// Minimum-cost injective assignment of min(rows, cols) pairs.
///
/// Among assignments whose cost is optimal (to 1e-9 relative), returns the
/// one whose row-by-row column sequence is lexicographically smallest, with
/// "unassigned" ordered after every real column.
MatchResult hungarian(const CostMatrix& costs);

struct CostWeights {
  double class_weight = 1.0;
  double bce_weight = 1.0;
  double dice_weight = 1.0;

  void validate() const;
};

/// Probability floor used wherever a log is taken.
inline constexpr double kProbEpsilon = 1e-7;

/// Mean per-pixel BCE between sigmoid(logits) and the target mask.
double mean_bce(const MaskLogitGrid& logits, const BinaryMask& target);

/// Soft dice coefficient (2 sum(t M) + 1) / (sum(t) + sum(M) + 1).
double soft_dice(const MaskLogitGrid& logits, const BinaryMask& target);

/// -log p(class) with p floored at kProbEpsilon.
double class_nll(const ClassLogits& logits, std::size_t class_id);

/// w_class * NLL + w_bce * mean BCE + w_dice * (1 - dice).
double match_cost(const InstancePrediction& student, std::size_t class_id,
                  const BinaryMask& mask, const CostWeights& weights);

CostMatrix build_cost_matrix(std::span<const InstancePrediction> students,
                             std::span<const GroundTruthInstance> targets,
                             const CostWeights& weights);

}  // namespace pldc
