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

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "pldc/instance_model.hpp"
#include "pldc/quality.hpp"

namespace pldc {

/// A prediction reduced to what the metrics look at.
struct EvalInstance {
  int class_id = 0;
  BinaryMask mask;
  double score = 0.0;
};

/// argmax class, binarized mask, coupled score.
EvalInstance to_eval_instance(const InstancePrediction& prediction);
std::vector<EvalInstance> to_eval_instances(std::span<const InstancePrediction> predictions);

enum class ErrorCategory { kCor = 0, kLoc, kSim, kOth, kBG };
inline constexpr std::size_t kErrorCategoryCount = 5;
std::string_view to_string(ErrorCategory category);

/// class id -> superclass id.
struct Taxonomy {
  std::vector<int> superclass;

  /// Throws ValidationError unless every class in [0, num_classes) is mapped.
  void validate(std::size_t num_classes) const;
  static Taxonomy identity(std::size_t num_classes);
};

struct ErrorReport {
  std::vector<ErrorCategory> categories;
  std::array<std::size_t, kErrorCategoryCount> histogram{};
};

/// Precedence when several ground-truth overlaps qualify: Cor > Sim > Oth >
/// Loc > BG. A prediction whose only overlaps are weak (IoU <= threshold)
/// and with other classes counts as Oth.
ErrorReport categorize_errors(std::span<const EvalInstance> predictions,
                              std::span<const GroundTruthInstance> ground_truth,
                              const Taxonomy& taxonomy, double iou_threshold = 0.5);

/// (N+1) x (N+1) counts; index N is background. Rows are true classes.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes)
      : n_(num_classes + 1), counts_(n_ * n_, 0) {}

  std::size_t size() const { return n_; }
  std::size_t background() const { return n_ - 1; }
  std::size_t at(std::size_t truth, std::size_t predicted) const {
    return counts_[truth * n_ + predicted];
  }
  void add(std::size_t truth, std::size_t predicted) { ++counts_[truth * n_ + predicted]; }
  std::size_t total() const;

 private:
  std::size_t n_;
  std::vector<std::size_t> counts_;
};

/// Greedy one-to-one matching by descending IoU over pairs with IoU above the
/// threshold. Unmatched ground truth lands in the background column,
/// unmatched predictions in the background row.
ConfusionMatrix confusion_matrix(std::span<const EvalInstance> predictions,
                                 std::span<const GroundTruthInstance> ground_truth,
                                 std::size_t num_classes, double iou_threshold = 0.5);

struct ScoreIouRow {
  std::size_t instance = 0;
  QualityScores scores;
  double best_iou = 0.0;
};

struct ScoreIouTable {
  std::vector<ScoreIouRow> rows;
  double corr_score_iou = 0.0;
  double corr_class_iou = 0.0;
  double corr_mask_iou = 0.0;
};

ScoreIouTable score_iou_table(std::span<const InstancePrediction> predictions,
                              std::span<const GroundTruthInstance> ground_truth);

/// Pearson correlation; NaN when either column is constant or fewer than two
/// samples exist.
double pearson(std::span<const double> x, std::span<const double> y);

struct ImageDetections {
  std::vector<EvalInstance> predictions;
  std::vector<GroundTruthInstance> ground_truth;
};

/// 101-point interpolated AP. Predictions are ranked by score (ties by
/// position) and greedily matched to the unmatched same-class ground truth
/// with the highest IoU >= threshold. Returns 0 when there is no ground truth.
double simplified_ap(std::span<const ImageDetections> images, double iou_threshold = 0.5);
double simplified_ap(std::span<const EvalInstance> predictions,
                     std::span<const GroundTruthInstance> ground_truth,
                     double iou_threshold = 0.5);

/// Accumulates per-label intersection and union over many label maps.
class MeanIou {
 public:
  explicit MeanIou(std::size_t num_labels) : inter_(num_labels, 0), uni_(num_labels, 0) {}
  void add(std::span<const int> predicted, std::span<const int> truth);
  /// Mean over labels with a non-empty union.
  double value() const;
  double pixel_accuracy() const;

 private:
  std::vector<std::size_t> inter_;
  std::vector<std::size_t> uni_;
  std::size_t correct_ = 0;
  std::size_t total_ = 0;
};

}  // namespace pldc
