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

// Desk-scale teacher-student benchmark.
//
// Scenes are H x W rasters split into a grid of cells. Each cell holds at most
// one object (rectangle or ellipse); each cell is also one query window of
// the toy segmenter, so the model always emits cells_per_side^2 instances.
//
// Per-pixel image channels:
//   fg     object pixels carry contrast * fg_signal, all pixels carry
//          Gaussian noise
//   class  N channels; object pixels carry contrast * class_signal *
//          prototype(class) plus a per-instance appearance offset. Prototypes 0 and 1 have
//          cosine similarity `class_similarity`; the rest are orthogonal.
//
// Augmentations are noise channels applied when a scene is rendered into a
// view: extra feature noise, per-instance appearance confusion and cut-out.
//
// The toy segmenter has a linear mask head over window-gated pixel features
// x = [1, in, in * fg, in * box3x3(fg)], where `in` is 1 inside the query's
// cell and fg is standardized per view, and a linear class head over
// fg-weighted pooled class channels.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pldc/correction.hpp"
#include "pldc/filtering.hpp"
#include "pldc/instance_model.hpp"
#include "pldc/losses.hpp"

namespace pldc {

/// Independent sub-seed for (stream, index) under a run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

struct SceneConfig {
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t num_classes = 3;
  std::size_t cells_per_side = 2;
  std::size_t min_instances = 1;
  std::size_t max_instances = 4;
  /// Relative class frequencies; empty means uniform.
  std::vector<double> class_skew{0.6, 0.25, 0.15};
  std::size_t min_object_side = 5;
  double fg_signal = 2.0;
  double pixel_noise = 0.5;
  double class_signal = 1.0;
  double class_similarity = 0.7;
  double appearance_noise = 0.3;
  /// Each instance's fg and class signal is scaled by a contrast drawn
  /// uniformly from [min_contrast, 1].
  double min_contrast = 0.5;

  std::size_t num_queries() const { return cells_per_side * cells_per_side; }
  void validate() const;
  bool operator==(const SceneConfig&) const = default;
};

struct SyntheticScene {
  std::uint64_t id = 0;
  std::uint64_t seed = 0;
  SceneConfig config;
  /// H*W foreground channel.
  std::vector<double> fg;
  /// H*W*N class channels, pixel-major.
  std::vector<double> class_features;
  std::vector<GroundTruthInstance> instances;
  /// Cell (query window) of each instance.
  std::vector<std::size_t> instance_cells;
  std::vector<double> instance_contrast;

  bool operator==(const SyntheticScene&) const = default;
};

/// Deterministic in (seed, config).
SyntheticScene generate_scene(std::uint64_t seed, const SceneConfig& config);

/// Unit class prototype directions, N x N row-major.
std::vector<double> class_prototypes(const SceneConfig& config);

enum class ChannelKind { kWeak, kStrong };

struct NoiseChannel {
  ChannelKind kind = ChannelKind::kWeak;
  /// Feature noise for rendered views; mask/class logit noise for
  /// corrupt_predictions.
  double logit_noise_stddev = 0.0;
  double class_confusion_rate = 0.0;
  double dropout_rate = 0.0;

  void validate() const;
};

/// Throws unless strong >= weak element-wise.
void validate_channel_pair(const NoiseChannel& weak, const NoiseChannel& strong);

NoiseChannel default_weak_channel();
NoiseChannel default_strong_channel();

/// Model inputs for one rendering of a scene.
struct SceneView {
  FeatureTensor mask_features;
  /// One pooled class feature vector per query.
  std::vector<std::vector<double>> pooled_class_features;
};

inline constexpr std::size_t kMaskFeatureDim = 4;

SceneView render_view(const SyntheticScene& scene, const NoiseChannel& channel,
                      std::mt19937_64& rng);

/// Flat parameter vector: mask head (kMaskFeatureDim) followed by the class
/// head, num_classes rows of (num_classes + 1) weights with the bias last.
class ToySegmenter {
 public:
  ToySegmenter() = default;
  explicit ToySegmenter(std::size_t num_classes);
  ToySegmenter(std::size_t num_classes, std::vector<double> parameters);
  /// Small seeded Gaussian initialization plus a window prior on the mask
  /// head: bias -kWindowPrior, in-window weight +kWindowPrior, so every query
  /// starts out responsible for its own cell.
  static ToySegmenter initialize(std::size_t num_classes, std::uint64_t seed);
  static constexpr double kWindowPrior = 4.0;

  std::size_t num_classes() const { return num_classes_; }
  std::span<const double> parameters() const { return params_; }
  std::vector<double>& mutable_parameters() { return params_; }

  LinearPixelModel mask_head() const;
  std::vector<InstancePrediction> predict(const SceneView& view) const;

  bool operator==(const ToySegmenter&) const = default;

 private:
  std::size_t num_classes_ = 0;
  std::vector<double> params_;
};

/// Loss and its gradient with respect to ToySegmenter parameters for one view.
/// The supervised form averages BCE per matched instance; the unsupervised form
/// uses the uncertainty-weighted sum normalized by Q*H*W.
struct ObjectiveTerms {
  LossTerms terms;
  std::vector<double> gradient;
};

ObjectiveTerms supervised_objective(const ToySegmenter& model, const SceneView& view,
                                    std::span<const GroundTruthInstance> targets,
                                    const LossConfig& config);
ObjectiveTerms unsupervised_objective(const ToySegmenter& model, const SceneView& view,
                                      std::span<const PseudoLabel> targets,
                                      const LossConfig& config);

/// Same losses at an explicit parameter vector and a fixed match; used for
/// gradient verification.
double supervised_objective_value(const ToySegmenter& model, const SceneView& view,
                                  std::span<const GroundTruthInstance> targets,
                                  const LossConfig& config, const MatchResult& match);
double unsupervised_objective_value(const ToySegmenter& model, const SceneView& view,
                                    std::span<const PseudoLabel> targets,
                                    const LossConfig& config, const MatchResult& match);

struct EmaConfig {
  double alpha = 0.9996;
  void validate() const;
};

/// teacher <- alpha * teacher + (1 - alpha) * student, element-wise.
void ema_update(std::span<double> teacher, std::span<const double> student, double alpha);

struct TrainSchedule {
  std::int64_t burn_in_iters = 150;
  std::int64_t max_iters = 450;
  std::size_t labeled_batch = 2;
  std::size_t unlabeled_batch = 2;
  double learning_rate = 2.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct BurnInResult {
  ToySegmenter teacher;
  std::vector<double> loss_history;
};

/// Gradient descent on the supervised loss. Each iteration draws
/// `labeled_batch` scenes (all of them when the batch covers the set) and
/// renders them through `view_channel`.
BurnInResult run_burn_in(const ToySegmenter& init, std::span<const SyntheticScene> labeled,
                         const NoiseChannel& view_channel, const LossConfig& loss,
                         const TrainSchedule& schedule);

struct PipelineConfig {
  FilterConfig filter;
  bool correction_enabled = true;
  bool uncertainty_enabled = true;
  MockClassifierConfig mock;
  LossConfig loss;
  EmaConfig ema;
  NoiseChannel weak = default_weak_channel();
  NoiseChannel strong = default_strong_channel();

  void validate() const;
};

struct IterationLog {
  std::int64_t iteration = 0;
  double fusion_weight = 0.0;
  double sup_cls = 0.0;
  double sup_mask = 0.0;
  double unsup_cls = 0.0;
  double unsup_mask = 0.0;
  double total = 0.0;
  std::size_t kept = 0;
  std::size_t rejected = 0;
  std::size_t corrected = 0;
  std::size_t true_positive = 0;
  std::size_t gt_instances = 0;
  std::size_t gt_covered = 0;
  /// NaN when nothing was kept.
  double precision = 0.0;
  double recall = 0.0;
};

struct MutualLearningResult {
  ToySegmenter teacher;
  ToySegmenter student;
  std::vector<IterationLog> log;
};

/// Pseudo-labels for one unlabeled view, before any loss is taken.
struct PseudoLabelBatch {
  std::vector<PseudoLabel> labels;
  FilteredSet filtered;
  std::size_t corrected = 0;
  std::size_t true_positive = 0;
  std::size_t gt_covered = 0;
};

PseudoLabelBatch make_pseudo_labels(std::span<const InstancePrediction> teacher_predictions,
                                    const SyntheticScene& scene, const PipelineConfig& config,
                                    const ExternalClassifier* external, double fusion_w,
                                    const std::string& id_prefix);

/// Teacher-student loop from iteration burn_in_iters to max_iters - 1. The
/// teacher only changes through ema_update. The correction weight follows the
/// cosine schedule over the mutual-learning span.
MutualLearningResult run_mutual_learning(const ToySegmenter& teacher,
                                         const ToySegmenter& student,
                                         std::span<const SyntheticScene> labeled,
                                         std::span<const SyntheticScene> unlabeled,
                                         const PipelineConfig& config,
                                         const TrainSchedule& schedule,
                                         const ExternalClassifier& external);

/// Noisy predictions built directly from ground truth, one per surviving
/// instance: mask logits +/-kCorruptLogitScale plus Gaussian noise, class
/// logits kCorruptLogitScale * one-hot (flipped with the confusion rate) plus
/// the same noise.
inline constexpr double kCorruptLogitScale = 6.0;
std::vector<InstancePrediction> corrupt_predictions(const SyntheticScene& scene,
                                                    const NoiseChannel& channel,
                                                    std::uint64_t seed);

struct EvaluationMetrics {
  double miou = 0.0;
  double pixel_accuracy = 0.0;
  double ap50 = 0.0;
};

EvaluationMetrics evaluate_model(const ToySegmenter& model, std::span<const SyntheticScene> scenes);

struct BenchmarkConfig {
  SceneConfig scene;
  std::size_t labeled_scenes = 4;
  std::size_t unlabeled_scenes = 32;
  std::size_t test_scenes = 24;
  PipelineConfig pipeline;
  TrainSchedule schedule;

  void validate() const;
};

struct BenchmarkResult {
  MutualLearningResult training;
  EvaluationMetrics burn_in;
  EvaluationMetrics teacher;
  EvaluationMetrics student;
  double mean_precision = 0.0;
  double mean_recall = 0.0;
};

/// Generates labeled/unlabeled/test scenes from `seed`, runs burn-in and
/// mutual learning with the mock external classifier, and evaluates.
BenchmarkResult run_benchmark(const BenchmarkConfig& config, std::uint64_t seed);

}  // namespace pldc
