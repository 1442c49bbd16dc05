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

// Training objectives.
//
//   L       = L_sup + lambda * L_unsup
//   L_sup   = L_cls + L_mask                     (mean over matched instances)
//   L_unsup = L_cls(corrected classes) + L_pmua
//
// The uncertainty-aware mask term for Q student queries against matched
// pseudo-labels (M, u):
//
//   L_pmua = -1/(Q H W) sum_k sum_i (1 - u_i) [M_i log t_i + (1 - M_i) log(1 - t_i)]
//
// with t clamped to [eps, 1 - eps]. Unmatched student queries contribute 0
// but still count in Q.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "pldc/instance_model.hpp"
#include "pldc/matching.hpp"
#include "pldc/quality.hpp"

namespace pldc {

struct PseudoLabel {
  int class_id = 0;
  BinaryMask mask;
  UncertaintyMap uncertainty;

  /// Throws ValidationError on shape disagreement or a negative class id.
  void validate() const;
};

struct LossConfig {
  double lambda = 1.0;
  bool dice_enabled = false;
  CostWeights cost_weights;
  /// Adds cross-entropy on corrected pseudo-label classes to L_unsup.
  bool unsup_class_loss = true;

  void validate() const;
};

struct LossTerms {
  double classification = 0.0;
  double mask = 0.0;
  MatchResult match;

  double total() const { return classification + mask; }
};

LossTerms supervised_loss(std::span<const InstancePrediction> students,
                          std::span<const GroundTruthInstance> ground_truth,
                          const LossConfig& config);

/// Uncertainty-weighted BCE over matched (student, pseudo-label) pairs.
double pmua_mask_loss(std::span<const MaskLogitGrid> student_masks,
                      std::span<const PseudoLabel> pseudo_labels, const MatchResult& match);

/// Matches students to pseudo-labels and evaluates L_unsup.
LossTerms unsupervised_loss(std::span<const InstancePrediction> students,
                            std::span<const PseudoLabel> pseudo_labels, const LossConfig& config);

inline double total_loss(double supervised, double unsupervised, double lambda) {
  return supervised + lambda * unsupervised;
}

/// Cost matrix of students against pseudo-labels (uncertainty ignored).
CostMatrix build_cost_matrix(std::span<const InstancePrediction> students,
                             std::span<const PseudoLabel> pseudo_labels,
                             const CostWeights& weights);

/// Per-pixel feature vectors x_k^i, one block of H*W*D values per instance.
class FeatureTensor {
 public:
  FeatureTensor() = default;
  FeatureTensor(std::size_t instances, std::size_t height, std::size_t width, std::size_t dim);
  FeatureTensor(std::size_t instances, std::size_t height, std::size_t width, std::size_t dim,
                std::vector<double> values);

  std::size_t instances() const { return instances_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t pixels() const { return height_ * width_; }
  std::size_t dim() const { return dim_; }

  std::span<const double> at(std::size_t instance, std::size_t pixel) const {
    return {values_.data() + (instance * pixels() + pixel) * dim_, dim_};
  }
  std::span<double> at(std::size_t instance, std::size_t pixel) {
    return {values_.data() + (instance * pixels() + pixel) * dim_, dim_};
  }

 private:
  std::size_t instances_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> values_;
};

/// Per-pixel mask logits z = theta . x; the mask probability is sigmoid(z).
class LinearPixelModel {
 public:
  LinearPixelModel() = default;
  explicit LinearPixelModel(std::vector<double> theta);

  std::size_t dim() const { return theta_.size(); }
  std::span<const double> theta() const { return theta_; }
  std::vector<double>& mutable_theta() { return theta_; }

  double logit(std::span<const double> x) const;
  /// One logit grid per instance in the tensor. Throws NumericalError if a
  /// logit overflows.
  std::vector<MaskLogitGrid> predict(const FeatureTensor& features) const;

 private:
  std::vector<double> theta_;
};

/// Analytic gradient of pmua_mask_loss with respect to theta. Each pixel
/// contributes (1 - u) * dBCE/dt * dt/dz * x. Pixels whose probability lies
/// outside the clamp range contribute 0, matching the clamped loss.
std::vector<double> pmua_gradient(const LinearPixelModel& model, const FeatureTensor& features,
                                  std::span<const PseudoLabel> pseudo_labels,
                                  const MatchResult& match);

/// Central differences against an analytic gradient. Returns the largest
/// per-coordinate relative error, |a - b| / max(|a|, |b|, 1e-8).
double finite_difference_check(const std::function<double(std::span<const double>)>& loss,
                               std::span<const double> analytic_gradient,
                               std::span<const double> theta, double step);

struct GradientCheckReport {
  std::size_t instances = 0;
  double step = 0.0;
  double max_relative_error = 0.0;
};

/// Draws `instances` seeded random PMUA problems (model, features, targets,
/// uncertainty, match) and returns the worst finite-difference disagreement.
GradientCheckReport pmua_gradient_check(std::uint64_t seed, std::size_t instances,
                                        double step = 1e-5);

}  // namespace pldc
