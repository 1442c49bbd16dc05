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

#include "pldc/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "pldc/error.hpp"

namespace pldc {

void PseudoLabel::validate() const {
  PLDC_CHECK(class_id >= 0, "pseudo-label class id must be non-negative");
  PLDC_CHECK(mask.height() == uncertainty.height() && mask.width() == uncertainty.width(),
             "pseudo-label mask and uncertainty map must share (H, W)");
}

void LossConfig::validate() const {
  PLDC_CHECK(std::isfinite(lambda) && lambda >= 0.0, "lambda must be finite and >= 0");
  cost_weights.validate();
}

namespace {

double dice_term(const MaskLogitGrid& logits, const BinaryMask& mask) {
  return 1.0 - soft_dice(logits, mask);
}

}  // namespace

LossTerms supervised_loss(std::span<const InstancePrediction> students,
                          std::span<const GroundTruthInstance> ground_truth,
                          const LossConfig& config) {
  config.validate();
  LossTerms out;
  if (ground_truth.empty() || students.empty()) return out;
  out.match = hungarian(build_cost_matrix(students, ground_truth, config.cost_weights));
  for (const auto& [k, j] : out.match.pairs) {
    const auto& gt = ground_truth[j];
    out.classification +=
        class_nll(students[k].class_logits, static_cast<std::size_t>(gt.class_id));
    out.mask += mean_bce(students[k].mask_logits, gt.mask);
    if (config.dice_enabled) out.mask += dice_term(students[k].mask_logits, gt.mask);
  }
  const auto matched = static_cast<double>(out.match.pairs.size());
  out.classification /= matched;
  out.mask /= matched;
  return out;
}

double pmua_mask_loss(std::span<const MaskLogitGrid> student_masks,
                      std::span<const PseudoLabel> pseudo_labels, const MatchResult& match) {
  if (student_masks.empty()) return 0.0;
  const std::size_t hw = student_masks.front().pixel_count();
  double total = 0.0;
  for (const auto& [k, j] : match.pairs) {
    PLDC_CHECK(k < student_masks.size() && j < pseudo_labels.size(),
               "match refers to a missing instance");
    const auto& t_logits = student_masks[k];
    const auto& pl = pseudo_labels[j];
    PLDC_CHECK(t_logits.pixel_count() == hw && pl.mask.height() == t_logits.height() &&
                   pl.mask.width() == t_logits.width() &&
                   pl.uncertainty.pixel_count() == hw,
               "PMUA loss: shape mismatch");
    for (std::size_t i = 0; i < hw; ++i) {
      const double weight = 1.0 - pl.uncertainty[i];
      if (weight == 0.0) continue;
      const double t = std::clamp(sigmoid(t_logits[i]), kProbEpsilon, 1.0 - kProbEpsilon);
      total += weight * (pl.mask[i] ? std::log(t) : std::log(1.0 - t));
    }
  }
  return -total / (static_cast<double>(student_masks.size()) * static_cast<double>(hw));
}

CostMatrix build_cost_matrix(std::span<const InstancePrediction> students,
                             std::span<const PseudoLabel> pseudo_labels,
                             const CostWeights& weights) {
  weights.validate();
  CostMatrix m(students.size(), pseudo_labels.size());
  for (std::size_t r = 0; r < students.size(); ++r) {
    for (std::size_t c = 0; c < pseudo_labels.size(); ++c) {
      m(r, c) = match_cost(students[r], static_cast<std::size_t>(pseudo_labels[c].class_id),
                           pseudo_labels[c].mask, weights);
    }
  }
  return m;
}

LossTerms unsupervised_loss(std::span<const InstancePrediction> students,
                            std::span<const PseudoLabel> pseudo_labels, const LossConfig& config) {
  config.validate();
  LossTerms out;
  if (pseudo_labels.empty() || students.empty()) return out;
  for (const auto& pl : pseudo_labels) pl.validate();
  out.match = hungarian(build_cost_matrix(students, pseudo_labels, config.cost_weights));

  std::vector<MaskLogitGrid> masks;
  masks.reserve(students.size());
  for (const auto& s : students) masks.push_back(s.mask_logits);
  out.mask = pmua_mask_loss(masks, pseudo_labels, out.match);

  const auto matched = static_cast<double>(out.match.pairs.size());
  for (const auto& [k, j] : out.match.pairs) {
    if (config.unsup_class_loss) {
      out.classification += class_nll(students[k].class_logits,
                                      static_cast<std::size_t>(pseudo_labels[j].class_id));
    }
    if (config.dice_enabled) {
      out.mask += dice_term(students[k].mask_logits, pseudo_labels[j].mask) / matched;
    }
  }
  out.classification /= matched;
  return out;
}

FeatureTensor::FeatureTensor(std::size_t instances, std::size_t height, std::size_t width,
                             std::size_t dim)
    : instances_(instances),
      height_(height),
      width_(width),
      dim_(dim),
      values_(instances * height * width * dim, 0.0) {}

FeatureTensor::FeatureTensor(std::size_t instances, std::size_t height, std::size_t width,
                             std::size_t dim, std::vector<double> values)
    : instances_(instances),
      height_(height),
      width_(width),
      dim_(dim),
      values_(std::move(values)) {
  PLDC_CHECK(values_.size() == instances * height * width * dim,
             "feature tensor size does not match its shape");
}

LinearPixelModel::LinearPixelModel(std::vector<double> theta) : theta_(std::move(theta)) {
  for (const double v : theta_) PLDC_CHECK(std::isfinite(v), "model parameters must be finite");
}

double LinearPixelModel::logit(std::span<const double> x) const {
  PLDC_CHECK(x.size() == theta_.size(), "feature dimension does not match the model");
  double z = 0.0;
  for (std::size_t d = 0; d < x.size(); ++d) z += theta_[d] * x[d];
  return z;
}

std::vector<MaskLogitGrid> LinearPixelModel::predict(const FeatureTensor& features) const {
  std::vector<MaskLogitGrid> out;
  out.reserve(features.instances());
  for (std::size_t k = 0; k < features.instances(); ++k) {
    std::vector<double> z(features.pixels());
    for (std::size_t i = 0; i < z.size(); ++i) {
      z[i] = logit(features.at(k, i));
      if (!std::isfinite(z[i])) throw NumericalError("mask logit overflowed");
    }
    out.emplace_back(features.height(), features.width(), std::move(z));
  }
  return out;
}

std::vector<double> pmua_gradient(const LinearPixelModel& model, const FeatureTensor& features,
                                  std::span<const PseudoLabel> pseudo_labels,
                                  const MatchResult& match) {
  PLDC_CHECK(features.dim() == model.dim(), "feature dimension does not match the model");
  std::vector<double> grad(model.dim(), 0.0);
  const std::size_t q = features.instances();
  const std::size_t hw = features.pixels();
  if (q == 0) return grad;
  const double norm = 1.0 / (static_cast<double>(q) * static_cast<double>(hw));

  for (const auto& [k, j] : match.pairs) {
    PLDC_CHECK(k < q && j < pseudo_labels.size(), "match refers to a missing instance");
    const auto& pl = pseudo_labels[j];
    PLDC_CHECK(pl.mask.pixel_count() == hw && pl.uncertainty.pixel_count() == hw,
               "PMUA gradient: shape mismatch");
    for (std::size_t i = 0; i < hw; ++i) {
      const double weight = 1.0 - pl.uncertainty[i];
      if (weight == 0.0) continue;
      const auto x = features.at(k, i);
      const double t = sigmoid(model.logit(x));
      if (t < kProbEpsilon || t > 1.0 - kProbEpsilon) continue;
      const double m = pl.mask[i] ? 1.0 : 0.0;
      const double dl_dt = -norm * weight * (m / t - (1.0 - m) / (1.0 - t));
      const double dt_dz = t * (1.0 - t);
      for (std::size_t d = 0; d < grad.size(); ++d) grad[d] += dl_dt * dt_dz * x[d];
    }
  }
  return grad;
}

double finite_difference_check(const std::function<double(std::span<const double>)>& loss,
                               std::span<const double> analytic_gradient,
                               std::span<const double> theta, double step) {
  PLDC_CHECK(analytic_gradient.size() == theta.size(), "gradient and parameter sizes differ");
  PLDC_CHECK(step > 0.0 && std::isfinite(step), "finite-difference step must be positive");
  std::vector<double> probe(theta.begin(), theta.end());
  double worst = 0.0;
  for (std::size_t d = 0; d < theta.size(); ++d) {
    probe[d] = theta[d] + step;
    const double up = loss(probe);
    probe[d] = theta[d] - step;
    const double down = loss(probe);
    probe[d] = theta[d];
    const double numeric = (up - down) / (2.0 * step);
    const double a = analytic_gradient[d];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    const double err = std::abs(a - numeric) / denom;
    if (!std::isfinite(err)) return std::numeric_limits<double>::infinity();
    worst = std::max(worst, err);
  }
  return worst;
}

GradientCheckReport pmua_gradient_check(std::uint64_t seed, std::size_t instances,
                                        double step) {
  GradientCheckReport report;
  report.instances = instances;
  report.step = step;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform_int = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };

  for (std::size_t n = 0; n < instances; ++n) {
    const std::size_t dim = uniform_int(1, 6);
    const std::size_t q = uniform_int(1, 4);
    const std::size_t h = uniform_int(1, 6), w = uniform_int(1, 6);
    const std::size_t p = uniform_int(1, q);

    std::vector<double> theta(dim);
    for (auto& v : theta) v = 0.5 * normal(rng);
    std::vector<double> values(q * h * w * dim);
    for (auto& v : values) v = normal(rng);
    const FeatureTensor features(q, h, w, dim, std::move(values));

    std::vector<PseudoLabel> labels;
    for (std::size_t j = 0; j < p; ++j) {
      BinaryMask mask(h, w);
      std::vector<double> u(h * w);
      for (std::size_t i = 0; i < h * w; ++i) {
        mask.set_index(i, unit(rng) < 0.5);
        u[i] = unit(rng);
      }
      labels.push_back({0, std::move(mask), UncertaintyMap(h, w, std::move(u))});
    }
    std::vector<std::size_t> students(q);
    std::iota(students.begin(), students.end(), 0);
    std::shuffle(students.begin(), students.end(), rng);
    MatchResult match;
    for (std::size_t j = 0; j < p; ++j) match.pairs.emplace_back(students[j], j);
    std::sort(match.pairs.begin(), match.pairs.end());

    const LinearPixelModel model(theta);
    const auto analytic = pmua_gradient(model, features, labels, match);
    const auto loss = [&](std::span<const double> t) {
      const LinearPixelModel probe(std::vector<double>(t.begin(), t.end()));
      return pmua_mask_loss(probe.predict(features), labels, match);
    };
    report.max_relative_error = std::max(report.max_relative_error,
                                         finite_difference_check(loss, analytic, theta, step));
  }
  return report;
}

}  // namespace pldc
