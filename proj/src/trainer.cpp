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

#include "pldc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "pldc/error.hpp"
#include "pldc/evaluation.hpp"
#include "pldc/quality.hpp"

namespace pldc {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ index);
}

// ---------------------------------------------------------------------------
// Scenes

void SceneConfig::validate() const {
  PLDC_CHECK(num_classes >= 1, "scene needs at least one class");
  PLDC_CHECK(cells_per_side >= 1, "cells_per_side must be >= 1");
  PLDC_CHECK(height % cells_per_side == 0 && width % cells_per_side == 0,
             "height and width must be multiples of cells_per_side");
  PLDC_CHECK(min_object_side >= 1, "min_object_side must be >= 1");
  PLDC_CHECK(height / cells_per_side >= min_object_side + 2 &&
                 width / cells_per_side >= min_object_side + 2,
             "cells are too small for min_object_side");
  PLDC_CHECK(min_instances <= max_instances, "min_instances exceeds max_instances");
  PLDC_CHECK(max_instances <= num_queries(), "max_instances exceeds the number of cells");
  PLDC_CHECK(class_skew.empty() || class_skew.size() == num_classes,
             "class_skew must be empty or have num_classes entries");
  double skew_total = 0.0;
  for (const double v : class_skew) {
    PLDC_CHECK(std::isfinite(v) && v >= 0.0, "class_skew entries must be finite and >= 0");
    skew_total += v;
  }
  PLDC_CHECK(class_skew.empty() || skew_total > 0.0, "class_skew must have positive mass");
  for (const double v : {fg_signal, pixel_noise, class_signal, appearance_noise}) {
    PLDC_CHECK(std::isfinite(v) && v >= 0.0, "scene signal/noise parameters must be >= 0");
  }
  PLDC_CHECK(min_contrast > 0.0 && min_contrast <= 1.0, "min_contrast must lie in (0, 1]");
  PLDC_CHECK(class_similarity >= 0.0 && class_similarity < 1.0,
             "class_similarity must lie in [0, 1)");
}

std::vector<double> class_prototypes(const SceneConfig& config) {
  const std::size_t n = config.num_classes;
  std::vector<double> p(n * n, 0.0);
  for (std::size_t c = 0; c < n; ++c) p[c * n + c] = 1.0;
  if (n >= 2) {
    p[1 * n + 0] = config.class_similarity;
    p[1 * n + 1] = std::sqrt(1.0 - config.class_similarity * config.class_similarity);
  }
  return p;
}

SyntheticScene generate_scene(std::uint64_t seed, const SceneConfig& config) {
  config.validate();
  std::mt19937_64 rng(seed);
  const std::size_t h = config.height, w = config.width, n = config.num_classes;
  const std::size_t cell_h = h / config.cells_per_side, cell_w = w / config.cells_per_side;

  SyntheticScene scene;
  scene.id = seed;
  scene.seed = seed;
  scene.config = config;
  scene.fg.assign(h * w, 0.0);
  scene.class_features.assign(h * w * n, 0.0);

  std::uniform_int_distribution<std::size_t> count_dist(config.min_instances,
                                                        config.max_instances);
  const std::size_t count = count_dist(rng);
  std::vector<std::size_t> cells(config.num_queries());
  std::iota(cells.begin(), cells.end(), 0);
  std::shuffle(cells.begin(), cells.end(), rng);
  cells.resize(count);
  std::sort(cells.begin(), cells.end());

  std::vector<double> skew = config.class_skew;
  if (skew.empty()) skew.assign(n, 1.0);
  std::discrete_distribution<int> class_dist(skew.begin(), skew.end());
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto prototypes = class_prototypes(config);

  for (const auto cell : cells) {
    const std::size_t top = (cell / config.cells_per_side) * cell_h;
    const std::size_t left = (cell % config.cells_per_side) * cell_w;
    const int cls = class_dist(rng);
    const bool ellipse = std::bernoulli_distribution(0.5)(rng);
    std::uniform_int_distribution<std::size_t> oh(config.min_object_side, cell_h - 2);
    std::uniform_int_distribution<std::size_t> ow(config.min_object_side, cell_w - 2);
    const std::size_t obj_h = oh(rng), obj_w = ow(rng);
    const std::size_t r0 = top + 1 + std::uniform_int_distribution<std::size_t>(0, cell_h - 2 - obj_h)(rng);
    const std::size_t c0 = left + 1 + std::uniform_int_distribution<std::size_t>(0, cell_w - 2 - obj_w)(rng);

    BinaryMask mask(h, w);
    const double cy = static_cast<double>(r0) + obj_h / 2.0;
    const double cx = static_cast<double>(c0) + obj_w / 2.0;
    for (std::size_t r = r0; r < r0 + obj_h; ++r) {
      for (std::size_t c = c0; c < c0 + obj_w; ++c) {
        if (ellipse) {
          const double dy = (r + 0.5 - cy) / (obj_h / 2.0);
          const double dx = (c + 0.5 - cx) / (obj_w / 2.0);
          if (dy * dy + dx * dx > 1.0) continue;
        }
        mask.set(r, c);
      }
    }

    const double contrast =
        std::uniform_real_distribution<double>(config.min_contrast, 1.0)(rng);
    std::vector<double> appearance(n);
    for (std::size_t f = 0; f < n; ++f) {
      appearance[f] =
          contrast * config.class_signal * prototypes[static_cast<std::size_t>(cls) * n + f] +
          config.appearance_noise * normal(rng);
    }
    for (std::size_t i = 0; i < h * w; ++i) {
      if (!mask[i]) continue;
      scene.fg[i] += contrast * config.fg_signal;
      for (std::size_t f = 0; f < n; ++f) scene.class_features[i * n + f] += appearance[f];
    }
    scene.instances.push_back({cls, std::move(mask)});
    scene.instance_cells.push_back(cell);
    scene.instance_contrast.push_back(contrast);
  }

  for (auto& v : scene.fg) v += config.pixel_noise * normal(rng);
  for (auto& v : scene.class_features) v += config.pixel_noise * normal(rng);
  return scene;
}

// ---------------------------------------------------------------------------
// Views

void NoiseChannel::validate() const {
  PLDC_CHECK(std::isfinite(logit_noise_stddev) && logit_noise_stddev >= 0.0,
             "noise stddev must be finite and >= 0");
  PLDC_CHECK(class_confusion_rate >= 0.0 && class_confusion_rate <= 1.0,
             "class confusion rate must lie in [0, 1]");
  PLDC_CHECK(dropout_rate >= 0.0 && dropout_rate <= 1.0, "dropout rate must lie in [0, 1]");
}

void validate_channel_pair(const NoiseChannel& weak, const NoiseChannel& strong) {
  weak.validate();
  strong.validate();
  PLDC_CHECK(strong.logit_noise_stddev >= weak.logit_noise_stddev &&
                 strong.class_confusion_rate >= weak.class_confusion_rate &&
                 strong.dropout_rate >= weak.dropout_rate,
             "strong channel parameters must be >= weak channel parameters");
}

NoiseChannel default_weak_channel() { return {ChannelKind::kWeak, 0.2, 0.0, 0.0}; }
NoiseChannel default_strong_channel() { return {ChannelKind::kStrong, 0.5, 0.05, 0.1}; }

SceneView render_view(const SyntheticScene& scene, const NoiseChannel& channel,
                      std::mt19937_64& rng) {
  channel.validate();
  const auto& cfg = scene.config;
  const std::size_t h = cfg.height, w = cfg.width, n = cfg.num_classes;
  const std::size_t hw = h * w;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto prototypes = class_prototypes(cfg);

  std::vector<double> fg = scene.fg;
  std::vector<double> cls = scene.class_features;
  for (std::size_t k = 0; k < scene.instances.size(); ++k) {
    const auto& inst = scene.instances[k];
    const double u_drop = unit(rng);
    const double u_conf = unit(rng);
    const std::size_t shift = n > 1 ? std::uniform_int_distribution<std::size_t>(1, n - 1)(rng) : 0;
    const auto true_cls = static_cast<std::size_t>(inst.class_id);
    const double fg_signal = scene.instance_contrast[k] * cfg.fg_signal;
    const double class_signal = scene.instance_contrast[k] * cfg.class_signal;
    if (u_drop < channel.dropout_rate) {
      // Cut-out: the object's signal is removed, its appearance offset stays.
      for (std::size_t i = 0; i < hw; ++i) {
        if (!inst.mask[i]) continue;
        fg[i] -= fg_signal;
        for (std::size_t f = 0; f < n; ++f) {
          cls[i * n + f] -= class_signal * prototypes[true_cls * n + f];
        }
      }
    } else if (n > 1 && u_conf < channel.class_confusion_rate) {
      const std::size_t other = (true_cls + shift) % n;
      for (std::size_t i = 0; i < hw; ++i) {
        if (!inst.mask[i]) continue;
        for (std::size_t f = 0; f < n; ++f) {
          cls[i * n + f] +=
              class_signal * (prototypes[other * n + f] - prototypes[true_cls * n + f]);
        }
      }
    }
  }
  for (auto& v : fg) v += channel.logit_noise_stddev * normal(rng);
  for (auto& v : cls) v += channel.logit_noise_stddev * normal(rng);

  // Per-view standardization of the foreground channel.
  const double fg_mean = std::accumulate(fg.begin(), fg.end(), 0.0) / static_cast<double>(hw);
  double fg_var = 0.0;
  for (const double v : fg) fg_var += (v - fg_mean) * (v - fg_mean);
  const double fg_sd = std::sqrt(fg_var / static_cast<double>(hw));
  for (auto& v : fg) v = fg_sd > 1e-12 ? (v - fg_mean) / fg_sd : 0.0;

  std::vector<double> smooth(hw, 0.0);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      double sum = 0.0;
      int count = 0;
      for (std::size_t rr = (r == 0 ? 0 : r - 1); rr <= std::min(h - 1, r + 1); ++rr) {
        for (std::size_t cc = (c == 0 ? 0 : c - 1); cc <= std::min(w - 1, c + 1); ++cc) {
          sum += fg[rr * w + cc];
          ++count;
        }
      }
      smooth[r * w + c] = sum / count;
    }
  }

  const std::size_t q = cfg.num_queries();
  const std::size_t cell_h = h / cfg.cells_per_side, cell_w = w / cfg.cells_per_side;
  SceneView view;
  view.mask_features = FeatureTensor(q, h, w, kMaskFeatureDim);
  view.pooled_class_features.assign(q, std::vector<double>(n, 0.0));
  for (std::size_t k = 0; k < q; ++k) {
    const std::size_t top = (k / cfg.cells_per_side) * cell_h;
    const std::size_t left = (k % cfg.cells_per_side) * cell_w;
    for (std::size_t i = 0; i < hw; ++i) {
      const std::size_t r = i / w, c = i % w;
      const bool inside = r >= top && r < top + cell_h && c >= left && c < left + cell_w;
      auto x = view.mask_features.at(k, i);
      const double gate = inside ? 1.0 : 0.0;
      x[0] = 1.0;
      x[1] = gate;
      x[2] = gate * fg[i];
      x[3] = gate * smooth[i];
    }
    double weight_total = 0.0;
    std::vector<double> pooled(n, 0.0), plain(n, 0.0);
    for (std::size_t r = top; r < top + cell_h; ++r) {
      for (std::size_t c = left; c < left + cell_w; ++c) {
        const std::size_t i = r * w + c;
        const double weight = std::max(smooth[i], 0.0);
        weight_total += weight;
        for (std::size_t f = 0; f < n; ++f) {
          pooled[f] += weight * cls[i * n + f];
          plain[f] += cls[i * n + f];
        }
      }
    }
    for (std::size_t f = 0; f < n; ++f) {
      view.pooled_class_features[k][f] = weight_total > 1e-12
                                             ? pooled[f] / weight_total
                                             : plain[f] / static_cast<double>(cell_h * cell_w);
    }
  }
  return view;
}

// ---------------------------------------------------------------------------
// Model

ToySegmenter::ToySegmenter(std::size_t num_classes)
    : num_classes_(num_classes),
      params_(kMaskFeatureDim + num_classes * (num_classes + 1), 0.0) {
  PLDC_CHECK(num_classes >= 1, "toy segmenter needs at least one class");
}

ToySegmenter::ToySegmenter(std::size_t num_classes, std::vector<double> parameters)
    : num_classes_(num_classes), params_(std::move(parameters)) {
  PLDC_CHECK(num_classes >= 1, "toy segmenter needs at least one class");
  PLDC_CHECK(params_.size() == kMaskFeatureDim + num_classes * (num_classes + 1),
             "toy segmenter parameter vector has the wrong length");
  for (const double v : params_) PLDC_CHECK(std::isfinite(v), "parameters must be finite");
}

ToySegmenter ToySegmenter::initialize(std::size_t num_classes, std::uint64_t seed) {
  ToySegmenter m(num_classes);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.01);
  for (auto& v : m.params_) v = normal(rng);
  m.params_[0] -= kWindowPrior;
  m.params_[1] += kWindowPrior;
  return m;
}

LinearPixelModel ToySegmenter::mask_head() const {
  return LinearPixelModel(
      std::vector<double>(params_.begin(), params_.begin() + kMaskFeatureDim));
}

namespace {

std::vector<double> class_logits_for(std::span<const double> params, std::size_t n,
                                     std::span<const double> pooled) {
  std::vector<double> z(n, 0.0);
  const double* w = params.data() + kMaskFeatureDim;
  for (std::size_t r = 0; r < n; ++r) {
    const double* row = w + r * (n + 1);
    double acc = row[n];
    for (std::size_t f = 0; f < n; ++f) acc += row[f] * pooled[f];
    if (!std::isfinite(acc)) throw NumericalError("class logit overflowed");
    z[r] = acc;
  }
  return z;
}

}  // namespace

std::vector<InstancePrediction> ToySegmenter::predict(const SceneView& view) const {
  const auto head = mask_head();
  auto masks = head.predict(view.mask_features);
  std::vector<InstancePrediction> out;
  out.reserve(masks.size());
  for (std::size_t k = 0; k < masks.size(); ++k) {
    out.push_back({ClassLogits(class_logits_for(params_, num_classes_,
                                                view.pooled_class_features[k])),
                   std::move(masks[k])});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Objectives

namespace {

enum class Normalization { kPerMatchedInstance, kPerQueryPixel };

// Shared loss/gradient kernel. Targets carry uncertainty (zero for supervised
// data). With kPerMatchedInstance the mask BCE is averaged per instance and
// then over matched pairs; with kPerQueryPixel it is the PMUA sum divided by
// Q*H*W. Class CE and dice are always averaged over matched pairs.
double objective_kernel(const ToySegmenter& model, const SceneView& view,
                        std::span<const PseudoLabel> targets, const MatchResult& match,
                        Normalization norm, bool class_term, bool dice, LossTerms* terms,
                        std::vector<double>* grad) {
  const auto params = model.parameters();
  const std::size_t n = model.num_classes();
  const auto& feats = view.mask_features;
  const std::size_t q = feats.instances();
  const std::size_t hw = feats.pixels();
  if (grad) grad->assign(params.size(), 0.0);
  double cls_total = 0.0, mask_total = 0.0;
  if (match.pairs.empty() || q == 0) {
    if (terms) terms->classification = terms->mask = 0.0;
    return 0.0;
  }
  const double matched = static_cast<double>(match.pairs.size());
  const double bce_scale = norm == Normalization::kPerMatchedInstance
                               ? 1.0 / (static_cast<double>(hw) * matched)
                               : 1.0 / (static_cast<double>(q) * static_cast<double>(hw));
  const auto theta = params.subspan(0, kMaskFeatureDim);

  for (const auto& [k, j] : match.pairs) {
    const auto& target = targets[j];
    // Class head.
    if (class_term) {
      const auto& pooled = view.pooled_class_features[k];
      const auto probs = softmax(class_logits_for(params, n, pooled));
      const auto c = static_cast<std::size_t>(target.class_id);
      PLDC_CHECK(c < n, "target class outside the model's classes");
      cls_total -= std::log(std::max(probs[c], kProbEpsilon));
      if (grad && probs[c] > kProbEpsilon) {
        double* gw = grad->data() + kMaskFeatureDim;
        for (std::size_t r = 0; r < n; ++r) {
          const double g = (probs[r] - (r == c ? 1.0 : 0.0)) / matched;
          for (std::size_t f = 0; f < n; ++f) gw[r * (n + 1) + f] += g * pooled[f];
          gw[r * (n + 1) + n] += g;
        }
      }
    }

    // Mask head: BCE (optionally uncertainty weighted) and dice.
    std::vector<double> t(hw);
    double inter = 0.0, sum_t = 0.0, sum_m = 0.0;
    for (std::size_t i = 0; i < hw; ++i) {
      double z = 0.0;
      const auto x = feats.at(k, i);
      for (std::size_t d = 0; d < kMaskFeatureDim; ++d) z += theta[d] * x[d];
      t[i] = sigmoid(z);
      const double m = target.mask[i] ? 1.0 : 0.0;
      inter += t[i] * m;
      sum_t += t[i];
      sum_m += m;
      const double weight = 1.0 - target.uncertainty[i];
      if (weight == 0.0) continue;
      const double tc = std::clamp(t[i], kProbEpsilon, 1.0 - kProbEpsilon);
      mask_total -= bce_scale * weight * (m > 0.0 ? std::log(tc) : std::log(1.0 - tc));
      if (grad && t[i] == tc) {
        const double dz = bce_scale * weight * (t[i] - m);
        for (std::size_t d = 0; d < kMaskFeatureDim; ++d) (*grad)[d] += dz * x[d];
      }
    }
    if (dice) {
      const double num = 2.0 * inter + 1.0;
      const double den = sum_t + sum_m + 1.0;
      mask_total += (1.0 - num / den) / matched;
      if (grad) {
        for (std::size_t i = 0; i < hw; ++i) {
          const double m = target.mask[i] ? 1.0 : 0.0;
          const double dd_dt = -(2.0 * m * den - num) / (den * den);
          const double dz = dd_dt * t[i] * (1.0 - t[i]) / matched;
          const auto x = feats.at(k, i);
          for (std::size_t d = 0; d < kMaskFeatureDim; ++d) (*grad)[d] += dz * x[d];
        }
      }
    }
  }
  cls_total /= matched;
  if (terms) {
    terms->classification = cls_total;
    terms->mask = mask_total;
  }
  return cls_total + mask_total;
}

std::vector<PseudoLabel> as_targets(std::span<const GroundTruthInstance> gts) {
  std::vector<PseudoLabel> out;
  out.reserve(gts.size());
  for (const auto& g : gts) {
    out.push_back({g.class_id, g.mask,
                   UncertaintyMap::filled(g.mask.height(), g.mask.width(), 0.0)});
  }
  return out;
}

}  // namespace

ObjectiveTerms supervised_objective(const ToySegmenter& model, const SceneView& view,
                                    std::span<const GroundTruthInstance> targets,
                                    const LossConfig& config) {
  config.validate();
  ObjectiveTerms out;
  const auto preds = model.predict(view);
  if (!targets.empty()) {
    out.terms.match = hungarian(build_cost_matrix(preds, targets, config.cost_weights));
  }
  const auto pl = as_targets(targets);
  objective_kernel(model, view, pl, out.terms.match, Normalization::kPerMatchedInstance, true,
                   config.dice_enabled, &out.terms, &out.gradient);
  return out;
}

ObjectiveTerms unsupervised_objective(const ToySegmenter& model, const SceneView& view,
                                      std::span<const PseudoLabel> targets,
                                      const LossConfig& config) {
  config.validate();
  ObjectiveTerms out;
  const auto preds = model.predict(view);
  if (!targets.empty()) {
    out.terms.match = hungarian(build_cost_matrix(preds, targets, config.cost_weights));
  }
  objective_kernel(model, view, targets, out.terms.match, Normalization::kPerQueryPixel,
                   config.unsup_class_loss, config.dice_enabled, &out.terms, &out.gradient);
  return out;
}

double supervised_objective_value(const ToySegmenter& model, const SceneView& view,
                                  std::span<const GroundTruthInstance> targets,
                                  const LossConfig& config, const MatchResult& match) {
  const auto pl = as_targets(targets);
  return objective_kernel(model, view, pl, match, Normalization::kPerMatchedInstance, true,
                          config.dice_enabled, nullptr, nullptr);
}

double unsupervised_objective_value(const ToySegmenter& model, const SceneView& view,
                                    std::span<const PseudoLabel> targets,
                                    const LossConfig& config, const MatchResult& match) {
  return objective_kernel(model, view, targets, match, Normalization::kPerQueryPixel,
                          config.unsup_class_loss, config.dice_enabled, nullptr, nullptr);
}

// ---------------------------------------------------------------------------
// EMA and schedules

void EmaConfig::validate() const {
  PLDC_CHECK(alpha >= 0.0 && alpha <= 1.0, "EMA alpha must lie in [0, 1]");
}

void ema_update(std::span<double> teacher, std::span<const double> student, double alpha) {
  PLDC_CHECK(teacher.size() == student.size(), "EMA: teacher and student sizes differ");
  PLDC_CHECK(alpha >= 0.0 && alpha <= 1.0, "EMA alpha must lie in [0, 1]");
  for (std::size_t i = 0; i < teacher.size(); ++i) {
    teacher[i] = alpha * teacher[i] + (1.0 - alpha) * student[i];
  }
}

void TrainSchedule::validate() const {
  PLDC_CHECK(burn_in_iters >= 1, "burn_in_iters must be >= 1");
  PLDC_CHECK(max_iters > burn_in_iters, "max_iters must exceed burn_in_iters");
  PLDC_CHECK(labeled_batch >= 1 && unlabeled_batch >= 1, "batch sizes must be >= 1");
  PLDC_CHECK(std::isfinite(learning_rate) && learning_rate > 0.0,
             "learning rate must be positive");
}

namespace {

std::vector<std::size_t> draw_batch(std::size_t population, std::size_t batch,
                                    std::mt19937_64& rng) {
  std::vector<std::size_t> idx(population);
  std::iota(idx.begin(), idx.end(), 0);
  if (batch >= population) return idx;
  // Partial Fisher-Yates; keeps draws independent of the library's shuffle.
  for (std::size_t i = 0; i < batch; ++i) {
    const std::size_t j = std::uniform_int_distribution<std::size_t>(i, population - 1)(rng);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(batch);
  return idx;
}

void require_finite(double value, const std::string& what, std::int64_t iteration) {
  if (!std::isfinite(value)) {
    throw NumericalError(what + " became non-finite at iteration " + std::to_string(iteration));
  }
}

void sgd_step(std::vector<double>& params, std::span<const double> grad, double lr,
              std::int64_t iteration) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i] -= lr * grad[i];
    require_finite(params[i], "parameter " + std::to_string(i), iteration);
  }
}

}  // namespace

BurnInResult run_burn_in(const ToySegmenter& init, std::span<const SyntheticScene> labeled,
                         const NoiseChannel& view_channel, const LossConfig& loss,
                         const TrainSchedule& schedule) {
  schedule.validate();
  loss.validate();
  PLDC_CHECK(!labeled.empty(), "burn-in needs labeled scenes");
  std::mt19937_64 rng(derive_seed(schedule.seed, 1, 0));
  BurnInResult out;
  out.teacher = init;
  auto& params = out.teacher.mutable_parameters();
  std::vector<double> grad(params.size());
  for (std::int64_t it = 0; it < schedule.burn_in_iters; ++it) {
    const auto batch = draw_batch(labeled.size(), schedule.labeled_batch, rng);
    std::fill(grad.begin(), grad.end(), 0.0);
    double value = 0.0;
    for (const auto s : batch) {
      const auto view = render_view(labeled[s], view_channel, rng);
      const auto obj = supervised_objective(out.teacher, view, labeled[s].instances, loss);
      value += obj.terms.total() / static_cast<double>(batch.size());
      for (std::size_t d = 0; d < grad.size(); ++d) {
        grad[d] += obj.gradient[d] / static_cast<double>(batch.size());
      }
    }
    require_finite(value, "burn-in supervised loss", it);
    out.loss_history.push_back(value);
    sgd_step(params, grad, schedule.learning_rate, it);
  }
  return out;
}

void PipelineConfig::validate() const {
  filter.validate();
  loss.validate();
  ema.validate();
  validate_channel_pair(weak, strong);
  if (correction_enabled) mock.validate();
}

PseudoLabelBatch make_pseudo_labels(std::span<const InstancePrediction> teacher_predictions,
                                    const SyntheticScene& scene, const PipelineConfig& config,
                                    const ExternalClassifier* external, double fusion_w,
                                    const std::string& id_prefix) {
  PseudoLabelBatch out;
  out.filtered = filter_predictions(teacher_predictions, config.filter);
  const std::size_t n = scene.config.num_classes;
  std::vector<char> covered(scene.instances.size(), 0);
  for (const auto& kept : out.filtered.kept) {
    const auto& pred = teacher_predictions[kept.index];
    PseudoLabel pl;
    pl.mask = binarize(pred.mask_logits);

    // Ground truth is consulted only for the mock's subject and for logging.
    double best_iou = 0.0;
    std::size_t best_gt = 0;
    for (std::size_t g = 0; g < scene.instances.size(); ++g) {
      const double iou = mask_iou(pl.mask, scene.instances[g].mask);
      if (iou > best_iou) {
        best_iou = iou;
        best_gt = g;
      }
    }

    const auto teacher_dist = Distribution::from_logits(pred.class_logits);
    std::size_t cls = teacher_dist.argmax();
    if (config.correction_enabled && external != nullptr) {
      ExternalClassifierQuery query;
      query.instance_id = id_prefix + "_q" + std::to_string(kept.index);
      query.num_classes = n;
      query.mask = &pl.mask;
      if (best_iou > 0.0) query.subject_class = scene.instances[best_gt].class_id;
      const auto response = external->classify(query);
      const auto corrected = correct_with_weight(teacher_dist, response, fusion_w);
      if (corrected.class_id != cls) ++out.corrected;
      cls = corrected.class_id;
    }
    pl.class_id = static_cast<int>(cls);
    pl.uncertainty = config.uncertainty_enabled
                         ? uncertainty_map(pred.mask_logits)
                         : UncertaintyMap::filled(pl.mask.height(), pl.mask.width(), 0.0);

    if (best_iou > 0.5 && scene.instances[best_gt].class_id == pl.class_id) {
      ++out.true_positive;
      covered[best_gt] = 1;
    }
    out.labels.push_back(std::move(pl));
  }
  out.gt_covered = static_cast<std::size_t>(std::count(covered.begin(), covered.end(), 1));
  return out;
}

MutualLearningResult run_mutual_learning(const ToySegmenter& teacher,
                                         const ToySegmenter& student,
                                         std::span<const SyntheticScene> labeled,
                                         std::span<const SyntheticScene> unlabeled,
                                         const PipelineConfig& config,
                                         const TrainSchedule& schedule,
                                         const ExternalClassifier& external) {
  schedule.validate();
  config.validate();
  PLDC_CHECK(!labeled.empty() && !unlabeled.empty(),
             "mutual learning needs labeled and unlabeled scenes");
  PLDC_CHECK(teacher.parameters().size() == student.parameters().size(),
             "teacher and student must share a shape");

  MutualLearningResult out;
  out.teacher = teacher;
  out.student = student;
  std::mt19937_64 rng(derive_seed(schedule.seed, 2, 0));
  const std::int64_t span = schedule.max_iters - schedule.burn_in_iters;
  const double lambda = config.loss.lambda;
  auto& student_params = out.student.mutable_parameters();
  std::vector<double> grad(student_params.size());

  for (std::int64_t it = schedule.burn_in_iters; it < schedule.max_iters; ++it) {
    IterationLog log;
    log.iteration = it;
    log.fusion_weight = fusion_weight({it - schedule.burn_in_iters, span});
    std::fill(grad.begin(), grad.end(), 0.0);

    const auto lb = draw_batch(labeled.size(), schedule.labeled_batch, rng);
    for (const auto s : lb) {
      const auto view = render_view(labeled[s], config.strong, rng);
      const auto obj = supervised_objective(out.student, view, labeled[s].instances, config.loss);
      const double scale = 1.0 / static_cast<double>(lb.size());
      log.sup_cls += scale * obj.terms.classification;
      log.sup_mask += scale * obj.terms.mask;
      for (std::size_t d = 0; d < grad.size(); ++d) grad[d] += scale * obj.gradient[d];
    }

    const auto ub = draw_batch(unlabeled.size(), schedule.unlabeled_batch, rng);
    for (const auto s : ub) {
      const auto& scene = unlabeled[s];
      const auto weak_view = render_view(scene, config.weak, rng);
      const auto strong_view = render_view(scene, config.strong, rng);
      const auto teacher_preds = out.teacher.predict(weak_view);
      auto batch = make_pseudo_labels(teacher_preds, scene, config, &external, log.fusion_weight,
                                      "it" + std::to_string(it) + "_s" + std::to_string(scene.id));
      log.kept += batch.filtered.kept.size();
      log.rejected += batch.filtered.rejected.size();
      log.corrected += batch.corrected;
      log.true_positive += batch.true_positive;
      log.gt_covered += batch.gt_covered;
      log.gt_instances += scene.instances.size();
      if (batch.labels.empty()) continue;
      const auto obj = unsupervised_objective(out.student, strong_view, batch.labels, config.loss);
      const double scale = 1.0 / static_cast<double>(ub.size());
      log.unsup_cls += scale * obj.terms.classification;
      log.unsup_mask += scale * obj.terms.mask;
      for (std::size_t d = 0; d < grad.size(); ++d) grad[d] += lambda * scale * obj.gradient[d];
    }

    log.total = total_loss(log.sup_cls + log.sup_mask, log.unsup_cls + log.unsup_mask, lambda);
    require_finite(log.total, "total loss", it);
    log.precision = log.kept == 0 ? nan()
                                  : static_cast<double>(log.true_positive) /
                                        static_cast<double>(log.kept);
    log.recall = log.gt_instances == 0 ? nan()
                                       : static_cast<double>(log.gt_covered) /
                                             static_cast<double>(log.gt_instances);

    sgd_step(student_params, grad, schedule.learning_rate, it);
    ema_update(out.teacher.mutable_parameters(), out.student.parameters(), config.ema.alpha);
    out.log.push_back(log);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic teacher noise

std::vector<InstancePrediction> corrupt_predictions(const SyntheticScene& scene,
                                                    const NoiseChannel& channel,
                                                    std::uint64_t seed) {
  channel.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t n = scene.config.num_classes;
  const double s = channel.logit_noise_stddev;
  std::vector<InstancePrediction> out;
  for (const auto& gt : scene.instances) {
    const double u_drop = unit(rng);
    const double u_conf = unit(rng);
    const std::size_t shift = n > 1 ? std::uniform_int_distribution<std::size_t>(1, n - 1)(rng) : 0;
    std::size_t cls = static_cast<std::size_t>(gt.class_id);
    if (n > 1 && u_conf < channel.class_confusion_rate) cls = (cls + shift) % n;

    std::vector<double> class_logits(n);
    for (std::size_t c = 0; c < n; ++c) {
      class_logits[c] = (c == cls ? kCorruptLogitScale : 0.0) + s * normal(rng);
    }
    std::vector<double> mask_logits(gt.mask.pixel_count());
    for (std::size_t i = 0; i < mask_logits.size(); ++i) {
      mask_logits[i] = (gt.mask[i] ? kCorruptLogitScale : -kCorruptLogitScale) + s * normal(rng);
    }
    if (u_drop < channel.dropout_rate) continue;
    out.push_back({ClassLogits(std::move(class_logits)),
                   MaskLogitGrid(gt.mask.height(), gt.mask.width(), std::move(mask_logits))});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation and the full benchmark

EvaluationMetrics evaluate_model(const ToySegmenter& model, std::span<const SyntheticScene> scenes) {
  EvaluationMetrics metrics;
  if (scenes.empty()) return metrics;
  const std::size_t n = model.num_classes();
  MeanIou miou(n + 1);
  std::vector<ImageDetections> detections;
  const NoiseChannel clean{};
  for (const auto& scene : scenes) {
    std::mt19937_64 rng(0);
    const auto view = render_view(scene, clean, rng);
    const auto preds = model.predict(view);
    const std::size_t hw = scene.config.height * scene.config.width;

    std::vector<int> truth(hw, static_cast<int>(n));
    for (const auto& gt : scene.instances) {
      for (std::size_t i = 0; i < hw; ++i) {
        if (gt.mask[i]) truth[i] = gt.class_id;
      }
    }
    std::vector<int> predicted(hw, static_cast<int>(n));
    std::vector<double> best_logit(hw, 0.0);
    for (const auto& p : preds) {
      const int cls = static_cast<int>(argmax(p.class_logits.values()));
      for (std::size_t i = 0; i < hw; ++i) {
        // sigmoid(z) > 0.5 iff z > 0.
        if (p.mask_logits[i] > best_logit[i]) {
          best_logit[i] = p.mask_logits[i];
          predicted[i] = cls;
        }
      }
    }
    miou.add(predicted, truth);

    ImageDetections img;
    img.ground_truth = scene.instances;
    for (const auto& e : to_eval_instances(preds)) {
      if (!e.mask.empty()) img.predictions.push_back(e);
    }
    detections.push_back(std::move(img));
  }
  metrics.miou = miou.value();
  metrics.pixel_accuracy = miou.pixel_accuracy();
  metrics.ap50 = simplified_ap(detections, 0.5);
  return metrics;
}

void BenchmarkConfig::validate() const {
  scene.validate();
  PipelineConfig p = pipeline;
  p.mock.num_classes = scene.num_classes;
  p.validate();
  schedule.validate();
  PLDC_CHECK(labeled_scenes >= 1 && unlabeled_scenes >= 1 && test_scenes >= 1,
             "benchmark needs labeled, unlabeled and test scenes");
}

BenchmarkResult run_benchmark(const BenchmarkConfig& config, std::uint64_t seed) {
  config.validate();
  auto make_scenes = [&](std::uint64_t stream, std::size_t count) {
    std::vector<SyntheticScene> scenes;
    scenes.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      scenes.push_back(generate_scene(derive_seed(seed, stream, i), config.scene));
    }
    return scenes;
  };
  const auto labeled = make_scenes(10, config.labeled_scenes);
  const auto unlabeled = make_scenes(11, config.unlabeled_scenes);
  const auto test = make_scenes(12, config.test_scenes);

  TrainSchedule schedule = config.schedule;
  schedule.seed = derive_seed(seed, 13, config.schedule.seed);
  const auto init = ToySegmenter::initialize(config.scene.num_classes, derive_seed(seed, 14, 0));
  const auto burn = run_burn_in(init, labeled, config.pipeline.strong, config.pipeline.loss,
                                schedule);

  MockClassifierConfig mock = config.pipeline.mock;
  mock.num_classes = config.scene.num_classes;
  mock.seed = derive_seed(seed, 15, mock.seed);
  const MockExternalClassifier external(mock);
  PipelineConfig pipeline = config.pipeline;
  pipeline.mock = mock;

  BenchmarkResult result;
  result.training =
      run_mutual_learning(burn.teacher, burn.teacher, labeled, unlabeled, pipeline, schedule,
                          external);
  result.burn_in = evaluate_model(burn.teacher, test);
  result.teacher = evaluate_model(result.training.teacher, test);
  result.student = evaluate_model(result.training.student, test);

  std::size_t kept = 0, tp = 0, gt = 0, covered = 0;
  for (const auto& log : result.training.log) {
    kept += log.kept;
    tp += log.true_positive;
    gt += log.gt_instances;
    covered += log.gt_covered;
  }
  result.mean_precision = kept == 0 ? nan() : static_cast<double>(tp) / static_cast<double>(kept);
  result.mean_recall = gt == 0 ? nan() : static_cast<double>(covered) / static_cast<double>(gt);
  return result;
}

}  // namespace pldc
