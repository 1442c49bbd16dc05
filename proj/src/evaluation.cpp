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

#include "pldc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

#include "pldc/error.hpp"

namespace pldc {

EvalInstance to_eval_instance(const InstancePrediction& prediction) {
  EvalInstance e;
  e.class_id = static_cast<int>(argmax(prediction.class_logits.values()));
  e.mask = binarize(prediction.mask_logits);
  e.score = score_instance(prediction).coupled_score;
  return e;
}

std::vector<EvalInstance> to_eval_instances(std::span<const InstancePrediction> predictions) {
  std::vector<EvalInstance> out;
  out.reserve(predictions.size());
  for (const auto& p : predictions) out.push_back(to_eval_instance(p));
  return out;
}

std::string_view to_string(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kCor:
      return "Cor";
    case ErrorCategory::kLoc:
      return "Loc";
    case ErrorCategory::kSim:
      return "Sim";
    case ErrorCategory::kOth:
      return "Oth";
    case ErrorCategory::kBG:
      return "BG";
  }
  return "?";
}

void Taxonomy::validate(std::size_t num_classes) const {
  PLDC_CHECK(superclass.size() >= num_classes,
             "taxonomy maps " + std::to_string(superclass.size()) + " classes, need " +
                 std::to_string(num_classes));
}

Taxonomy Taxonomy::identity(std::size_t num_classes) {
  Taxonomy t;
  t.superclass.resize(num_classes);
  std::iota(t.superclass.begin(), t.superclass.end(), 0);
  return t;
}

ErrorReport categorize_errors(std::span<const EvalInstance> predictions,
                              std::span<const GroundTruthInstance> ground_truth,
                              const Taxonomy& taxonomy, double iou_threshold) {
  ErrorReport report;
  report.categories.reserve(predictions.size());
  auto superclass_of = [&](int cls) {
    PLDC_CHECK(cls >= 0 && static_cast<std::size_t>(cls) < taxonomy.superclass.size(),
               "missing taxonomy entry for class " + std::to_string(cls));
    return taxonomy.superclass[static_cast<std::size_t>(cls)];
  };

  for (const auto& pred : predictions) {
    bool cor = false, sim = false, oth = false, loc = false, any_overlap = false;
    for (const auto& gt : ground_truth) {
      const double iou = mask_iou(pred.mask, gt.mask);
      if (iou <= 0.0) continue;
      any_overlap = true;
      const bool same_class = pred.class_id == gt.class_id;
      if (iou > iou_threshold) {
        if (same_class) {
          cor = true;
        } else if (superclass_of(pred.class_id) == superclass_of(gt.class_id)) {
          sim = true;
        } else {
          oth = true;
        }
      } else if (same_class) {
        loc = true;
      }
    }
    ErrorCategory cat = ErrorCategory::kBG;
    if (cor) {
      cat = ErrorCategory::kCor;
    } else if (sim) {
      cat = ErrorCategory::kSim;
    } else if (oth) {
      cat = ErrorCategory::kOth;
    } else if (loc) {
      cat = ErrorCategory::kLoc;
    } else if (any_overlap) {
      cat = ErrorCategory::kOth;
    }
    report.categories.push_back(cat);
    ++report.histogram[static_cast<std::size_t>(cat)];
  }
  return report;
}

std::size_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::size_t{0});
}

ConfusionMatrix confusion_matrix(std::span<const EvalInstance> predictions,
                                 std::span<const GroundTruthInstance> ground_truth,
                                 std::size_t num_classes, double iou_threshold) {
  ConfusionMatrix cm(num_classes);
  auto check_class = [&](int cls) {
    PLDC_CHECK(cls >= 0 && static_cast<std::size_t>(cls) < num_classes,
               "class id " + std::to_string(cls) + " outside [0, " +
                   std::to_string(num_classes) + ")");
    return static_cast<std::size_t>(cls);
  };

  std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
  for (std::size_t p = 0; p < predictions.size(); ++p) {
    for (std::size_t g = 0; g < ground_truth.size(); ++g) {
      const double iou = mask_iou(predictions[p].mask, ground_truth[g].mask);
      if (iou > iou_threshold) pairs.emplace_back(iou, p, g);
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const auto& a, const auto& b) { return std::get<0>(a) > std::get<0>(b); });

  std::vector<char> pred_used(predictions.size(), 0), gt_used(ground_truth.size(), 0);
  for (const auto& [iou, p, g] : pairs) {
    if (pred_used[p] || gt_used[g]) continue;
    pred_used[p] = gt_used[g] = 1;
    cm.add(check_class(ground_truth[g].class_id), check_class(predictions[p].class_id));
  }
  for (std::size_t g = 0; g < ground_truth.size(); ++g) {
    if (!gt_used[g]) cm.add(check_class(ground_truth[g].class_id), cm.background());
  }
  for (std::size_t p = 0; p < predictions.size(); ++p) {
    if (!pred_used[p]) cm.add(cm.background(), check_class(predictions[p].class_id));
  }
  return cm;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  PLDC_CHECK(x.size() == y.size(), "pearson: columns differ in length");
  const auto n = x.size();
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

ScoreIouTable score_iou_table(std::span<const InstancePrediction> predictions,
                              std::span<const GroundTruthInstance> ground_truth) {
  ScoreIouTable table;
  std::vector<double> s, c, m, iou;
  for (std::size_t k = 0; k < predictions.size(); ++k) {
    ScoreIouRow row;
    row.instance = k;
    row.scores = score_instance(predictions[k]);
    const auto mask = binarize(predictions[k].mask_logits);
    for (const auto& gt : ground_truth) row.best_iou = std::max(row.best_iou, mask_iou(mask, gt.mask));
    s.push_back(row.scores.coupled_score);
    c.push_back(row.scores.class_quality);
    m.push_back(row.scores.mask_quality);
    iou.push_back(row.best_iou);
    table.rows.push_back(row);
  }
  table.corr_score_iou = pearson(s, iou);
  table.corr_class_iou = pearson(c, iou);
  table.corr_mask_iou = pearson(m, iou);
  return table;
}

double simplified_ap(std::span<const ImageDetections> images, double iou_threshold) {
  struct Ranked {
    double score;
    std::size_t image;
    std::size_t index;
  };
  std::vector<Ranked> ranked;
  std::size_t total_gt = 0;
  for (std::size_t im = 0; im < images.size(); ++im) {
    total_gt += images[im].ground_truth.size();
    for (std::size_t p = 0; p < images[im].predictions.size(); ++p) {
      ranked.push_back({images[im].predictions[p].score, im, p});
    }
  }
  if (total_gt == 0) return 0.0;
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Ranked& a, const Ranked& b) { return a.score > b.score; });

  std::vector<std::vector<char>> used(images.size());
  for (std::size_t im = 0; im < images.size(); ++im) {
    used[im].assign(images[im].ground_truth.size(), 0);
  }
  std::vector<double> precision, recall;
  std::size_t tp = 0;
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    const auto& img = images[ranked[r].image];
    const auto& pred = img.predictions[ranked[r].index];
    double best = -1.0;
    std::size_t best_g = 0;
    for (std::size_t g = 0; g < img.ground_truth.size(); ++g) {
      if (used[ranked[r].image][g] || img.ground_truth[g].class_id != pred.class_id) continue;
      const double iou = mask_iou(pred.mask, img.ground_truth[g].mask);
      if (iou >= iou_threshold && iou > best) {
        best = iou;
        best_g = g;
      }
    }
    if (best >= 0.0) {
      used[ranked[r].image][best_g] = 1;
      ++tp;
    }
    precision.push_back(static_cast<double>(tp) / static_cast<double>(r + 1));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(total_gt));
  }
  // Precision envelope from the right.
  for (std::size_t i = precision.size(); i-- > 1;) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }
  double ap = 0.0;
  for (int step = 0; step <= 100; ++step) {
    const double r = step / 100.0;
    const auto it = std::lower_bound(recall.begin(), recall.end(), r);
    if (it != recall.end()) ap += precision[static_cast<std::size_t>(it - recall.begin())];
  }
  return ap / 101.0;
}

double simplified_ap(std::span<const EvalInstance> predictions,
                     std::span<const GroundTruthInstance> ground_truth, double iou_threshold) {
  ImageDetections img;
  img.predictions.assign(predictions.begin(), predictions.end());
  img.ground_truth.assign(ground_truth.begin(), ground_truth.end());
  return simplified_ap(std::span<const ImageDetections>(&img, 1), iou_threshold);
}

void MeanIou::add(std::span<const int> predicted, std::span<const int> truth) {
  PLDC_CHECK(predicted.size() == truth.size(), "label maps differ in size");
  const auto n = inter_.size();
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const auto p = static_cast<std::size_t>(predicted[i]);
    const auto t = static_cast<std::size_t>(truth[i]);
    PLDC_CHECK(p < n && t < n, "label outside the configured range");
    if (p == t) {
      ++inter_[p];
      ++uni_[p];
      ++correct_;
    } else {
      ++uni_[p];
      ++uni_[t];
    }
    ++total_;
  }
}

double MeanIou::value() const {
  double sum = 0.0;
  std::size_t labels = 0;
  for (std::size_t l = 0; l < inter_.size(); ++l) {
    if (uni_[l] == 0) continue;
    sum += static_cast<double>(inter_[l]) / static_cast<double>(uni_[l]);
    ++labels;
  }
  return labels == 0 ? 0.0 : sum / static_cast<double>(labels);
}

double MeanIou::pixel_accuracy() const {
  return total_ == 0 ? 0.0 : static_cast<double>(correct_) / static_cast<double>(total_);
}

}  // namespace pldc
