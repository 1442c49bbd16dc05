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

#include "pldc/correction.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "pldc/error.hpp"

namespace pldc {

namespace {

// FNV-1a, stable across platforms unlike std::hash.
std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

Distribution::Distribution(std::vector<double> probs) : probs_(std::move(probs)) {
  PLDC_CHECK(!probs_.empty(), "distribution must have at least one entry");
  double total = 0.0;
  for (const double p : probs_) {
    PLDC_CHECK(std::isfinite(p) && p >= 0.0, "distribution entries must be finite and >= 0");
    total += p;
  }
  PLDC_CHECK(std::abs(total - 1.0) <= kTolerance,
             "distribution sums to " + std::to_string(total) + ", expected 1");
}

Distribution Distribution::uniform(std::size_t n) {
  PLDC_CHECK(n >= 1, "uniform distribution needs n >= 1");
  return Distribution(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

Distribution Distribution::one_hot(std::size_t n, std::size_t index) {
  PLDC_CHECK(index < n, "one-hot index out of range");
  std::vector<double> p(n, 0.0);
  p[index] = 1.0;
  return Distribution(std::move(p));
}

Distribution Distribution::from_logits(const ClassLogits& logits) {
  return Distribution(softmax(logits));
}

std::size_t Distribution::argmax() const { return pldc::argmax(probs_); }

void FusionState::validate() const {
  PLDC_CHECK(it_max > 0, "fusion it_max must be positive");
  PLDC_CHECK(it_cur >= 0 && it_cur <= it_max, "fusion it_cur must lie in [0, it_max]");
}

double fusion_weight(const FusionState& state) {
  state.validate();
  const double ratio = static_cast<double>(state.it_cur) / static_cast<double>(state.it_max);
  return 0.25 * (std::cos(ratio * std::numbers::pi) + 1.0);
}

Distribution fuse(const Distribution& teacher, const Distribution& external, double w) {
  PLDC_CHECK(teacher.size() == external.size(),
             "fuse: teacher has " + std::to_string(teacher.size()) + " classes, external has " +
                 std::to_string(external.size()));
  PLDC_CHECK(w >= 0.0 && w <= 1.0, "fuse: weight must lie in [0, 1]");
  std::vector<double> out(teacher.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = w * external[i] + (1.0 - w) * teacher[i];
  }
  return Distribution(std::move(out));
}

CorrectionResult correct_with_weight(const Distribution& teacher, const Distribution& external,
                                     double w) {
  CorrectionResult r;
  r.weight = w;
  r.fused = fuse(teacher, external, w);
  r.class_id = r.fused.argmax();
  r.teacher_class = teacher.argmax();
  return r;
}

std::size_t correct_category(const Distribution& teacher, const Distribution& external,
                             const FusionState& state) {
  return correct_with_weight(teacher, external, fusion_weight(state)).class_id;
}

void MockClassifierConfig::validate() const {
  PLDC_CHECK(num_classes >= 1, "mock classifier needs num_classes >= 1");
  PLDC_CHECK(accuracy.size() == 1 || accuracy.size() == num_classes,
             "mock accuracy must have 1 or num_classes entries");
  for (const double a : accuracy) {
    PLDC_CHECK(a >= 0.0 && a <= 1.0, "mock accuracy must lie in [0, 1]");
  }
  if (confusion == ConfusionKind::kMatrix) {
    PLDC_CHECK(confusion_matrix.size() == num_classes * num_classes,
               "mock confusion matrix must be N x N");
    for (const double v : confusion_matrix) {
      PLDC_CHECK(std::isfinite(v) && v >= 0.0, "confusion weights must be finite and >= 0");
    }
  }
  PLDC_CHECK(jitter >= 0.0 && jitter <= 1.0, "mock jitter must lie in [0, 1]");
}

MockExternalClassifier::MockExternalClassifier(MockClassifierConfig config)
    : config_(std::move(config)) {
  config_.validate();
}

double MockExternalClassifier::accuracy_for(std::size_t cls) const {
  return config_.accuracy.size() == 1 ? config_.accuracy.front() : config_.accuracy[cls];
}

Distribution MockExternalClassifier::classify(const ExternalClassifierQuery& query) const {
  const std::size_t n = config_.num_classes;
  PLDC_CHECK(query.num_classes == n, "query vocabulary size does not match the mock classifier");
  if (!query.subject_class) return Distribution::uniform(n);
  const int subject = *query.subject_class;
  PLDC_CHECK(subject >= 0 && static_cast<std::size_t>(subject) < n,
             "unknown class id " + std::to_string(subject));
  const auto t = static_cast<std::size_t>(subject);
  const double a = accuracy_for(t);

  std::vector<double> p(n, 0.0);
  if (n == 1) {
    p[0] = 1.0;
  } else if (config_.confusion == ConfusionKind::kUniform) {
    const double head = std::max(a, 1.0 / static_cast<double>(n));
    const double rest = (1.0 - head) / static_cast<double>(n - 1);
    std::fill(p.begin(), p.end(), rest);
    p[t] = head;
  } else {
    double row_total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != t) row_total += config_.confusion_matrix[t * n + j];
    }
    p[t] = a;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == t) continue;
      // A row with no off-diagonal weight spreads the residual evenly.
      const double share = row_total > 0.0 ? config_.confusion_matrix[t * n + j] / row_total
                                           : 1.0 / static_cast<double>(n - 1);
      p[j] = (1.0 - a) * share;
    }
  }

  if (config_.jitter > 0.0) {
    std::mt19937_64 rng(config_.seed ^ fnv1a(query.instance_id));
    std::gamma_distribution<double> gamma(1.0, 1.0);
    std::vector<double> r(n);
    for (auto& v : r) v = gamma(rng);
    const double total = std::accumulate(r.begin(), r.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      p[j] = (1.0 - config_.jitter) * p[j] + config_.jitter * r[j] / total;
    }
  }
  return Distribution(std::move(p));
}

std::unique_ptr<ExternalClassifier> mock_external_classifier(MockClassifierConfig config) {
  return std::make_unique<MockExternalClassifier>(std::move(config));
}

PrecomputedClassifier::PrecomputedClassifier(std::size_t num_classes,
                                             std::map<std::string, Distribution> table)
    : num_classes_(num_classes), table_(std::move(table)) {
  for (const auto& [id, dist] : table_) {
    PLDC_CHECK(dist.size() == num_classes_,
               "precomputed distribution '" + id + "' has wrong length");
  }
}

Distribution PrecomputedClassifier::classify(const ExternalClassifierQuery& query) const {
  PLDC_CHECK(query.num_classes == num_classes_,
             "query vocabulary size does not match the precomputed table");
  const auto it = table_.find(query.instance_id);
  PLDC_CHECK(it != table_.end(), "no precomputed distribution for instance '" +
                                     query.instance_id + "'");
  return it->second;
}

}  // namespace pldc
