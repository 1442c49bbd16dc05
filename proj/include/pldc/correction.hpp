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

// Dynamic category correction of pseudo-labels.
//
// The teacher's class distribution is blended with the distribution returned
// by an external zero-shot classifier:
//
//   w   = 0.25 * (cos(pi * it_cur / it_max) + 1)        in [0, 0.5]
//   p_f = w * p_external + (1 - w) * p_teacher
//   c   = argmax p_f                                     (lowest index on ties)
//
// The external classifier is an interface. Implementations shipped here are a
// seeded mock with a configurable confusion kernel and a lookup table of
// precomputed distributions keyed by instance id.

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pldc/instance_model.hpp"

namespace pldc {

class Distribution {
 public:
  static constexpr double kTolerance = 1e-9;

  Distribution() = default;
  /// Throws ValidationError on negative entries or a sum off 1 by > 1e-9.
  explicit Distribution(std::vector<double> probs);
  static Distribution uniform(std::size_t n);
  static Distribution one_hot(std::size_t n, std::size_t index);
  static Distribution from_logits(const ClassLogits& logits);

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::span<const double> probs() const { return probs_; }
  std::size_t argmax() const;

  bool operator==(const Distribution&) const = default;

 private:
  std::vector<double> probs_;
};

struct FusionState {
  std::int64_t it_cur = 0;
  std::int64_t it_max = 1;

  void validate() const;
};

double fusion_weight(const FusionState& state);

/// w * external + (1 - w) * teacher. Accepts any w in [0, 1].
Distribution fuse(const Distribution& teacher, const Distribution& external, double w);

std::size_t correct_category(const Distribution& teacher, const Distribution& external,
                             const FusionState& state);

struct CorrectionResult {
  std::size_t class_id = 0;
  std::size_t teacher_class = 0;
  double weight = 0.0;
  Distribution fused;
};

CorrectionResult correct_with_weight(const Distribution& teacher, const Distribution& external,
                                     double w);

/// What the external classifier is asked about. The pixel content of the
/// patch is abstracted: `subject_class` is set by callers that know which
/// object the patch depicts (the simulator), and `instance_id` keys lookups in
/// precomputed tables.
struct ExternalClassifierQuery {
  std::string instance_id;
  std::size_t num_classes = 0;
  std::optional<int> subject_class;
  const BinaryMask* mask = nullptr;
};

class ExternalClassifier {
 public:
  virtual ~ExternalClassifier() = default;
  /// Response length must equal query.num_classes.
  virtual Distribution classify(const ExternalClassifierQuery& query) const = 0;
};

enum class ConfusionKind { kUniform, kMatrix };

struct MockClassifierConfig {
  std::size_t num_classes = 0;
  /// Either one value applied to every class or one value per class.
  std::vector<double> accuracy{0.9};
  ConfusionKind confusion = ConfusionKind::kUniform;
  /// Row-major N x N weights, used when confusion == kMatrix. Row t gives the
  /// relative weight of answering each class when the true class is t; the
  /// diagonal is ignored.
  std::vector<double> confusion_matrix;
  /// Blend factor towards a seeded random distribution (0 = exact kernel).
  double jitter = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Stand-in for a zero-shot vision-language classifier.
///
/// Kernel for true class t with accuracy a:
///   uniform: p[t] = max(a, 1/N), the rest split evenly over the other classes
///   matrix:  p[t] = a, the rest split by row t of the confusion matrix
/// With jitter j > 0 the kernel is mixed as (1 - j) * kernel + j * r, where r
/// is drawn from a flat Dirichlet seeded by (seed, instance_id).
/// A query without a subject class (background patch) answers uniform.
class MockExternalClassifier final : public ExternalClassifier {
 public:
  explicit MockExternalClassifier(MockClassifierConfig config);
  Distribution classify(const ExternalClassifierQuery& query) const override;
  const MockClassifierConfig& config() const { return config_; }

 private:
  double accuracy_for(std::size_t cls) const;
  MockClassifierConfig config_;
};

std::unique_ptr<ExternalClassifier> mock_external_classifier(MockClassifierConfig config);

/// Answers from a table of precomputed distributions keyed by instance id.
class PrecomputedClassifier final : public ExternalClassifier {
 public:
  PrecomputedClassifier(std::size_t num_classes, std::map<std::string, Distribution> table);
  Distribution classify(const ExternalClassifierQuery& query) const override;
  std::size_t num_classes() const { return num_classes_; }

 private:
  std::size_t num_classes_;
  std::map<std::string, Distribution> table_;
};

}  // namespace pldc
