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


// File formats. Every JSON document carries "format_version": 1.
//
// PredictionFile
//   {"format_version": 1, "image_id": "...", "height": H, "width": W,
//    "num_classes": N, "class_names": [...],
//    "instances": [{"id": "...", "class_logits": [N numbers],
//                   "mask_logits": "relative/path.f32"}]}
//   The sidecar holds H*W float32 values, little-endian, row-major. An
//   instance may instead carry "mask_rle": {"counts": [...]} and
//   "mask_confidence": c in (0.5, 1); foreground pixels then get logit
//   log(c / (1 - c)) and background pixels its negation.
//
// GroundTruthFile
//   {"format_version": 1, "image_id": "...", "height": H, "width": W,
//    "num_classes": N, "instances": [{"class_id": k, "mask_rle": {"counts": [...]}}]}
//
// Taxonomy:      {"format_version": 1, "superclass": [...]}
// Distributions: {"format_version": 1, "num_classes": N, "distributions": {"id": [...]}}

#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "pldc/correction.hpp"
#include "pldc/evaluation.hpp"
#include "pldc/filtering.hpp"
#include "pldc/instance_model.hpp"
#include "pldc/matching.hpp"
#include "pldc/trainer.hpp"

namespace pldc {

inline constexpr int kFormatVersion = 1;

struct PredictionFile {
  std::string image_id;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t num_classes = 0;
  std::vector<std::string> class_names;
  std::vector<std::string> instance_ids;
  std::vector<InstancePrediction> instances;

  /// Throws ValidationError on inconsistent shapes or ids.
  void validate() const;
  bool operator==(const PredictionFile&) const = default;
};

/// Reads the JSON and its sidecars. Errors name the file and the field.
PredictionFile read_prediction_file(const std::filesystem::path& path);

/// Writes the JSON plus one sidecar per instance next to it, named
/// "<stem>.<index>.f32". Logits are stored as float32.
void write_prediction_file(const std::filesystem::path& path, const PredictionFile& file);

struct GroundTruthFile {
  std::string image_id;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t num_classes = 0;
  std::vector<GroundTruthInstance> instances;

  bool operator==(const GroundTruthFile&) const = default;
};

GroundTruthFile read_ground_truth_file(const std::filesystem::path& path);
void write_ground_truth_file(const std::filesystem::path& path, const GroundTruthFile& file);

Taxonomy read_taxonomy(const std::filesystem::path& path);

PrecomputedClassifier read_distribution_table(const std::filesystem::path& path);

/// Benchmark config plus the seeds a `train` run iterates over. Every key is
/// optional; unknown keys are rejected.
struct BenchmarkFile {
  BenchmarkConfig config;
  std::vector<std::uint64_t> seeds{0};
};

BenchmarkFile read_benchmark_config(const std::filesystem::path& path);
BenchmarkFile benchmark_from_json(const nlohmann::json& doc, const std::string& source);
nlohmann::json to_json(const BenchmarkConfig& config);

// Reports.
nlohmann::json to_json(const FilteredSet& set, const FilterConfig& config,
                       const std::vector<std::string>& ids);
nlohmann::json to_json(const MatchResult& match, const CostMatrix& costs);
nlohmann::json to_json(const IterationLog& log);
nlohmann::json to_json(const EvaluationMetrics& metrics);

/// "%.9g"; NaN prints as "nan".
std::string format_csv_number(double value);

std::string scores_csv(const std::vector<std::string>& ids,
                       std::span<const QualityScores> scores);
std::string score_iou_csv(const ScoreIouTable& table, const std::vector<std::string>& ids);
std::string confusion_csv(const ConfusionMatrix& matrix, const std::vector<std::string>& names);
std::string errors_csv(const ErrorReport& report, const std::vector<std::string>& ids);

/// Writes `content` verbatim (binary mode, so '\n' stays '\n').
void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace pldc
