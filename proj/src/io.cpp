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


#include "pldc/io.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <initializer_list>
#include <iterator>
#include <set>
#include <sstream>

#include "pldc/error.hpp"

namespace pldc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& source, const std::string& field,
                      const std::string& what) {
  throw ValidationError(source + ": field '" + field + "': " + what);
}

json parse_json(const fs::path& path) {
  const auto text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": invalid JSON: " + e.what());
  }
}

const json& member(const json& obj, const std::string& key, const std::string& source,
                   const std::string& prefix = "") {
  const std::string field = prefix.empty() ? key : prefix + "." + key;
  if (!obj.is_object()) bad(source, prefix.empty() ? "<root>" : prefix, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) bad(source, field, "missing");
  return *it;
}

double as_number(const json& v, const std::string& source, const std::string& field) {
  if (!v.is_number()) bad(source, field, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) bad(source, field, "expected a finite number");
  return d;
}

std::uint64_t as_unsigned(const json& v, const std::string& source, const std::string& field) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  }
  bad(source, field, "expected a non-negative integer");
}

std::size_t as_size(const json& v, const std::string& source, const std::string& field) {
  return static_cast<std::size_t>(as_unsigned(v, source, field));
}

int as_int(const json& v, const std::string& source, const std::string& field) {
  if (!v.is_number_integer()) bad(source, field, "expected an integer");
  return v.get<int>();
}

bool as_bool(const json& v, const std::string& source, const std::string& field) {
  if (!v.is_boolean()) bad(source, field, "expected true or false");
  return v.get<bool>();
}

std::string as_string(const json& v, const std::string& source, const std::string& field) {
  if (!v.is_string()) bad(source, field, "expected a string");
  return v.get<std::string>();
}

std::vector<double> as_numbers(const json& v, const std::string& source,
                               const std::string& field) {
  if (!v.is_array()) bad(source, field, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(as_number(v[i], source, field + "[" + std::to_string(i) + "]"));
  }
  return out;
}

void check_version(const json& doc, const std::string& source) {
  const auto& v = member(doc, "format_version", source);
  if (!v.is_number_integer() || v.get<int>() != kFormatVersion) {
    bad(source, "format_version", "unsupported version (expected 1)");
  }
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& source, const std::string& prefix) {
  if (!obj.is_object()) bad(source, prefix.empty() ? "<root>" : prefix, "expected an object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    if (!keys.contains(key)) bad(source, prefix.empty() ? key : prefix + "." + key, "unknown key");
  }
}

RunLengthCounts read_rle(const json& v, const std::string& source, const std::string& field) {
  const auto& counts = member(v, "counts", source, field);
  if (!counts.is_array()) bad(source, field + ".counts", "expected an array");
  RunLengthCounts rle;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const auto c = as_unsigned(counts[i], source, field + ".counts[" + std::to_string(i) + "]");
    if (c > UINT32_MAX) bad(source, field + ".counts", "run too long");
    rle.counts.push_back(static_cast<std::uint32_t>(c));
  }
  return rle;
}

BinaryMask decode_rle_field(const json& v, std::size_t h, std::size_t w,
                            const std::string& source, const std::string& field) {
  const auto rle = read_rle(v, source, field);
  try {
    return rle_decode(rle, h, w);
  } catch (const ValidationError& e) {
    bad(source, field, e.what());
  }
}

json rle_json(const BinaryMask& mask) { return json{{"counts", rle_encode(mask).counts}}; }

std::vector<double> read_sidecar(const fs::path& path, std::size_t pixels,
                                 const std::string& source, const std::string& field) {
  std::ifstream in(path, std::ios::binary);
  if (!in) bad(source, field, "cannot open sidecar " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  if (bytes.size() != 4 * pixels) {
    bad(source, field,
        "sidecar " + path.string() + " has " + std::to_string(bytes.size()) +
            " bytes, expected " + std::to_string(4 * pixels));
  }
  std::vector<double> out(pixels);
  for (std::size_t i = 0; i < pixels; ++i) {
    const std::uint32_t word = static_cast<std::uint32_t>(bytes[4 * i]) |
                               static_cast<std::uint32_t>(bytes[4 * i + 1]) << 8 |
                               static_cast<std::uint32_t>(bytes[4 * i + 2]) << 16 |
                               static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24;
    float f;
    std::memcpy(&f, &word, sizeof f);
    if (!std::isfinite(f)) bad(source, field, "sidecar holds a non-finite value");
    out[i] = static_cast<double>(f);
  }
  return out;
}

void write_sidecar(const fs::path& path, std::span<const double> values) {
  std::string bytes(4 * values.size(), '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    const float f = static_cast<float>(values[i]);
    std::uint32_t word;
    std::memcpy(&word, &f, sizeof word);
    for (int b = 0; b < 4; ++b) bytes[4 * i + b] = static_cast<char>((word >> (8 * b)) & 0xffU);
  }
  write_text_file(path, bytes);
}

json channel_json(const NoiseChannel& c) {
  return {{"logit_noise_stddev", c.logit_noise_stddev},
          {"class_confusion_rate", c.class_confusion_rate},
          {"dropout_rate", c.dropout_rate}};
}

void read_channel(const json& v, NoiseChannel& c, const std::string& source,
                  const std::string& field) {
  check_keys(v, {"logit_noise_stddev", "class_confusion_rate", "dropout_rate"}, source, field);
  if (v.contains("logit_noise_stddev")) {
    c.logit_noise_stddev = as_number(v["logit_noise_stddev"], source, field + ".logit_noise_stddev");
  }
  if (v.contains("class_confusion_rate")) {
    c.class_confusion_rate =
        as_number(v["class_confusion_rate"], source, field + ".class_confusion_rate");
  }
  if (v.contains("dropout_rate")) {
    c.dropout_rate = as_number(v["dropout_rate"], source, field + ".dropout_rate");
  }
}

}  // namespace

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(path.string() + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError(path.string() + ": cannot open for writing");
  out << content;
  if (!out) throw ValidationError(path.string() + ": write failed");
}

// ---------------------------------------------------------------------------
// Predictions and ground truth

void PredictionFile::validate() const {
  PLDC_CHECK(height > 0 && width > 0, "prediction file needs positive height and width");
  PLDC_CHECK(num_classes > 0, "prediction file needs num_classes > 0");
  PLDC_CHECK(class_names.empty() || class_names.size() == num_classes,
             "class_names must be empty or list num_classes names");
  PLDC_CHECK(instance_ids.size() == instances.size(), "one id per instance required");
  std::set<std::string> seen;
  for (std::size_t k = 0; k < instances.size(); ++k) {
    PLDC_CHECK(seen.insert(instance_ids[k]).second, "duplicate instance id " + instance_ids[k]);
    PLDC_CHECK(instances[k].class_logits.size() == num_classes,
               "instance " + instance_ids[k] + " has the wrong number of class logits");
    PLDC_CHECK(instances[k].mask_logits.height() == height &&
                   instances[k].mask_logits.width() == width,
               "instance " + instance_ids[k] + " mask does not match (height, width)");
  }
}

PredictionFile read_prediction_file(const fs::path& path) {
  const std::string src = path.string();
  const auto doc = parse_json(path);
  check_version(doc, src);
  PredictionFile file;
  file.image_id = as_string(member(doc, "image_id", src), src, "image_id");
  file.height = as_size(member(doc, "height", src), src, "height");
  file.width = as_size(member(doc, "width", src), src, "width");
  file.num_classes = as_size(member(doc, "num_classes", src), src, "num_classes");
  if (file.height == 0 || file.width == 0) bad(src, "height", "height and width must be > 0");
  if (file.num_classes == 0) bad(src, "num_classes", "must be > 0");
  if (doc.contains("class_names")) {
    const auto& names = doc["class_names"];
    if (!names.is_array() || names.size() != file.num_classes) {
      bad(src, "class_names", "expected an array of num_classes strings");
    }
    for (std::size_t i = 0; i < names.size(); ++i) {
      file.class_names.push_back(as_string(names[i], src, "class_names[" + std::to_string(i) + "]"));
    }
  }
  const auto& instances = member(doc, "instances", src);
  if (!instances.is_array()) bad(src, "instances", "expected an array");
  const std::size_t hw = file.height * file.width;
  std::set<std::string> seen;
  for (std::size_t k = 0; k < instances.size(); ++k) {
    const std::string f = "instances[" + std::to_string(k) + "]";
    const auto& inst = instances[k];
    const auto id = inst.contains("id") ? as_string(inst["id"], src, f + ".id") : std::to_string(k);
    if (!seen.insert(id).second) bad(src, f + ".id", "duplicate id '" + id + "'");
    auto logits = as_numbers(member(inst, "class_logits", src, f), src, f + ".class_logits");
    if (logits.size() != file.num_classes) {
      bad(src, f + ".class_logits",
          "expected " + std::to_string(file.num_classes) + " values, got " +
              std::to_string(logits.size()));
    }
    std::vector<double> mask;
    if (inst.contains("mask_logits")) {
      const auto rel = as_string(inst["mask_logits"], src, f + ".mask_logits");
      mask = read_sidecar(path.parent_path() / rel, hw, src, f + ".mask_logits");
    } else if (inst.contains("mask_rle")) {
      const auto bits = decode_rle_field(inst["mask_rle"], file.height, file.width, src,
                                         f + ".mask_rle");
      const double c = as_number(member(inst, "mask_confidence", src, f), src,
                                 f + ".mask_confidence");
      if (!(c > 0.5 && c < 1.0)) bad(src, f + ".mask_confidence", "must lie in (0.5, 1)");
      const double z = std::log(c / (1.0 - c));
      mask.resize(hw);
      for (std::size_t i = 0; i < hw; ++i) mask[i] = bits[i] ? z : -z;
    } else {
      bad(src, f, "needs mask_logits or mask_rle");
    }
    file.instance_ids.push_back(id);
    file.instances.push_back(
        {ClassLogits(std::move(logits)), MaskLogitGrid(file.height, file.width, std::move(mask))});
  }
  return file;
}

void write_prediction_file(const fs::path& path, const PredictionFile& file) {
  file.validate();
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["image_id"] = file.image_id;
  doc["height"] = file.height;
  doc["width"] = file.width;
  doc["num_classes"] = file.num_classes;
  if (!file.class_names.empty()) doc["class_names"] = file.class_names;
  doc["instances"] = json::array();
  const auto stem = path.stem().string();
  for (std::size_t k = 0; k < file.instances.size(); ++k) {
    const std::string rel = stem + "." + std::to_string(k) + ".f32";
    write_sidecar(path.parent_path() / rel, file.instances[k].mask_logits.values());
    doc["instances"].push_back({{"id", file.instance_ids[k]},
                                {"class_logits", file.instances[k].class_logits.values()},
                                {"mask_logits", rel}});
  }
  write_text_file(path, doc.dump(2) + "\n");
}

GroundTruthFile read_ground_truth_file(const fs::path& path) {
  const std::string src = path.string();
  const auto doc = parse_json(path);
  check_version(doc, src);
  GroundTruthFile file;
  file.image_id = doc.contains("image_id") ? as_string(doc["image_id"], src, "image_id") : "";
  file.height = as_size(member(doc, "height", src), src, "height");
  file.width = as_size(member(doc, "width", src), src, "width");
  file.num_classes = as_size(member(doc, "num_classes", src), src, "num_classes");
  if (file.num_classes == 0) bad(src, "num_classes", "must be > 0");
  const auto& instances = member(doc, "instances", src);
  if (!instances.is_array()) bad(src, "instances", "expected an array");
  for (std::size_t k = 0; k < instances.size(); ++k) {
    const std::string f = "instances[" + std::to_string(k) + "]";
    GroundTruthInstance gt;
    gt.class_id = as_int(member(instances[k], "class_id", src, f), src, f + ".class_id");
    gt.mask = decode_rle_field(member(instances[k], "mask_rle", src, f), file.height, file.width,
                               src, f + ".mask_rle");
    try {
      validate_ground_truth(gt, file.num_classes);
    } catch (const ValidationError& e) {
      bad(src, f, e.what());
    }
    file.instances.push_back(std::move(gt));
  }
  return file;
}

void write_ground_truth_file(const fs::path& path, const GroundTruthFile& file) {
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["image_id"] = file.image_id;
  doc["height"] = file.height;
  doc["width"] = file.width;
  doc["num_classes"] = file.num_classes;
  doc["instances"] = json::array();
  for (const auto& gt : file.instances) {
    doc["instances"].push_back({{"class_id", gt.class_id}, {"mask_rle", rle_json(gt.mask)}});
  }
  write_text_file(path, doc.dump(2) + "\n");
}

Taxonomy read_taxonomy(const fs::path& path) {
  const std::string src = path.string();
  const auto doc = parse_json(path);
  check_version(doc, src);
  const auto& arr = member(doc, "superclass", src);
  if (!arr.is_array()) bad(src, "superclass", "expected an array of integers");
  Taxonomy t;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    t.superclass.push_back(as_int(arr[i], src, "superclass[" + std::to_string(i) + "]"));
  }
  return t;
}

PrecomputedClassifier read_distribution_table(const fs::path& path) {
  const std::string src = path.string();
  const auto doc = parse_json(path);
  check_version(doc, src);
  const auto n = as_size(member(doc, "num_classes", src), src, "num_classes");
  const auto& table = member(doc, "distributions", src);
  if (!table.is_object()) bad(src, "distributions", "expected an object");
  std::map<std::string, Distribution> out;
  for (const auto& [id, value] : table.items()) {
    const std::string f = "distributions." + id;
    auto probs = as_numbers(value, src, f);
    if (probs.size() != n) bad(src, f, "expected " + std::to_string(n) + " probabilities");
    try {
      out.emplace(id, Distribution(std::move(probs)));
    } catch (const ValidationError& e) {
      bad(src, f, e.what());
    }
  }
  return PrecomputedClassifier(n, std::move(out));
}

// ---------------------------------------------------------------------------
// Benchmark config

BenchmarkFile benchmark_from_json(const json& doc, const std::string& src) {
  check_keys(doc, {"format_version", "scene", "labeled_scenes", "unlabeled_scenes", "test_scenes",
                   "seeds", "schedule", "filter", "correction_enabled", "uncertainty_enabled",
                   "mock", "loss", "ema_alpha", "weak", "strong"},
             src, "");
  check_version(doc, src);
  BenchmarkFile out;
  auto& cfg = out.config;
  auto& pipe = cfg.pipeline;

  if (doc.contains("scene")) {
    const auto& s = doc["scene"];
    check_keys(s, {"height", "width", "num_classes", "cells_per_side", "min_instances",
                   "max_instances", "class_skew", "min_object_side", "fg_signal", "pixel_noise",
                   "class_signal", "class_similarity", "appearance_noise", "min_contrast"},
               src, "scene");
    auto& sc = cfg.scene;
    const auto size = [&](const char* key, std::size_t& dst) {
      if (s.contains(key)) dst = as_size(s[key], src, std::string("scene.") + key);
    };
    const auto real = [&](const char* key, double& dst) {
      if (s.contains(key)) dst = as_number(s[key], src, std::string("scene.") + key);
    };
    size("height", sc.height);
    size("width", sc.width);
    size("num_classes", sc.num_classes);
    size("cells_per_side", sc.cells_per_side);
    size("min_instances", sc.min_instances);
    size("max_instances", sc.max_instances);
    size("min_object_side", sc.min_object_side);
    real("fg_signal", sc.fg_signal);
    real("pixel_noise", sc.pixel_noise);
    real("class_signal", sc.class_signal);
    real("class_similarity", sc.class_similarity);
    real("appearance_noise", sc.appearance_noise);
    real("min_contrast", sc.min_contrast);
    if (s.contains("class_skew")) sc.class_skew = as_numbers(s["class_skew"], src, "scene.class_skew");
  }
  if (doc.contains("labeled_scenes")) cfg.labeled_scenes = as_size(doc["labeled_scenes"], src, "labeled_scenes");
  if (doc.contains("unlabeled_scenes")) cfg.unlabeled_scenes = as_size(doc["unlabeled_scenes"], src, "unlabeled_scenes");
  if (doc.contains("test_scenes")) cfg.test_scenes = as_size(doc["test_scenes"], src, "test_scenes");
  if (doc.contains("seeds")) {
    const auto& seeds = doc["seeds"];
    if (!seeds.is_array() || seeds.empty()) bad(src, "seeds", "expected a non-empty array");
    out.seeds.clear();
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      out.seeds.push_back(as_unsigned(seeds[i], src, "seeds[" + std::to_string(i) + "]"));
    }
  }
  if (doc.contains("schedule")) {
    const auto& s = doc["schedule"];
    check_keys(s, {"burn_in_iters", "max_iters", "labeled_batch", "unlabeled_batch",
                   "learning_rate"},
               src, "schedule");
    auto& sch = cfg.schedule;
    if (s.contains("burn_in_iters")) {
      sch.burn_in_iters = static_cast<std::int64_t>(as_unsigned(s["burn_in_iters"], src, "schedule.burn_in_iters"));
    }
    if (s.contains("max_iters")) {
      sch.max_iters = static_cast<std::int64_t>(as_unsigned(s["max_iters"], src, "schedule.max_iters"));
    }
    if (s.contains("labeled_batch")) sch.labeled_batch = as_size(s["labeled_batch"], src, "schedule.labeled_batch");
    if (s.contains("unlabeled_batch")) sch.unlabeled_batch = as_size(s["unlabeled_batch"], src, "schedule.unlabeled_batch");
    if (s.contains("learning_rate")) sch.learning_rate = as_number(s["learning_rate"], src, "schedule.learning_rate");
  }
  if (doc.contains("filter")) {
    const auto& f = doc["filter"];
    check_keys(f, {"mode", "mask_threshold", "class_threshold", "coupled_threshold"}, src, "filter");
    if (f.contains("mode")) {
      try {
        pipe.filter.mode = parse_filter_mode(as_string(f["mode"], src, "filter.mode"));
      } catch (const ValidationError& e) {
        bad(src, "filter.mode", e.what());
      }
    }
    if (f.contains("mask_threshold")) pipe.filter.mask_threshold = as_number(f["mask_threshold"], src, "filter.mask_threshold");
    if (f.contains("class_threshold")) pipe.filter.class_threshold = as_number(f["class_threshold"], src, "filter.class_threshold");
    if (f.contains("coupled_threshold")) pipe.filter.coupled_threshold = as_number(f["coupled_threshold"], src, "filter.coupled_threshold");
  }
  if (doc.contains("correction_enabled")) pipe.correction_enabled = as_bool(doc["correction_enabled"], src, "correction_enabled");
  if (doc.contains("uncertainty_enabled")) pipe.uncertainty_enabled = as_bool(doc["uncertainty_enabled"], src, "uncertainty_enabled");
  if (doc.contains("mock")) {
    const auto& m = doc["mock"];
    check_keys(m, {"accuracy", "confusion", "confusion_matrix", "jitter"}, src, "mock");
    if (m.contains("accuracy")) {
      pipe.mock.accuracy = m["accuracy"].is_array()
                               ? as_numbers(m["accuracy"], src, "mock.accuracy")
                               : std::vector<double>{as_number(m["accuracy"], src, "mock.accuracy")};
    }
    if (m.contains("confusion")) {
      const auto kind = as_string(m["confusion"], src, "mock.confusion");
      if (kind == "uniform") {
        pipe.mock.confusion = ConfusionKind::kUniform;
      } else if (kind == "matrix") {
        pipe.mock.confusion = ConfusionKind::kMatrix;
      } else {
        bad(src, "mock.confusion", "expected \"uniform\" or \"matrix\"");
      }
    }
    if (m.contains("confusion_matrix")) {
      pipe.mock.confusion_matrix = as_numbers(m["confusion_matrix"], src, "mock.confusion_matrix");
    }
    if (m.contains("jitter")) pipe.mock.jitter = as_number(m["jitter"], src, "mock.jitter");
  }
  if (doc.contains("loss")) {
    const auto& l = doc["loss"];
    check_keys(l, {"lambda", "dice_enabled", "cost_weights", "unsup_class_loss"}, src, "loss");
    if (l.contains("lambda")) pipe.loss.lambda = as_number(l["lambda"], src, "loss.lambda");
    if (l.contains("dice_enabled")) pipe.loss.dice_enabled = as_bool(l["dice_enabled"], src, "loss.dice_enabled");
    if (l.contains("unsup_class_loss")) pipe.loss.unsup_class_loss = as_bool(l["unsup_class_loss"], src, "loss.unsup_class_loss");
    if (l.contains("cost_weights")) {
      const auto w = as_numbers(l["cost_weights"], src, "loss.cost_weights");
      if (w.size() != 3) bad(src, "loss.cost_weights", "expected [class, bce, dice]");
      pipe.loss.cost_weights = {w[0], w[1], w[2]};
    }
  }
  if (doc.contains("ema_alpha")) pipe.ema.alpha = as_number(doc["ema_alpha"], src, "ema_alpha");
  if (doc.contains("weak")) read_channel(doc["weak"], pipe.weak, src, "weak");
  if (doc.contains("strong")) read_channel(doc["strong"], pipe.strong, src, "strong");
  pipe.mock.num_classes = cfg.scene.num_classes;

  try {
    cfg.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(src + ": " + e.what());
  }
  return out;
}

BenchmarkFile read_benchmark_config(const fs::path& path) {
  return benchmark_from_json(parse_json(path), path.string());
}

json to_json(const BenchmarkConfig& cfg) {
  const auto& sc = cfg.scene;
  const auto& pipe = cfg.pipeline;
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["scene"] = {{"height", sc.height},
                  {"width", sc.width},
                  {"num_classes", sc.num_classes},
                  {"cells_per_side", sc.cells_per_side},
                  {"min_instances", sc.min_instances},
                  {"max_instances", sc.max_instances},
                  {"class_skew", sc.class_skew},
                  {"min_object_side", sc.min_object_side},
                  {"fg_signal", sc.fg_signal},
                  {"pixel_noise", sc.pixel_noise},
                  {"class_signal", sc.class_signal},
                  {"class_similarity", sc.class_similarity},
                  {"appearance_noise", sc.appearance_noise},
                  {"min_contrast", sc.min_contrast}};
  doc["labeled_scenes"] = cfg.labeled_scenes;
  doc["unlabeled_scenes"] = cfg.unlabeled_scenes;
  doc["test_scenes"] = cfg.test_scenes;
  doc["schedule"] = {{"burn_in_iters", cfg.schedule.burn_in_iters},
                     {"max_iters", cfg.schedule.max_iters},
                     {"labeled_batch", cfg.schedule.labeled_batch},
                     {"unlabeled_batch", cfg.schedule.unlabeled_batch},
                     {"learning_rate", cfg.schedule.learning_rate}};
  doc["filter"] = {{"mode", std::string(to_string(pipe.filter.mode))},
                   {"mask_threshold", pipe.filter.mask_threshold},
                   {"class_threshold", pipe.filter.class_threshold},
                   {"coupled_threshold", pipe.filter.coupled_threshold}};
  doc["correction_enabled"] = pipe.correction_enabled;
  doc["uncertainty_enabled"] = pipe.uncertainty_enabled;
  doc["mock"] = {{"accuracy", pipe.mock.accuracy},
                 {"confusion", pipe.mock.confusion == ConfusionKind::kUniform ? "uniform" : "matrix"},
                 {"confusion_matrix", pipe.mock.confusion_matrix},
                 {"jitter", pipe.mock.jitter}};
  doc["loss"] = {{"lambda", pipe.loss.lambda},
                 {"dice_enabled", pipe.loss.dice_enabled},
                 {"unsup_class_loss", pipe.loss.unsup_class_loss},
                 {"cost_weights",
                  {pipe.loss.cost_weights.class_weight, pipe.loss.cost_weights.bce_weight,
                   pipe.loss.cost_weights.dice_weight}}};
  doc["ema_alpha"] = pipe.ema.alpha;
  doc["weak"] = channel_json(pipe.weak);
  doc["strong"] = channel_json(pipe.strong);
  return doc;
}

// ---------------------------------------------------------------------------
// Reports

namespace {

json scores_json(const QualityScores& s) {
  return {{"class_quality", s.class_quality},
          {"mask_quality", s.mask_quality},
          {"coupled_score", s.coupled_score}};
}

}  // namespace

json to_json(const FilteredSet& set, const FilterConfig& config,
             const std::vector<std::string>& ids) {
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["mode"] = std::string(to_string(config.mode));
  doc["mask_threshold"] = config.mask_threshold;
  doc["class_threshold"] = config.class_threshold;
  doc["coupled_threshold"] = config.coupled_threshold;
  doc["kept"] = json::array();
  doc["rejected"] = json::array();
  for (const auto& k : set.kept) {
    auto e = scores_json(k.scores);
    e["index"] = k.index;
    e["id"] = ids.at(k.index);
    doc["kept"].push_back(std::move(e));
  }
  for (const auto& r : set.rejected) {
    auto e = scores_json(r.scores);
    e["index"] = r.index;
    e["id"] = ids.at(r.index);
    e["reason"] = std::string(to_string(r.reason));
    doc["rejected"].push_back(std::move(e));
  }
  return doc;
}

json to_json(const MatchResult& match, const CostMatrix& costs) {
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["total_cost"] = match.total_cost;
  doc["pairs"] = json::array();
  for (const auto& [s, t] : match.pairs) {
    doc["pairs"].push_back({{"student", s}, {"target", t}, {"cost", costs(s, t)}});
  }
  json rows = json::array();
  for (std::size_t r = 0; r < costs.rows(); ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < costs.cols(); ++c) row.push_back(costs(r, c));
    rows.push_back(std::move(row));
  }
  doc["cost_matrix"] = std::move(rows);
  return doc;
}

json to_json(const IterationLog& log) {
  return {{"iteration", log.iteration},
          {"w", log.fusion_weight},
          {"sup_cls", log.sup_cls},
          {"sup_mask", log.sup_mask},
          {"unsup_cls", log.unsup_cls},
          {"unsup_mask", log.unsup_mask},
          {"total", log.total},
          {"kept", log.kept},
          {"rejected", log.rejected},
          {"corrected", log.corrected},
          {"true_positive", log.true_positive},
          {"gt_instances", log.gt_instances},
          {"gt_covered", log.gt_covered},
          {"precision", log.precision},
          {"recall", log.recall}};
}

json to_json(const EvaluationMetrics& m) {
  return {{"miou", m.miou}, {"pixel_accuracy", m.pixel_accuracy}, {"ap50", m.ap50}};
}

std::string format_csv_number(double value) {
  if (std::isnan(value)) return "nan";
  std::array<char, 64> buf{};
  std::snprintf(buf.data(), buf.size(), "%.9g", value);
  return buf.data();
}

std::string scores_csv(const std::vector<std::string>& ids, std::span<const QualityScores> scores) {
  PLDC_CHECK(ids.size() == scores.size(), "one id per score row required");
  std::string out = "index,id,class_quality,mask_quality,coupled_score\n";
  for (std::size_t k = 0; k < scores.size(); ++k) {
    out += std::to_string(k) + "," + ids[k] + "," + format_csv_number(scores[k].class_quality) +
           "," + format_csv_number(scores[k].mask_quality) + "," +
           format_csv_number(scores[k].coupled_score) + "\n";
  }
  return out;
}

std::string score_iou_csv(const ScoreIouTable& table, const std::vector<std::string>& ids) {
  PLDC_CHECK(ids.size() == table.rows.size(), "one id per score row required");
  std::string out = "index,id,class_quality,mask_quality,coupled_score,best_iou\n";
  for (std::size_t k = 0; k < table.rows.size(); ++k) {
    const auto& r = table.rows[k];
    out += std::to_string(k) + "," + ids[k] + "," + format_csv_number(r.scores.class_quality) +
           "," + format_csv_number(r.scores.mask_quality) + "," +
           format_csv_number(r.scores.coupled_score) + "," + format_csv_number(r.best_iou) + "\n";
  }
  return out;
}

std::string confusion_csv(const ConfusionMatrix& matrix, const std::vector<std::string>& names) {
  const std::size_t n = matrix.size() - 1;
  auto label = [&](std::size_t i) {
    if (i == n) return std::string("background");
    return i < names.size() ? names[i] : std::to_string(i);
  };
  std::string out = "truth";
  for (std::size_t c = 0; c <= n; ++c) out += "," + label(c);
  out += "\n";
  for (std::size_t r = 0; r <= n; ++r) {
    out += label(r);
    for (std::size_t c = 0; c <= n; ++c) out += "," + std::to_string(matrix.at(r, c));
    out += "\n";
  }
  return out;
}

std::string errors_csv(const ErrorReport& report, const std::vector<std::string>& ids) {
  PLDC_CHECK(ids.size() == report.categories.size(), "one id per error row required");
  std::string out = "index,id,category\n";
  for (std::size_t k = 0; k < ids.size(); ++k) {
    out += std::to_string(k) + "," + ids[k] + "," + std::string(to_string(report.categories[k])) +
           "\n";
  }
  return out;
}

}  // namespace pldc
