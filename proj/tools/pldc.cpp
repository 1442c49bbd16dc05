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


// pldc: command-line front end for the pseudo-label pipeline.

#include <cstdint>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pldc/correction.hpp"
#include "pldc/error.hpp"
#include "pldc/evaluation.hpp"
#include "pldc/filtering.hpp"
#include "pldc/io.hpp"
#include "pldc/losses.hpp"
#include "pldc/matching.hpp"
#include "pldc/quality.hpp"
#include "pldc/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace pldc {
namespace {

constexpr int kExitValidation = 1;
constexpr int kExitNumerical = 2;

struct Globals {
  std::uint64_t seed = 0;
  std::string filter_mode = "decoupled";
  double mask_threshold = 0.9;
  double class_threshold = 0.85;
  double coupled_threshold = 0.765;
  double lambda = 1.0;
  double ema_alpha = 0.9996;
  std::string output_dir = ".";
  bool dice = false;
  std::vector<double> cost_weights{1.0, 1.0, 1.0};
  double mock_accuracy = 0.9;
  double mock_jitter = 0.0;
  std::string mock_confusion = "uniform";

  CLI::Option* seed_opt = nullptr;
  CLI::Option* mode_opt = nullptr;
  CLI::Option* mask_opt = nullptr;
  CLI::Option* class_opt = nullptr;
  CLI::Option* coupled_opt = nullptr;
  CLI::Option* lambda_opt = nullptr;
  CLI::Option* alpha_opt = nullptr;
  CLI::Option* dice_opt = nullptr;
  CLI::Option* weights_opt = nullptr;
  CLI::Option* accuracy_opt = nullptr;
  CLI::Option* jitter_opt = nullptr;
  CLI::Option* confusion_opt = nullptr;

  FilterConfig filter() const {
    FilterConfig f;
    f.mode = parse_filter_mode(filter_mode);
    f.mask_threshold = mask_threshold;
    f.class_threshold = class_threshold;
    f.coupled_threshold = coupled_threshold;
    f.validate();
    return f;
  }

  LossConfig loss() const {
    LossConfig l;
    l.lambda = lambda;
    l.dice_enabled = dice;
    l.cost_weights = {cost_weights[0], cost_weights[1], cost_weights[2]};
    l.validate();
    return l;
  }

  MockClassifierConfig mock(std::size_t num_classes) const {
    MockClassifierConfig m;
    m.num_classes = num_classes;
    m.accuracy = {mock_accuracy};
    m.jitter = mock_jitter;
    m.seed = seed;
    set_confusion(m);
    m.validate();
    return m;
  }

  // "uniform", or N*N comma-separated row-major confusion weights.
  void set_confusion(MockClassifierConfig& m) const {
    if (mock_confusion == "uniform") {
      m.confusion = ConfusionKind::kUniform;
      m.confusion_matrix.clear();
      return;
    }
    std::vector<double> weights;
    std::size_t pos = 0;
    while (pos <= mock_confusion.size()) {
      const auto next = std::min(mock_confusion.find(',', pos), mock_confusion.size());
      const auto item = mock_confusion.substr(pos, next - pos);
      try {
        std::size_t used = 0;
        weights.push_back(std::stod(item, &used));
        PLDC_CHECK(used == item.size(), "bad number");
      } catch (const std::exception&) {
        throw ValidationError("--mock-confusion: '" + item + "' is not a number");
      }
      pos = next + 1;
    }
    m.confusion = ConfusionKind::kMatrix;
    m.confusion_matrix = std::move(weights);
  }

  // Flags given on the command line override a config file.
  void apply(BenchmarkConfig& cfg) const {
    auto& p = cfg.pipeline;
    if (mode_opt->count()) p.filter.mode = parse_filter_mode(filter_mode);
    if (mask_opt->count()) p.filter.mask_threshold = mask_threshold;
    if (class_opt->count()) p.filter.class_threshold = class_threshold;
    if (coupled_opt->count()) p.filter.coupled_threshold = coupled_threshold;
    if (lambda_opt->count()) p.loss.lambda = lambda;
    if (alpha_opt->count()) p.ema.alpha = ema_alpha;
    if (dice_opt->count()) p.loss.dice_enabled = dice;
    if (weights_opt->count()) p.loss.cost_weights = {cost_weights[0], cost_weights[1], cost_weights[2]};
    if (accuracy_opt->count()) p.mock.accuracy = {mock_accuracy};
    if (jitter_opt->count()) p.mock.jitter = mock_jitter;
    if (confusion_opt->count()) set_confusion(p.mock);
    cfg.validate();
  }

  fs::path out(const std::string& name) const { return fs::path(output_dir) / name; }
};

void write_json(const fs::path& path, const json& doc) { write_text_file(path, doc.dump(2) + "\n"); }

std::vector<std::string> prefixed_ids(const PredictionFile& file, bool prefix) {
  if (!prefix) return file.instance_ids;
  std::vector<std::string> ids;
  for (const auto& id : file.instance_ids) ids.push_back(file.image_id + "/" + id);
  return ids;
}

void check_pair(const PredictionFile& pred, const GroundTruthFile& gt) {
  PLDC_CHECK(pred.height == gt.height && pred.width == gt.width,
             "predictions and ground truth differ in (height, width)");
  PLDC_CHECK(pred.num_classes == gt.num_classes,
             "predictions and ground truth differ in num_classes");
}

std::optional<int> subject_from_ground_truth(const BinaryMask& mask, const GroundTruthFile& gt) {
  double best = 0.0;
  std::optional<int> subject;
  for (const auto& g : gt.instances) {
    const double iou = mask_iou(mask, g.mask);
    if (iou > best) {
      best = iou;
      subject = g.class_id;
    }
  }
  return subject;
}

int cmd_score(const Globals& g, const std::string& predictions) {
  const auto file = read_prediction_file(predictions);
  const auto scores = score_instances(file.instances);
  write_text_file(g.out("scores.csv"), scores_csv(file.instance_ids, scores));
  std::cout << "scored " << scores.size() << " instances -> " << g.out("scores.csv").string() << "\n";
  return 0;
}

int cmd_filter(const Globals& g, const std::string& predictions) {
  const auto file = read_prediction_file(predictions);
  const auto cfg = g.filter();
  const auto set = filter_predictions(file.instances, cfg);
  write_json(g.out("filtered.json"), to_json(set, cfg, file.instance_ids));
  std::cout << "kept " << set.kept.size() << " of " << file.instances.size() << " ("
            << to_string(cfg.mode) << ")\n";
  return 0;
}

int cmd_correct(const Globals& g, const std::string& predictions, const std::string& ground_truth,
                const std::string& table, std::int64_t it_cur, std::int64_t it_max,
                bool kept_only) {
  const auto file = read_prediction_file(predictions);
  const FusionState state{it_cur, it_max};
  state.validate();
  const double w = fusion_weight(state);

  std::unique_ptr<ExternalClassifier> external;
  if (!table.empty()) {
    auto t = read_distribution_table(table);
    PLDC_CHECK(t.num_classes() == file.num_classes,
               table + ": num_classes differs from the prediction file");
    external = std::make_unique<PrecomputedClassifier>(std::move(t));
  } else {
    external = mock_external_classifier(g.mock(file.num_classes));
  }
  std::optional<GroundTruthFile> gt;
  if (!ground_truth.empty()) {
    gt = read_ground_truth_file(ground_truth);
    check_pair(file, *gt);
  }

  std::vector<std::size_t> indices;
  if (kept_only) {
    indices = filter_predictions(file.instances, g.filter()).kept_indices();
  } else {
    for (std::size_t k = 0; k < file.instances.size(); ++k) indices.push_back(k);
  }

  json doc;
  doc["format_version"] = kFormatVersion;
  doc["it_cur"] = it_cur;
  doc["it_max"] = it_max;
  doc["w"] = w;
  doc["instances"] = json::array();
  std::size_t changed = 0;
  for (const auto k : indices) {
    const auto& pred = file.instances[k];
    const auto mask = binarize(pred.mask_logits);
    ExternalClassifierQuery query;
    query.instance_id = file.instance_ids[k];
    query.num_classes = file.num_classes;
    query.mask = &mask;
    if (gt) query.subject_class = subject_from_ground_truth(mask, *gt);
    const auto res = correct_with_weight(Distribution::from_logits(pred.class_logits),
                                         external->classify(query), w);
    if (res.class_id != res.teacher_class) ++changed;
    doc["instances"].push_back({{"index", k},
                                {"id", file.instance_ids[k]},
                                {"teacher_class", res.teacher_class},
                                {"corrected_class", res.class_id},
                                {"fused", res.fused.probs()}});
  }
  write_json(g.out("corrected.json"), doc);
  std::cout << "corrected " << changed << " of " << indices.size() << " instances (w = " << w
            << ")\n";
  return 0;
}

std::vector<PseudoLabel> pseudo_labels_from(const PredictionFile& teacher, const FilterConfig& cfg) {
  std::vector<PseudoLabel> out;
  for (const auto k : filter_predictions(teacher.instances, cfg).kept_indices()) {
    const auto& p = teacher.instances[k];
    out.push_back({static_cast<int>(argmax(p.class_logits.values())), binarize(p.mask_logits),
                   uncertainty_map(p.mask_logits)});
  }
  return out;
}

int cmd_loss(const Globals& g, const std::string& predictions, const std::string& ground_truth,
             const std::string& teacher) {
  PLDC_CHECK(!ground_truth.empty() || !teacher.empty(),
             "loss needs --ground-truth and/or --teacher");
  const auto student = read_prediction_file(predictions);
  const auto cfg = g.loss();
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["lambda"] = cfg.lambda;
  double sup = 0.0, unsup = 0.0;
  if (!ground_truth.empty()) {
    const auto gt = read_ground_truth_file(ground_truth);
    check_pair(student, gt);
    const auto terms = supervised_loss(student.instances, gt.instances, cfg);
    sup = terms.total();
    doc["supervised"] = {{"classification", terms.classification},
                         {"mask", terms.mask},
                         {"matched", terms.match.pairs.size()}};
  }
  if (!teacher.empty()) {
    const auto t = read_prediction_file(teacher);
    PLDC_CHECK(t.height == student.height && t.width == student.width &&
                   t.num_classes == student.num_classes,
               "teacher and student prediction files differ in shape");
    const auto labels = pseudo_labels_from(t, g.filter());
    const auto terms = unsupervised_loss(student.instances, labels, cfg);
    unsup = terms.total();
    doc["unsupervised"] = {{"classification", terms.classification},
                           {"mask", terms.mask},
                           {"pseudo_labels", labels.size()},
                           {"matched", terms.match.pairs.size()}};
  }
  const double total = total_loss(sup, unsup, cfg.lambda);
  if (!std::isfinite(total)) throw NumericalError("loss is not finite");
  doc["total"] = total;
  write_json(g.out("loss.json"), doc);
  std::cout << "total loss " << format_csv_number(total) << "\n";
  return 0;
}

int cmd_gradcheck(const Globals& g, std::size_t instances, double tolerance, double step) {
  const auto report = pmua_gradient_check(g.seed, instances, step);
  const bool ok = report.max_relative_error <= tolerance;
  write_json(g.out("gradcheck.json"), {{"format_version", kFormatVersion},
                                       {"seed", g.seed},
                                       {"instances", report.instances},
                                       {"step", report.step},
                                       {"tolerance", tolerance},
                                       {"max_relative_error", report.max_relative_error},
                                       {"pass", ok}});
  std::cout << "max_relative_error " << format_csv_number(report.max_relative_error) << "\n";
  if (!ok) {
    std::cerr << "gradient check above tolerance " << tolerance << "\n";
    return kExitNumerical;
  }
  return 0;
}

int cmd_match(const Globals& g, const std::string& predictions, const std::string& ground_truth) {
  const auto pred = read_prediction_file(predictions);
  const auto gt = read_ground_truth_file(ground_truth);
  check_pair(pred, gt);
  const auto costs = build_cost_matrix(pred.instances, gt.instances, g.loss().cost_weights);
  const auto match = hungarian(costs);
  write_json(g.out("match.json"), to_json(match, costs));
  std::cout << "matched " << match.pairs.size() << " pairs, total cost "
            << format_csv_number(match.total_cost) << "\n";
  return 0;
}

BenchmarkFile load_benchmark(const Globals& g, const std::string& config) {
  BenchmarkFile file;
  if (!config.empty()) file = read_benchmark_config(config);
  if (g.seed_opt->count()) file.seeds = {g.seed};
  g.apply(file.config);
  return file;
}

int cmd_simulate(const Globals& g, const std::string& config, std::size_t count,
                 const std::string& channel) {
  const auto file = load_benchmark(g, config);
  const auto& cfg = file.config;
  NoiseChannel noise;
  if (channel == "weak") {
    noise = cfg.pipeline.weak;
  } else if (channel == "strong") {
    noise = cfg.pipeline.strong;
  } else {
    throw ValidationError("--channel must be weak or strong");
  }
  const std::uint64_t seed = file.seeds.front();
  json manifest;
  manifest["format_version"] = kFormatVersion;
  manifest["seed"] = seed;
  manifest["channel"] = channel;
  manifest["scenes"] = json::array();
  std::vector<std::string> names;
  for (std::size_t c = 0; c < cfg.scene.num_classes; ++c) names.push_back("class" + std::to_string(c));
  for (std::size_t i = 0; i < count; ++i) {
    const auto scene = generate_scene(derive_seed(seed, 20, i), cfg.scene);
    const auto preds = corrupt_predictions(scene, noise, derive_seed(seed, 21, i));
    const std::string stem = "scene_" + std::to_string(i);

    GroundTruthFile gt{stem, cfg.scene.height, cfg.scene.width, cfg.scene.num_classes,
                       scene.instances};
    write_ground_truth_file(g.out(stem + "_gt.json"), gt);
    PredictionFile pf;
    pf.image_id = stem;
    pf.height = cfg.scene.height;
    pf.width = cfg.scene.width;
    pf.num_classes = cfg.scene.num_classes;
    pf.class_names = names;
    pf.instances = preds;
    for (std::size_t k = 0; k < preds.size(); ++k) pf.instance_ids.push_back(std::to_string(k));
    write_prediction_file(g.out(stem + "_pred.json"), pf);
    manifest["scenes"].push_back({{"image_id", stem},
                                  {"scene_seed", scene.seed},
                                  {"ground_truth", stem + "_gt.json"},
                                  {"predictions", stem + "_pred.json"}});
  }
  write_json(g.out("simulate.json"), manifest);
  std::cout << "wrote " << count << " scenes to " << g.output_dir << "\n";
  return 0;
}

int cmd_train(const Globals& g, const std::string& config) {
  const auto file = load_benchmark(g, config);
  std::string log;
  json runs = json::array();
  double miou = 0.0, precision = 0.0;
  for (const auto seed : file.seeds) {
    const auto result = run_benchmark(file.config, seed);
    for (const auto& it : result.training.log) {
      auto rec = to_json(it);
      rec["seed"] = seed;
      log += rec.dump() + "\n";
    }
    runs.push_back({{"seed", seed},
                    {"burn_in", to_json(result.burn_in)},
                    {"teacher", to_json(result.teacher)},
                    {"student", to_json(result.student)},
                    {"pseudo_label_precision", result.mean_precision},
                    {"pseudo_label_recall", result.mean_recall}});
    miou += result.student.miou;
    precision += result.mean_precision;
    std::cout << "seed " << seed << ": student mIoU " << format_csv_number(result.student.miou)
              << "\n";
  }
  const auto n = static_cast<double>(file.seeds.size());
  write_text_file(g.out("train_log.jsonl"), log);
  write_json(g.out("metrics.json"), {{"format_version", kFormatVersion},
                                     {"config", to_json(file.config)},
                                     {"runs", runs},
                                     {"mean_student_miou", miou / n},
                                     {"mean_pseudo_label_precision", precision / n}});
  return 0;
}

int cmd_analyze(const Globals& g, const std::vector<std::string>& predictions,
                const std::vector<std::string>& ground_truths, const std::string& taxonomy_path) {
  PLDC_CHECK(predictions.size() == ground_truths.size(),
             "--predictions and --ground-truth must be given the same number of times");
  std::vector<ImageDetections> images;
  std::vector<std::string> ids;
  std::vector<InstancePrediction> all_preds;
  ScoreIouTable table;
  std::optional<ConfusionMatrix> confusion;
  ErrorReport errors;
  std::vector<std::string> class_names;
  std::vector<double> s, c, m, iou;
  const bool prefix = predictions.size() > 1;

  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto pred = read_prediction_file(predictions[i]);
    const auto gt = read_ground_truth_file(ground_truths[i]);
    check_pair(pred, gt);
    const auto taxonomy =
        taxonomy_path.empty() ? Taxonomy::identity(pred.num_classes) : read_taxonomy(taxonomy_path);
    taxonomy.validate(pred.num_classes);
    if (!confusion) {
      confusion.emplace(pred.num_classes);
      class_names = pred.class_names;
    }
    PLDC_CHECK(confusion->size() == pred.num_classes + 1, "all images must share num_classes");

    const auto rows = score_iou_table(pred.instances, gt.instances);
    for (const auto& r : rows.rows) {
      table.rows.push_back(r);
      s.push_back(r.scores.coupled_score);
      c.push_back(r.scores.class_quality);
      m.push_back(r.scores.mask_quality);
      iou.push_back(r.best_iou);
    }
    const auto eval = to_eval_instances(pred.instances);
    const auto cm = confusion_matrix(eval, gt.instances, pred.num_classes);
    for (std::size_t r = 0; r < cm.size(); ++r) {
      for (std::size_t col = 0; col < cm.size(); ++col) {
        for (std::size_t n = 0; n < cm.at(r, col); ++n) confusion->add(r, col);
      }
    }
    const auto report = categorize_errors(eval, gt.instances, taxonomy);
    errors.categories.insert(errors.categories.end(), report.categories.begin(),
                             report.categories.end());
    for (std::size_t k = 0; k < kErrorCategoryCount; ++k) errors.histogram[k] += report.histogram[k];
    const auto img_ids = prefixed_ids(pred, prefix);
    ids.insert(ids.end(), img_ids.begin(), img_ids.end());
    images.push_back({eval, gt.instances});
  }
  table.corr_score_iou = pearson(s, iou);
  table.corr_class_iou = pearson(c, iou);
  table.corr_mask_iou = pearson(m, iou);

  write_text_file(g.out("score_iou.csv"), score_iou_csv(table, ids));
  write_text_file(g.out("confusion.csv"), confusion_csv(*confusion, class_names));
  write_text_file(g.out("errors.csv"), errors_csv(errors, ids));
  json hist;
  for (std::size_t k = 0; k < kErrorCategoryCount; ++k) {
    hist[std::string(to_string(static_cast<ErrorCategory>(k)))] = errors.histogram[k];
  }
  write_json(g.out("analysis.json"), {{"format_version", kFormatVersion},
                                      {"images", images.size()},
                                      {"predictions", ids.size()},
                                      {"corr_score_iou", table.corr_score_iou},
                                      {"corr_class_iou", table.corr_class_iou},
                                      {"corr_mask_iou", table.corr_mask_iou},
                                      {"error_histogram", hist},
                                      {"ap50", simplified_ap(images, 0.5)}});
  std::cout << "analyzed " << ids.size() << " predictions over " << images.size() << " images\n";
  return 0;
}

}  // namespace
}  // namespace pldc

int main(int argc, char** argv) {
  using namespace pldc;
  CLI::App app{"pldc - pseudo-label pipeline tools"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  g.seed_opt = app.add_option("--seed", g.seed, "Random seed");
  g.mode_opt = app.add_option("--filter-mode", g.filter_mode, "coupled | decoupled")
                   ->check(CLI::IsMember({"coupled", "decoupled"}));
  g.mask_opt = app.add_option("--mask-threshold", g.mask_threshold, "Mask quality threshold m_t");
  g.class_opt = app.add_option("--class-threshold", g.class_threshold, "Class quality threshold c_t");
  g.coupled_opt = app.add_option("--coupled-threshold", g.coupled_threshold, "Coupled score threshold");
  g.lambda_opt = app.add_option("--lambda", g.lambda, "Unsupervised loss weight");
  g.alpha_opt = app.add_option("--ema-alpha", g.ema_alpha, "EMA decay");
  app.add_option("--output-dir", g.output_dir, "Directory for output artifacts");
  g.dice_opt = app.add_flag("--dice", g.dice, "Add the dice term to the mask losses");
  g.weights_opt = app.add_option("--cost-weights", g.cost_weights, "Matching cost weights: class bce dice")
                      ->expected(3);
  g.accuracy_opt = app.add_option("--mock-accuracy", g.mock_accuracy, "Mock classifier accuracy");
  g.jitter_opt = app.add_option("--mock-jitter", g.mock_jitter, "Mock classifier jitter");
  g.confusion_opt = app.add_option("--mock-confusion", g.mock_confusion,
                                   "uniform, or N*N comma-separated confusion weights");

  std::string predictions, ground_truth, teacher, table, config, taxonomy, channel = "strong";
  std::vector<std::string> prediction_list, ground_truth_list;
  std::int64_t it_cur = 0, it_max = 1;
  bool kept_only = false;
  std::size_t instances = 100, count = 4;
  double tolerance = 1e-5, step = 1e-5;

  auto* score = app.add_subcommand("score", "Per-instance quality scores to CSV");
  score->add_option("--predictions", predictions, "PredictionFile JSON")->required();

  auto* filter = app.add_subcommand("filter", "Filter pseudo-labels to JSON");
  filter->add_option("--predictions", predictions, "PredictionFile JSON")->required();

  auto* correct = app.add_subcommand("correct", "Category correction with an external classifier");
  correct->add_option("--predictions", predictions, "PredictionFile JSON")->required();
  correct->add_option("--ground-truth", ground_truth, "Ground truth used as the mock's subject");
  correct->add_option("--external", table, "Precomputed distribution table (replaces the mock)");
  correct->add_option("--it-cur", it_cur, "Current iteration");
  correct->add_option("--it-max", it_max, "Final iteration");
  correct->add_flag("--kept-only", kept_only, "Correct only instances that pass the filter");

  auto* loss = app.add_subcommand("loss", "Supervised and unsupervised loss report");
  loss->add_option("--predictions", predictions, "Student PredictionFile JSON")->required();
  loss->add_option("--ground-truth", ground_truth, "Ground truth for the supervised term");
  loss->add_option("--teacher", teacher, "Teacher PredictionFile JSON for pseudo-labels");

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the PMUA gradient");
  gradcheck->add_option("--instances", instances, "Random problems to check");
  gradcheck->add_option("--tolerance", tolerance, "Maximum accepted relative error");
  gradcheck->add_option("--step", step, "Central difference step");

  auto* match = app.add_subcommand("match", "Hungarian matching to JSON");
  match->add_option("--predictions", predictions, "PredictionFile JSON")->required();
  match->add_option("--ground-truth", ground_truth, "Ground truth JSON")->required();

  auto* simulate = app.add_subcommand("simulate", "Synthetic scenes and noisy predictions");
  simulate->add_option("--config", config, "Benchmark config JSON");
  simulate->add_option("--count", count, "Number of scenes");
  simulate->add_option("--channel", channel, "Noise channel: weak | strong");

  auto* train = app.add_subcommand("train", "Burn-in plus mutual learning on the toy benchmark");
  train->add_option("--config", config, "Benchmark config JSON");

  auto* analyze = app.add_subcommand("analyze", "Score/IoU, confusion and error CSVs");
  analyze->add_option("--predictions", prediction_list, "PredictionFile JSON (repeatable)")->required();
  analyze->add_option("--ground-truth", ground_truth_list, "Ground truth JSON (repeatable)")->required();
  analyze->add_option("--taxonomy", taxonomy, "Superclass taxonomy JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitValidation;
  }

  try {
    fs::create_directories(g.output_dir);
    if (*score) return cmd_score(g, predictions);
    if (*filter) return cmd_filter(g, predictions);
    if (*correct) return cmd_correct(g, predictions, ground_truth, table, it_cur, it_max, kept_only);
    if (*loss) return cmd_loss(g, predictions, ground_truth, teacher);
    if (*gradcheck) return cmd_gradcheck(g, instances, tolerance, step);
    if (*match) return cmd_match(g, predictions, ground_truth);
    if (*simulate) return cmd_simulate(g, config, count, channel);
    if (*train) return cmd_train(g, config);
    if (*analyze) return cmd_analyze(g, prediction_list, ground_truth_list, taxonomy);
  } catch (const pldc::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const pldc::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}
