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


#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include <doctest.h>
#include <json.hpp>

#include "pldc/io.hpp"

using namespace pldc;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kData = PLDC_TEST_DATA_DIR;

fs::path tmp_dir(const std::string& name) {
  const fs::path dir = fs::path(PLDC_TEST_TMP_DIR) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run(const std::string& args, const fs::path& out) {
  const std::string cmd = std::string("\"") + PLDC_CLI_PATH + "\" " + args + " --output-dir \"" +
                          out.string() + "\" > \"" + (out / "stdout.txt").string() + "\" 2> \"" +
                          (out / "stderr.txt").string() + "\"";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

json read_json(const fs::path& path) { return json::parse(read_text_file(path)); }

std::string golden_pred() { return "--predictions \"" + (kData / "golden/pred.json").string() + "\""; }

// Every regular file under `dir` except the captured stdout/stderr.
std::vector<fs::path> artifacts(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto name = e.path().filename().string();
    if (name == "stdout.txt" || name == "stderr.txt") continue;
    out.push_back(fs::relative(e.path(), dir));
  }
  std::sort(out.begin(), out.end());
  return out;
}

void check_same_outputs(const fs::path& a, const fs::path& b) {
  const auto fa = artifacts(a), fb = artifacts(b);
  CHECK(fa == fb);
  CHECK_FALSE(fa.empty());
  for (const auto& f : fa) {
    INFO(f.string());
    CHECK(read_text_file(a / f) == read_text_file(b / f));
  }
}

const char* kSmallConfig = R"({"format_version": 1, "labeled_scenes": 2,
  "unlabeled_scenes": 3, "test_scenes": 2,
  "schedule": {"burn_in_iters": 5, "max_iters": 12}})";

}  // namespace

TEST_CASE("score reproduces the golden csv") {
  const auto out = tmp_dir("score");
  REQUIRE(run("score " + golden_pred(), out) == 0);
  CHECK(read_text_file(out / "scores.csv") == read_text_file(kData / "golden/scores.csv"));
}

TEST_CASE("gradcheck") {
  const auto out = tmp_dir("gradcheck");
  REQUIRE(run("--seed 7 gradcheck", out) == 0);
  const auto report = read_json(out / "gradcheck.json");
  CHECK(report["max_relative_error"].get<double>() <= 1e-5);
  CHECK(report["instances"].get<int>() == 100);

  const auto coarse = tmp_dir("gradcheck_coarse");
  CHECK(run("--seed 7 gradcheck --step 0.1", coarse) == 2);
  CHECK(read_json(coarse / "gradcheck.json")["max_relative_error"].get<double>() > 1e-5);
}

TEST_CASE("filter above one keeps nothing") {
  const auto out = tmp_dir("filter_none");
  REQUIRE(run("--class-threshold 1.01 filter " + golden_pred(), out) == 0);
  const auto doc = read_json(out / "filtered.json");
  CHECK(doc["kept"].empty());
  CHECK(doc["rejected"].size() == 6);
  for (const auto& r : doc["rejected"]) CHECK(r["reason"] == "class_below");
}

TEST_CASE("filter modes") {
  const auto dd = tmp_dir("filter_dd");
  REQUIRE(run("--class-threshold 0.8 --mask-threshold 0.8 filter " + golden_pred(), dd) == 0);
  std::vector<std::string> kept;
  const auto dd_doc = read_json(dd / "filtered.json");
  for (const auto& k : dd_doc["kept"]) kept.push_back(k["id"].get<std::string>());
  // From the golden scores: det0 (0.814, 0.849) and det3 (0.969, 0.809).
  CHECK(kept == std::vector<std::string>{"det0", "det3"});

  const auto cp = tmp_dir("filter_cp");
  REQUIRE(run("--filter-mode coupled --coupled-threshold 0.75 filter " + golden_pred(), cp) == 0);
  kept.clear();
  const auto cp_doc = read_json(cp / "filtered.json");
  for (const auto& k : cp_doc["kept"]) kept.push_back(k["id"].get<std::string>());
  CHECK(kept == std::vector<std::string>{"det2", "det3"});
}

TEST_CASE("validation errors exit with 1") {
  const auto out = tmp_dir("errors");
  CHECK(run("score --predictions \"" + (out / "missing.json").string() + "\"", out) == 1);
  CHECK(read_text_file(out / "stderr.txt").find("missing.json") != std::string::npos);
  CHECK(run("--mask-threshold -1 filter " + golden_pred(), out) == 1);
  CHECK(run("--filter-mode sideways filter " + golden_pred(), out) == 1);
  CHECK(run("--no-such-flag score " + golden_pred(), out) == 1);
  CHECK(run("", out) == 1);

  write_text_file(out / "bad.json", R"({"format_version": 1, "colour": 3})");
  CHECK(run("train --config \"" + (out / "bad.json").string() + "\"", out) == 1);
  CHECK(read_text_file(out / "stderr.txt").find("colour") != std::string::npos);
}

TEST_CASE("diverging training exits with 2") {
  const auto out = tmp_dir("diverge");
  write_text_file(out / "cfg.json", R"({"format_version": 1, "labeled_scenes": 2,
    "unlabeled_scenes": 2, "test_scenes": 1, "scene": {"class_signal": 10},
    "schedule": {"burn_in_iters": 40, "max_iters": 41, "learning_rate": 1e308}})");
  CHECK(run("train --config \"" + (out / "cfg.json").string() + "\"", out) == 2);
}

TEST_CASE("simulate, analyze and match") {
  const auto out = tmp_dir("simulate");
  REQUIRE(run("--seed 3 simulate --count 2", out) == 0);
  for (const char* f : {"scene_0_gt.json", "scene_0_pred.json", "scene_1_gt.json",
                        "scene_1_pred.json", "simulate.json"}) {
    CHECK(fs::exists(out / f));
  }
  const auto pred = read_prediction_file(out / "scene_0_pred.json");
  const auto gt = read_ground_truth_file(out / "scene_0_gt.json");
  CHECK(pred.height == gt.height);

  const auto an = tmp_dir("analyze");
  const std::string args = "analyze --predictions \"" + (out / "scene_0_pred.json").string() +
                           "\" --ground-truth \"" + (out / "scene_0_gt.json").string() +
                           "\" --predictions \"" + (out / "scene_1_pred.json").string() +
                           "\" --ground-truth \"" + (out / "scene_1_gt.json").string() + "\"";
  REQUIRE(run(args, an) == 0);
  for (const char* f : {"score_iou.csv", "confusion.csv", "errors.csv", "analysis.json"}) {
    CHECK(fs::exists(an / f));
  }
  CHECK(read_text_file(an / "errors.csv").rfind("index,id,category\n", 0) == 0);

  const auto mt = tmp_dir("match");
  REQUIRE(run("match --predictions \"" + (out / "scene_0_pred.json").string() +
                  "\" --ground-truth \"" + (out / "scene_0_gt.json").string() + "\"",
              mt) == 0);
  const auto m = read_json(mt / "match.json");
  CHECK(m["pairs"].size() == std::min(pred.instances.size(), gt.instances.size()));
}

TEST_CASE("correct and loss") {
  const auto sim = tmp_dir("sim_for_correct");
  REQUIRE(run("--seed 5 simulate --count 1", sim) == 0);
  const std::string files = "--predictions \"" + (sim / "scene_0_pred.json").string() +
                            "\" --ground-truth \"" + (sim / "scene_0_gt.json").string() + "\"";

  const auto out = tmp_dir("correct");
  REQUIRE(run("--mock-accuracy 1 correct " + files + " --it-cur 0 --it-max 10", out) == 0);
  const auto doc = read_json(out / "corrected.json");
  CHECK(doc["w"].get<double>() == 0.5);

  const auto mx = tmp_dir("correct_matrix");
  CHECK(run("--mock-confusion 0,1,1,1,0,1,1,1,0 correct " + files, mx) == 0);
  CHECK(run("--mock-confusion 0,1 correct " + files, mx) == 1);
  CHECK(run("--mock-confusion 0,x,1 correct " + files, mx) == 1);

  const auto ls = tmp_dir("loss");
  REQUIRE(run("loss " + files + " --teacher \"" + (sim / "scene_0_pred.json").string() + "\"",
              ls) == 0);
  const auto l = read_json(ls / "loss.json");
  CHECK(l.contains("supervised"));
  CHECK(l.contains("unsupervised"));
}

TEST_CASE("identical invocations produce identical bytes") {
  const auto cfg_dir = tmp_dir("det_cfg");
  write_text_file(cfg_dir / "cfg.json", kSmallConfig);
  const std::string train = "--seed 2 train --config \"" + (cfg_dir / "cfg.json").string() + "\"";

  const auto a = tmp_dir("det_a"), b = tmp_dir("det_b");
  REQUIRE(run(train, a) == 0);
  REQUIRE(run(train, b) == 0);
  check_same_outputs(a, b);
  CHECK(fs::exists(a / "train_log.jsonl"));
  CHECK(fs::exists(a / "metrics.json"));

  const auto c = tmp_dir("det_c"), d = tmp_dir("det_d");
  REQUIRE(run("--seed 9 simulate --count 2 --channel weak", c) == 0);
  REQUIRE(run("--seed 9 simulate --count 2 --channel weak", d) == 0);
  check_same_outputs(c, d);

  const auto e = tmp_dir("det_e"), f = tmp_dir("det_f");
  REQUIRE(run("--seed 4 --mock-jitter 0.2 correct " + golden_pred(), e) == 0);
  REQUIRE(run("--seed 4 --mock-jitter 0.2 correct " + golden_pred(), f) == 0);
  check_same_outputs(e, f);
}
