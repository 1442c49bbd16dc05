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


#include <algorithm>
#include <random>
#include <set>
#include <vector>

#include <doctest.h>

#include "pldc/error.hpp"
#include "pldc/filtering.hpp"

using namespace pldc;

namespace {

FilterConfig as_coupled(FilterConfig config) {
  config.mode = FilterMode::kCoupled;
  return config;
}

QualityScores q(double c, double m) { return {c, m, c * m}; }

std::set<std::size_t> kept_set(const FilteredSet& f) {
  const auto idx = f.kept_indices();
  return {idx.begin(), idx.end()};
}

std::vector<QualityScores> random_batch(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<QualityScores> out;
  for (std::size_t i = 0; i < n; ++i) {
    // Snap some values onto the thresholds to exercise the inclusive edges.
    double c = unit(rng), m = unit(rng);
    if (unit(rng) < 0.1) c = 0.85;
    if (unit(rng) < 0.1) m = 0.9;
    out.push_back(q(c, m));
  }
  return out;
}

}  // namespace

TEST_CASE("decoupled examples") {
  const FilterConfig cfg;
  const std::vector<QualityScores> s{q(0.99, 0.80), q(0.86, 0.95), q(0.84, 0.99), q(0.5, 0.5)};
  const auto f = filter_ddtf(s, cfg);
  REQUIRE(f.kept.size() == 1);
  CHECK(f.kept[0].index == 1);
  REQUIRE(f.rejected.size() == 3);
  CHECK(f.rejected[0].index == 0);
  CHECK(f.rejected[0].reason == RejectReason::kMaskBelow);
  CHECK(f.rejected[1].index == 2);
  CHECK(f.rejected[1].reason == RejectReason::kClassBelow);
  // Both fail: class is reported.
  CHECK(f.rejected[2].reason == RejectReason::kClassBelow);
}

TEST_CASE("thresholds are inclusive") {
  const FilterConfig cfg;
  CHECK(filter_ddtf(std::vector<QualityScores>{q(0.85, 0.9)}, cfg).kept.size() == 1);
  CHECK(filter_coupled(std::vector<QualityScores>{{0.9, 0.85, 0.765}}, as_coupled(cfg)).kept.size() == 1);
}

TEST_CASE("coupled examples") {
  const FilterConfig cfg;
  const std::vector<QualityScores> s{q(0.99, 0.80), q(0.9, 0.8), q(1.0, 1.0)};
  const auto f = filter_coupled(s, as_coupled(cfg));
  CHECK(kept_set(f) == std::set<std::size_t>{0, 2});
  REQUIRE(f.rejected.size() == 1);
  CHECK(f.rejected[0].index == 1);
  CHECK(f.rejected[0].reason == RejectReason::kScoreBelow);
  CHECK(f.rejected[0].scores.coupled_score == doctest::Approx(0.72));
}

TEST_CASE("kept set equals the set comprehension") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    const auto s = random_batch(rng, 1 + static_cast<std::size_t>(trial % 40));
    FilterConfig cfg;
    if (trial % 3 == 1) {
      cfg.class_threshold = unit(rng);
      cfg.mask_threshold = unit(rng);
    }
    std::set<std::size_t> oracle;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i].class_quality >= cfg.class_threshold && s[i].mask_quality >= cfg.mask_threshold) {
        oracle.insert(i);
      }
    }
    const auto f = filter_ddtf(s, cfg);
    CHECK(kept_set(f) == oracle);

    std::vector<std::size_t> all;
    for (const auto& k : f.kept) all.push_back(k.index);
    for (const auto& r : f.rejected) all.push_back(r.index);
    std::sort(all.begin(), all.end());
    REQUIRE(all.size() == s.size());
    for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);
  }
}

TEST_CASE("raising a threshold never adds instances") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto s = random_batch(rng, 30);
    FilterConfig lo;
    lo.class_threshold = unit(rng);
    lo.mask_threshold = unit(rng);
    lo.coupled_threshold = unit(rng);
    FilterConfig hi = lo;
    hi.class_threshold += unit(rng) * 0.2;
    hi.mask_threshold += unit(rng) * 0.2;
    hi.coupled_threshold += unit(rng) * 0.2;
    const auto a = kept_set(filter_ddtf(s, lo)), b = kept_set(filter_ddtf(s, hi));
    CHECK(std::includes(a.begin(), a.end(), b.begin(), b.end()));
    const auto c = kept_set(filter_coupled(s, as_coupled(lo))), d = kept_set(filter_coupled(s, as_coupled(hi)));
    CHECK(std::includes(c.begin(), c.end(), d.begin(), d.end()));
  }
}

TEST_CASE("extreme thresholds") {
  std::mt19937_64 rng(29);
  const auto s = random_batch(rng, 50);
  FilterConfig zero;
  zero.class_threshold = 0.0;
  zero.mask_threshold = 0.0;
  CHECK(filter_ddtf(s, zero).kept.size() == s.size());
  FilterConfig high;
  high.class_threshold = 1.01;
  CHECK(filter_ddtf(s, high).kept.empty());
  CHECK(filter_ddtf(std::vector<QualityScores>{q(1.0, 1.0)}, high).kept.empty());
}

TEST_CASE("coupled and decoupled disagree in both directions") {
  const FilterConfig cfg;
  // Coupled keeps, decoupled rejects.
  const std::vector<QualityScores> a{q(0.99, 0.80)};
  CHECK(filter_coupled(a, as_coupled(cfg)).kept.size() == 1);
  CHECK(filter_ddtf(a, cfg).kept.empty());
  CHECK(filter_ddtf(a, cfg).rejected[0].reason == RejectReason::kMaskBelow);

  // At s_t = c_t * m_t every decoupled keep is also a coupled keep.
  std::mt19937_64 rng(31);
  const auto batch = random_batch(rng, 2000);
  const auto d = kept_set(filter_ddtf(batch, cfg)), c = kept_set(filter_coupled(batch, as_coupled(cfg)));
  CHECK_FALSE(d.empty());
  CHECK(std::includes(c.begin(), c.end(), d.begin(), d.end()));

  // Decoupled keeps, coupled rejects, once s_t exceeds c_t * m_t.
  FilterConfig strict = cfg;
  strict.coupled_threshold = 0.8;
  const std::vector<QualityScores> b{q(0.86, 0.92)};
  CHECK(filter_ddtf(b, strict).kept.size() == 1);
  CHECK(filter_coupled(b, as_coupled(strict)).kept.empty());
}

TEST_CASE("filter config validation and dispatch") {
  FilterConfig bad;
  bad.mask_threshold = -0.1;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = FilterConfig{};
  bad.class_threshold = NAN;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  CHECK(parse_filter_mode("coupled") == FilterMode::kCoupled);
  CHECK(parse_filter_mode("decoupled") == FilterMode::kDecoupled);
  CHECK_THROWS_AS(parse_filter_mode("other"), ValidationError);

  FilterConfig cfg;
  const std::vector<QualityScores> s{q(0.99, 0.80)};
  CHECK(filter_scores(s, cfg).kept.empty());
  cfg.mode = FilterMode::kCoupled;
  CHECK(filter_scores(s, cfg).kept.size() == 1);
}

TEST_CASE("prediction overloads score first") {
  std::vector<InstancePrediction> preds{
      {ClassLogits({10.0, 0.0}), MaskLogitGrid::filled(2, 2, 5.0)},
      {ClassLogits({0.0, 0.0}), MaskLogitGrid::filled(2, 2, 5.0)}};
  const FilterConfig cfg;
  const auto f = filter_predictions(preds, cfg);
  CHECK(kept_set(f) == std::set<std::size_t>{0});
  CHECK(f.rejected[0].reason == RejectReason::kClassBelow);
}
