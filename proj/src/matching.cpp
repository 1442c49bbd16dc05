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

#include "pldc/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pldc/error.hpp"

namespace pldc {

CostMatrix::CostMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  PLDC_CHECK(data_.size() == rows_ * cols_, "cost matrix data does not match rows*cols");
}

std::size_t MatchResult::target_of(std::size_t student) const {
  for (const auto& [s, t] : pairs) {
    if (s == student) return t;
  }
  return npos;
}

namespace {

using Square = std::vector<std::vector<double>>;

// Shortest augmenting path with row/column potentials, O(n^3).
// Returns col_of_row and writes the optimal cost.
std::vector<std::size_t> solve_square(const Square& a, double* cost_out) {
  const std::size_t n = a.size();
  if (n == 0) {
    *cost_out = 0.0;
    return {};
  }
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based indices; index 0 is the virtual source column.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> row_of_col(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    row_of_col[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = row_of_col[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = a[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[row_of_col[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (row_of_col[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      row_of_col[j0] = row_of_col[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> col_of_row(n);
  double cost = 0.0;
  for (std::size_t j = 1; j <= n; ++j) {
    col_of_row[row_of_col[j] - 1] = j - 1;
  }
  for (std::size_t i = 0; i < n; ++i) cost += a[i][col_of_row[i]];
  *cost_out = cost;
  return col_of_row;
}

Square submatrix(const Square& a, std::size_t first_row, const std::vector<std::size_t>& cols) {
  Square out;
  out.reserve(a.size() - first_row);
  for (std::size_t r = first_row; r < a.size(); ++r) {
    std::vector<double> row;
    row.reserve(cols.size());
    for (const auto c : cols) row.push_back(a[r][c]);
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace

MatchResult hungarian(const CostMatrix& costs) {
  const std::size_t q = costs.rows();
  const std::size_t p = costs.cols();
  MatchResult result;
  if (q == 0 || p == 0) return result;
  for (std::size_t r = 0; r < q; ++r) {
    for (std::size_t c = 0; c < p; ++c) {
      PLDC_CHECK(std::isfinite(costs(r, c)), "hungarian: cost matrix has a non-finite entry");
    }
  }

  // Pad to square with zero-cost dummy rows/columns. Dummy columns get the
  // highest indices, so the lexicographic rule prefers real matches early.
  const std::size_t n = std::max(q, p);
  Square a(n, std::vector<double>(n, 0.0));
  for (std::size_t r = 0; r < q; ++r) {
    for (std::size_t c = 0; c < p; ++c) a[r][c] = costs(r, c);
  }

  double remaining = 0.0;
  std::vector<std::size_t> current = solve_square(a, &remaining);
  double scale = 1.0;
  for (const auto& row : a) {
    for (const double v : row) scale = std::max(scale, std::abs(v));
  }
  const double tol = 1e-9 * scale * static_cast<double>(n);

  // Fix rows one at a time, taking the smallest column that still admits an
  // optimal completion. `current` always holds an optimal completion of the
  // unfixed rows, so only columns below its choice need a re-solve.
  std::vector<std::size_t> free_cols(n);
  for (std::size_t c = 0; c < n; ++c) free_cols[c] = c;
  std::vector<std::size_t> chosen(n);
  for (std::size_t r = 0; r < q; ++r) {
    const std::size_t incumbent = current[0];
    std::size_t pick = incumbent;
    std::vector<std::size_t> next_completion;
    for (const auto c : free_cols) {
      if (c >= incumbent) break;
      std::vector<std::size_t> rest_cols;
      for (const auto other : free_cols) {
        if (other != c) rest_cols.push_back(other);
      }
      double rest_cost = 0.0;
      auto rest = solve_square(submatrix(a, r + 1, rest_cols), &rest_cost);
      if (a[r][c] + rest_cost <= remaining + tol) {
        pick = c;
        next_completion.clear();
        for (const auto local : rest) next_completion.push_back(rest_cols[local]);
        remaining = rest_cost;
        break;
      }
    }
    if (pick == incumbent) {
      remaining -= a[r][incumbent];
      next_completion.assign(current.begin() + 1, current.end());
    }
    chosen[r] = pick;
    free_cols.erase(std::find(free_cols.begin(), free_cols.end(), pick));
    // Re-express the completion as absolute column indices for rows r+1..
    current = std::move(next_completion);
  }

  for (std::size_t r = 0; r < q; ++r) {
    if (chosen[r] < p) {
      result.pairs.emplace_back(r, chosen[r]);
      result.total_cost += costs(r, chosen[r]);
    }
  }
  return result;
}

void CostWeights::validate() const {
  for (const double w : {class_weight, bce_weight, dice_weight}) {
    PLDC_CHECK(std::isfinite(w) && w >= 0.0, "cost weights must be finite and >= 0");
  }
}

double mean_bce(const MaskLogitGrid& logits, const BinaryMask& target) {
  PLDC_CHECK(logits.height() == target.height() && logits.width() == target.width(),
             "BCE: shape mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < logits.pixel_count(); ++i) {
    const double t = std::clamp(sigmoid(logits[i]), kProbEpsilon, 1.0 - kProbEpsilon);
    total -= target[i] ? std::log(t) : std::log(1.0 - t);
  }
  return total / static_cast<double>(logits.pixel_count());
}

double soft_dice(const MaskLogitGrid& logits, const BinaryMask& target) {
  PLDC_CHECK(logits.height() == target.height() && logits.width() == target.width(),
             "dice: shape mismatch");
  double inter = 0.0;
  double sum_t = 0.0;
  double sum_m = 0.0;
  for (std::size_t i = 0; i < logits.pixel_count(); ++i) {
    const double t = sigmoid(logits[i]);
    const double m = target[i] ? 1.0 : 0.0;
    inter += t * m;
    sum_t += t;
    sum_m += m;
  }
  return (2.0 * inter + 1.0) / (sum_t + sum_m + 1.0);
}

double class_nll(const ClassLogits& logits, std::size_t class_id) {
  PLDC_CHECK(class_id < logits.size(), "class id outside the logit vector");
  const auto probs = softmax(logits);
  return -std::log(std::max(probs[class_id], kProbEpsilon));
}

double match_cost(const InstancePrediction& student, std::size_t class_id,
                  const BinaryMask& mask, const CostWeights& weights) {
  double cost = 0.0;
  if (weights.class_weight != 0.0) {
    cost += weights.class_weight * class_nll(student.class_logits, class_id);
  }
  if (weights.bce_weight != 0.0) {
    cost += weights.bce_weight * mean_bce(student.mask_logits, mask);
  }
  if (weights.dice_weight != 0.0) {
    cost += weights.dice_weight * (1.0 - soft_dice(student.mask_logits, mask));
  }
  return cost;
}

CostMatrix build_cost_matrix(std::span<const InstancePrediction> students,
                             std::span<const GroundTruthInstance> targets,
                             const CostWeights& weights) {
  weights.validate();
  CostMatrix m(students.size(), targets.size());
  for (std::size_t r = 0; r < students.size(); ++r) {
    for (std::size_t c = 0; c < targets.size(); ++c) {
      m(r, c) = match_cost(students[r], static_cast<std::size_t>(targets[c].class_id),
                           targets[c].mask, weights);
    }
  }
  return m;
}

}  // namespace pldc
