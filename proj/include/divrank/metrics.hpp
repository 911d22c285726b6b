// Copyright 2026 The divrank Authors.
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

#ifndef DIVRANK_METRICS_HPP_
#define DIVRANK_METRICS_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "divrank/types.hpp"

namespace divrank {

/// log(2)/log(2+pos), the positional discount with positions from 0.
/// A single relevant item per search makes the ideal DCG 1, so this is also
/// the per-search NDCG contribution.
inline double position_discount(int pos) {
  if (pos < 0) throw std::invalid_argument("negative position");
  return std::log(2.0) / std::log(2.0 + pos);
}

/// Monotone-decreasing examination probabilities over positions.
struct AttentionCurve {
  std::vector<double> values;

  static AttentionCurve log_discount(int k) {
    AttentionCurve c;
    for (int j = 0; j < k; ++j) c.values.push_back(position_discount(j));
    return c;
  }

  void validate() const {
    for (std::size_t j = 0; j < values.size(); ++j) {
      if (values[j] <= 0.0 || values[j] > 1.0) {
        throw std::invalid_argument("attention values must be in (0,1]");
      }
      if (j > 0 && values[j] >= values[j - 1]) {
        throw std::invalid_argument("attention must be strictly decreasing");
      }
    }
  }
};

/// Mean discount over the booked positions of a log set; searches without a
/// booking are excluded by the caller.
inline double ndcg_from_positions(std::span<const int> booked_positions) {
  if (booked_positions.empty()) {
    throw std::invalid_argument("no booked searches");
  }
  double sum = 0.0;
  for (int pos : booked_positions) sum += position_discount(pos);
  return sum / static_cast<double>(booked_positions.size());
}

/// Sum over positions of P_booking(listing at j) * P_attention(j).
/// `ordering[j]` names which listing sits at position j.
inline double expected_bookings(std::span<const double> booking_probs,
                                const AttentionCurve& attention,
                                std::span<const int> ordering) {
  if (booking_probs.size() != ordering.size() ||
      attention.values.size() < ordering.size()) {
    throw std::invalid_argument("length mismatch");
  }
  double total = 0.0;
  for (std::size_t j = 0; j < ordering.size(); ++j) {
    total += booking_probs[ordering[j]] * attention.values[j];
  }
  return total;
}

/// Change in expected bookings from swapping listings at attention weights
/// (a_x, a_y): (p_y - p_x) * (a_x - a_y).
inline double swap_delta_bookings(double p_x, double p_y, double a_x,
                                  double a_y) {
  return (p_y - p_x) * (a_x - a_y);
}

/// Change in expected NDCG from swapping the listings at pos_x < pos_y.
inline double swap_delta_ndcg(double p_x, double p_y, int pos_x, int pos_y) {
  if (pos_x >= pos_y) throw std::invalid_argument("need pos_x < pos_y");
  return (p_y - p_x) * (position_discount(pos_x) - position_discount(pos_y));
}

struct OracleResult {
  std::vector<int> ordering;  // ordering[j] = listing index at position j
  double value = 0.0;
};

/// Exhaustive argmax of sum_j p[ordering[j]] * discount[j] over all
/// permutations. Factorial; capped at K <= 8.
inline OracleResult oracle_best_ordering(std::span<const double> probs,
                                         std::span<const double> discounts) {
  if (probs.size() > 8) throw std::invalid_argument("K > 8 for oracle");
  if (probs.size() != discounts.size()) {
    throw std::invalid_argument("length mismatch");
  }
  std::vector<int> perm(probs.size());
  std::iota(perm.begin(), perm.end(), 0);
  OracleResult best;
  best.value = -std::numeric_limits<double>::infinity();
  do {
    double v = 0.0;
    for (std::size_t j = 0; j < perm.size(); ++j) {
      v += probs[perm[j]] * discounts[j];
    }
    if (v > best.value) {
      best.value = v;
      best.ordering = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

struct DiversityStats {
  double price_variance_top8 = 0.0;  // mean over searches, population variance
  double geo_redundancy_top8 = 0.0;  // mean count of pairs closer than 0.5 km
  int short_searches = 0;            // searches that contributed < 8 listings
};

inline double population_variance(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
  double acc = 0.0;
  for (double x : xs) acc += (x - mean) * (x - mean);
  return acc / xs.size();
}

/// Top-8 price variance and sub-0.5km pair counts, averaged over searches.
/// Impressions must already be in presentation order.
inline DiversityStats diversity_metrics(const std::vector<SearchLog>& logs) {
  DiversityStats stats;
  if (logs.empty()) return stats;
  double var_sum = 0.0, geo_sum = 0.0;
  for (const auto& log : logs) {
    std::size_t top = std::min<std::size_t>(8, log.impressions.size());
    if (top < 8) ++stats.short_searches;
    std::vector<double> prices;
    for (std::size_t i = 0; i < top; ++i) {
      prices.push_back(log.impressions[i].price);
    }
    var_sum += population_variance(prices);
    int close = 0;
    for (std::size_t i = 0; i < top; ++i) {
      for (std::size_t j = i + 1; j < top; ++j) {
        double dx = log.impressions[i].location.first -
                    log.impressions[j].location.first;
        double dy = log.impressions[i].location.second -
                    log.impressions[j].location.second;
        if (std::hypot(dx, dy) < 0.5) ++close;
      }
    }
    geo_sum += close;
  }
  stats.price_variance_top8 = var_sum / logs.size();
  stats.geo_redundancy_top8 = geo_sum / logs.size();
  return stats;
}

struct ParetoCurve {
  // Cumulative (booking fraction, value fraction) after each booking,
  // bookings sorted by value descending.
  std::vector<std::pair<double, double>> points;
  // Smallest booking fraction whose cumulative value reaches 50% of total.
  double split_at_half_value = 0.0;
};

inline ParetoCurve pareto_split(std::vector<double> booking_values) {
  if (booking_values.empty()) throw std::invalid_argument("no bookings");
  std::sort(booking_values.begin(), booking_values.end(), std::greater<>());
  double total = std::accumulate(booking_values.begin(), booking_values.end(), 0.0);
  ParetoCurve curve;
  double cum = 0.0;
  bool found = false;
  for (std::size_t i = 0; i < booking_values.size(); ++i) {
    cum += booking_values[i];
    double bfrac = static_cast<double>(i + 1) / booking_values.size();
    curve.points.emplace_back(bfrac, cum / total);
    if (!found && cum >= 0.5 * total) {
      curve.split_at_half_value = bfrac;
      found = true;
    }
  }
  return curve;
}

}  // namespace divrank

#endif  // DIVRANK_METRICS_HPP_
