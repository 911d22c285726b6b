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

#ifndef DIVRANK_RERANK_HPP_
#define DIVRANK_RERANK_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "divrank/metrics.hpp"
#include "divrank/ranker.hpp"
#include "divrank/similarity.hpp"
#include "divrank/types.hpp"

namespace divrank {

/// Which power of lambda weighs the antecedent placed at position i.
///   kDerivation: lambda^i, so the position-0 antecedent has weight 1 and
///     the greedy result expands f - sum_i lambda^i * s, consistent with how
///     the similarity model is trained.
///   kAlgorithm2Literal: lambda^k at loop iteration k (the antecedent at
///     position k-1 gets weight lambda^k), i.e. the published loop verbatim.
enum class ExponentConvention { kDerivation, kAlgorithm2Literal };

struct RerankPlan {
  double lambda = 1.0 / 3.0;
  ExponentConvention exponent_convention = ExponentConvention::kDerivation;
  std::optional<int> max_positions;  // penalties only while placing pos < M

  void validate() const {
    if (lambda < 0.0 || lambda > 1.0) {
      throw std::invalid_argument("lambda outside [0,1]");
    }
    if (max_positions && *max_positions < 1) {
      throw std::invalid_argument("max_positions < 1");
    }
  }
};

struct PenaltyTerm {
  std::string antecedent_id;
  double weight = 0.0;   // lambda power applied
  double s_value = 0.0;  // similarity logit to the antecedent
};

struct RankedResult {
  std::vector<std::string> ordered_ids;       // ids by final position
  std::vector<int> ordering;                  // input index by final position
  std::vector<double> base_logits;            // by final position
  std::vector<double> final_logits;           // by final position
  std::vector<std::vector<PenaltyTerm>> penalties;  // by final position
  long combiner_evals = 0;
  long tower_evals = 0;
};

namespace internal {

// Stable descending sort; ties broken by listing_id ascending.
inline std::vector<int> argsort_by_logit(
    const std::vector<double>& logits,
    const std::vector<ListingImpression>& listings) {
  std::vector<int> idx(listings.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (logits[a] != logits[b]) return logits[a] > logits[b];
    return listings[a].listing_id < listings[b].listing_id;
  });
  return idx;
}

}  // namespace internal

/// Descending sort by the booking logit. The logit of a listing does not
/// depend on what was placed before it, so the per-position argmax loop
/// reduces to one scoring pass and a sort.
inline RankedResult rank_algorithm1(const RankingModel& model,
                                    const QueryContext& ctx,
                                    const std::vector<ListingImpression>& listings) {
  if (listings.empty()) throw std::invalid_argument("no listings to rank");
  std::vector<double> logits(listings.size());
  for (std::size_t i = 0; i < listings.size(); ++i) {
    logits[i] = score(model, ctx, listings[i]);
  }
  RankedResult result;
  result.ordering = internal::argsort_by_logit(logits, listings);
  for (int i : result.ordering) {
    result.ordered_ids.push_back(listings[i].listing_id);
    result.base_logits.push_back(logits[i]);
    result.final_logits.push_back(logits[i]);
    result.penalties.emplace_back();
  }
  return result;
}

/// Greedy diverse ranking: position 0 goes to the top booking logit; each
/// later iteration subtracts the decayed similarity to the most recently
/// placed listing from every remaining candidate's running logit, then takes
/// the argmax. Shared-tower embeddings are cached, so tower evaluations stay
/// <= N and combiner evaluations total N(N-1)/2.
inline RankedResult rank_algorithm2(const RankingModel& base,
                                    const SimilarityModel& sim,
                                    const QueryContext& ctx,
                                    const std::vector<ListingImpression>& listings,
                                    const RerankPlan& plan) {
  if (listings.empty()) throw std::invalid_argument("no listings to rank");
  plan.validate();
  const int n = static_cast<int>(listings.size());

  std::vector<double> base_logits(n), running(n);
  for (int i = 0; i < n; ++i) {
    base_logits[i] = score(base, ctx, listings[i]);
    running[i] = base_logits[i];
  }
  std::vector<std::vector<PenaltyTerm>> ledger(n);
  std::vector<bool> placed(n, false);
  EmbeddingCache cache;

  auto argmax_remaining = [&]() {
    int best = -1;
    for (int i = 0; i < n; ++i) {
      if (placed[i]) continue;
      if (best < 0 || running[i] > running[best] ||
          (running[i] == running[best] &&
           listings[i].listing_id < listings[best].listing_id)) {
        best = i;
      }
    }
    return best;
  };

  RankedResult result;
  auto place = [&](int i) {
    placed[i] = true;
    result.ordering.push_back(i);
    result.ordered_ids.push_back(listings[i].listing_id);
    result.base_logits.push_back(base_logits[i]);
    result.final_logits.push_back(running[i]);
    result.penalties.push_back(ledger[i]);
  };

  place(argmax_remaining());
  for (int k = 1; k < n; ++k) {
    if (!plan.max_positions || k < *plan.max_positions) {
      const ListingImpression& antecedent = listings[result.ordering[k - 1]];
      // Antecedent at position k-1: weight lambda^(k-1) under the
      // derivation convention, lambda^k under the literal one.
      int power = plan.exponent_convention == ExponentConvention::kDerivation
                      ? k - 1
                      : k;
      double weight = power == 0 ? 1.0 : std::pow(plan.lambda, power);
      for (int i = 0; i < n; ++i) {
        if (placed[i]) continue;
        double s = similarity_logit(sim, ctx, listings[i], antecedent, &cache);
        running[i] -= weight * s;
        ledger[i].push_back({antecedent.listing_id, weight, s});
      }
    }
    place(argmax_remaining());
  }
  result.combiner_evals = cache.combiner_evals;
  result.tower_evals = cache.tower_evals;
  return result;
}

/// Booked position after re-ranking a logged search, or nullopt when the
/// search had no booking.
template <typename RankFn>
std::optional<int> reranked_booked_position(const SearchLog& log,
                                            RankFn&& rank_fn) {
  int bi = log.booked_index();
  if (bi < 0) return std::nullopt;
  const std::string& booked_id = log.impressions[bi].listing_id;
  RankedResult r = rank_fn(log);
  for (std::size_t j = 0; j < r.ordered_ids.size(); ++j) {
    if (r.ordered_ids[j] == booked_id) return static_cast<int>(j);
  }
  throw DataError("booked listing missing from reranked result");
}

/// Offline NDCG of a ranking policy over logged searches.
template <typename RankFn>
double offline_ndcg(const std::vector<SearchLog>& logs, RankFn&& rank_fn) {
  std::vector<int> positions;
  for (const auto& log : logs) {
    if (auto pos = reranked_booked_position(log, rank_fn)) {
      positions.push_back(*pos);
    }
  }
  return ndcg_from_positions(positions);
}

struct LambdaSweepRow {
  double lambda = 0.0;
  double ndcg = 0.0;
};

struct LambdaSweepResult {
  std::vector<LambdaSweepRow> rows;
  double best_lambda = 0.0;
  double best_ndcg = 0.0;
};

/// Offline NDCG of Algorithm 2 over a lambda grid; reports the argmax.
inline LambdaSweepResult sweep_lambda(const RankingModel& base,
                                      const SimilarityModel& sim,
                                      const std::vector<SearchLog>& logs,
                                      const std::vector<double>& grid,
                                      const RerankPlan& plan_template = {}) {
  if (grid.empty()) throw std::invalid_argument("empty lambda grid");
  LambdaSweepResult result;
  result.best_ndcg = -std::numeric_limits<double>::infinity();
  for (double lambda : grid) {
    RerankPlan plan = plan_template;
    plan.lambda = lambda;
    plan.validate();
    double ndcg = offline_ndcg(logs, [&](const SearchLog& log) {
      return rank_algorithm2(base, sim, log.context, log.impressions, plan);
    });
    result.rows.push_back({lambda, ndcg});
    if (ndcg > result.best_ndcg) {
      result.best_ndcg = ndcg;
      result.best_lambda = lambda;
    }
  }
  return result;
}

}  // namespace divrank

#endif  // DIVRANK_RERANK_HPP_
