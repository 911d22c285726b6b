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

#ifndef DIVRANK_SIMILARITY_HPP_
#define DIVRANK_SIMILARITY_HPP_

#include <algorithm>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "divrank/net.hpp"
#include "divrank/pairs.hpp"
#include "divrank/ranker.hpp"
#include "divrank/types.hpp"
#include "json.hpp"

namespace divrank {

/// s(q, u, l, l_a): one listing tower shared by both listing inputs maps
/// features to an embedding; a shallow combiner over
/// [embed(l), embed(l_a), query, user] outputs the similarity logit.
/// Asymmetric in (l, l_a) by construction.
struct SimilarityModel {
  Network tower;     // listing features -> embedding of dim d
  Network combiner;  // [d + d + q_dim + u_dim] -> scalar
  int embedding_dim = 0;
  std::string query_schema;
  std::string user_schema;
  std::string listing_schema;
};

/// Listing-id keyed embedding cache. Embeddings are a pure function of
/// listing features, so a hit must be bit-identical to recomputation.
struct EmbeddingCache {
  std::unordered_map<std::string, std::vector<double>> embeddings;
  long tower_evals = 0;
  long combiner_evals = 0;

  void clear() {
    embeddings.clear();
    tower_evals = 0;
    combiner_evals = 0;
  }
};

/// Tower output for a listing; counts a tower evaluation only on cache miss.
inline std::vector<double> embed(const SimilarityModel& model,
                                 const ListingImpression& listing,
                                 EmbeddingCache* cache = nullptr) {
  if (listing.features.schema_id != model.listing_schema) {
    throw SchemaError("similarity tower schema mismatch: " +
                      listing.features.schema_id);
  }
  if (cache) {
    auto it = cache->embeddings.find(listing.listing_id);
    if (it != cache->embeddings.end()) return it->second;
  }
  std::vector<double> e = model.tower.forward(listing.features.values);
  if (cache) {
    ++cache->tower_evals;
    cache->embeddings.emplace(listing.listing_id, e);
  }
  return e;
}

inline std::vector<double> combiner_input(const SimilarityModel& model,
                                          const QueryContext& ctx,
                                          std::span<const double> emb_l,
                                          std::span<const double> emb_a) {
  if (ctx.query_features.schema_id != model.query_schema ||
      ctx.user_features.schema_id != model.user_schema) {
    throw SchemaError("similarity combiner schema mismatch");
  }
  std::vector<double> x;
  x.reserve(emb_l.size() + emb_a.size() + ctx.query_features.values.size() +
            ctx.user_features.values.size());
  x.insert(x.end(), emb_l.begin(), emb_l.end());
  x.insert(x.end(), emb_a.begin(), emb_a.end());
  x.insert(x.end(), ctx.query_features.values.begin(),
           ctx.query_features.values.end());
  x.insert(x.end(), ctx.user_features.values.begin(),
           ctx.user_features.values.end());
  return x;
}

inline double similarity_logit(const SimilarityModel& model,
                               const QueryContext& ctx,
                               const ListingImpression& listing,
                               const ListingImpression& antecedent,
                               EmbeddingCache* cache = nullptr) {
  std::vector<double> el = embed(model, listing, cache);
  std::vector<double> ea = embed(model, antecedent, cache);
  if (cache) ++cache->combiner_evals;
  return model.combiner.forward_scalar(combiner_input(model, ctx, el, ea));
}

struct SimGradients {
  Gradients tower;
  Gradients combiner;

  static SimGradients zeros_like(const SimilarityModel& m) {
    return {Gradients::zeros_like(m.tower), Gradients::zeros_like(m.combiner)};
  }

  void zero() {
    tower.zero();
    combiner.zero();
  }
};

/// Forward + backprop of one s(q, u, l, l_a) evaluation. `upstream` is
/// dLoss/ds; tower gradients accumulate through both listing slots.
inline double similarity_backprop(const SimilarityModel& model,
                                  const QueryContext& ctx,
                                  const ListingImpression& listing,
                                  const ListingImpression& antecedent,
                                  double upstream, SimGradients* grads) {
  Network::Trace tl, ta, tc;
  std::vector<double> el = model.tower.forward(listing.features.values, &tl);
  std::vector<double> ea = model.tower.forward(antecedent.features.values, &ta);
  std::vector<double> cin = combiner_input(model, ctx, el, ea);
  double s = model.combiner.forward_scalar(cin, &tc);
  if (grads) {
    double up[1] = {upstream};
    std::vector<double> cin_grad =
        backward(model.combiner, cin, tc, up, &grads->combiner);
    int d = model.embedding_dim;
    backward(model.tower, listing.features.values, tl,
             std::span<const double>(cin_grad.data(), d), &grads->tower);
    backward(model.tower, antecedent.features.values, ta,
             std::span<const double>(cin_grad.data() + d, d), &grads->tower);
  }
  return s;
}

struct SimilarityTrainOptions {
  std::vector<int> tower_hidden = {32};
  int embedding_dim = 16;
  std::vector<int> combiner_hidden = {16};
  int max_pairs_per_search = 30;
};

/// Precomputed frozen-base logits for a conditional pair.
struct UblPair {
  double booked = 0.0;
  double not_booked = 0.0;
};

inline std::vector<UblPair> precompute_ubl(
    const RankingModel& base, const std::vector<ConditionalPairExample>& pairs) {
  std::vector<UblPair> ubl;
  ubl.reserve(pairs.size());
  for (const auto& p : pairs) {
    ubl.push_back({score(base, p.context, p.booked),
                   score(base, p.context, p.not_booked)});
  }
  return ubl;
}

/// Mean pairwise loss of logits ubl - s over a conditional pair set.
/// Passing nullptr for `sim` evaluates the s == 0 baseline.
inline double mean_conditional_loss(
    const RankingModel& base, const SimilarityModel* sim,
    const std::vector<ConditionalPairExample>& pairs) {
  if (pairs.empty()) throw std::invalid_argument("no conditional pairs");
  double total = 0.0;
  for (const auto& p : pairs) {
    double a = score(base, p.context, p.booked);
    double b = score(base, p.context, p.not_booked);
    if (sim) {
      a -= similarity_logit(*sim, p.context, p.booked, p.antecedent);
      b -= similarity_logit(*sim, p.context, p.not_booked, p.antecedent);
    }
    total += pairwise_loss(a, b);
  }
  return total / pairs.size();
}

inline std::vector<ConditionalPairExample> subsample_conditional_pairs(
    std::vector<ConditionalPairExample> pairs, int max_per_search,
    std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x7f4a7c159e3779b9ULL);
  std::vector<ConditionalPairExample> out;
  std::size_t i = 0;
  while (i < pairs.size()) {
    std::size_t j = i;
    while (j < pairs.size() && pairs[j].search_id == pairs[i].search_id) ++j;
    std::vector<std::size_t> idx(j - i);
    std::iota(idx.begin(), idx.end(), i);
    if (static_cast<int>(idx.size()) > max_per_search) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(max_per_search);
      std::sort(idx.begin(), idx.end());
    }
    for (std::size_t k : idx) out.push_back(std::move(pairs[k]));
    i = j;
  }
  return out;
}

/// Trains s on conditionally filtered pairs with the base model frozen:
/// per example the pair logits are ubl - s(q, u, l, l_0), with the ubl
/// values precomputed once as constants, and only s's parameters updated.
inline SimilarityModel train_similarity(const RankingModel& base,
                                        const std::vector<SearchLog>& logs,
                                        const TrainConfig& cfg,
                                        const SchemaManifest& schemas,
                                        const SimilarityTrainOptions& opts = {}) {
  cfg.validate();
  std::vector<ConditionalPairExample> pairs = subsample_conditional_pairs(
      build_conditional_pairs(logs), opts.max_pairs_per_search, cfg.seed);
  if (pairs.empty()) throw DataError("no conditional pairs in logs");

  int l_dim = schemas.dim(base.listing_schema);
  int q_dim = schemas.dim(base.query_schema);
  int u_dim = schemas.dim(base.user_schema);

  std::vector<LayerSpec> tower_specs;
  int in = l_dim;
  for (int h : opts.tower_hidden) {
    tower_specs.push_back({in, h, Activation::kRelu});
    in = h;
  }
  tower_specs.push_back({in, opts.embedding_dim, Activation::kRelu});

  std::vector<LayerSpec> comb_specs;
  in = 2 * opts.embedding_dim + q_dim + u_dim;
  for (int h : opts.combiner_hidden) {
    comb_specs.push_back({in, h, Activation::kRelu});
    in = h;
  }
  comb_specs.push_back({in, 1, Activation::kIdentity});

  SimilarityModel model{Network(tower_specs, cfg.seed),
                        Network(comb_specs, cfg.seed + 1),
                        opts.embedding_dim,
                        base.query_schema,
                        base.user_schema,
                        base.listing_schema};

  std::vector<UblPair> ubl = precompute_ubl(base, pairs);

  Optimizer tower_opt(cfg.optimizer, cfg.learning_rate, model.tower);
  Optimizer comb_opt(cfg.optimizer, cfg.learning_rate, model.combiner);
  SimGradients grads = SimGradients::zeros_like(model);
  std::mt19937_64 shuffle_rng(cfg.seed);

  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t start = 0; start < order.size();
         start += cfg.batch_size) {
      std::size_t end = std::min(order.size(), start + cfg.batch_size);
      grads.zero();
      for (std::size_t k = start; k < end; ++k) {
        const ConditionalPairExample& p = pairs[order[k]];
        const UblPair& u = ubl[order[k]];
        double s_b =
            similarity_logit(model, p.context, p.booked, p.antecedent);
        double s_n =
            similarity_logit(model, p.context, p.not_booked, p.antecedent);
        double a = u.booked - s_b;
        double b = u.not_booked - s_n;
        // d = a - b; dL/dd = sigma(d) - 1; ds enters with a minus sign.
        double g = pairwise_loss_grad(a, b) / static_cast<double>(end - start);
        similarity_backprop(model, p.context, p.booked, p.antecedent, -g,
                            &grads);
        similarity_backprop(model, p.context, p.not_booked, p.antecedent, g,
                            &grads);
      }
      apply_weight_decay(model.tower, cfg.weight_decay, &grads.tower);
      apply_weight_decay(model.combiner, cfg.weight_decay, &grads.combiner);
      tower_opt.step(model.tower, grads.tower);
      comb_opt.step(model.combiner, grads.combiner);
    }
  }
  return model;
}

inline nlohmann::json similarity_model_to_json(const SimilarityModel& m) {
  return {{"format_version", 1},
          {"model_kind", "similarity"},
          {"embedding_dim", m.embedding_dim},
          {"query_schema", m.query_schema},
          {"user_schema", m.user_schema},
          {"listing_schema", m.listing_schema},
          {"tower", network_to_json(m.tower)},
          {"combiner", network_to_json(m.combiner)}};
}

inline SimilarityModel similarity_model_from_json(const nlohmann::json& j) {
  if (j.at("model_kind").get<std::string>() != "similarity") {
    throw std::invalid_argument("checkpoint is not a similarity model");
  }
  return {network_from_json(j.at("tower")),
          network_from_json(j.at("combiner")),
          j.at("embedding_dim").get<int>(),
          j.at("query_schema").get<std::string>(),
          j.at("user_schema").get<std::string>(),
          j.at("listing_schema").get<std::string>()};
}

}  // namespace divrank

#endif  // DIVRANK_SIMILARITY_HPP_
