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

#ifndef DIVRANK_RANKER_HPP_
#define DIVRANK_RANKER_HPP_

#include <algorithm>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "divrank/net.hpp"
#include "divrank/pairs.hpp"
#include "divrank/types.hpp"
#include "json.hpp"

namespace divrank {

/// Unconditional pairwise booking model over concatenated
/// [query_features, user_features, listing_features].
struct RankingModel {
  Network net;
  std::string query_schema;
  std::string user_schema;
  std::string listing_schema;

  std::vector<double> concat(const QueryContext& ctx,
                             const FeatureVector& listing) const {
    if (ctx.query_features.schema_id != query_schema ||
        ctx.user_features.schema_id != user_schema ||
        listing.schema_id != listing_schema) {
      throw SchemaError("ranking model schema mismatch: got (" +
                        ctx.query_features.schema_id + ", " +
                        ctx.user_features.schema_id + ", " + listing.schema_id +
                        ")");
    }
    std::vector<double> x;
    x.reserve(ctx.query_features.values.size() +
              ctx.user_features.values.size() + listing.values.size());
    x.insert(x.end(), ctx.query_features.values.begin(),
             ctx.query_features.values.end());
    x.insert(x.end(), ctx.user_features.values.begin(),
             ctx.user_features.values.end());
    x.insert(x.end(), listing.values.begin(), listing.values.end());
    return x;
  }
};

/// The pairwise booking logit f(q, u, l).
inline double score(const RankingModel& model, const QueryContext& ctx,
                    const ListingImpression& listing) {
  return model.net.forward_scalar(model.concat(ctx, listing.features));
}

/// sigmoid(a - b) = e^a / (e^a + e^b), the modeled pairwise booking
/// probability of the first listing winning.
inline double pairwise_probability(double logit_x, double logit_y) {
  if (!std::isfinite(logit_x) || !std::isfinite(logit_y)) {
    throw std::invalid_argument("non-finite logit");
  }
  return stable_sigmoid(logit_x - logit_y);
}

/// Bradley-Terry choice probability p_x / (p_x + p_y).
inline double bradley_terry(double p_x, double p_y) {
  if (p_x < 0.0 || p_y < 0.0 || p_x > 1.0 || p_y > 1.0) {
    throw std::invalid_argument("probabilities outside [0,1]");
  }
  if (p_x + p_y <= 0.0) throw std::invalid_argument("both probabilities zero");
  return p_x / (p_x + p_y);
}

struct BaseTrainOptions {
  std::vector<int> hidden = {64, 32};
  int max_pairs_per_search = 30;
};

/// Uniform seeded cap of pairs per search, bounding epoch cost.
inline std::vector<PairExample> subsample_pairs(std::vector<PairExample> pairs,
                                                int max_per_search,
                                                std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<PairExample> out;
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

/// Mean pairwise loss of a model over a pair set.
inline double mean_pair_loss(const RankingModel& model,
                             const std::vector<PairExample>& pairs) {
  if (pairs.empty()) throw std::invalid_argument("no pairs");
  double total = 0.0;
  for (const auto& p : pairs) {
    total += pairwise_loss(score(model, p.context, p.booked),
                           score(model, p.context, p.not_booked));
  }
  return total / pairs.size();
}

/// Trains f over booked/not-booked pairs with the sigmoid cross-entropy
/// loss. Deterministic per (seed, data order, config).
inline RankingModel train_base(const std::vector<SearchLog>& logs,
                               const TrainConfig& cfg,
                               const SchemaManifest& schemas,
                               const BaseTrainOptions& opts = {}) {
  cfg.validate();
  std::vector<PairExample> pairs =
      subsample_pairs(build_pairs(logs), opts.max_pairs_per_search, cfg.seed);
  if (pairs.empty()) throw DataError("no training pairs in logs");

  const std::string qs = pairs[0].context.query_features.schema_id;
  const std::string us = pairs[0].context.user_features.schema_id;
  const std::string ls = pairs[0].booked.features.schema_id;
  int input_dim = schemas.dim(qs) + schemas.dim(us) + schemas.dim(ls);

  std::vector<LayerSpec> specs;
  int in = input_dim;
  for (int h : opts.hidden) {
    specs.push_back({in, h, Activation::kRelu});
    in = h;
  }
  specs.push_back({in, 1, Activation::kIdentity});

  RankingModel model{Network(specs, cfg.seed), qs, us, ls};
  Optimizer opt(cfg.optimizer, cfg.learning_rate, model.net);
  Gradients grads = Gradients::zeros_like(model.net);
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
        const PairExample& p = pairs[order[k]];
        std::vector<double> xb = model.concat(p.context, p.booked.features);
        std::vector<double> xn = model.concat(p.context, p.not_booked.features);
        Network::Trace tb, tn;
        double a = model.net.forward_scalar(xb, &tb);
        double b = model.net.forward_scalar(xn, &tn);
        double g = pairwise_loss_grad(a, b) / static_cast<double>(end - start);
        double gb[1] = {g};
        double gn[1] = {-g};
        backward(model.net, xb, tb, gb, &grads);
        backward(model.net, xn, tn, gn, &grads);
      }
      apply_weight_decay(model.net, cfg.weight_decay, &grads);
      opt.step(model.net, grads);
    }
  }
  return model;
}

inline nlohmann::json ranking_model_to_json(const RankingModel& m) {
  return {{"format_version", 1},
          {"model_kind", "base"},
          {"query_schema", m.query_schema},
          {"user_schema", m.user_schema},
          {"listing_schema", m.listing_schema},
          {"net", network_to_json(m.net)}};
}

inline RankingModel ranking_model_from_json(const nlohmann::json& j) {
  if (j.at("model_kind").get<std::string>() != "base") {
    throw std::invalid_argument("checkpoint is not a base model");
  }
  return {network_from_json(j.at("net")),
          j.at("query_schema").get<std::string>(),
          j.at("user_schema").get<std::string>(),
          j.at("listing_schema").get<std::string>()};
}

}  // namespace divrank

#endif  // DIVRANK_RANKER_HPP_
