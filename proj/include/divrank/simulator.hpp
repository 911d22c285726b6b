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

#ifndef DIVRANK_SIMULATOR_HPP_
#define DIVRANK_SIMULATOR_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "divrank/metrics.hpp"
#include "divrank/rerank.hpp"
#include "divrank/types.hpp"
#include "json.hpp"

namespace divrank {

/// Synthetic two-sided marketplace: log-normal prices, price-correlated
/// quality, geographic redundancy clusters, an 80/20 preference mixture,
/// and cascade attention matching the log positional discount.
struct MarketConfig {
  int n_listings = 300;
  int n_searches = 10000;
  double price_mu = 4.6;     // of log price
  double price_sigma = 0.7;  // of log price
  double quality_correlation = 0.5;  // price <-> quality
  int cluster_count = 10;
  double cluster_spread = 0.3;    // km, within-cluster location scatter
  double majority_fraction = 0.8;  // affordability-leaning share
  int candidates_per_search = 30;
  // Retrieval concentrates most of a result page in a few clusters, the
  // way a real query surfaces many near-identical listings.
  int retrieval_focus_clusters = 2;
  double retrieval_focus_share = 0.9;
  double temperature = 4.0;  // sharpness of the booking decision
  double base_utility = 3.0;  // utility of a perfect taste match
  std::uint64_t seed = 1;

  // Within-cluster share of attribute variance; clusters are redundancy
  // groups in price and quality as well as location.
  double cluster_cohesion = 0.85;
  // Latent per-user cluster vetoes, never visible in features. A vetoed
  // cluster books at essentially zero for that user, so rejecting a
  // listing predicts rejection of its cluster mates: the signal
  // conditional training exists to capture.
  double cluster_veto_prob = 0.45;
  double cluster_veto_depth = 3.0;
  double region_km = 20.0;  // square side for cluster centers

  static constexpr const char* kQuerySchema = "query.v1";
  static constexpr const char* kUserSchema = "user.v1";
  static constexpr const char* kListingSchema = "listing.v1";
  static constexpr int kQueryDim = 4;
  static constexpr int kUserDim = 4;
  static constexpr int kListingDim = 8;

  void validate() const {
    if (n_listings < 1 || cluster_count < 1 || candidates_per_search < 1) {
      throw std::invalid_argument("counts must be positive");
    }
    if (n_searches < 0) throw std::invalid_argument("n_searches < 0");
    if (price_sigma <= 0.0) throw std::invalid_argument("price_sigma <= 0");
    if (quality_correlation < 0.0 || quality_correlation > 1.0 ||
        majority_fraction < 0.0 || majority_fraction > 1.0) {
      throw std::invalid_argument("fractions must be in [0,1]");
    }
    if (cluster_spread < 0.0) throw std::invalid_argument("cluster_spread < 0");
    if (cluster_veto_prob < 0.0 || cluster_veto_prob > 1.0) {
      throw std::invalid_argument("cluster_veto_prob must be in [0,1]");
    }
    if (cluster_veto_depth < 0.0) {
      throw std::invalid_argument("cluster_veto_depth < 0");
    }
    if (candidates_per_search > n_listings) {
      throw std::invalid_argument("candidates_per_search > n_listings");
    }
    if (retrieval_focus_clusters < 1) {
      throw std::invalid_argument("retrieval_focus_clusters < 1");
    }
    if (retrieval_focus_share < 0.0 || retrieval_focus_share > 1.0) {
      throw std::invalid_argument("retrieval_focus_share must be in [0,1]");
    }
  }

  SchemaManifest schemas() const {
    SchemaManifest m;
    m.dims[kQuerySchema] = kQueryDim;
    m.dims[kUserSchema] = kUserDim;
    m.dims[kListingSchema] = kListingDim;
    return m;
  }
};

/// Latent listing attributes; oracle-side only, never fed to trainers.
struct ListingTruth {
  double z_price = 0.0;  // standardized log price
  double quality = 0.0;
  double x = 0.0, y = 0.0;  // km
  int cluster = 0;
};

struct MarketListing {
  std::string id;
  FeatureVector features;
  double price = 0.0;
  std::pair<double, double> location{0.0, 0.0};
};

struct Market {
  MarketConfig cfg;
  std::vector<MarketListing> listings;
  std::vector<ListingTruth> truths;
  std::vector<std::vector<int>> cluster_members;  // listing ids per cluster
};

/// Per-search user draw: taste point plus preference-class weights.
struct UserTruth {
  bool majority = true;
  double taste_price = 0.0;    // preferred standardized log price
  double taste_quality = 0.0;
  double loc_x = 0.0, loc_y = 0.0;  // preferred location, km
  double w_price = 0.0, w_quality = 0.0, w_location = 0.0;
  std::vector<double> cluster_affinity;  // indexed by cluster id
};

namespace internal {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace internal

/// Deterministic per-search generator derived from (seed, index).
inline std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t index) {
  return std::mt19937_64(
      internal::splitmix64(seed ^ internal::splitmix64(index)));
}

inline Market generate_market(const MarketConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> coord(0.0, cfg.region_km);

  struct Cluster {
    double cx, cy;
    double z_price, z_quality;
    double descriptor[4];
  };
  std::vector<Cluster> clusters(cfg.cluster_count);
  for (auto& c : clusters) {
    c.cx = coord(rng);
    c.cy = coord(rng);
    c.z_price = gauss(rng);
    c.z_quality = gauss(rng);
    for (double& d : c.descriptor) d = gauss(rng);
  }

  double w = cfg.cluster_cohesion;
  double rho = cfg.quality_correlation;
  Market market;
  market.cfg = cfg;
  for (int i = 0; i < cfg.n_listings; ++i) {
    const Cluster& c = clusters[i % cfg.cluster_count];
    ListingTruth truth;
    truth.cluster = i % cfg.cluster_count;
    truth.z_price = std::sqrt(w) * c.z_price + std::sqrt(1.0 - w) * gauss(rng);
    double z_q_raw =
        std::sqrt(w) * c.z_quality + std::sqrt(1.0 - w) * gauss(rng);
    truth.quality = rho * truth.z_price + std::sqrt(1.0 - rho * rho) * z_q_raw;
    truth.x = c.cx + cfg.cluster_spread * gauss(rng);
    truth.y = c.cy + cfg.cluster_spread * gauss(rng);

    MarketListing listing;
    listing.id = "L" + std::to_string(i);
    listing.price = std::exp(cfg.price_mu + cfg.price_sigma * truth.z_price);
    listing.location = {truth.x, truth.y};
    // Models see noisy latents (10% of attribute scale) plus a noisy
    // cluster descriptor, never the latents themselves.
    listing.features.schema_id = MarketConfig::kListingSchema;
    listing.features.values = {truth.z_price + 0.1 * gauss(rng),
                               truth.quality + 0.1 * gauss(rng),
                               truth.x + 0.25 * gauss(rng),
                               truth.y + 0.25 * gauss(rng),
                               c.descriptor[0] + 0.3 * gauss(rng),
                               c.descriptor[1] + 0.3 * gauss(rng),
                               c.descriptor[2] + 0.3 * gauss(rng),
                               c.descriptor[3] + 0.3 * gauss(rng)};
    market.listings.push_back(std::move(listing));
    market.truths.push_back(truth);
  }
  market.cluster_members.resize(cfg.cluster_count);
  for (int i = 0; i < cfg.n_listings; ++i) {
    market.cluster_members[market.truths[i].cluster].push_back(i);
  }
  return market;
}

inline UserTruth sample_user(const MarketConfig& cfg, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> coord(0.0, cfg.region_km);
  UserTruth user;
  user.majority = unit(rng) < cfg.majority_fraction;
  user.loc_x = coord(rng);
  user.loc_y = coord(rng);
  user.w_location = 0.15;
  if (user.majority) {
    user.w_price = 2.0;
    user.w_quality = 0.4;
    user.taste_price = -0.8 + 0.4 * gauss(rng);
    user.taste_quality = 0.3 + 0.5 * gauss(rng);
  } else {
    user.w_price = 0.4;
    user.w_quality = 2.0;
    user.taste_price = 0.5 + 0.6 * gauss(rng);
    user.taste_quality = 1.2 + 0.4 * gauss(rng);
  }
  user.cluster_affinity.resize(cfg.cluster_count);
  for (double& a : user.cluster_affinity) {
    a = unit(rng) < cfg.cluster_veto_prob ? -cfg.cluster_veto_depth : 0.0;
  }
  return user;
}

/// Probability an examined listing gets booked: logistic in a weighted-L1
/// match between the user's taste point and the listing's latent attributes.
inline double booking_prob(const MarketConfig& cfg, const UserTruth& user,
                           const ListingTruth& listing) {
  double dist_km =
      std::hypot(listing.x - user.loc_x, listing.y - user.loc_y);
  double utility = cfg.base_utility - user.w_price * std::abs(listing.z_price - user.taste_price) -
                   user.w_quality * std::abs(listing.quality - user.taste_quality) -
                   user.w_location * dist_km;
  utility += user.cluster_affinity[listing.cluster];
  return stable_sigmoid(cfg.temperature * utility);
}

inline QueryContext sample_context(const UserTruth& user,
                                   std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  QueryContext ctx;
  // The query carries a noisy location intent; the user vector is
  // uninformative noise, so taste class cannot be personalized away.
  ctx.query_features.schema_id = MarketConfig::kQuerySchema;
  ctx.query_features.values = {user.loc_x + 1.0 * gauss(rng),
                               user.loc_y + 1.0 * gauss(rng), gauss(rng),
                               gauss(rng)};
  ctx.user_features.schema_id = MarketConfig::kUserSchema;
  ctx.user_features.values = {gauss(rng), gauss(rng), gauss(rng), gauss(rng)};
  return ctx;
}

/// Candidate retrieval for one search: retrieval_focus_share of the page
/// comes from a few focus clusters, the rest from the whole market. The
/// within-page redundancy this creates is what reranking acts on.
inline std::vector<int> sample_candidates(const Market& market,
                                          std::mt19937_64& rng) {
  const MarketConfig& cfg = market.cfg;
  auto draw = [&rng](int lo, int hi) {  // inclusive bounds
    return std::uniform_int_distribution<int>(lo, hi)(rng);
  };
  int n_focus = std::min(cfg.retrieval_focus_clusters, cfg.cluster_count);
  std::vector<int> cluster_ids(cfg.cluster_count);
  std::iota(cluster_ids.begin(), cluster_ids.end(), 0);
  std::vector<int> focus_pool;
  for (int k = 0; k < n_focus; ++k) {
    std::swap(cluster_ids[k], cluster_ids[draw(k, cfg.cluster_count - 1)]);
    const auto& members = market.cluster_members[cluster_ids[k]];
    focus_pool.insert(focus_pool.end(), members.begin(), members.end());
  }
  int want_focus = std::min(
      static_cast<int>(focus_pool.size()),
      static_cast<int>(
          std::lround(cfg.retrieval_focus_share * cfg.candidates_per_search)));
  std::vector<char> taken(market.listings.size(), 0);
  std::vector<int> candidates;
  for (int k = 0; k < want_focus; ++k) {
    std::swap(focus_pool[k], focus_pool[draw(k, static_cast<int>(focus_pool.size()) - 1)]);
    candidates.push_back(focus_pool[k]);
    taken[focus_pool[k]] = 1;
  }
  std::vector<int> rest;
  rest.reserve(market.listings.size());
  for (int i = 0; i < static_cast<int>(market.listings.size()); ++i) {
    if (!taken[i]) rest.push_back(i);
  }
  while (static_cast<int>(candidates.size()) < cfg.candidates_per_search) {
    int k = static_cast<int>(candidates.size()) - want_focus;
    std::swap(rest[k], rest[draw(k, static_cast<int>(rest.size()) - 1)]);
    candidates.push_back(rest[k]);
  }
  return candidates;
}

/// One simulated search plus its oracle-side ground truth.
struct SimulatedSearch {
  SearchLog log;
  UserTruth user;
  std::vector<double> booking_probs;   // per presented position, if examined
  std::vector<double> marginal_probs;  // exact P(booked at position j)
};

/// Cascade outcome: the user examines position j with marginal probability
/// attention[j] (continuation attention[j]/attention[j-1]) and books an
/// examined listing with its booking probability, stopping at the first
/// booking. marginal_probs hold the exact law of the realized outcome:
/// attention[j] * pb[j] * prod_{i<j} (1 - pb[i]).
inline SimulatedSearch simulate_search(const Market& market,
                                       const UserTruth& user,
                                       const QueryContext& ctx,
                                       const std::string& search_id,
                                       const std::vector<int>& presented,
                                       const AttentionCurve& attention,
                                       std::mt19937_64& rng) {
  if (presented.size() > attention.values.size()) {
    throw std::invalid_argument("attention curve shorter than result page");
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SimulatedSearch out;
  out.user = user;
  out.log.search_id = search_id;
  out.log.context = ctx;

  double no_book_so_far = 1.0;
  int booked_at = -1;
  bool scanning = true;
  for (std::size_t j = 0; j < presented.size(); ++j) {
    const ListingTruth& truth = market.truths[presented[j]];
    double pb = booking_prob(market.cfg, user, truth);
    out.booking_probs.push_back(pb);
    out.marginal_probs.push_back(attention.values[j] * pb * no_book_so_far);
    no_book_so_far *= 1.0 - pb;

    if (scanning && j > 0) {
      double cont = attention.values[j] / attention.values[j - 1];
      if (unit(rng) >= cont) scanning = false;
    }
    bool examined = scanning;
    if (examined && booked_at < 0 && unit(rng) < pb) {
      booked_at = static_cast<int>(j);
      scanning = false;
    }

    const MarketListing& listing = market.listings[presented[j]];
    ListingImpression imp;
    imp.listing_id = listing.id;
    imp.position = static_cast<int>(j);
    imp.features = listing.features;
    imp.price = listing.price;
    imp.location = listing.location;
    imp.booked = false;
    out.log.impressions.push_back(std::move(imp));
  }
  if (booked_at >= 0) out.log.impressions[booked_at].booked = true;
  return out;
}

enum class RankerKind { kRandom, kAlgorithm1, kAlgorithm2 };

inline RankerKind ranker_kind_from_name(const std::string& s) {
  if (s == "random") return RankerKind::kRandom;
  if (s == "algorithm1") return RankerKind::kAlgorithm1;
  if (s == "algorithm2") return RankerKind::kAlgorithm2;
  throw std::invalid_argument("unknown ranker: " + s);
}

struct ExperimentResult {
  std::vector<SearchLog> logs;
  std::vector<SimulatedSearch> ground_truth;
  long realized_bookings = 0;
  double expected_bookings_truth = 0.0;  // sum of exact marginal probs
  double ndcg = 0.0;                     // realized, over booked searches
  DiversityStats diversity;
  std::vector<double> booked_values;  // prices of booked listings
};

/// Generates fresh searches, ranks candidates with the chosen policy,
/// simulates cascade outcomes, and aggregates metrics. Deterministic per
/// seed: every search uses a generator derived from (seed, search index).
inline ExperimentResult run_experiment(const Market& market, RankerKind kind,
                                       const RankingModel* base,
                                       const SimilarityModel* sim,
                                       const RerankPlan& plan, int n_searches,
                                       std::uint64_t seed) {
  if (kind != RankerKind::kRandom && base == nullptr) {
    throw std::invalid_argument("ranker needs a trained base model");
  }
  if (kind == RankerKind::kAlgorithm2 && sim == nullptr) {
    throw std::invalid_argument("algorithm2 needs a similarity model");
  }
  const MarketConfig& cfg = market.cfg;
  AttentionCurve attention =
      AttentionCurve::log_discount(cfg.candidates_per_search);

  ExperimentResult result;
  std::vector<int> booked_positions;
  for (int i = 0; i < n_searches; ++i) {
    std::mt19937_64 rng = derived_rng(seed, static_cast<std::uint64_t>(i));
    UserTruth user = sample_user(cfg, rng);
    QueryContext ctx = sample_context(user, rng);

    std::vector<int> candidates = sample_candidates(market, rng);

    std::vector<int> presented;
    if (kind == RankerKind::kRandom) {
      presented = candidates;
      std::shuffle(presented.begin(), presented.end(), rng);
    } else {
      std::vector<ListingImpression> items;
      for (int c : candidates) {
        ListingImpression imp;
        imp.listing_id = market.listings[c].id;
        imp.features = market.listings[c].features;
        imp.price = market.listings[c].price;
        imp.location = market.listings[c].location;
        items.push_back(std::move(imp));
      }
      RankedResult ranked =
          kind == RankerKind::kAlgorithm1
              ? rank_algorithm1(*base, ctx, items)
              : rank_algorithm2(*base, *sim, ctx, items, plan);
      for (int idx : ranked.ordering) presented.push_back(candidates[idx]);
    }

    SimulatedSearch sim_search =
        simulate_search(market, user, ctx, "S" + std::to_string(i), presented,
                        attention, rng);
    for (double m : sim_search.marginal_probs) {
      result.expected_bookings_truth += m;
    }
    int bi = sim_search.log.booked_index();
    if (bi >= 0) {
      ++result.realized_bookings;
      booked_positions.push_back(sim_search.log.impressions[bi].position);
      result.booked_values.push_back(sim_search.log.impressions[bi].price);
    }
    result.logs.push_back(sim_search.log);
    result.ground_truth.push_back(std::move(sim_search));
  }
  result.ndcg = booked_positions.empty()
                    ? 0.0
                    : ndcg_from_positions(booked_positions);
  result.diversity = diversity_metrics(result.logs);
  return result;
}

// --- ground-truth sidecar serialization -------------------------------------

inline nlohmann::json ground_truth_to_json(const SimulatedSearch& s) {
  nlohmann::json j = nlohmann::json::object();
  j["search_id"] = s.log.search_id;
  j["user"] = {{"majority", s.user.majority},
               {"taste_price", s.user.taste_price},
               {"taste_quality", s.user.taste_quality},
               {"loc", {s.user.loc_x, s.user.loc_y}}};
  j["booking_probs"] = s.booking_probs;
  j["marginal_probs"] = s.marginal_probs;
  return j;
}

inline nlohmann::json market_config_to_json(const MarketConfig& c) {
  return {{"n_listings", c.n_listings},
          {"n_searches", c.n_searches},
          {"price_mu", c.price_mu},
          {"price_sigma", c.price_sigma},
          {"quality_correlation", c.quality_correlation},
          {"cluster_count", c.cluster_count},
          {"cluster_spread", c.cluster_spread},
          {"majority_fraction", c.majority_fraction},
          {"candidates_per_search", c.candidates_per_search},
          {"retrieval_focus_clusters", c.retrieval_focus_clusters},
          {"retrieval_focus_share", c.retrieval_focus_share},
          {"temperature", c.temperature},
          {"base_utility", c.base_utility},
          {"cluster_veto_prob", c.cluster_veto_prob},
          {"cluster_veto_depth", c.cluster_veto_depth},
          {"cluster_cohesion", c.cluster_cohesion},
          {"region_km", c.region_km},
          {"seed", c.seed}};
}

inline MarketConfig market_config_from_json(const nlohmann::json& j) {
  MarketConfig c;
  for (const char* required :
       {"n_listings", "n_searches", "cluster_count", "seed"}) {
    if (!j.contains(required)) {
      throw std::invalid_argument(std::string("config missing field: ") +
                                  required);
    }
  }
  c.n_listings = j.at("n_listings").get<int>();
  c.n_searches = j.at("n_searches").get<int>();
  c.price_mu = j.value("price_mu", c.price_mu);
  c.price_sigma = j.value("price_sigma", c.price_sigma);
  c.quality_correlation = j.value("quality_correlation", c.quality_correlation);
  c.cluster_count = j.at("cluster_count").get<int>();
  c.cluster_spread = j.value("cluster_spread", c.cluster_spread);
  c.majority_fraction = j.value("majority_fraction", c.majority_fraction);
  c.candidates_per_search =
      j.value("candidates_per_search", c.candidates_per_search);
  c.retrieval_focus_clusters =
      j.value("retrieval_focus_clusters", c.retrieval_focus_clusters);
  c.retrieval_focus_share =
      j.value("retrieval_focus_share", c.retrieval_focus_share);
  c.temperature = j.value("temperature", c.temperature);
  c.base_utility = j.value("base_utility", c.base_utility);
  c.cluster_veto_prob = j.value("cluster_veto_prob", c.cluster_veto_prob);
  c.cluster_veto_depth = j.value("cluster_veto_depth", c.cluster_veto_depth);
  c.cluster_cohesion = j.value("cluster_cohesion", c.cluster_cohesion);
  c.region_km = j.value("region_km", c.region_km);
  c.seed = j.at("seed").get<std::uint64_t>();
  c.validate();
  return c;
}

}  // namespace divrank

#endif  // DIVRANK_SIMULATOR_HPP_
