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

// Command-line driver: simulate markets, train ranking and similarity
// models, rerank logs, evaluate, sweep lambda, and render reports. Every
// command writes a manifest tying outputs to hashed inputs, the resolved
// config, and the seed, so any artifact can be reproduced from its
// manifest alone.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "divrank/log_io.hpp"
#include "divrank/manifest.hpp"
#include "divrank/metrics.hpp"
#include "divrank/net.hpp"
#include "divrank/pairs.hpp"
#include "divrank/ranker.hpp"
#include "divrank/rerank.hpp"
#include "divrank/similarity.hpp"
#include "divrank/simulator.hpp"

namespace {

using nlohmann::json;

// Full round-trip precision so report reruns are byte-identical.
std::string fmt(double x) {
  std::ostringstream ss;
  ss << std::setprecision(17) << x;
  return ss.str();
}

std::uint64_t default_seed() {
  if (const char* env = std::getenv("DIVRANK_SEED")) {
    return std::strtoull(env, nullptr, 10);
  }
  return 1;
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  json j;
  in >> j;
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << text;
}

divrank::RankingModel load_base(const std::string& path) {
  return divrank::ranking_model_from_json(load_json(path));
}

divrank::SimilarityModel load_sim(const std::string& path) {
  return divrank::similarity_model_from_json(load_json(path));
}

// Training hyperparameters from an optional config file; scalar flags
// override file values, which override defaults.
struct TrainFlags {
  std::string config_path;
  std::optional<double> lr, weight_decay;
  std::optional<int> epochs, batch_size;
  std::optional<std::uint64_t> seed;

  divrank::TrainConfig resolve(json* resolved_out) const {
    divrank::TrainConfig tc;
    tc.seed = default_seed();
    if (!config_path.empty()) {
      json j = load_json(config_path);
      tc.learning_rate = j.value("learning_rate", tc.learning_rate);
      tc.batch_size = j.value("batch_size", tc.batch_size);
      tc.epochs = j.value("epochs", tc.epochs);
      tc.weight_decay = j.value("weight_decay", tc.weight_decay);
      tc.seed = j.value("seed", tc.seed);
    }
    if (lr) tc.learning_rate = *lr;
    if (batch_size) tc.batch_size = *batch_size;
    if (epochs) tc.epochs = *epochs;
    if (weight_decay) tc.weight_decay = *weight_decay;
    if (seed) tc.seed = *seed;
    tc.validate();
    if (resolved_out) {
      *resolved_out = {{"learning_rate", tc.learning_rate},
                       {"batch_size", tc.batch_size},
                       {"epochs", tc.epochs},
                       {"weight_decay", tc.weight_decay},
                       {"seed", tc.seed}};
    }
    return tc;
  }

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "training config JSON");
    cmd->add_option("--lr", lr, "learning rate override");
    cmd->add_option("--epochs", epochs, "epoch count override");
    cmd->add_option("--batch-size", batch_size, "batch size override");
    cmd->add_option("--weight-decay", weight_decay, "L2 weight decay override");
    cmd->add_option("--seed", seed, "RNG seed override");
  }
};

divrank::ExponentConvention convention_from_name(const std::string& s) {
  if (s == "derivation") return divrank::ExponentConvention::kDerivation;
  if (s == "literal") return divrank::ExponentConvention::kAlgorithm2Literal;
  throw std::invalid_argument("unknown exponent convention: " + s);
}

// Last `fraction` of the logs, in order, held out for validation loss.
template <typename T>
std::pair<std::vector<T>, std::vector<T>> split_holdout(
    const std::vector<T>& xs, double fraction) {
  std::size_t held = static_cast<std::size_t>(xs.size() * fraction);
  std::size_t cut = xs.size() - held;
  return {std::vector<T>(xs.begin(), xs.begin() + cut),
          std::vector<T>(xs.begin() + cut, xs.end())};
}

// --- simulate ---------------------------------------------------------------

struct SimulateArgs {
  std::string config_path, out_dir, ranker = "random";
  std::string base_path, sim_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> n_searches;
  double lambda = 1.0 / 3.0;
};

int cmd_simulate(const SimulateArgs& a) {
  divrank::MarketConfig cfg =
      divrank::market_config_from_json(load_json(a.config_path));
  if (a.seed) cfg.seed = *a.seed;
  if (a.n_searches) cfg.n_searches = *a.n_searches;
  cfg.validate();

  divrank::RankerKind kind = divrank::ranker_kind_from_name(a.ranker);
  divrank::RankingModel base;
  divrank::SimilarityModel sim;
  const divrank::RankingModel* base_ptr = nullptr;
  const divrank::SimilarityModel* sim_ptr = nullptr;
  if (kind != divrank::RankerKind::kRandom) {
    if (a.base_path.empty()) {
      throw std::invalid_argument("ranker " + a.ranker + " needs --base");
    }
    base = load_base(a.base_path);
    base_ptr = &base;
  }
  if (kind == divrank::RankerKind::kAlgorithm2) {
    if (a.sim_path.empty()) {
      throw std::invalid_argument("ranker algorithm2 needs --sim");
    }
    sim = load_sim(a.sim_path);
    sim_ptr = &sim;
  }
  divrank::RerankPlan plan;
  plan.lambda = a.lambda;
  plan.validate();

  std::filesystem::create_directories(a.out_dir);
  divrank::Market market = divrank::generate_market(cfg);
  divrank::ExperimentResult result = divrank::run_experiment(
      market, kind, base_ptr, sim_ptr, plan, cfg.n_searches, cfg.seed);

  std::string logs_path = a.out_dir + "/logs.jsonl";
  std::string truth_path = a.out_dir + "/ground_truth.jsonl";
  std::string schema_path = a.out_dir + "/schemas.json";
  divrank::save_logs(result.logs, logs_path);
  {
    std::ofstream out(truth_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + truth_path);
    for (const auto& s : result.ground_truth) {
      out << divrank::ground_truth_to_json(s).dump() << "\n";
    }
  }
  divrank::save_manifest(cfg.schemas(), schema_path);

  divrank::RunManifest m;
  m.command = "simulate";
  m.seed = cfg.seed;
  m.config = divrank::market_config_to_json(cfg);
  m.config["ranker"] = a.ranker;
  m.add_input(a.config_path);
  if (!a.base_path.empty()) m.add_input(a.base_path);
  if (!a.sim_path.empty()) m.add_input(a.sim_path);
  m.add_output(logs_path);
  m.add_output(truth_path);
  m.add_output(schema_path);
  m.extra = {{"realized_bookings", result.realized_bookings},
             {"expected_bookings_truth", result.expected_bookings_truth},
             {"ndcg", result.ndcg},
             {"price_variance_top8", result.diversity.price_variance_top8},
             {"geo_redundancy_top8", result.diversity.geo_redundancy_top8}};
  m.save(a.out_dir + "/manifest.json");

  std::cout << "simulate: " << result.logs.size() << " searches, "
            << result.realized_bookings << " bookings, ndcg "
            << fmt(result.ndcg) << "\n";
  return 0;
}

// --- train-base / train-sim -------------------------------------------------

struct TrainArgs {
  std::string logs_path, schema_path, out_path, manifest_path;
  std::string base_path;  // train-sim only
  double holdout = 0.2;
  TrainFlags flags;
};

int cmd_train(const TrainArgs& a, bool similarity) {
  json resolved;
  divrank::TrainConfig tc = a.flags.resolve(&resolved);
  std::vector<divrank::SearchLog> logs = divrank::load_logs(a.logs_path);
  divrank::SchemaManifest schemas = divrank::load_manifest(a.schema_path);
  auto [train_logs, held_logs] = split_holdout(logs, a.holdout);

  divrank::RunManifest m;
  m.command = similarity ? "train-sim" : "train-base";
  m.seed = tc.seed;
  m.config = resolved;
  m.config["holdout_fraction"] = a.holdout;
  m.add_input(a.logs_path);
  m.add_input(a.schema_path);

  json checkpoint;
  double train_loss = 0.0, validation_loss = 0.0;
  if (similarity) {
    divrank::RankingModel base = load_base(a.base_path);
    m.add_input(a.base_path);
    divrank::SimilarityModel sim =
        divrank::train_similarity(base, train_logs, tc, schemas);
    train_loss = divrank::mean_conditional_loss(
        base, &sim, divrank::build_conditional_pairs(train_logs));
    auto held_pairs = divrank::build_conditional_pairs(held_logs);
    validation_loss = held_pairs.empty()
                          ? 0.0
                          : divrank::mean_conditional_loss(base, &sim,
                                                           held_pairs);
    m.extra["base_checkpoint_hash"] = divrank::file_hash(a.base_path);
    checkpoint = divrank::similarity_model_to_json(sim);
  } else {
    divrank::RankingModel model =
        divrank::train_base(train_logs, tc, schemas);
    train_loss =
        divrank::mean_pair_loss(model, divrank::build_pairs(train_logs));
    auto held_pairs = divrank::build_pairs(held_logs);
    validation_loss =
        held_pairs.empty() ? 0.0 : divrank::mean_pair_loss(model, held_pairs);
    checkpoint = divrank::ranking_model_to_json(model);
  }
  write_text(a.out_path, checkpoint.dump(2) + "\n");

  m.add_output(a.out_path);
  m.extra["final_train_loss"] = train_loss;
  m.extra["final_validation_loss"] = validation_loss;
  std::string manifest_path =
      a.manifest_path.empty() ? a.out_path + ".manifest.json" : a.manifest_path;
  m.save(manifest_path);

  std::cout << m.command << ": train loss " << fmt(train_loss)
            << ", validation loss " << fmt(validation_loss) << "\n";
  return 0;
}

// --- rerank -----------------------------------------------------------------

struct RerankArgs {
  std::string logs_path, base_path, sim_path, out_dir;
  std::string convention = "derivation";
  double lambda = 1.0 / 3.0;
  std::optional<int> max_positions;
};

divrank::RerankPlan make_plan(double lambda, const std::string& convention,
                              std::optional<int> max_positions) {
  divrank::RerankPlan plan;
  plan.lambda = lambda;
  plan.exponent_convention = convention_from_name(convention);
  plan.max_positions = max_positions;
  plan.validate();
  return plan;
}

divrank::SearchLog apply_ordering(const divrank::SearchLog& log,
                                  const divrank::RankedResult& ranked) {
  divrank::SearchLog out;
  out.search_id = log.search_id;
  out.context = log.context;
  for (std::size_t j = 0; j < ranked.ordering.size(); ++j) {
    divrank::ListingImpression imp = log.impressions[ranked.ordering[j]];
    imp.position = static_cast<int>(j);
    out.impressions.push_back(std::move(imp));
  }
  return out;
}

int cmd_rerank(const RerankArgs& a) {
  std::vector<divrank::SearchLog> logs = divrank::load_logs(a.logs_path);
  divrank::RankingModel base = load_base(a.base_path);
  bool greedy = !a.sim_path.empty();
  divrank::SimilarityModel sim;
  if (greedy) sim = load_sim(a.sim_path);
  divrank::RerankPlan plan = make_plan(a.lambda, a.convention, a.max_positions);

  std::filesystem::create_directories(a.out_dir);
  std::string out_logs = a.out_dir + "/reranked.jsonl";
  std::string out_penalties = a.out_dir + "/penalties.jsonl";
  std::ofstream logs_out(out_logs, std::ios::binary);
  std::ofstream pen_out(out_penalties, std::ios::binary);
  if (!logs_out || !pen_out) {
    throw std::runtime_error("cannot write under: " + a.out_dir);
  }
  for (const auto& log : logs) {
    divrank::RankedResult ranked =
        greedy ? divrank::rank_algorithm2(base, sim, log.context,
                                          log.impressions, plan)
               : divrank::rank_algorithm1(base, log.context, log.impressions);
    logs_out << divrank::serialize_log(apply_ordering(log, ranked)) << "\n";
    json rec = {{"search_id", log.search_id},
                {"ordered_ids", ranked.ordered_ids},
                {"base_logits", ranked.base_logits},
                {"final_logits", ranked.final_logits}};
    json pens = json::array();
    for (const auto& terms : ranked.penalties) {
      json row = json::array();
      for (const auto& t : terms) {
        row.push_back({{"antecedent_id", t.antecedent_id},
                       {"weight", t.weight},
                       {"s_value", t.s_value}});
      }
      pens.push_back(std::move(row));
    }
    rec["penalties"] = std::move(pens);
    pen_out << rec.dump() << "\n";
  }
  logs_out.close();
  pen_out.close();

  divrank::RunManifest m;
  m.command = "rerank";
  m.seed = 0;
  m.config = {{"lambda", a.lambda},
              {"convention", a.convention},
              {"algorithm", greedy ? "algorithm2" : "algorithm1"}};
  if (a.max_positions) m.config["max_positions"] = *a.max_positions;
  m.add_input(a.logs_path);
  m.add_input(a.base_path);
  if (greedy) m.add_input(a.sim_path);
  m.add_output(out_logs);
  m.add_output(out_penalties);
  m.save(a.out_dir + "/manifest.json");

  std::cout << "rerank: " << logs.size() << " searches reranked with "
            << (greedy ? "algorithm2" : "algorithm1") << "\n";
  return 0;
}

// --- evaluate ---------------------------------------------------------------

struct EvaluateArgs {
  std::string logs_path, base_path, sim_path, truth_path, out_path;
  std::string convention = "derivation";
  double lambda = 1.0 / 3.0;
};

struct VariantRow {
  std::string name;
  double lambda = 0.0;
  std::string convention;
  double ndcg = 0.0;
  divrank::DiversityStats diversity;
  std::optional<double> expected_bookings;
};

int cmd_evaluate(const EvaluateArgs& a) {
  std::vector<divrank::SearchLog> logs = divrank::load_logs(a.logs_path);
  divrank::RankingModel base = load_base(a.base_path);
  divrank::SimilarityModel sim = load_sim(a.sim_path);

  // Per-listing booking probabilities from the ground-truth sidecar, keyed
  // by search id and aligned with the logged impression order.
  std::map<std::string, std::vector<double>> truth;
  if (!a.truth_path.empty()) {
    std::ifstream in(a.truth_path);
    if (!in) throw std::runtime_error("cannot open file: " + a.truth_path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      json j = json::parse(line);
      truth[j.at("search_id").get<std::string>()] =
          j.at("booking_probs").get<std::vector<double>>();
    }
  }

  auto evaluate_variant = [&](const std::string& name,
                              const divrank::RerankPlan* plan) {
    auto rank_fn = [&](const divrank::SearchLog& log) {
      return plan ? divrank::rank_algorithm2(base, sim, log.context,
                                             log.impressions, *plan)
                  : divrank::rank_algorithm1(base, log.context,
                                             log.impressions);
    };
    VariantRow row;
    row.name = name;
    row.lambda = plan ? plan->lambda : 0.0;
    row.convention =
        plan ? (plan->exponent_convention ==
                        divrank::ExponentConvention::kDerivation
                    ? "derivation"
                    : "literal")
             : "none";
    row.ndcg = divrank::offline_ndcg(logs, rank_fn);
    std::vector<divrank::SearchLog> reordered;
    double eb_total = 0.0;
    long eb_count = 0;
    for (const auto& log : logs) {
      divrank::RankedResult ranked = rank_fn(log);
      reordered.push_back(apply_ordering(log, ranked));
      auto it = truth.find(log.search_id);
      if (it != truth.end() &&
          it->second.size() == log.impressions.size()) {
        divrank::AttentionCurve att = divrank::AttentionCurve::log_discount(
            static_cast<int>(log.impressions.size()));
        eb_total += divrank::expected_bookings(it->second, att,
                                               ranked.ordering);
        ++eb_count;
      }
    }
    row.diversity = divrank::diversity_metrics(reordered);
    if (eb_count > 0) row.expected_bookings = eb_total;
    return row;
  };

  divrank::RerankPlan plan =
      make_plan(a.lambda, a.convention, std::nullopt);
  divrank::RerankPlan collapse = make_plan(0.0, "literal", std::nullopt);
  std::vector<VariantRow> rows;
  rows.push_back(evaluate_variant("algorithm1", nullptr));
  rows.push_back(evaluate_variant("algorithm2", &plan));
  rows.push_back(evaluate_variant("algorithm2_lambda0_literal", &collapse));

  std::string input_hash = divrank::file_hash(a.logs_path);
  std::ostringstream csv;
  csv << "variant,lambda,convention,input_hash,ndcg,price_variance_top8,"
         "geo_redundancy_top8,expected_bookings\n";
  for (const auto& r : rows) {
    csv << r.name << "," << fmt(r.lambda) << "," << r.convention << ","
        << input_hash << "," << fmt(r.ndcg) << ","
        << fmt(r.diversity.price_variance_top8) << ","
        << fmt(r.diversity.geo_redundancy_top8) << ","
        << (r.expected_bookings ? fmt(*r.expected_bookings) : std::string())
        << "\n";
  }
  write_text(a.out_path, csv.str());

  divrank::RunManifest m;
  m.command = "evaluate";
  m.seed = 0;
  m.config = {{"lambda", a.lambda}, {"convention", a.convention}};
  m.add_input(a.logs_path);
  m.add_input(a.base_path);
  m.add_input(a.sim_path);
  if (!a.truth_path.empty()) m.add_input(a.truth_path);
  m.add_output(a.out_path);
  m.save(a.out_path + ".manifest.json");

  for (const auto& r : rows) {
    std::cout << "evaluate: " << r.name << " ndcg " << fmt(r.ndcg) << "\n";
  }
  return 0;
}

// --- sweep-lambda -----------------------------------------------------------

struct SweepArgs {
  std::vector<std::string> logs_paths;
  std::string base_path, sim_path, out_path;
  std::string convention = "derivation";
  std::vector<double> grid = {0.0, 1.0 / 9.0, 1.0 / 3.0, 2.0 / 3.0, 1.0};
};

int cmd_sweep(const SweepArgs& a) {
  if (a.grid.empty()) throw std::invalid_argument("empty lambda grid");
  for (double g : a.grid) {
    if (g < 0.0 || g > 1.0) {
      throw std::invalid_argument("lambda grid value outside [0,1]");
    }
  }
  divrank::RankingModel base = load_base(a.base_path);
  divrank::SimilarityModel sim = load_sim(a.sim_path);
  divrank::RerankPlan plan_template;
  plan_template.exponent_convention = convention_from_name(a.convention);

  std::ostringstream csv;
  csv << "row,input,lambda,ndcg\n";
  std::vector<double> mean_ndcg(a.grid.size(), 0.0);
  for (const auto& path : a.logs_paths) {
    std::vector<divrank::SearchLog> logs = divrank::load_logs(path);
    divrank::LambdaSweepResult res =
        divrank::sweep_lambda(base, sim, logs, a.grid, plan_template);
    for (std::size_t i = 0; i < res.rows.size(); ++i) {
      csv << "sweep," << path << "," << fmt(res.rows[i].lambda) << ","
          << fmt(res.rows[i].ndcg) << "\n";
      mean_ndcg[i] += res.rows[i].ndcg / a.logs_paths.size();
    }
  }
  std::size_t best = 0;
  for (std::size_t i = 0; i < a.grid.size(); ++i) {
    csv << "mean,," << fmt(a.grid[i]) << "," << fmt(mean_ndcg[i]) << "\n";
    if (mean_ndcg[i] > mean_ndcg[best]) best = i;
  }
  csv << "argmax,," << fmt(a.grid[best]) << "," << fmt(mean_ndcg[best])
      << "\n";
  write_text(a.out_path, csv.str());

  divrank::RunManifest m;
  m.command = "sweep-lambda";
  m.seed = 0;
  m.config = {{"grid", a.grid}, {"convention", a.convention}};
  for (const auto& path : a.logs_paths) m.add_input(path);
  m.add_input(a.base_path);
  m.add_input(a.sim_path);
  m.add_output(a.out_path);
  m.extra = {{"best_lambda", a.grid[best]}, {"best_mean_ndcg", mean_ndcg[best]}};
  m.save(a.out_path + ".manifest.json");

  std::cout << "sweep-lambda: argmax lambda " << fmt(a.grid[best])
            << " mean ndcg " << fmt(mean_ndcg[best]) << "\n";
  return 0;
}

// --- report -----------------------------------------------------------------

struct ReportArgs {
  std::string evaluate_csv, sweep_csv, out_path;
};

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.push_back("");
    rows.push_back(std::move(cells));
  }
  return rows;
}

int cmd_report(const ReportArgs& a) {
  if (a.evaluate_csv.empty() && a.sweep_csv.empty()) {
    throw std::invalid_argument("report needs --evaluate-csv or --sweep-csv");
  }
  std::ostringstream out;
  if (!a.evaluate_csv.empty()) {
    auto rows = read_csv(a.evaluate_csv);
    out << "Ranker comparison (" << a.evaluate_csv << ")\n";
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const auto& r = rows[i];
      out << "  " << r[0] << ": ndcg " << r[4] << ", price variance " << r[5]
          << ", close pairs " << r[6];
      if (r.size() > 7 && !r[7].empty()) out << ", expected bookings " << r[7];
      out << "\n";
    }
  }
  if (!a.sweep_csv.empty()) {
    auto rows = read_csv(a.sweep_csv);
    out << "Lambda sweep (" << a.sweep_csv << ")\n";
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const auto& r = rows[i];
      if (r[0] == "mean") {
        out << "  lambda " << r[2] << ": mean ndcg " << r[3] << "\n";
      } else if (r[0] == "argmax") {
        out << "  best lambda " << r[2] << " (mean ndcg " << r[3] << ")\n";
      }
    }
  }
  write_text(a.out_path, out.str());

  divrank::RunManifest m;
  m.command = "report";
  m.seed = 0;
  if (!a.evaluate_csv.empty()) m.add_input(a.evaluate_csv);
  if (!a.sweep_csv.empty()) m.add_input(a.sweep_csv);
  m.add_output(a.out_path);
  m.save(a.out_path + ".manifest.json");

  std::cout << "report: wrote " << a.out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diversity-aware ranking toolkit"};
  app.require_subcommand(1);

  SimulateArgs sim_args;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "Generate a market and logged searches under a policy");
  simulate->add_option("--config", sim_args.config_path, "market config JSON")
      ->required();
  simulate->add_option("--out-dir", sim_args.out_dir, "output directory")
      ->required();
  simulate->add_option("--ranker", sim_args.ranker,
                       "random | algorithm1 | algorithm2");
  simulate->add_option("--base", sim_args.base_path, "base model checkpoint");
  simulate->add_option("--sim", sim_args.sim_path,
                       "similarity model checkpoint");
  simulate->add_option("--seed", sim_args.seed, "seed override");
  simulate->add_option("--n-searches", sim_args.n_searches,
                       "search count override");
  simulate->add_option("--lambda", sim_args.lambda,
                       "penalty decay for algorithm2");

  TrainArgs base_args;
  CLI::App* train_base = app.add_subcommand(
      "train-base", "Train the pairwise booking-logit model");
  train_base->add_option("--logs", base_args.logs_path, "training logs")
      ->required();
  train_base->add_option("--schemas", base_args.schema_path, "schema manifest")
      ->required();
  train_base->add_option("--out", base_args.out_path, "checkpoint path")
      ->required();
  train_base->add_option("--manifest", base_args.manifest_path,
                         "manifest path (default: <out>.manifest.json)");
  train_base->add_option("--holdout", base_args.holdout,
                         "validation fraction");
  base_args.flags.attach(train_base);

  TrainArgs sim_train_args;
  CLI::App* train_sim = app.add_subcommand(
      "train-sim", "Train the similarity model against a frozen base");
  train_sim->add_option("--logs", sim_train_args.logs_path, "training logs")
      ->required();
  train_sim
      ->add_option("--schemas", sim_train_args.schema_path, "schema manifest")
      ->required();
  train_sim->add_option("--base", sim_train_args.base_path, "base checkpoint")
      ->required();
  train_sim->add_option("--out", sim_train_args.out_path, "checkpoint path")
      ->required();
  train_sim->add_option("--manifest", sim_train_args.manifest_path,
                        "manifest path (default: <out>.manifest.json)");
  train_sim->add_option("--holdout", sim_train_args.holdout,
                        "validation fraction");
  sim_train_args.flags.attach(train_sim);

  RerankArgs rerank_args;
  CLI::App* rerank = app.add_subcommand(
      "rerank", "Reorder logged searches with a trained ranker");
  rerank->add_option("--logs", rerank_args.logs_path, "logs to rerank")
      ->required();
  rerank->add_option("--base", rerank_args.base_path, "base checkpoint")
      ->required();
  rerank->add_option("--sim", rerank_args.sim_path,
                     "similarity checkpoint (omit for plain sort)");
  rerank->add_option("--out-dir", rerank_args.out_dir, "output directory")
      ->required();
  rerank->add_option("--lambda", rerank_args.lambda, "penalty decay");
  rerank->add_option("--convention", rerank_args.convention,
                     "derivation | literal");
  rerank->add_option("--max-positions", rerank_args.max_positions,
                     "apply penalties only before this position");

  EvaluateArgs eval_args;
  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "Offline metrics per ranker variant, as CSV");
  evaluate->add_option("--logs", eval_args.logs_path, "evaluation logs")
      ->required();
  evaluate->add_option("--base", eval_args.base_path, "base checkpoint")
      ->required();
  evaluate->add_option("--sim", eval_args.sim_path, "similarity checkpoint")
      ->required();
  evaluate->add_option("--ground-truth", eval_args.truth_path,
                       "ground-truth sidecar for expected bookings");
  evaluate->add_option("--out", eval_args.out_path, "CSV path")->required();
  evaluate->add_option("--lambda", eval_args.lambda, "penalty decay");
  evaluate->add_option("--convention", eval_args.convention,
                       "derivation | literal");

  SweepArgs sweep_args;
  CLI::App* sweep = app.add_subcommand(
      "sweep-lambda", "Offline NDCG across a lambda grid with argmax");
  sweep->add_option("--logs", sweep_args.logs_paths,
                    "log files, one per seed (repeatable)")
      ->required();
  sweep->add_option("--base", sweep_args.base_path, "base checkpoint")
      ->required();
  sweep->add_option("--sim", sweep_args.sim_path, "similarity checkpoint")
      ->required();
  sweep->add_option("--out", sweep_args.out_path, "CSV path")->required();
  sweep->add_option("--grid", sweep_args.grid, "lambda grid values");
  sweep->add_option("--convention", sweep_args.convention,
                    "derivation | literal");

  ReportArgs report_args;
  CLI::App* report = app.add_subcommand(
      "report", "Render CSV outputs as a human-readable summary");
  report->add_option("--evaluate-csv", report_args.evaluate_csv,
                     "evaluate output CSV");
  report->add_option("--sweep-csv", report_args.sweep_csv,
                     "sweep-lambda output CSV");
  report->add_option("--out", report_args.out_path, "summary text path")
      ->required();

  try {
    app.parse(argc, argv);
    if (simulate->parsed()) return cmd_simulate(sim_args);
    if (train_base->parsed()) return cmd_train(base_args, false);
    if (train_sim->parsed()) return cmd_train(sim_train_args, true);
    if (rerank->parsed()) return cmd_rerank(rerank_args);
    if (evaluate->parsed()) return cmd_evaluate(eval_args);
    if (sweep->parsed()) return cmd_sweep(sweep_args);
    if (report->parsed()) return cmd_report(report_args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const divrank::SchemaError& e) {
    std::cerr << "error:schema: " << e.what() << "\n";
    return 3;
  } catch (const divrank::DataError& e) {
    std::cerr << "error:data: " << e.what() << "\n";
    return 4;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error:config: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error:config: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error:io: " << e.what() << "\n";
    return 5;
  }
  return 0;
}
