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

// End-to-end tests of the command-line driver: determinism of artifacts,
// manifest provenance, error reporting, and the collapse of the greedy
// reranker to a plain sort at lambda = 0 under the literal convention.

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "catch2/catch_amalgamated.hpp"
#include "divrank/manifest.hpp"
#include "json.hpp"
#include "test_util.hpp"

namespace {

using nlohmann::json;

struct CliResult {
  int exit_code = 0;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CliResult run_cli(const std::string& args, const std::string& scratch) {
  std::string out_path = scratch + "/cli_stdout.txt";
  std::string err_path = scratch + "/cli_stderr.txt";
  std::string cmd = std::string(DIVRANK_CLI_PATH) + " " + args + " > " +
                    out_path + " 2> " + err_path;
  int status = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out_path);
  r.err = slurp(err_path);
  return r;
}

void write_config(const std::string& path, int n_searches) {
  json j = {{"n_listings", 60},
            {"n_searches", n_searches},
            {"cluster_count", 6},
            {"seed", 5}};
  std::ofstream out(path);
  out << j.dump() << "\n";
}

// Simulates once and trains both models; shared across cases that only need
// some artifacts to exist.
struct Pipeline {
  divrank::testutil::TempDir dir{"cli"};
  std::string config = dir.path() + "/market.json";
  std::string sim_dir = dir.path() + "/sim";
  std::string logs = sim_dir + "/logs.jsonl";
  std::string schemas = sim_dir + "/schemas.json";
  std::string truth = sim_dir + "/ground_truth.jsonl";
  std::string base_ckpt = dir.path() + "/base.json";
  std::string sim_ckpt = dir.path() + "/sim.json";

  Pipeline() {
    write_config(config, 150);
    REQUIRE(run_cli("simulate --config " + config + " --out-dir " + sim_dir,
                    dir.path())
                .exit_code == 0);
    REQUIRE(run_cli("train-base --logs " + logs + " --schemas " + schemas +
                        " --out " + base_ckpt + " --epochs 1 --seed 3",
                    dir.path())
                .exit_code == 0);
    REQUIRE(run_cli("train-sim --logs " + logs + " --schemas " + schemas +
                        " --base " + base_ckpt + " --out " + sim_ckpt +
                        " --epochs 1 --seed 4",
                    dir.path())
                .exit_code == 0);
  }
};

}  // namespace

TEST_CASE("simulate writes byte-identical artifacts on rerun") {
  divrank::testutil::TempDir dir{"cli"};
  std::string config = dir.path() + "/market.json";
  write_config(config, 80);
  REQUIRE(run_cli("simulate --config " + config + " --out-dir " + dir.path() +
                      "/a",
                  dir.path())
              .exit_code == 0);
  REQUIRE(run_cli("simulate --config " + config + " --out-dir " + dir.path() +
                      "/b",
                  dir.path())
              .exit_code == 0);
  CHECK(slurp(dir.path() + "/a/logs.jsonl") ==
        slurp(dir.path() + "/b/logs.jsonl"));
  CHECK(slurp(dir.path() + "/a/ground_truth.jsonl") ==
        slurp(dir.path() + "/b/ground_truth.jsonl"));
  // Manifests embed output paths, so compare the recorded hashes instead.
  json ma = json::parse(slurp(dir.path() + "/a/manifest.json"));
  json mb = json::parse(slurp(dir.path() + "/b/manifest.json"));
  CHECK(ma.at("outputs").at(dir.path() + "/a/logs.jsonl") ==
        mb.at("outputs").at(dir.path() + "/b/logs.jsonl"));
  CHECK(ma.at("extra") == mb.at("extra"));
}

TEST_CASE("simulate with a missing config field names the field") {
  divrank::testutil::TempDir dir{"cli"};
  std::string config = dir.path() + "/market.json";
  {
    std::ofstream out(config);
    out << R"({"n_listings": 60, "n_searches": 10, "seed": 5})" << "\n";
  }
  CliResult r = run_cli(
      "simulate --config " + config + " --out-dir " + dir.path() + "/out",
      dir.path());
  CHECK(r.exit_code != 0);
  CHECK(r.err.find("cluster_count") != std::string::npos);
  CHECK(r.err.substr(0, 6) == "error:");
  CHECK(r.err.find('\n') == r.err.size() - 1);
}

TEST_CASE("simulate with zero searches leaves an empty log and a manifest") {
  divrank::testutil::TempDir dir{"cli"};
  std::string config = dir.path() + "/market.json";
  write_config(config, 0);
  REQUIRE(run_cli("simulate --config " + config + " --out-dir " + dir.path() +
                      "/out",
                  dir.path())
              .exit_code == 0);
  CHECK(slurp(dir.path() + "/out/logs.jsonl").empty());
  json m = json::parse(slurp(dir.path() + "/out/manifest.json"));
  CHECK(m.at("artifact_version") == 1);
  CHECK(m.at("command") == "simulate");
  CHECK(m.at("outputs").contains(dir.path() + "/out/logs.jsonl"));
}

TEST_CASE("train-sim refuses to run without a base checkpoint") {
  Pipeline p;
  CliResult r = run_cli("train-sim --logs " + p.logs + " --schemas " +
                            p.schemas + " --out " + p.dir.path() +
                            "/nobase.json --epochs 1",
                        p.dir.path());
  CHECK(r.exit_code != 0);
}

TEST_CASE("similarity manifest records the base checkpoint hash") {
  Pipeline p;
  json m = json::parse(slurp(p.sim_ckpt + ".manifest.json"));
  CHECK(m.at("extra").at("base_checkpoint_hash") ==
        divrank::file_hash(p.base_ckpt));
  CHECK(m.at("inputs").contains(p.base_ckpt));
  CHECK(m.at("extra").contains("final_train_loss"));
  CHECK(m.at("extra").contains("final_validation_loss"));
}

TEST_CASE("training reruns produce an identical checkpoint hash") {
  Pipeline p;
  std::string again = p.dir.path() + "/base_again.json";
  REQUIRE(run_cli("train-base --logs " + p.logs + " --schemas " + p.schemas +
                      " --out " + again + " --epochs 1 --seed 3",
                  p.dir.path())
              .exit_code == 0);
  CHECK(divrank::file_hash(again) == divrank::file_hash(p.base_ckpt));
}

TEST_CASE("evaluate emits matching hashes and the lambda-zero collapse row") {
  Pipeline p;
  std::string csv = p.dir.path() + "/eval.csv";
  REQUIRE(run_cli("evaluate --logs " + p.logs + " --base " + p.base_ckpt +
                      " --sim " + p.sim_ckpt + " --ground-truth " + p.truth +
                      " --out " + csv,
                  p.dir.path())
              .exit_code == 0);
  std::istringstream in(slurp(csv));
  std::string line;
  std::getline(in, line);  // header
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  REQUIRE(rows.size() == 3);
  CHECK(rows[0][0] == "algorithm1");
  CHECK(rows[1][0] == "algorithm2");
  CHECK(rows[2][0] == "algorithm2_lambda0_literal");

  // All variants evaluated the same input file.
  CHECK(rows[0][3] == rows[1][3]);
  CHECK(rows[0][3] == rows[2][3]);

  // Lambda 0 under the literal convention is a plain sort: every metric
  // column matches algorithm1 exactly.
  for (std::size_t c = 3; c < rows[0].size(); ++c) {
    CHECK(rows[0][c] == rows[2][c]);
  }

  // Reruns are byte-identical.
  std::string csv2 = p.dir.path() + "/eval2.csv";
  REQUIRE(run_cli("evaluate --logs " + p.logs + " --base " + p.base_ckpt +
                      " --sim " + p.sim_ckpt + " --ground-truth " + p.truth +
                      " --out " + csv2,
                  p.dir.path())
              .exit_code == 0);
  CHECK(slurp(csv) == slurp(csv2));
}

TEST_CASE("sweep handles a singleton grid and defaults to a grid with 1/3") {
  Pipeline p;
  std::string one = p.dir.path() + "/one.csv";
  REQUIRE(run_cli("sweep-lambda --logs " + p.logs + " --base " + p.base_ckpt +
                      " --sim " + p.sim_ckpt + " --out " + one + " --grid 0.5",
                  p.dir.path())
              .exit_code == 0);
  std::string body = slurp(one);
  CHECK(std::count(body.begin(), body.end(), '\n') == 4);  // header+sweep+mean+argmax

  std::string full = p.dir.path() + "/full.csv";
  REQUIRE(run_cli("sweep-lambda --logs " + p.logs + " --base " + p.base_ckpt +
                      " --sim " + p.sim_ckpt + " --out " + full,
                  p.dir.path())
              .exit_code == 0);
  CHECK(slurp(full).find("0.33333333333333331") != std::string::npos);
}

TEST_CASE("rerank then report round-trips through the CSV outputs") {
  Pipeline p;
  REQUIRE(run_cli("rerank --logs " + p.logs + " --base " + p.base_ckpt +
                      " --sim " + p.sim_ckpt + " --out-dir " + p.dir.path() +
                      "/rr",
                  p.dir.path())
              .exit_code == 0);
  CHECK(!slurp(p.dir.path() + "/rr/reranked.jsonl").empty());
  CHECK(!slurp(p.dir.path() + "/rr/penalties.jsonl").empty());

  std::string csv = p.dir.path() + "/eval.csv";
  REQUIRE(run_cli("evaluate --logs " + p.logs + " --base " + p.base_ckpt +
                      " --sim " + p.sim_ckpt + " --out " + csv,
                  p.dir.path())
              .exit_code == 0);
  std::string report = p.dir.path() + "/report.txt";
  REQUIRE(run_cli("report --evaluate-csv " + csv + " --out " + report,
                  p.dir.path())
              .exit_code == 0);
  std::string text = slurp(report);
  CHECK(text.find("algorithm1") != std::string::npos);
  CHECK(text.find("algorithm2") != std::string::npos);
}
