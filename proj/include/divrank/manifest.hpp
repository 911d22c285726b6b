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

#ifndef DIVRANK_MANIFEST_HPP_
#define DIVRANK_MANIFEST_HPP_

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

namespace divrank {

inline std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string file_hash(const std::string& path) {
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(read_file(path));
  return ss.str();
}

/// Provenance record written next to every CLI output. Reruns of a command
/// from its manifest reproduce the outputs byte for byte.
struct RunManifest {
  std::string command;
  std::uint64_t seed = 0;
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json inputs = nlohmann::json::object();   // path -> hash
  nlohmann::json outputs = nlohmann::json::object();  // path -> hash
  nlohmann::json extra = nlohmann::json::object();

  void add_input(const std::string& path) { inputs[path] = file_hash(path); }
  void add_output(const std::string& path) { outputs[path] = file_hash(path); }

  void save(const std::string& path) const {
    nlohmann::json j{{"artifact_version", 1}, {"command", command},
                     {"seed", seed},          {"config", config},
                     {"inputs", inputs},      {"outputs", outputs},
                     {"extra", extra}};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest: " + path);
    out << j.dump(2) << "\n";
  }
};

}  // namespace divrank

#endif  // DIVRANK_MANIFEST_HPP_
