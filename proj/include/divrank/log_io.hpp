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

#ifndef DIVRANK_LOG_IO_HPP_
#define DIVRANK_LOG_IO_HPP_

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "divrank/types.hpp"
#include "json.hpp"

namespace divrank {

using json = nlohmann::json;

inline json feature_vector_to_json(const FeatureVector& fv) {
  return json{{"schema_id", fv.schema_id}, {"values", fv.values}};
}

inline FeatureVector feature_vector_from_json(const json& j) {
  FeatureVector fv;
  fv.schema_id = j.at("schema_id").get<std::string>();
  fv.values = j.at("values").get<std::vector<double>>();
  return fv;
}

// Canonical field ordering below makes serialize(deserialize(x)) byte-stable.
inline json impression_to_json(const ListingImpression& imp) {
  json j = json::object();
  j["listing_id"] = imp.listing_id;
  j["position"] = imp.position;
  j["booked"] = imp.booked;
  j["price"] = imp.price;
  j["location"] = {imp.location.first, imp.location.second};
  j["features"] = feature_vector_to_json(imp.features);
  return j;
}

inline ListingImpression impression_from_json(const json& j) {
  ListingImpression imp;
  imp.listing_id = j.at("listing_id").get<std::string>();
  imp.position = j.at("position").get<int>();
  imp.booked = j.at("booked").get<bool>();
  imp.price = j.at("price").get<double>();
  auto loc = j.at("location");
  imp.location = {loc.at(0).get<double>(), loc.at(1).get<double>()};
  imp.features = feature_vector_from_json(j.at("features"));
  return imp;
}

inline json log_to_json(const SearchLog& log) {
  json j = json::object();
  j["search_id"] = log.search_id;
  j["query_features"] = feature_vector_to_json(log.context.query_features);
  j["user_features"] = feature_vector_to_json(log.context.user_features);
  json imps = json::array();
  for (const auto& imp : log.impressions) imps.push_back(impression_to_json(imp));
  j["impressions"] = imps;
  return j;
}

inline SearchLog log_from_json(const json& j) {
  SearchLog log;
  log.search_id = j.at("search_id").get<std::string>();
  log.context.query_features = feature_vector_from_json(j.at("query_features"));
  log.context.user_features = feature_vector_from_json(j.at("user_features"));
  for (const auto& ij : j.at("impressions")) {
    log.impressions.push_back(impression_from_json(ij));
  }
  return log;
}

inline std::string serialize_log(const SearchLog& log) {
  return log_to_json(log).dump();
}

inline SearchLog deserialize_log(const std::string& line) {
  SearchLog log = log_from_json(json::parse(line));
  validate_log(log);
  return log;
}

/// Loads one search per line, validating each. Errors carry the 1-based line
/// number and, where known, the offending search_id.
inline std::vector<SearchLog> load_logs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open log file: " + path);
  std::vector<SearchLog> logs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      logs.push_back(deserialize_log(line));
    } catch (const std::exception& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return logs;
}

inline void save_logs(const std::vector<SearchLog>& logs,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write log file: " + path);
  for (const auto& log : logs) out << serialize_log(log) << "\n";
}

inline SchemaManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open schema manifest: " + path);
  json j;
  in >> j;
  SchemaManifest m;
  for (auto& [name, dim] : j.at("schemas").items()) {
    m.dims[name] = dim.get<int>();
  }
  return m;
}

inline void save_manifest(const SchemaManifest& m, const std::string& path) {
  json schemas = json::object();
  for (const auto& [name, dim] : m.dims) schemas[name] = dim;
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write schema manifest: " + path);
  out << json{{"schemas", schemas}}.dump(2) << "\n";
}

}  // namespace divrank

#endif  // DIVRANK_LOG_IO_HPP_
