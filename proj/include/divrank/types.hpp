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

#ifndef DIVRANK_TYPES_HPP_
#define DIVRANK_TYPES_HPP_

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace divrank {

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense feature vector tied to a named schema.
struct FeatureVector {
  std::vector<double> values;
  std::string schema_id;

  bool finite() const {
    for (double v : values) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }
};

/// Named feature schemas with declared dimensions, stored in a sidecar
/// manifest next to the log files.
struct SchemaManifest {
  std::map<std::string, int> dims;

  int dim(const std::string& id) const {
    auto it = dims.find(id);
    if (it == dims.end()) throw SchemaError("unknown schema: " + id);
    return it->second;
  }

  void check(const FeatureVector& fv) const {
    int d = dim(fv.schema_id);
    if (static_cast<int>(fv.values.size()) != d) {
      throw SchemaError("schema " + fv.schema_id + " expects dim " +
                        std::to_string(d) + ", got " +
                        std::to_string(fv.values.size()));
    }
    if (!fv.finite()) {
      throw SchemaError("non-finite value in vector of schema " + fv.schema_id);
    }
  }
};

struct QueryContext {
  FeatureVector query_features;
  FeatureVector user_features;
};

struct ListingImpression {
  std::string listing_id;
  int position = 0;
  FeatureVector features;
  bool booked = false;
  double price = 0.0;              // currency units, > 0
  std::pair<double, double> location{0.0, 0.0};  // planar km
};

/// One logged search: context plus a position-ordered impression list with
/// at most one booking.
struct SearchLog {
  std::string search_id;
  QueryContext context;
  std::vector<ListingImpression> impressions;

  /// Index of the booked impression, or -1 when the search had no booking.
  int booked_index() const {
    for (std::size_t i = 0; i < impressions.size(); ++i) {
      if (impressions[i].booked) return static_cast<int>(i);
    }
    return -1;
  }
};

/// Throws DataError unless positions are 0..K-1 contiguous, prices are
/// positive, and at most one impression is booked.
inline void validate_log(const SearchLog& log) {
  int bookings = 0;
  std::vector<bool> seen(log.impressions.size(), false);
  for (const auto& imp : log.impressions) {
    if (imp.position < 0 ||
        imp.position >= static_cast<int>(log.impressions.size()) ||
        seen[imp.position]) {
      throw DataError("search " + log.search_id +
                      ": positions not a 0..K-1 permutation");
    }
    seen[imp.position] = true;
    if (imp.price <= 0.0) {
      throw DataError("search " + log.search_id + ": listing " +
                      imp.listing_id + " has non-positive price");
    }
    if (imp.booked) ++bookings;
  }
  if (bookings > 1) {
    throw DataError("search " + log.search_id + ": multiple bookings");
  }
  for (std::size_t i = 0; i + 1 < log.impressions.size(); ++i) {
    if (log.impressions[i].position + 1 != log.impressions[i + 1].position) {
      throw DataError("search " + log.search_id +
                      ": impressions not ordered by position");
    }
  }
  if (!log.impressions.empty() && log.impressions[0].position != 0) {
    throw DataError("search " + log.search_id + ": first position is not 0");
  }
}

/// Booked/not-booked pair from a single search.
struct PairExample {
  std::string search_id;
  QueryContext context;
  ListingImpression booked;
  ListingImpression not_booked;
};

/// Pair from positions >= 1 of a search whose position-0 listing was shown
/// but rejected; that listing rides along as the antecedent.
struct ConditionalPairExample {
  std::string search_id;
  QueryContext context;
  ListingImpression booked;
  ListingImpression not_booked;
  ListingImpression antecedent;
};

}  // namespace divrank

#endif  // DIVRANK_TYPES_HPP_
