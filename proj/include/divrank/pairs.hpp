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

#ifndef DIVRANK_PAIRS_HPP_
#define DIVRANK_PAIRS_HPP_

#include <vector>

#include "divrank/types.hpp"

namespace divrank {

/// Booked-vs-not-booked pairs: one per not-booked impression of every search
/// that ended in a booking. Searches without a booking contribute nothing.
inline std::vector<PairExample> build_pairs(const std::vector<SearchLog>& logs) {
  std::vector<PairExample> pairs;
  for (const auto& log : logs) {
    int bi = log.booked_index();
    if (bi < 0) continue;
    for (const auto& imp : log.impressions) {
      if (imp.booked) continue;
      pairs.push_back(
          {log.search_id, log.context, log.impressions[bi], imp});
    }
  }
  return pairs;
}

/// Pairs for the position-1 conditional model. Searches booked at position 0
/// are discarded; elsewhere the rejected position-0 listing becomes the
/// antecedent and pairs are formed among positions >= 1.
inline std::vector<ConditionalPairExample> build_conditional_pairs(
    const std::vector<SearchLog>& logs) {
  std::vector<ConditionalPairExample> pairs;
  for (const auto& log : logs) {
    int bi = log.booked_index();
    if (bi < 0) continue;
    if (log.impressions[bi].position == 0) continue;
    if (log.impressions.empty() || log.impressions[0].position != 0) continue;
    const ListingImpression& antecedent = log.impressions[0];
    for (const auto& imp : log.impressions) {
      if (imp.position == 0 || imp.booked) continue;
      pairs.push_back({log.search_id, log.context, log.impressions[bi], imp,
                       antecedent});
    }
  }
  return pairs;
}

}  // namespace divrank

#endif  // DIVRANK_PAIRS_HPP_
