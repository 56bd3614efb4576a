#pragma once

// Test-side brute-force reference for registry decisions. Works on a flat
// list of (anchor, peer) pairs and full scans only; it never looks at the
// registry's partition structure.

#include <algorithm>
#include <map>
#include <optional>
#include <vector>

#include "crosstx/types.hpp"

namespace crosstx::testing {

using Pair = std::pair<Timestamp, Timestamp>;
using Pairs = std::vector<Pair>;

// Two-sided visibility predicate: a transaction with snapshot pair (a, t)
// observes each recorded commit pair consistently in both engines.
inline bool select_valid(const Pairs& pairs, Timestamp a, Timestamp t) {
  for (const auto& [c1, c2] : pairs) {
    bool sees_anchor = c1 <= a;
    bool sees_peer = c2 <= t;
    if (sees_anchor != sees_peer) return false;
  }
  return true;
}

// All valid peer snapshots <= limit, by exhaustive enumeration.
inline std::vector<Timestamp> valid_snapshots(const Pairs& pairs, Timestamp a, Timestamp limit) {
  std::vector<Timestamp> out;
  for (Timestamp t = 0; t <= limit; ++t) {
    if (select_valid(pairs, a, t)) out.push_back(t);
  }
  return out;
}

// Expected selection result: mapped-candidate maximum when an upper
// neighbourhood exists, the engine's latest otherwise, and one below the
// nearest upper neighbour when nothing at or below the key is mapped.
inline Timestamp oracle_select(const Pairs& pairs, Timestamp a, Timestamp peer_latest) {
  bool has_upper = false, has_lower = false;
  Timestamp min_upper_key = 0;
  Timestamp max_lower_val = 0;
  for (const auto& [c1, c2] : pairs) {
    if (c1 > a) {
      if (!has_upper || c1 < min_upper_key) min_upper_key = c1;
      has_upper = true;
    } else {
      if (!has_lower || c2 > max_lower_val) max_lower_val = c2;
      has_lower = true;
    }
  }
  if (!has_upper) return has_lower ? std::max(peer_latest, max_lower_val) : peer_latest;
  if (has_lower) return max_lower_val;
  Timestamp min_val_at_key = 0;
  bool first = true;
  for (const auto& [c1, c2] : pairs) {
    if (c1 == min_upper_key && (first || c2 < min_val_at_key)) {
      min_val_at_key = c2;
      first = false;
    }
  }
  return min_val_at_key - 1;
}

// Commit pair acceptance: sign-consistent with every recorded pair
// (ties on either axis are unconstrained).
inline bool oracle_commit_ok(const Pairs& pairs, Timestamp a, Timestamp v) {
  for (const auto& [c1, c2] : pairs) {
    if (c1 < a && c2 > v) return false;
    if (c1 > a && c2 < v) return false;
  }
  return true;
}

inline std::vector<std::pair<Timestamp, std::vector<Timestamp>>> group_pairs(const Pairs& pairs) {
  std::map<Timestamp, std::vector<Timestamp>> m;
  for (const auto& [k, v] : pairs) m[k].push_back(v);
  std::vector<std::pair<Timestamp, std::vector<Timestamp>>> out(m.begin(), m.end());
  return out;
}

// The registry's order-consistency invariant: per-key max and min peer values
// are both monotone in the anchor key.
inline bool envelope_ok(const Pairs& pairs) {
  auto grouped = group_pairs(pairs);
  Timestamp prev_max = 0, prev_min = 0;
  bool first = true;
  for (const auto& [k, vals] : grouped) {
    Timestamp mx = *std::max_element(vals.begin(), vals.end());
    Timestamp mn = *std::min_element(vals.begin(), vals.end());
    if (!first && (mx < prev_max || mn < prev_min)) return false;
    prev_max = mx;
    prev_min = mn;
    first = false;
  }
  return true;
}

inline Timestamp max_peer_value(const Pairs& pairs) {
  Timestamp m = 0;
  for (const auto& [k, v] : pairs) m = std::max(m, v);
  return m;
}

}  // namespace crosstx::testing
