#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "crosstx/history.hpp"
#include "crosstx/types.hpp"

namespace crosstx {

// Per-transaction digest of a history: first snapshot scalar and commit
// timestamp per engine, outcome flags, and the recorded data accesses.
struct TxnSummary {
  TxnId id = 0;
  std::optional<Timestamp> begin_scalar[2];
  std::optional<Timestamp> commit_scalar[2];
  bool post_committed[2] = {false, false};
  bool aborted = false;
  bool acked = false;

  struct Access {
    EngineId engine;
    std::string table;
    std::string key;
    Timestamp version_ts;  // reads only
    std::uint64_t seq;
  };
  std::vector<Access> reads;
  std::vector<Access> writes;

  bool committed() const { return (post_committed[0] || post_committed[1]) && !aborted; }
  bool has_both_snapshots() const { return begin_scalar[0] && begin_scalar[1]; }
  bool has_both_commits() const { return commit_scalar[0] && commit_scalar[1]; }
};

inline std::map<TxnId, TxnSummary> summarize(const std::vector<HistoryEvent>& history) {
  std::map<TxnId, TxnSummary> out;
  for (const HistoryEvent& e : history) {
    if (e.kind == EventKind::Crash) continue;
    TxnSummary& t = out[e.txn];
    t.id = e.txn;
    EngineId eng = e.engine.value_or(0);
    switch (e.kind) {
      case EventKind::Begin:
      case EventKind::PeerSnapshot:
        if (eng < 2 && !t.begin_scalar[eng]) t.begin_scalar[eng] = e.ts;
        break;
      case EventKind::PreCommit:
        if (eng < 2) t.commit_scalar[eng] = e.ts;
        break;
      case EventKind::PostCommit:
        if (eng < 2) t.post_committed[eng] = true;
        break;
      case EventKind::Read:
        t.reads.push_back({eng, e.table, e.key, e.ts, e.seq});
        break;
      case EventKind::Write:
        t.writes.push_back({eng, e.table, e.key, 0, e.seq});
        break;
      case EventKind::Abort:
        t.aborted = true;
        break;
      case EventKind::Ack:
        t.acked = true;
        break;
      default:
        break;
    }
  }
  return out;
}

namespace detail_oracle {

// Detects strictly crossing pairs among (x0, x1) points: i, j with
// a.x0 < b.x0 and a.x1 > b.x1. O(n log n) sweep; witnesses reported.
struct Point {
  Timestamp x0, x1;
  TxnId id;
};

inline std::vector<std::pair<TxnId, TxnId>> crossing_pairs(std::vector<Point> pts,
                                                           std::size_t max_report = 16) {
  std::vector<std::pair<TxnId, TxnId>> out;
  if (pts.size() < 2) return out;
  std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
    if (a.x0 != b.x0) return a.x0 < b.x0;
    return a.x1 < b.x1;
  });
  // max x1 among points with strictly smaller x0
  std::size_t i = 0;
  Point best_prev{0, 0, 0};
  bool have_prev = false;
  std::vector<Point> prefix;  // points with x0 < current group's x0, max-x1 tracked
  while (i < pts.size()) {
    std::size_t j = i;
    while (j < pts.size() && pts[j].x0 == pts[i].x0) ++j;
    for (std::size_t k = i; k < j && out.size() < max_report; ++k) {
      if (have_prev && best_prev.x1 > pts[k].x1) {
        // find a concrete witness among earlier points
        for (const Point& p : prefix) {
          if (p.x1 > pts[k].x1) {
            out.emplace_back(p.id, pts[k].id);
            break;
          }
        }
      }
    }
    for (std::size_t k = i; k < j; ++k) {
      prefix.push_back(pts[k]);
      if (!have_prev || pts[k].x1 > best_prev.x1) best_prev = pts[k];
      have_prev = true;
    }
    i = j;
  }
  return out;
}

}  // namespace detail_oracle

// Cross phenomenon: two transactions whose snapshot orders differ between the
// engines (x older in one engine, newer in the other).
inline std::vector<std::pair<TxnId, TxnId>> check_snapshot_skew(
    const std::vector<HistoryEvent>& history) {
  auto txns = summarize(history);
  std::vector<detail_oracle::Point> pts;
  for (const auto& [id, t] : txns) {
    if (t.aborted || !t.has_both_snapshots()) continue;
    pts.push_back({*t.begin_scalar[0], *t.begin_scalar[1], id});
  }
  return detail_oracle::crossing_pairs(std::move(pts));
}

// Serial-concurrent phenomenon: a committed cross-engine transaction visible
// to another transaction's snapshot in one engine but not the other.
inline std::vector<std::pair<TxnId, TxnId>> check_serial_concurrent(
    const std::vector<HistoryEvent>& history) {
  auto txns = summarize(history);
  struct Reader {
    Timestamp b0, b1;
    TxnId id;
  };
  std::vector<Reader> readers;
  for (const auto& [id, t] : txns) {
    if (t.aborted || !t.has_both_snapshots()) continue;
    readers.push_back({*t.begin_scalar[0], *t.begin_scalar[1], id});
  }
  std::sort(readers.begin(), readers.end(),
            [](const Reader& a, const Reader& b) { return a.b0 < b.b0; });
  std::vector<Timestamp> prefix_max(readers.size()), suffix_min(readers.size());
  for (std::size_t i = 0; i < readers.size(); ++i) {
    prefix_max[i] = readers[i].b1;
    if (i) prefix_max[i] = std::max(prefix_max[i], prefix_max[i - 1]);
  }
  for (std::size_t i = readers.size(); i-- > 0;) {
    suffix_min[i] = readers[i].b1;
    if (i + 1 < readers.size()) suffix_min[i] = std::min(suffix_min[i], suffix_min[i + 1]);
  }
  std::vector<std::pair<TxnId, TxnId>> out;
  for (const auto& [id, t] : txns) {
    if (!t.committed() || !t.has_both_commits()) continue;
    Timestamp c0 = *t.commit_scalar[0], c1 = *t.commit_scalar[1];
    // split readers: b0 < c0 must not see in engine 1 (b1 < c1); b0 >= c0 must see
    auto split = std::lower_bound(readers.begin(), readers.end(), c0,
                                  [](const Reader& r, Timestamp v) { return r.b0 < v; });
    std::size_t s = static_cast<std::size_t>(split - readers.begin());
    bool bad_prefix = s > 0 && prefix_max[s - 1] >= c1;
    bool bad_suffix = s < readers.size() && suffix_min[s] < c1;
    if (!bad_prefix && !bad_suffix) continue;
    for (std::size_t i = 0; i < readers.size() && out.size() < 16; ++i) {
      if (readers[i].id == id) continue;
      bool sees0 = c0 <= readers[i].b0;
      bool sees1 = c1 <= readers[i].b1;
      if (sees0 != sees1) out.emplace_back(id, readers[i].id);
    }
    if (out.size() >= 16) break;
  }
  return out;
}

struct OrderRuleViolation {
  // "begin-order" (begin/begin), "commit-order" (commit/commit),
  // "begin-commit-order" (mixed)
  std::string family;
  TxnId a = 0;
  TxnId b = 0;
};

// Pairwise begin/commit order agreement across engines for cross-engine
// transactions: the engine-local orders of begins and commits must embed into
// one global order in both directions.
inline std::vector<OrderRuleViolation> check_order_rules(
    const std::vector<HistoryEvent>& history) {
  auto txns = summarize(history);
  std::vector<OrderRuleViolation> out;

  std::vector<detail_oracle::Point> begins, commits;
  for (const auto& [id, t] : txns) {
    if (t.aborted) continue;
    if (t.has_both_snapshots()) begins.push_back({*t.begin_scalar[0], *t.begin_scalar[1], id});
    if (t.committed() && t.has_both_commits())
      commits.push_back({*t.commit_scalar[0], *t.commit_scalar[1], id});
  }
  for (auto& [a, b] : detail_oracle::crossing_pairs(begins)) {
    out.push_back({"begin-order", a, b});
  }
  for (auto& [a, b] : detail_oracle::crossing_pairs(commits)) {
    out.push_back({"commit-order", a, b});
  }
  for (auto& [a, b] : check_serial_concurrent(history)) {
    out.push_back({"begin-commit-order", a, b});
  }
  return out;
}

struct DependencyEdge {
  TxnId from = 0;
  TxnId to = 0;
  char kind = 'w';  // 'w' = ww, 'r' = wr, 'a' = rw (anti-dependency)
  EngineId engine = 0;
};

struct DependencyGraph {
  std::set<TxnId> nodes;
  std::vector<DependencyEdge> edges;
};

// Committed transactions only: ww edges from per-key version order, wr from a
// read to its version's writer, rw from a read to the writer of the version's
// successor.
inline DependencyGraph build_dependency_graph(const std::vector<HistoryEvent>& history) {
  auto txns = summarize(history);
  DependencyGraph g;
  // (engine, table, key) -> committed writers sorted by commit ts
  std::map<std::tuple<EngineId, std::string, std::string>, std::vector<std::pair<Timestamp, TxnId>>>
      versions;
  for (const auto& [id, t] : txns) {
    if (!t.committed()) continue;
    g.nodes.insert(id);
    for (const auto& w : t.writes) {
      if (!t.commit_scalar[w.engine]) continue;
      versions[{w.engine, w.table, w.key}].push_back({*t.commit_scalar[w.engine], id});
    }
  }
  for (auto& [loc, writers] : versions) {
    std::sort(writers.begin(), writers.end());
    for (std::size_t i = 1; i < writers.size(); ++i) {
      if (writers[i - 1].second != writers[i].second) {
        g.edges.push_back({writers[i - 1].second, writers[i].second, 'w', std::get<0>(loc)});
      }
    }
  }
  for (const auto& [id, t] : txns) {
    if (!t.committed()) continue;
    for (const auto& r : t.reads) {
      auto vit = versions.find({r.engine, r.table, r.key});
      if (vit == versions.end()) continue;
      const auto& writers = vit->second;
      // wr: writer of the version read
      if (r.version_ts != 0) {
        auto w = std::lower_bound(writers.begin(), writers.end(),
                                  std::make_pair(r.version_ts, TxnId{0}));
        if (w != writers.end() && w->first == r.version_ts && w->second != id) {
          g.edges.push_back({w->second, id, 'r', r.engine});
        }
      }
      // rw: writer of the successor version
      auto s = std::upper_bound(writers.begin(), writers.end(),
                                std::make_pair(r.version_ts, TxnId{~0ull}));
      if (s != writers.end() && s->second != id) {
        g.edges.push_back({id, s->second, 'a', r.engine});
      }
    }
  }
  return g;
}

// Returns a dependency cycle among committed transactions, if any.
inline std::optional<std::vector<TxnId>> check_serializable(
    const std::vector<HistoryEvent>& history) {
  DependencyGraph g = build_dependency_graph(history);
  std::map<TxnId, std::vector<TxnId>> adj;
  for (const auto& e : g.edges) adj[e.from].push_back(e.to);
  std::map<TxnId, int> color;  // 0 white, 1 grey, 2 black
  std::vector<TxnId> stack;
  std::optional<std::vector<TxnId>> cycle;

  std::function<bool(TxnId)> dfs = [&](TxnId u) {
    color[u] = 1;
    stack.push_back(u);
    for (TxnId v : adj[u]) {
      if (color[v] == 1) {
        std::vector<TxnId> c;
        auto it = std::find(stack.begin(), stack.end(), v);
        for (; it != stack.end(); ++it) c.push_back(*it);
        c.push_back(v);
        cycle = std::move(c);
        return true;
      }
      if (color[v] == 0 && dfs(v)) return true;
    }
    stack.pop_back();
    color[u] = 2;
    return false;
  };
  for (TxnId n : g.nodes) {
    if (color[n] == 0 && dfs(n)) break;
  }
  return cycle;
}

struct AtomicityViolation {
  TxnId txn = 0;
  std::string what;
};

// (a) acknowledgment gating: no ack before all post-commits and both durable
// frontiers; (b) with a post-crash surviving-writes map, all-or-nothing per
// cross-engine transaction.
inline std::vector<AtomicityViolation> check_atomicity_durability(
    const std::vector<HistoryEvent>& history,
    const std::map<EngineId, std::set<TxnId>>& post_crash_writers = {}) {
  std::vector<AtomicityViolation> out;
  std::map<TxnId, std::uint64_t> ack_seq;
  std::map<TxnId, std::uint64_t> last_post_commit_seq;
  std::map<TxnId, std::set<EngineId>> post_engines, write_engines;
  for (const HistoryEvent& e : history) {
    if (e.kind == EventKind::Ack) {
      ack_seq[e.txn] = e.seq;
      if (e.dur_anchor < e.req_anchor || e.dur_peer < e.req_peer) {
        out.push_back({e.txn, "acknowledged before required LSNs were durable"});
      }
    } else if (e.kind == EventKind::PostCommit) {
      last_post_commit_seq[e.txn] = e.seq;
      post_engines[e.txn].insert(e.engine.value_or(0));
    } else if (e.kind == EventKind::Write) {
      write_engines[e.txn].insert(e.engine.value_or(0));
    }
  }
  for (const auto& [txn, seq] : ack_seq) {
    auto it = last_post_commit_seq.find(txn);
    if (it != last_post_commit_seq.end() && it->second > seq) {
      out.push_back({txn, "acknowledged before post-commit finished"});
    }
  }
  if (!post_crash_writers.empty()) {
    for (const auto& [txn, engines] : write_engines) {
      if (engines.size() < 2) continue;
      int present = 0, absent = 0;
      for (EngineId e : engines) {
        auto s = post_crash_writers.find(e);
        bool has = s != post_crash_writers.end() && s->second.count(txn) > 0;
        has ? ++present : ++absent;
      }
      if (present > 0 && absent > 0) {
        out.push_back({txn, "writes survive in only one engine"});
      }
    }
    for (const auto& [txn, seq] : ack_seq) {
      auto we = write_engines.find(txn);
      if (we == write_engines.end()) continue;  // read-only: nothing to lose
      for (EngineId e : we->second) {
        auto s = post_crash_writers.find(e);
        if (s != post_crash_writers.end() && !s->second.count(txn)) {
          out.push_back({txn, "acknowledged transaction lost by recovery"});
        }
      }
    }
  }
  return out;
}

}  // namespace crosstx
