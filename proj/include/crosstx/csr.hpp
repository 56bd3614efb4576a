#pragma once

#include <algorithm>
#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <vector>

#include "crosstx/types.hpp"

namespace crosstx {

struct CsrDecision {
  enum class Outcome : std::uint8_t { Value, InactiveIndex, OutOfBounds };

  Outcome outcome = Outcome::Value;
  Timestamp value = 0;

  bool ok() const { return outcome == Outcome::Value; }

  AbortReason abort_reason() const {
    switch (outcome) {
      case Outcome::Value: return AbortReason::None;
      case Outcome::InactiveIndex: return AbortReason::CsrInactiveIndex;
      case Outcome::OutOfBounds: return AbortReason::CsrOutOfBounds;
    }
    return AbortReason::None;
  }

  static CsrDecision val(Timestamp t) { return {Outcome::Value, t}; }
  static CsrDecision inactive() { return {Outcome::InactiveIndex, 0}; }
  static CsrDecision out_of_bounds() { return {Outcome::OutOfBounds, 0}; }
};

enum class MapStatus : std::uint8_t { Ok, InactiveIndex };

// Registry of safe snapshot correspondences: a partitioned ordered map from
// anchor-engine timestamps to sets of peer-engine timestamps. Exactly one
// partition (the last) accepts new keys; sealed partitions serve lookups only.
class SnapshotRegistry {
 public:
  struct Config {
    std::size_t capacity_per_index = 1000;  // distinct keys per partition
    std::uint64_t gc_access_threshold = 5000;
  };

  struct EntrySnapshot {
    Timestamp anchor = 0;
    std::vector<Timestamp> peers;
  };
  struct IndexSnapshot {
    Timestamp min_anchor = 0;
    bool open = false;
    std::vector<EntrySnapshot> entries;
  };

  using MinSnapProvider = std::function<Timestamp()>;

  SnapshotRegistry() : SnapshotRegistry(Config()) {}
  explicit SnapshotRegistry(Config cfg) : cfg_(cfg) {}

  // Provider of the oldest live anchor snapshot (or the current anchor counter
  // when nothing is live); consulted when periodic recycling triggers.
  void set_min_snap_provider(MinSnapProvider p) { min_snap_ = std::move(p); }

  // Snapshot selection: with the anchor snapshot as key, pick a peer snapshot
  // that keeps begin orders aligned across engines. The chosen mapping is
  // always recorded; a mapping that cannot be recorded aborts the caller.
  CsrDecision select_snapshot(Timestamp anchor_snap, Timestamp peer_latest) {
    maybe_gc();
    {
      std::shared_lock<std::shared_mutex> rl(list_mu_);
      if (!indexes_.empty()) {
        Index* idx = locate_ptr(anchor_snap);
        if (!idx) return CsrDecision::inactive();
        std::lock_guard<std::mutex> ig(idx->mu);
        auto [dec, overflow] = select_in_index(*idx, anchor_snap, peer_latest);
        if (!overflow) return dec;
      }
    }
    std::unique_lock<std::shared_mutex> wl(list_mu_);
    if (indexes_.empty()) create_first_index_locked(anchor_snap);
    Index* idx = locate_ptr(anchor_snap);
    if (!idx) return CsrDecision::inactive();
    auto [dec, overflow] = select_in_index(*idx, anchor_snap, peer_latest);
    if (overflow) return split_and_insert_locked(*idx, anchor_snap, dec.value);
    return dec;
  }

  // Commit check: the new (anchor_commit, peer_commit) pair must fall between
  // the peer values already mapped strictly below and above the anchor key.
  CsrDecision commit_check(Timestamp anchor_commit_ts, Timestamp peer_commit_ts) {
    maybe_gc();
    {
      std::shared_lock<std::shared_mutex> rl(list_mu_);
      if (!indexes_.empty()) {
        Index* idx = locate_ptr(anchor_commit_ts);
        if (!idx) return CsrDecision::inactive();
        std::lock_guard<std::mutex> ig(idx->mu);
        auto [dec, overflow] = check_in_index(*idx, anchor_commit_ts, peer_commit_ts);
        if (!overflow) return dec;
      }
    }
    std::unique_lock<std::shared_mutex> wl(list_mu_);
    if (indexes_.empty()) create_first_index_locked(anchor_commit_ts);
    Index* idx = locate_ptr(anchor_commit_ts);
    if (!idx) return CsrDecision::inactive();
    auto [dec, overflow] = check_in_index(*idx, anchor_commit_ts, peer_commit_ts);
    if (overflow) return split_and_insert_locked(*idx, anchor_commit_ts, peer_commit_ts);
    return dec;
  }

  // Bare mapping insert (the algorithms above use the same routing rules).
  MapStatus map(Timestamp anchor_ts, Timestamp peer_ts) {
    {
      std::shared_lock<std::shared_mutex> rl(list_mu_);
      if (!indexes_.empty()) {
        Index* idx = locate_ptr(anchor_ts);
        if (!idx) return MapStatus::InactiveIndex;
        std::lock_guard<std::mutex> ig(idx->mu);
        MapResult r = map_into(*idx, anchor_ts, peer_ts);
        if (r == MapResult::Ok) return MapStatus::Ok;
        if (r == MapResult::Inactive) return MapStatus::InactiveIndex;
      }
    }
    std::unique_lock<std::shared_mutex> wl(list_mu_);
    if (indexes_.empty()) create_first_index_locked(anchor_ts);
    Index* idx = locate_ptr(anchor_ts);
    if (!idx) return MapStatus::InactiveIndex;
    MapResult r = map_into(*idx, anchor_ts, peer_ts);
    if (r == MapResult::NeedNewIndex) {
      split_and_insert_locked(*idx, anchor_ts, peer_ts);
      return MapStatus::Ok;
    }
    return r == MapResult::Ok ? MapStatus::Ok : MapStatus::InactiveIndex;
  }

  // min_anchor of the index that covers anchor_ts, if any.
  std::optional<Timestamp> locate_index_min(Timestamp anchor_ts) const {
    std::shared_lock<std::shared_mutex> rl(list_mu_);
    for (auto it = indexes_.rbegin(); it != indexes_.rend(); ++it) {
      if ((*it)->min_anchor <= anchor_ts) return (*it)->min_anchor;
    }
    return std::nullopt;
  }

  // Drops sealed partitions whose covered range lies entirely below the given
  // snapshot. The open partition is never removed.
  std::size_t recycle(Timestamp min_active_anchor_snap) {
    std::unique_lock<std::shared_mutex> wl(list_mu_);
    std::size_t removed = 0;
    std::vector<std::unique_ptr<Index>> keep;
    keep.reserve(indexes_.size());
    for (std::size_t i = 0; i < indexes_.size(); ++i) {
      bool stale = false;
      if (!indexes_[i]->open && i + 1 < indexes_.size()) {
        Timestamp covered_upper = indexes_[i + 1]->min_anchor - 1;
        stale = covered_upper < min_active_anchor_snap;
      }
      if (stale) {
        ++removed;
      } else {
        keep.push_back(std::move(indexes_[i]));
      }
    }
    indexes_ = std::move(keep);
    indexes_recycled_ += removed;
    return removed;
  }

  // Access-count hook: every select/commit-check passes through here; every
  // gc_access_threshold-th access runs one recycle pass.
  void maybe_gc() {
    std::uint64_t c = access_counter_.fetch_add(1, std::memory_order_relaxed) + 1;
    if (cfg_.gc_access_threshold > 0 && c % cfg_.gc_access_threshold == 0 && min_snap_) {
      ++gc_runs_;
      recycle(min_snap_());
    }
  }

  std::uint64_t indexes_created() const { return indexes_created_.load(); }
  std::uint64_t indexes_recycled() const { return indexes_recycled_.load(); }
  std::uint64_t gc_runs() const { return gc_runs_.load(); }
  std::uint64_t access_count() const { return access_counter_.load(); }

  std::size_t index_count() const {
    std::shared_lock<std::shared_mutex> rl(list_mu_);
    return indexes_.size();
  }

  std::vector<IndexSnapshot> state() const {
    std::shared_lock<std::shared_mutex> rl(list_mu_);
    std::vector<IndexSnapshot> out;
    for (const auto& idx : indexes_) {
      std::lock_guard<std::mutex> ig(idx->mu);
      IndexSnapshot s;
      s.min_anchor = idx->min_anchor;
      s.open = idx->open;
      for (const auto& [k, vals] : idx->entries) {
        s.entries.push_back({k, std::vector<Timestamp>(vals.begin(), vals.end())});
      }
      out.push_back(std::move(s));
    }
    return out;
  }

  // Diagnostic text form:
  //   index <min>..<max> open|sealed
  //     <anchor> -> [peer,...]
  std::string dump() const {
    std::shared_lock<std::shared_mutex> rl(list_mu_);
    std::ostringstream os;
    for (std::size_t i = 0; i < indexes_.size(); ++i) {
      const auto& idx = indexes_[i];
      std::lock_guard<std::mutex> ig(idx->mu);
      os << "index " << idx->min_anchor << "..";
      if (i + 1 < indexes_.size()) {
        os << indexes_[i + 1]->min_anchor - 1;
      } else {
        os << "inf";
      }
      os << (idx->open ? " open" : " sealed") << "\n";
      for (const auto& [k, vals] : idx->entries) {
        os << "  " << k << " -> [";
        bool first = true;
        for (Timestamp v : vals) {
          if (!first) os << ",";
          os << v;
          first = false;
        }
        os << "]\n";
      }
    }
    return os.str();
  }

  // Test seam: one open index holding the given entries, covering every
  // anchor value from 0 so probes below the smallest key still locate it.
  void preload(const std::vector<std::pair<Timestamp, std::vector<Timestamp>>>& entries) {
    std::unique_lock<std::shared_mutex> wl(list_mu_);
    indexes_.clear();
    if (entries.empty()) return;
    auto idx = std::make_unique<Index>();
    idx->open = true;
    idx->min_anchor = 0;
    for (const auto& [k, vals] : entries) {
      for (Timestamp v : vals) idx->entries[k].insert(v);
    }
    indexes_.push_back(std::move(idx));
  }

 private:
  struct Index {
    Timestamp min_anchor = 0;
    bool open = false;
    std::map<Timestamp, std::set<Timestamp>> entries;
    mutable std::mutex mu;
  };

  enum class MapResult : std::uint8_t { Ok, Inactive, NeedNewIndex };

  // Backwards scan: last partition whose min_anchor <= ts.
  Index* locate_ptr(Timestamp ts) const {
    for (auto it = indexes_.rbegin(); it != indexes_.rend(); ++it) {
      if ((*it)->min_anchor <= ts) return it->get();
    }
    return nullptr;
  }

  void create_first_index_locked(Timestamp first_key) {
    auto idx = std::make_unique<Index>();
    idx->min_anchor = first_key;
    idx->open = true;
    indexes_.push_back(std::move(idx));
    ++indexes_created_;
  }

  MapResult map_into(Index& idx, Timestamp key, Timestamp value) {
    auto it = idx.entries.find(key);
    if (it != idx.entries.end()) {
      if (it->second.count(value)) return MapResult::Ok;  // already recorded
      if (!idx.open) return MapResult::Inactive;
      it->second.insert(value);
      return MapResult::Ok;
    }
    if (!idx.open) return MapResult::Inactive;
    if (idx.entries.size() >= cfg_.capacity_per_index) {
      // Full: a range-extending key moves to a fresh partition; a key landing
      // between existing ones has nowhere to go without breaking range order.
      if (idx.entries.empty() || key > idx.entries.rbegin()->first) {
        return MapResult::NeedNewIndex;
      }
      return MapResult::Inactive;
    }
    idx.entries[key].insert(value);
    return MapResult::Ok;
  }

  // Seal the full partition and open a new one starting at the key.
  // Caller holds the list latch exclusively (so no partition mutex is needed).
  CsrDecision split_and_insert_locked(Index& full, Timestamp key, Timestamp value) {
    full.open = false;
    auto idx = std::make_unique<Index>();
    idx->min_anchor = key;
    idx->open = true;
    idx->entries[key].insert(value);
    indexes_.push_back(std::move(idx));
    ++indexes_created_;
    return CsrDecision::val(value);
  }

  // Runs selection inside one partition. Returns {decision, overflow}; on
  // overflow the caller re-runs under the exclusive list latch.
  std::pair<CsrDecision, bool> select_in_index(Index& idx, Timestamp anchor_snap,
                                               Timestamp peer_latest) {
    auto ub = idx.entries.upper_bound(anchor_snap);
    bool has_upper = ub != idx.entries.end();
    Timestamp max_candidate = 0;
    bool has_candidate = false;
    for (auto it = idx.entries.begin(); it != ub; ++it) {
      Timestamp m = *it->second.rbegin();
      if (!has_candidate || m > max_candidate) max_candidate = m;
      has_candidate = true;
    }
    Timestamp result;
    if (!has_upper) {
      // Nothing bounds freshness from above: the engine's latest, or a mapped
      // candidate above it (a checked commit whose post-commit is still in
      // flight and therefore not yet covered by the resolved frontier).
      result = has_candidate ? std::max(peer_latest, max_candidate) : peer_latest;
    } else {
      // Mapped candidate, or just below the nearest upper neighbour.
      result = has_candidate ? max_candidate : *ub->second.begin() - 1;
    }
    MapResult r = map_into(idx, anchor_snap, result);
    if (r == MapResult::NeedNewIndex) return {CsrDecision::val(result), true};
    if (r == MapResult::Inactive) return {CsrDecision::inactive(), false};
    return {CsrDecision::val(result), false};
  }

  std::pair<CsrDecision, bool> check_in_index(Index& idx, Timestamp key, Timestamp peer_ts) {
    auto lb = idx.entries.lower_bound(key);  // first >= key
    bool has_low = lb != idx.entries.begin();
    Timestamp low = 0;
    if (has_low) {
      for (auto it = idx.entries.begin(); it != lb; ++it) {
        Timestamp m = *it->second.rbegin();
        if (it == idx.entries.begin() || m > low) low = m;
      }
    }
    auto ub = idx.entries.upper_bound(key);  // first > key
    bool has_high = ub != idx.entries.end();
    Timestamp high = 0;
    if (has_high) {
      bool first = true;
      for (auto it = ub; it != idx.entries.end(); ++it) {
        Timestamp m = *it->second.begin();
        if (first || m < high) high = m;
        first = false;
      }
    }
    if ((has_low && low > peer_ts) || (has_high && high < peer_ts)) {
      return {CsrDecision::out_of_bounds(), false};
    }
    MapResult r = map_into(idx, key, peer_ts);
    if (r == MapResult::NeedNewIndex) return {CsrDecision::val(peer_ts), true};
    if (r == MapResult::Inactive) return {CsrDecision::inactive(), false};
    return {CsrDecision::val(peer_ts), false};
  }

  Config cfg_;
  mutable std::shared_mutex list_mu_;
  std::vector<std::unique_ptr<Index>> indexes_;  // ascending by min_anchor; last is open
  std::atomic<std::uint64_t> access_counter_{0};
  std::atomic<std::uint64_t> indexes_created_{0};
  std::atomic<std::uint64_t> indexes_recycled_{0};
  std::atomic<std::uint64_t> gc_runs_{0};
  MinSnapProvider min_snap_;
};

}  // namespace crosstx
