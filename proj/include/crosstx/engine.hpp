#pragma once

#include <algorithm>
#include <atomic>
#include <cassert>
#include <chrono>
#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "crosstx/snapshot.hpp"
#include "crosstx/types.hpp"
#include "crosstx/wal.hpp"

namespace crosstx {

enum class SubState : std::uint8_t { Active, PreCommitted, PostCommitted, Aborted };

class Engine;

// One engine's view of a (possibly cross-engine) transaction.
struct SubTransaction {
  TxnId txn = 0;
  EngineId engine_id = 0;
  SnapshotHandle snapshot;
  // (table, key) -> commit_ts observed by the first visible read (0 = absent).
  std::map<std::pair<std::string, std::string>, Timestamp> read_set;
  std::set<std::pair<std::string, std::string>> write_set;
  std::atomic<SubState> state{SubState::Active};
  // Non-zero once drawn at pre-commit; stored before the draw mutex is
  // released so concurrent validators always see a committing owner's ts.
  std::atomic<Timestamp> commit_ts{0};
  Timestamp creator_id = 0;  // read-view engines: tid = commit_ts - 1
  Lsn commit_lsn = 0;
  bool wrote_log = false;
};

struct Version {
  Timestamp commit_ts = 0;  // 0 while uncommitted
  Timestamp creator = 0;    // read-view engines: creator tid; counter engines: global txn id
  TxnId txn = 0;
  SubTransaction* owner = nullptr;  // set while uncommitted
  bool tombstone = false;
  std::string payload;
};

// Per-key ordered version list, newest at the back. The chain mutex makes
// read/write/validate/stamp atomic per key.
struct VersionChain {
  std::mutex mu;
  std::vector<Version> versions;
};

struct EngineConfig {
  EngineId engine_id = 0;
  SnapshotHandle::Kind snapshot_kind = SnapshotHandle::Kind::Counter;
  bool serializable_validation = false;
  std::chrono::microseconds per_access_delay{0};  // >0 models the slow engine
  Timestamp initial_counter = 0;
  std::chrono::microseconds flush_latency{0};
  std::uint64_t flush_jitter_us = 0;
  std::uint64_t flush_jitter_seed = 0;
};

enum class WriteStatus : std::uint8_t { Ok, WriteConflict };

struct ReadResult {
  std::optional<std::string> value;  // absent key or tombstone -> nullopt
  Timestamp observed_ts = 0;
  bool own_write = false;  // served from the transaction's uncommitted head
};

// Toy multi-versioned storage engine. Counter engines use a scalar snapshot
// with inclusive visibility (commit_ts <= snapshot); read-view engines use
// low/high watermarks plus an active list of commit-pending creator ids.
class Engine {
 public:
  explicit Engine(EngineConfig cfg)
      : cfg_(cfg),
        counter_(cfg.initial_counter),
        wal_(cfg.flush_latency, cfg.flush_jitter_us, cfg.flush_jitter_seed) {}

  const EngineConfig& config() const { return cfg_; }
  Wal& wal() { return wal_; }
  const Wal& wal() const { return wal_; }

  bool is_counter_kind() const { return cfg_.snapshot_kind == SnapshotHandle::Kind::Counter; }

  // Current counter reading; also the scalar a fresh snapshot would carry.
  Timestamp scalar_now() const { return counter_.load(std::memory_order_acquire); }

  // Largest scalar below which every commit has post-committed or aborted.
  // Commits above it are drawn but unresolved; adopting their timestamps as a
  // snapshot would race their commit check.
  Timestamp resolved_scalar() {
    std::lock_guard<std::mutex> g(txn_mu_);
    if (pending_.empty()) return counter_.load();
    Timestamp first_pending = *pending_.begin();
    return is_counter_kind() ? first_pending - 1 : first_pending;
  }

  // Scenario/test seam: jump the logical clock forward.
  void advance_counter_to(Timestamp ts) {
    std::lock_guard<std::mutex> g(txn_mu_);
    if (ts > counter_.load()) counter_.store(ts);
  }

  std::unique_ptr<SubTransaction> begin_sub(TxnId txn,
                                            std::optional<SnapshotHandle> imposed = std::nullopt) {
    auto sub = std::make_unique<SubTransaction>();
    sub->txn = txn;
    sub->engine_id = cfg_.engine_id;
    if (is_counter_kind()) {
      Timestamp ts = imposed ? imposed->counter_ts : counter_.load();
      wait_pending_resolved_leq(ts);
      sub->snapshot = SnapshotHandle::counter(ts);
    } else if (imposed) {
      sub->snapshot = *imposed;
    } else {
      sub->snapshot = SnapshotHandle::read_view(capture_view());
    }
    return sub;
  }

  // RC path: replace the counter snapshot with a fresh reading.
  void refresh_counter_snapshot(SubTransaction& sub) {
    Timestamp ts = counter_.load();
    wait_pending_resolved_leq(ts);
    sub.snapshot = SnapshotHandle::counter(ts);
  }

  ReadView capture_view() {
    std::lock_guard<std::mutex> g(txn_mu_);
    ReadView v;
    v.high = counter_.load();
    v.active = pending_;
    v.low = v.active.empty() ? v.high : *v.active.begin();
    return v;
  }

  // Blocks until every commit-pending sub-transaction with pending key <= bound
  // has post-committed or aborted. Counter engines key pending by commit_ts,
  // read-view engines by creator tid (= commit_ts - 1).
  void wait_pending_resolved_leq(Timestamp bound) {
    std::unique_lock<std::mutex> g(txn_mu_);
    pending_cv_.wait(g, [&] { return pending_.empty() || *pending_.begin() > bound; });
  }

  // Resolve everything a snapshot with the given scalar must see.
  void wait_commits_visible_at(Timestamp scalar) {
    if (is_counter_kind()) {
      wait_pending_resolved_leq(scalar);
    } else if (scalar > 0) {
      wait_pending_resolved_leq(scalar - 1);
    }
  }

  ReadResult read(SubTransaction& sub, const std::string& table, const std::string& key) {
    assert(sub.state.load() == SubState::Active);
    access_delay();
    ReadResult res;
    VersionChain* chain = find_chain(table, key);
    if (chain) {
      std::lock_guard<std::mutex> g(chain->mu);
      for (auto it = chain->versions.rbegin(); it != chain->versions.rend(); ++it) {
        if (it->commit_ts == 0) {
          if (it->owner == &sub) {
            // Own uncommitted write: returned as-is, not a dependency.
            if (!it->tombstone) res.value = it->payload;
            res.own_write = true;
            return res;
          }
          continue;
        }
        if (!version_visible(sub.snapshot, *it)) continue;
        res.observed_ts = it->commit_ts;
        if (!it->tombstone) res.value = it->payload;
        break;
      }
    }
    sub.read_set[{table, key}] = res.observed_ts;
    return res;
  }

  // First-updater-wins: fails if another transaction owns the uncommitted head
  // or the newest committed version is invisible to the snapshot.
  WriteStatus write(SubTransaction& sub, const std::string& table, const std::string& key,
                    std::optional<std::string> payload) {
    assert(sub.state.load() == SubState::Active);
    access_delay();
    VersionChain* chain = get_or_create_chain(table, key);
    std::lock_guard<std::mutex> g(chain->mu);
    if (!chain->versions.empty()) {
      Version& head = chain->versions.back();
      if (head.commit_ts == 0) {
        if (head.owner != &sub) return WriteStatus::WriteConflict;
        head.tombstone = !payload.has_value();
        head.payload = payload.value_or("");
        return WriteStatus::Ok;
      }
      if (!version_visible(sub.snapshot, head)) return WriteStatus::WriteConflict;
    }
    Version v;
    v.txn = sub.txn;
    v.owner = &sub;
    v.tombstone = !payload.has_value();
    v.payload = payload.value_or("");
    chain->versions.push_back(std::move(v));
    sub.write_set.insert({table, key});
    return WriteStatus::Ok;
  }

  // Draws the commit timestamp, runs read-set validation when configured, and
  // appends the commit-begin record. The record carries the set of engines the
  // whole transaction enrolled, so recovery can tell a cross-engine commit
  // from a single-engine one even when the other log lost all its records.
  // Returns nullopt on validation failure (the caller must abort the whole
  // transaction; the timestamp is retired).
  std::optional<Timestamp> pre_commit(SubTransaction& sub, std::uint8_t engines_mask = 0) {
    assert(sub.state.load() == SubState::Active);
    if (engines_mask == 0) engines_mask = static_cast<std::uint8_t>(1u << cfg_.engine_id);
    Timestamp cts = 0;
    {
      std::lock_guard<std::mutex> g(txn_mu_);
      if (is_counter_kind()) {
        cts = counter_.load() + 1;
        counter_.store(cts);
        pending_.insert(cts);
      } else {
        Timestamp base = counter_.load();
        sub.creator_id = base + 1;
        cts = base + 2;
        counter_.store(cts);
        pending_.insert(sub.creator_id);
      }
      sub.commit_ts.store(cts, std::memory_order_release);
    }
    if (cfg_.serializable_validation && !validate_reads(sub, cts)) {
      unregister_pending(sub);
      sub.commit_ts.store(0, std::memory_order_release);
      return std::nullopt;
    }
    wal_.append(LogKind::CommitBegin, sub.txn, std::string(1, static_cast<char>(engines_mask)));
    sub.wrote_log = true;
    sub.state.store(SubState::PreCommitted, std::memory_order_release);
    return cts;
  }

  // Stamps write-set versions visible, logs data records and commit-end.
  // Cannot fail.
  Lsn post_commit(SubTransaction& sub) {
    assert(sub.state.load() == SubState::PreCommitted);
    Timestamp cts = sub.commit_ts.load();
    for (const auto& [table, key] : sub.write_set) {
      VersionChain* chain = find_chain(table, key);
      assert(chain);
      LogKind kind = LogKind::Insert;
      DataPayload dp{table, key, false, ""};
      {
        std::lock_guard<std::mutex> g(chain->mu);
        Version& head = chain->versions.back();
        assert(head.commit_ts == 0 && head.owner == &sub);
        if (head.tombstone) {
          kind = LogKind::Delete;
        } else if (chain->versions.size() > 1) {
          kind = LogKind::Update;
        }
        head.commit_ts = cts;
        head.creator = is_counter_kind() ? sub.txn : sub.creator_id;
        head.owner = nullptr;
        dp.tombstone = head.tombstone;
        dp.value = head.payload;
      }
      wal_.append(kind, sub.txn, dp.serialize());
    }
    Lsn lsn = wal_.append(LogKind::CommitEnd, sub.txn, commit_end_payload(cts));
    unregister_pending(sub);
    sub.commit_lsn = lsn;
    sub.state.store(SubState::PostCommitted, std::memory_order_release);
    return lsn;
  }

  // Removes uncommitted versions and retires the timestamp. Idempotent.
  void abort_sub(SubTransaction& sub) {
    SubState st = sub.state.load();
    if (st == SubState::Aborted) return;
    assert(st != SubState::PostCommitted);
    for (const auto& [table, key] : sub.write_set) {
      VersionChain* chain = find_chain(table, key);
      if (!chain) continue;
      std::lock_guard<std::mutex> g(chain->mu);
      if (!chain->versions.empty()) {
        Version& head = chain->versions.back();
        if (head.commit_ts == 0 && head.owner == &sub) chain->versions.pop_back();
      }
    }
    if (st == SubState::PreCommitted) {
      wal_.append(LogKind::Abort, sub.txn, "");
      unregister_pending(sub);
    }
    sub.state.store(SubState::Aborted, std::memory_order_release);
  }

  Lsn advance_durable() { return wal_.advance_durable(); }
  Lsn current_durable() const { return wal_.current_durable(); }

  // ---- loading / recovery ----

  Timestamp draw_load_ts() {
    std::lock_guard<std::mutex> g(txn_mu_);
    Timestamp cts = counter_.load() + (is_counter_kind() ? 1 : 2);
    counter_.store(cts);
    return cts;
  }

  void load_row(const std::string& table, const std::string& key, std::string payload,
                Timestamp cts) {
    VersionChain* chain = get_or_create_chain(table, key);
    {
      std::lock_guard<std::mutex> g(chain->mu);
      Version v;
      v.commit_ts = cts;
      v.creator = is_counter_kind() ? 0 : cts - 1;
      v.tombstone = false;
      v.payload = std::move(payload);
      chain->versions.push_back(std::move(v));
    }
    // a committed timestamp never exceeds the counter
    std::lock_guard<std::mutex> g(txn_mu_);
    if (cts > counter_.load()) counter_.store(cts);
  }

  // Replay-time install: versions arrive in log order (ascending commit_ts).
  void install_committed(const std::string& table, const std::string& key, std::string payload,
                         bool tombstone, Timestamp cts, TxnId txn) {
    VersionChain* chain = get_or_create_chain(table, key);
    {
      std::lock_guard<std::mutex> g(chain->mu);
      Version v;
      v.commit_ts = cts;
      v.creator = is_counter_kind() ? txn : cts - 1;
      v.txn = txn;
      v.tombstone = tombstone;
      v.payload = std::move(payload);
      chain->versions.push_back(std::move(v));
    }
    std::lock_guard<std::mutex> g(txn_mu_);
    if (cts > counter_.load()) counter_.store(cts);
  }

  // ---- introspection (tests, digests, crash harness) ----

  std::optional<Version> newest_committed(const std::string& table, const std::string& key) const {
    const VersionChain* chain = find_chain_const(table, key);
    if (!chain) return std::nullopt;
    std::lock_guard<std::mutex> g(const_cast<VersionChain*>(chain)->mu);
    for (auto it = chain->versions.rbegin(); it != chain->versions.rend(); ++it) {
      if (it->commit_ts != 0) return *it;
    }
    return std::nullopt;
  }

  std::vector<Version> committed_versions(const std::string& table, const std::string& key) const {
    std::vector<Version> out;
    const VersionChain* chain = find_chain_const(table, key);
    if (!chain) return out;
    std::lock_guard<std::mutex> g(const_cast<VersionChain*>(chain)->mu);
    for (const Version& v : chain->versions) {
      if (v.commit_ts != 0) out.push_back(v);
    }
    return out;
  }

  std::set<TxnId> txns_with_committed_writes() const {
    std::set<TxnId> out;
    std::shared_lock<std::shared_mutex> g(map_mu_);
    for (const auto& [tname, table] : tables_) {
      for (const auto& [key, chain] : table) {
        std::lock_guard<std::mutex> cg(chain->mu);
        for (const Version& v : chain->versions) {
          if (v.commit_ts != 0) out.insert(v.txn);
        }
      }
    }
    return out;
  }

  std::size_t live_row_count(const std::string& table, Timestamp as_of) const {
    std::size_t n = 0;
    std::shared_lock<std::shared_mutex> g(map_mu_);
    auto it = tables_.find(table);
    if (it == tables_.end()) return 0;
    for (const auto& [key, chain] : it->second) {
      std::lock_guard<std::mutex> cg(chain->mu);
      for (auto vit = chain->versions.rbegin(); vit != chain->versions.rend(); ++vit) {
        if (vit->commit_ts != 0 && vit->commit_ts <= as_of) {
          if (!vit->tombstone) ++n;
          break;
        }
      }
    }
    return n;
  }

  // Order-independent hash of all committed versions.
  std::uint64_t state_digest() const {
    std::uint64_t h = 1469598103934665603ull;
    std::shared_lock<std::shared_mutex> g(map_mu_);
    std::map<std::string, std::vector<std::pair<std::string, const VersionChain*>>> sorted;
    for (const auto& [tname, table] : tables_) {
      auto& rows = sorted[tname];
      for (const auto& [key, chain] : table) rows.emplace_back(key, chain.get());
      std::sort(rows.begin(), rows.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
    }
    for (const auto& [tname, rows] : sorted) {
      h = fnv1a(tname, h);
      for (const auto& [key, chain] : rows) {
        h = fnv1a(key, h);
        std::lock_guard<std::mutex> cg(const_cast<VersionChain*>(chain)->mu);
        for (const Version& v : chain->versions) {
          if (v.commit_ts == 0) continue;
          h = fnv1a_u64(v.commit_ts, h);
          h = fnv1a_u64(v.tombstone ? 1 : 0, h);
          h = fnv1a(v.payload, h);
        }
      }
    }
    return h;
  }

 private:
  bool version_visible(const SnapshotHandle& snap, const Version& v) const {
    if (snap.kind == SnapshotHandle::Kind::Counter) return v.commit_ts <= snap.counter_ts;
    return visible_in_view(snap.view, v.creator);
  }

  bool validate_reads(SubTransaction& sub, Timestamp my_cts) {
    for (const auto& [tk, observed] : sub.read_set) {
      const VersionChain* chain = find_chain_const(tk.first, tk.second);
      Timestamp newest = 0;
      if (chain) {
        std::lock_guard<std::mutex> g(const_cast<VersionChain*>(chain)->mu);
        for (auto it = chain->versions.rbegin(); it != chain->versions.rend(); ++it) {
          if (it->commit_ts != 0) {
            newest = it->commit_ts;
            break;
          }
          if (it->owner != &sub) {
            // Concurrent committer that would stamp after this check.
            Timestamp owner_cts =
                it->owner ? it->owner->commit_ts.load(std::memory_order_acquire) : 0;
            if (owner_cts != 0 && owner_cts < my_cts) return false;
          }
        }
      }
      if (newest != observed) return false;
    }
    return true;
  }

  void unregister_pending(SubTransaction& sub) {
    std::lock_guard<std::mutex> g(txn_mu_);
    pending_.erase(is_counter_kind() ? sub.commit_ts.load() : sub.creator_id);
    pending_cv_.notify_all();
  }

  void access_delay() const {
    if (cfg_.per_access_delay.count() > 0) std::this_thread::sleep_for(cfg_.per_access_delay);
  }

  VersionChain* find_chain(const std::string& table, const std::string& key) {
    std::shared_lock<std::shared_mutex> g(map_mu_);
    auto t = tables_.find(table);
    if (t == tables_.end()) return nullptr;
    auto c = t->second.find(key);
    return c == t->second.end() ? nullptr : c->second.get();
  }

  const VersionChain* find_chain_const(const std::string& table, const std::string& key) const {
    std::shared_lock<std::shared_mutex> g(map_mu_);
    auto t = tables_.find(table);
    if (t == tables_.end()) return nullptr;
    auto c = t->second.find(key);
    return c == t->second.end() ? nullptr : c->second.get();
  }

  VersionChain* get_or_create_chain(const std::string& table, const std::string& key) {
    if (VersionChain* c = find_chain(table, key)) return c;
    std::unique_lock<std::shared_mutex> g(map_mu_);
    auto& chain = tables_[table][key];
    if (!chain) chain = std::make_unique<VersionChain>();
    return chain.get();
  }

  EngineConfig cfg_;
  std::atomic<Timestamp> counter_;
  // Guards counter draws, the pending set and view capture; draws and pending
  // registration must be atomic so validators and view captures never miss a
  // committing transaction.
  std::mutex txn_mu_;
  std::condition_variable pending_cv_;
  std::set<Timestamp> pending_;  // commit-pending keys: counter -> cts, read-view -> tid
  mutable std::shared_mutex map_mu_;
  std::unordered_map<std::string, std::unordered_map<std::string, std::unique_ptr<VersionChain>>>
      tables_;
  Wal wal_;
};

}  // namespace crosstx
