#pragma once

#include <atomic>
#include <cassert>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "crosstx/csr.hpp"
#include "crosstx/engine.hpp"
#include "crosstx/history.hpp"
#include "crosstx/pipeline.hpp"
#include "crosstx/snapshot.hpp"
#include "crosstx/types.hpp"

namespace crosstx {

enum class TxnState : std::uint8_t { Active, Committing, Committed, Aborted };

struct GlobalTransaction {
  TxnId id = 0;
  IsolationLevel isolation = IsolationLevel::SnapshotIsolation;
  TxnState state = TxnState::Active;
  std::optional<Timestamp> anchor_snapshot;  // set at first data access
  std::unique_ptr<SubTransaction> anchor_sub;
  std::unique_ptr<SubTransaction> peer_sub;
  AbortReason abort_reason = AbortReason::None;
};

// Active/committing transactions and their anchor snapshots; the minimum
// feeds registry recycling.
class LiveTable {
 public:
  void insert(TxnId txn, Timestamp anchor_snap) {
    std::lock_guard<std::mutex> g(mu_);
    live_[txn] = anchor_snap;
  }

  void update(TxnId txn, Timestamp anchor_snap) { insert(txn, anchor_snap); }

  void erase(TxnId txn) {
    std::lock_guard<std::mutex> g(mu_);
    live_.erase(txn);
  }

  std::optional<Timestamp> min_anchor_snapshot() const {
    std::lock_guard<std::mutex> g(mu_);
    std::optional<Timestamp> m;
    for (const auto& [txn, snap] : live_) {
      if (!m || snap < *m) m = snap;
    }
    return m;
  }

  std::size_t size() const {
    std::lock_guard<std::mutex> g(mu_);
    return live_.size();
  }

 private:
  mutable std::mutex mu_;
  std::map<TxnId, Timestamp> live_;
};

enum class AccessOp : std::uint8_t { Read, Write, Delete };

struct AccessResult {
  bool ok = false;
  AbortReason abort_reason = AbortReason::None;  // set when the txn was aborted
  std::optional<std::string> value;              // read result
};

struct CommitOutcome {
  bool committed = false;  // post-commit completed; awaiting acknowledgment
  AbortReason abort_reason = AbortReason::None;
  std::shared_ptr<CommitTicket> ticket;  // resolved Aborted when !committed
};

// Protocol positions the commit path announces to an installed step hook;
// scenario scripts pause here and the crash harness injects faults here.
enum class CommitStep : std::uint8_t {
  AfterAnchorPreCommit,
  AfterPeerPreCommit,
  AfterCommitCheck,
  AfterAnchorPostCommit,
  AfterPeerPostCommit,
  AfterEnqueue,
};

using CommitStepHook = std::function<void(CommitStep, TxnId)>;

// Cross-engine transaction lifecycle: lazy enrollment, anchor-first snapshot
// acquisition, registry-guided peer snapshots, and the three-step commit
// (pre-commit both, commit check, post-commit both) with full rollback.
class Coordinator {
 public:
  Coordinator(Engine& anchor, Engine& peer, SnapshotRegistry& csr, CommitPipeline& pipeline,
              HistoryRecorder* recorder = nullptr)
      : anchor_(anchor), peer_(peer), csr_(csr), pipeline_(pipeline), recorder_(recorder) {
    csr_.set_min_snap_provider([this]() -> Timestamp {
      auto m = live_.min_anchor_snapshot();
      return m ? *m : anchor_.scalar_now();
    });
  }

  IsolationLevel max_isolation() const {
    bool both_serializable = anchor_.config().serializable_validation &&
                             peer_.config().serializable_validation;
    return both_serializable ? IsolationLevel::Serializable : IsolationLevel::SnapshotIsolation;
  }

  std::shared_ptr<GlobalTransaction> begin(IsolationLevel isolation) {
    if (isolation == IsolationLevel::Serializable &&
        max_isolation() != IsolationLevel::Serializable) {
      throw std::invalid_argument(
          "serializable transactions need read-set validation enabled in both engines");
    }
    auto txn = std::make_shared<GlobalTransaction>();
    txn->id = ++next_txn_;
    txn->isolation = isolation;
    return txn;
  }

  AccessResult access(GlobalTransaction& txn, EngineId engine, AccessOp op,
                      const std::string& table, const std::string& key,
                      std::optional<std::string> payload = std::nullopt) {
    if (txn.state != TxnState::Active) {
      return {false, txn.abort_reason, std::nullopt};
    }
    bool rc = txn.isolation == IsolationLevel::ReadCommitted;

    // Anchor-first: the anchor snapshot is taken at the first access anywhere.
    if (!txn.anchor_snapshot || rc) {
      Timestamp a = anchor_.scalar_now();
      txn.anchor_snapshot = a;
      live_.update(txn.id, a);
      record(ev::begin(txn.id, anchor_.config().engine_id, a));
      if (txn.anchor_sub && rc) anchor_.refresh_counter_snapshot(*txn.anchor_sub);
    }

    if (engine == anchor_.config().engine_id) {
      if (!txn.anchor_sub) {
        txn.anchor_sub =
            anchor_.begin_sub(txn.id, SnapshotHandle::counter(*txn.anchor_snapshot));
      }
      return run_op(txn, anchor_, *txn.anchor_sub, op, table, key, std::move(payload));
    }

    if (!txn.peer_sub || rc) {
      if (!enroll_peer(txn)) {
        return {false, txn.abort_reason, std::nullopt};
      }
    }
    return run_op(txn, peer_, *txn.peer_sub, op, table, key, std::move(payload));
  }

  CommitOutcome commit(GlobalTransaction& txn) {
    auto aborted_outcome = [&]() {
      CommitOutcome out;
      out.abort_reason = txn.abort_reason;
      out.ticket = std::make_shared<CommitTicket>();
      out.ticket->resolve(CommitTicket::State::Aborted, txn.abort_reason);
      return out;
    };
    if (txn.state != TxnState::Active) return aborted_outcome();
    txn.state = TxnState::Committing;

    // Nothing accessed: nothing to make durable or visible.
    if (!txn.anchor_sub && !txn.peer_sub) {
      txn.state = TxnState::Committed;
      live_.erase(txn.id);
      CommitOutcome out;
      out.committed = true;
      out.ticket = std::make_shared<CommitTicket>();
      out.ticket->resolve(CommitTicket::State::Acked);
      return out;
    }

    // Step 1: pre-commit every enrolled sub-transaction, anchor first.
    std::uint8_t mask = 0;
    if (txn.anchor_sub) mask |= static_cast<std::uint8_t>(1u << anchor_.config().engine_id);
    if (txn.peer_sub) mask |= static_cast<std::uint8_t>(1u << peer_.config().engine_id);
    if (txn.anchor_sub) {
      auto cts = anchor_.pre_commit(*txn.anchor_sub, mask);
      if (!cts) {
        abort_internal(txn, AbortReason::ValidationFailed);
        return aborted_outcome();
      }
      record(ev::pre_commit(txn.id, anchor_.config().engine_id, *cts));
      step(CommitStep::AfterAnchorPreCommit, txn.id);
    }
    if (txn.peer_sub) {
      auto cts = peer_.pre_commit(*txn.peer_sub, mask);
      if (!cts) {
        abort_internal(txn, AbortReason::ValidationFailed);
        return aborted_outcome();
      }
      record(ev::pre_commit(txn.id, peer_.config().engine_id, *cts));
      step(CommitStep::AfterPeerPreCommit, txn.id);
    }

    // Step 2: commit check, for any transaction that touched the peer engine.
    if (txn.peer_sub) {
      Timestamp key = txn.anchor_sub ? txn.anchor_sub->commit_ts.load() : *txn.anchor_snapshot;
      Timestamp peer_cts = txn.peer_sub->commit_ts.load();
      CsrDecision d = csr_.commit_check(key, peer_cts);
      record(ev::csr_commit_check(txn.id, key, peer_cts, d.ok()));
      step(CommitStep::AfterCommitCheck, txn.id);
      if (!d.ok()) {
        abort_internal(txn, d.abort_reason());
        return aborted_outcome();
      }
    }

    // Step 3: post-commit everywhere; irrevocable from here on.
    CommitEntry entry;
    entry.txn = txn.id;
    if (txn.anchor_sub) {
      entry.required_anchor = anchor_.post_commit(*txn.anchor_sub);
      record(ev::post_commit(txn.id, anchor_.config().engine_id));
      step(CommitStep::AfterAnchorPostCommit, txn.id);
    }
    if (txn.peer_sub) {
      entry.required_peer = peer_.post_commit(*txn.peer_sub);
      record(ev::post_commit(txn.id, peer_.config().engine_id));
      step(CommitStep::AfterPeerPostCommit, txn.id);
    }
    txn.state = TxnState::Committed;
    live_.erase(txn.id);

    CommitOutcome out;
    out.committed = true;
    out.ticket = std::make_shared<CommitTicket>();
    entry.ticket = out.ticket;
    pipeline_.enqueue(std::move(entry));
    step(CommitStep::AfterEnqueue, txn.id);
    return out;
  }

  void abort(GlobalTransaction& txn) {
    if (txn.state != TxnState::Active) return;
    abort_internal(txn, AbortReason::UserAbort);
  }

  void set_step_hook(CommitStepHook hook) { step_hook_ = std::move(hook); }

  LiveTable& live_table() { return live_; }
  HistoryRecorder* recorder() { return recorder_; }

 private:
  bool enroll_peer(GlobalTransaction& txn) {
    // Any anchor commit at or below the snapshot must have finished its commit
    // check before the snapshot is used as a registry key, or the selection
    // would miss the mapping it is required to honor. Resolution (post-commit)
    // implies the mapping is in place.
    anchor_.wait_commits_visible_at(*txn.anchor_snapshot);
    // The peer's resolved frontier: timestamps above it belong to commits
    // whose checks are still in flight and must not be adopted as snapshots.
    Timestamp peer_latest = peer_.resolved_scalar();
    CsrDecision d = csr_.select_snapshot(*txn.anchor_snapshot, peer_latest);
    record(ev::csr_select(txn.id, *txn.anchor_snapshot, d.ok() ? d.value : 0, d.ok()));
    if (!d.ok()) {
      abort_internal(txn, d.abort_reason());
      return false;
    }
    // Everything the selected snapshot must see has to be resolved before the
    // view is captured, or the watermark would hide an in-flight commit.
    peer_.wait_commits_visible_at(d.value);
    if (!txn.peer_sub) {
      txn.peer_sub = peer_.begin_sub(txn.id);
    } else {
      txn.peer_sub->snapshot = SnapshotHandle::read_view(peer_.capture_view());
    }
    txn.peer_sub->snapshot =
        SnapshotHandle::read_view(adjust_read_view(txn.peer_sub->snapshot.view, d.value));
    record(ev::peer_snapshot(txn.id, peer_.config().engine_id, d.value));
    return true;
  }

  AccessResult run_op(GlobalTransaction& txn, Engine& engine, SubTransaction& sub, AccessOp op,
                      const std::string& table, const std::string& key,
                      std::optional<std::string> payload) {
    if (op == AccessOp::Read) {
      ReadResult r = engine.read(sub, table, key);
      if (!r.own_write) {
        record(ev::read(txn.id, engine.config().engine_id, table, key, r.observed_ts));
      }
      return {true, AbortReason::None, std::move(r.value)};
    }
    std::optional<std::string> value =
        op == AccessOp::Delete ? std::nullopt : std::move(payload);
    WriteStatus st = engine.write(sub, table, key, std::move(value));
    if (st == WriteStatus::WriteConflict) {
      abort_internal(txn, AbortReason::WriteConflict);
      return {false, AbortReason::WriteConflict, std::nullopt};
    }
    record(ev::write(txn.id, engine.config().engine_id, table, key));
    return {true, AbortReason::None, std::nullopt};
  }

  void abort_internal(GlobalTransaction& txn, AbortReason reason) {
    if (txn.anchor_sub) anchor_.abort_sub(*txn.anchor_sub);
    if (txn.peer_sub) peer_.abort_sub(*txn.peer_sub);
    txn.state = TxnState::Aborted;
    txn.abort_reason = reason;
    live_.erase(txn.id);
    record(ev::abort(txn.id, reason));
  }

  void record(HistoryEvent e) {
    if (recorder_) recorder_->record(std::move(e));
  }

  void step(CommitStep s, TxnId txn) {
    if (step_hook_) step_hook_(s, txn);
  }

  Engine& anchor_;
  Engine& peer_;
  SnapshotRegistry& csr_;
  CommitPipeline& pipeline_;
  HistoryRecorder* recorder_;
  LiveTable live_;
  std::atomic<TxnId> next_txn_{0};
  CommitStepHook step_hook_;
};

struct SystemConfig {
  bool serializable_validation = false;
  std::chrono::microseconds peer_access_delay{0};
  std::size_t csr_capacity = 1000;
  std::uint64_t gc_threshold = 5000;
  std::chrono::microseconds flush_latency{0};
  std::uint64_t flush_jitter_us = 0;
  std::uint64_t flush_jitter_seed = 0;
  Timestamp anchor_initial = 0;
  Timestamp peer_initial = 0;
};

// The whole simulated database: a counter-snapshot anchor engine, a read-view
// peer engine, the snapshot registry, the commit pipeline and the coordinator.
struct System {
  explicit System(SystemConfig cfg = {}, HistoryRecorder* recorder = nullptr)
      : anchor(make_anchor_config(cfg)),
        peer(make_peer_config(cfg)),
        csr(SnapshotRegistry::Config{cfg.csr_capacity, cfg.gc_threshold}),
        pipeline(anchor, peer, recorder),
        coordinator(anchor, peer, csr, pipeline, recorder) {}

  static EngineConfig make_anchor_config(const SystemConfig& cfg) {
    EngineConfig ec;
    ec.engine_id = kAnchorEngine;
    ec.snapshot_kind = SnapshotHandle::Kind::Counter;
    ec.serializable_validation = cfg.serializable_validation;
    ec.initial_counter = cfg.anchor_initial;
    ec.flush_latency = cfg.flush_latency;
    ec.flush_jitter_us = cfg.flush_jitter_us;
    ec.flush_jitter_seed = cfg.flush_jitter_seed;
    return ec;
  }

  static EngineConfig make_peer_config(const SystemConfig& cfg) {
    EngineConfig ec;
    ec.engine_id = kPeerEngine;
    ec.snapshot_kind = SnapshotHandle::Kind::ReadView;
    ec.serializable_validation = cfg.serializable_validation;
    ec.per_access_delay = cfg.peer_access_delay;
    ec.initial_counter = cfg.peer_initial;
    ec.flush_latency = cfg.flush_latency;
    ec.flush_jitter_us = cfg.flush_jitter_us;
    ec.flush_jitter_seed = cfg.flush_jitter_seed + 1;
    return ec;
  }

  Engine anchor;
  Engine peer;
  SnapshotRegistry csr;
  CommitPipeline pipeline;
  Coordinator coordinator;
};

}  // namespace crosstx
