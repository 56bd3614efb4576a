#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "crosstx/engine.hpp"
#include "crosstx/history.hpp"
#include "crosstx/types.hpp"
#include "crosstx/wal.hpp"

namespace crosstx {

// Completion handle: results are internally visible after post-commit, but
// the client is only released once every required LSN is durable.
class CommitTicket {
 public:
  enum class State : std::uint8_t { Pending, Acked, Aborted };

  State wait() {
    State s = state_.load(std::memory_order_acquire);
    if (s != State::Pending) return s;
    std::unique_lock<std::mutex> g(mu_);
    cv_.wait(g, [&] { return state_.load(std::memory_order_acquire) != State::Pending; });
    return state_.load(std::memory_order_acquire);
  }

  template <class Rep, class Period>
  std::optional<State> wait_for(std::chrono::duration<Rep, Period> d) {
    std::unique_lock<std::mutex> g(mu_);
    if (!cv_.wait_for(g, d, [&] {
          return state_.load(std::memory_order_acquire) != State::Pending;
        })) {
      return std::nullopt;
    }
    return state_.load(std::memory_order_acquire);
  }

  void resolve(State s, AbortReason reason = AbortReason::None) {
    {
      std::lock_guard<std::mutex> g(mu_);
      reason_ = reason;
      state_.store(s, std::memory_order_release);
    }
    cv_.notify_all();
  }

  State state() const { return state_.load(std::memory_order_acquire); }

  AbortReason abort_reason() const {
    std::lock_guard<std::mutex> g(mu_);
    return reason_;
  }

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::atomic<State> state_{State::Pending};
  AbortReason reason_ = AbortReason::None;
};

struct CommitEntry {
  TxnId txn = 0;
  // commit-end LSN per enrolled engine; 0 = engine not involved
  Lsn required_anchor = 0;
  Lsn required_peer = 0;
  std::shared_ptr<CommitTicket> ticket;
};

// Commit queue plus the committer daemon. Entries are acknowledged strictly
// in FIFO order once both engines' durable frontiers cover their LSNs.
class CommitPipeline {
 public:
  CommitPipeline(Engine& anchor, Engine& peer, HistoryRecorder* recorder = nullptr)
      : anchor_(anchor), peer_(peer), recorder_(recorder) {}

  ~CommitPipeline() { stop_daemon(); }

  // The daemon polls; enqueue stays notification-free so workers never pay a
  // wakeup on the commit path.
  void enqueue(CommitEntry entry) {
    std::lock_guard<std::mutex> g(mu_);
    queue_.push_back(std::move(entry));
  }

  std::size_t queue_depth() const {
    std::lock_guard<std::mutex> g(mu_);
    return queue_.size();
  }

  // One daemon round: sample both durable frontiers once, acknowledge the
  // satisfied FIFO prefix, and kick a flush if the head is still waiting.
  std::size_t daemon_step() {
    Lsn da = anchor_.current_durable();
    Lsn dp = peer_.current_durable();
    std::vector<CommitEntry> ready;
    bool stalled_anchor = false;
    bool stalled_peer = false;
    {
      std::lock_guard<std::mutex> g(mu_);
      while (!queue_.empty()) {
        const CommitEntry& head = queue_.front();
        stalled_anchor = head.required_anchor > da;
        stalled_peer = head.required_peer > dp;
        if (stalled_anchor || stalled_peer) break;
        ready.push_back(std::move(queue_.front()));
        queue_.pop_front();
      }
    }
    for (CommitEntry& e : ready) {
      if (recorder_) {
        recorder_->record(ev::ack(e.txn, e.required_anchor, da, e.required_peer, dp));
      }
      if (e.ticket) e.ticket->resolve(CommitTicket::State::Acked);
      ++acked_;
    }
    if (stalled_anchor) anchor_.advance_durable();
    if (stalled_peer) peer_.advance_durable();
    return ready.size();
  }

  // Group-commit pacing: the daemon wakes on a short period, acknowledges the
  // whole satisfied prefix in one batch, and sleeps again.
  void start_daemon() {
    bool expected = false;
    if (!running_.compare_exchange_strong(expected, true)) return;
    daemon_ = std::thread([this] {
      while (running_.load()) {
        daemon_step();
        std::unique_lock<std::mutex> g(mu_);
        cv_.wait_for(g, std::chrono::microseconds{150});
      }
    });
  }

  void stop_daemon() {
    if (!running_.exchange(false)) return;
    cv_.notify_all();
    if (daemon_.joinable()) daemon_.join();
  }

  // Drive until the queue drains (used at shutdown and by tests).
  void drain() {
    while (queue_depth() > 0) {
      if (!running_.load()) daemon_step();
      else std::this_thread::sleep_for(std::chrono::microseconds{100});
    }
  }

  std::uint64_t acked() const { return acked_.load(); }

 private:
  Engine& anchor_;
  Engine& peer_;
  HistoryRecorder* recorder_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<CommitEntry> queue_;
  std::thread daemon_;
  std::atomic<bool> running_{false};
  std::atomic<std::uint64_t> acked_{0};
};

struct RecoveryReport {
  std::vector<TxnId> committed;
  std::vector<TxnId> suppressed;  // cross-engine, commit-end durable in only one log
  std::vector<TxnId> in_flight;
  std::optional<std::size_t> anchor_corrupt_offset;
  std::optional<std::size_t> peer_corrupt_offset;

  std::string to_text() const {
    std::ostringstream os;
    auto line = [&](const char* name, const std::vector<TxnId>& v) {
      os << name << " " << v.size() << " [";
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) os << ",";
        os << v[i];
      }
      os << "]\n";
    };
    line("committed", committed);
    line("suppressed", suppressed);
    line("in_flight", in_flight);
    if (anchor_corrupt_offset) os << "anchor_corrupt_offset " << *anchor_corrupt_offset << "\n";
    if (peer_corrupt_offset) os << "peer_corrupt_offset " << *peer_corrupt_offset << "\n";
    return os.str();
  }
};

// Replays both durable log images into fresh engines. Data records are gated
// by a durable commit-end; a transaction whose commit-begin declares an engine
// with no durable commit-end there is suppressed everywhere (equivalent to
// truncating the longer log at the first hole). Commit-begin records carry the
// enrolled-engine mask, so a cross-engine commit is recognized even when the
// other engine's log lost every record of it.
inline RecoveryReport recover(const std::string& anchor_log, const std::string& peer_log,
                              Engine& anchor, Engine& peer) {
  ParsedLog logs[2] = {parse_log(anchor_log), parse_log(peer_log)};
  RecoveryReport report;
  report.anchor_corrupt_offset = logs[0].corrupt_offset;
  report.peer_corrupt_offset = logs[1].corrupt_offset;

  std::set<TxnId> ended[2], seen;
  std::map<TxnId, std::uint8_t> engines_of;
  for (int i = 0; i < 2; ++i) {
    for (const LogRecord& r : logs[i].records) {
      seen.insert(r.txn);
      if (r.kind == LogKind::CommitBegin) {
        std::uint8_t mask = r.payload.empty() ? static_cast<std::uint8_t>(1u << i)
                                              : static_cast<std::uint8_t>(r.payload[0]);
        engines_of[r.txn] |= mask;
      }
      if (r.kind == LogKind::CommitEnd) ended[i].insert(r.txn);
    }
  }

  std::set<TxnId> suppressed;
  for (const auto& [t, mask] : engines_of) {
    bool any_end = ended[0].count(t) || ended[1].count(t);
    if (!any_end) continue;  // in-flight, nothing was applied
    for (int i = 0; i < 2; ++i) {
      if ((mask & (1u << i)) && !ended[i].count(t)) suppressed.insert(t);
    }
  }

  std::set<TxnId> committed;
  Engine* engines[2] = {&anchor, &peer};
  for (int i = 0; i < 2; ++i) {
    // commit_ts for each applied txn comes from its commit-end record
    std::map<TxnId, std::vector<const LogRecord*>> staged;
    for (const LogRecord& r : logs[i].records) {
      switch (r.kind) {
        case LogKind::Insert:
        case LogKind::Update:
        case LogKind::Delete:
          staged[r.txn].push_back(&r);
          break;
        case LogKind::CommitEnd: {
          if (suppressed.count(r.txn)) break;
          auto cts = parse_commit_end_payload(r.payload);
          if (!cts) break;
          for (const LogRecord* d : staged[r.txn]) {
            auto dp = DataPayload::parse(d->payload);
            if (!dp) continue;
            engines[i]->install_committed(dp->table, dp->key, dp->value, dp->tombstone, *cts,
                                          r.txn);
          }
          staged.erase(r.txn);
          committed.insert(r.txn);
          break;
        }
        case LogKind::Abort:
          staged.erase(r.txn);
          break;
        case LogKind::CommitBegin:
          break;
      }
    }
  }

  report.committed.assign(committed.begin(), committed.end());
  report.suppressed.assign(suppressed.begin(), suppressed.end());
  for (TxnId t : seen) {
    if (!committed.count(t) && !suppressed.count(t)) report.in_flight.push_back(t);
  }
  return report;
}

}  // namespace crosstx
