#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "crosstx/coordinator.hpp"
#include "crosstx/history.hpp"
#include "crosstx/types.hpp"

namespace crosstx {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct WorkloadSpec {
  std::size_t tables_per_engine = 4;
  std::size_t rows_per_table = 1000;
  std::size_t accesses_per_txn = 10;
  unsigned read_pct = 80;
  unsigned peer_pct = 50;  // share of accesses routed to peer tables
  IsolationLevel isolation = IsolationLevel::SnapshotIsolation;
  unsigned workers = 1;
  std::uint64_t txn_count = 1000;
  double seconds = 0;  // used when txn_count == 0
  std::uint64_t seed = 1;
  std::size_t csr_capacity = 1000;
  std::uint64_t gc_threshold = 5000;
  std::size_t payload_bytes = 232;  // two 8-byte integers + a padding string
  std::uint64_t slow_delay_us = 0;
  std::uint64_t flush_latency_us = 0;
  std::uint64_t flush_jitter_us = 0;
  bool bypass = false;  // drive engine sub-transactions directly (no coordinator/CSR/pipeline)

  void validate() const {
    if (read_pct > 100) throw ConfigError("read_pct must be in [0,100]");
    if (peer_pct > 100) throw ConfigError("peer_pct must be in [0,100]");
    if (tables_per_engine == 0) throw ConfigError("tables_per_engine must be positive");
    if (rows_per_table == 0) throw ConfigError("rows_per_table must be positive");
    if (accesses_per_txn == 0) throw ConfigError("accesses_per_txn must be positive");
    if (workers == 0) throw ConfigError("workers must be positive");
    if (txn_count == 0 && seconds <= 0) throw ConfigError("need txn count or duration");
    if (payload_bytes < 17) throw ConfigError("payload_bytes too small for the record layout");
    if (bypass && peer_pct != 0) throw ConfigError("bypass mode supports anchor-only workloads");
  }
};

struct RunStats {
  std::uint64_t issued = 0;
  std::uint64_t committed = 0;
  std::map<AbortReason, std::uint64_t> aborted_by_reason;
  double elapsed_seconds = 0;
  double throughput_tps = 0;
  double latency_p95_us = 0;
  std::uint64_t csr_indexes_created = 0;
  std::uint64_t csr_indexes_recycled = 0;
  std::uint64_t csr_gc_runs = 0;
  std::uint64_t state_digest_anchor = 0;
  std::uint64_t state_digest_peer = 0;

  std::uint64_t total_aborted() const {
    std::uint64_t n = 0;
    for (const auto& [r, c] : aborted_by_reason) n += c;
    return n;
  }
};

namespace detail_bench {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Record layout: two integers followed by a padding string, payload_bytes total.
inline std::string make_payload(std::mt19937_64& rng, std::size_t payload_bytes) {
  std::string out;
  out.reserve(payload_bytes);
  std::uint64_t a = rng(), b = rng();
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((a >> (8 * i)) & 0xff));
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((b >> (8 * i)) & 0xff));
  while (out.size() < payload_bytes) {
    out.push_back(static_cast<char>('a' + (rng() % 26)));
  }
  return out;
}

inline std::string initial_payload(std::size_t row, std::size_t payload_bytes) {
  std::string out;
  out.reserve(payload_bytes);
  std::uint64_t a = row, b = 0;
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((a >> (8 * i)) & 0xff));
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((b >> (8 * i)) & 0xff));
  while (out.size() < payload_bytes) out.push_back('0');
  return out;
}

struct OpPlan {
  bool peer = false;
  bool read = true;
  std::size_t table = 0;
  std::size_t row = 0;
};

inline std::vector<OpPlan> plan_txn(std::mt19937_64& rng, const WorkloadSpec& spec) {
  std::size_t n = spec.accesses_per_txn;
  std::size_t peer_ops = static_cast<std::size_t>(
      (spec.peer_pct * n + 99) / 100);  // ceil(peer_pct% of n)
  if (spec.peer_pct == 0) peer_ops = 0;
  std::size_t reads = static_cast<std::size_t>(
      std::llround(static_cast<double>(spec.read_pct) * static_cast<double>(n) / 100.0));
  std::vector<OpPlan> ops(n);
  for (std::size_t i = 0; i < n; ++i) {
    ops[i].peer = i < peer_ops;
    ops[i].read = i < reads;
  }
  // decouple engine routing from read/write split
  for (std::size_t i = n; i > 1; --i) {
    std::size_t j = rng() % i;
    std::swap(ops[i - 1].peer, ops[j].peer);
  }
  for (std::size_t i = n; i > 1; --i) {
    std::size_t j = rng() % i;
    std::swap(ops[i - 1].read, ops[j].read);
  }
  for (auto& op : ops) {
    op.table = rng() % spec.tables_per_engine;
    op.row = rng() % spec.rows_per_table;
  }
  return ops;
}

inline std::string table_name(bool peer, std::size_t idx) {
  return (peer ? "p" : "a") + std::to_string(idx);
}

inline std::string row_key(std::size_t row) { return "k" + std::to_string(row); }

struct WorkerResult {
  std::uint64_t issued = 0;
  std::uint64_t committed = 0;
  std::map<AbortReason, std::uint64_t> aborted;
  std::vector<double> latencies_us;  // committed transactions, begin -> ack
};

}  // namespace detail_bench

inline void load_tables(Engine& engine, bool peer, const WorkloadSpec& spec) {
  Timestamp ts = engine.draw_load_ts();
  for (std::size_t t = 0; t < spec.tables_per_engine; ++t) {
    std::string table = detail_bench::table_name(peer, t);
    for (std::size_t r = 0; r < spec.rows_per_table; ++r) {
      engine.load_row(table, detail_bench::row_key(r),
                      detail_bench::initial_payload(r, spec.payload_bytes), ts);
    }
  }
}

// YCSB-style microbenchmark through the full coordinator stack (or directly
// against the anchor engine in bypass mode).
inline RunStats run_micro(const WorkloadSpec& spec, HistoryRecorder* recorder = nullptr,
                          System* external_system = nullptr) {
  spec.validate();

  SystemConfig scfg;
  scfg.serializable_validation = spec.isolation == IsolationLevel::Serializable;
  scfg.peer_access_delay = std::chrono::microseconds{spec.slow_delay_us};
  scfg.csr_capacity = spec.csr_capacity;
  scfg.gc_threshold = spec.gc_threshold;
  scfg.flush_latency = std::chrono::microseconds{spec.flush_latency_us};
  scfg.flush_jitter_us = spec.flush_jitter_us;
  scfg.flush_jitter_seed = spec.seed;

  std::unique_ptr<System> owned;
  if (!external_system) owned = std::make_unique<System>(scfg, recorder);
  System& sys = external_system ? *external_system : *owned;

  load_tables(sys.anchor, false, spec);
  load_tables(sys.peer, true, spec);

  if (!spec.bypass) sys.pipeline.start_daemon();

  using Clock = std::chrono::steady_clock;
  auto t0 = Clock::now();
  auto deadline = spec.txn_count == 0
                      ? t0 + std::chrono::duration_cast<Clock::duration>(
                                 std::chrono::duration<double>(spec.seconds))
                      : Clock::time_point::max();

  std::vector<detail_bench::WorkerResult> results(spec.workers);
  std::atomic<TxnId> bypass_ids{1u << 30};

  auto worker_fn = [&](unsigned w) {
    detail_bench::WorkerResult& res = results[w];
    std::mt19937_64 rng(detail_bench::splitmix64(spec.seed + 0x1000 * (w + 1)));
    std::uint64_t quota = spec.txn_count == 0
                              ? ~0ull
                              : spec.txn_count / spec.workers +
                                    (w < spec.txn_count % spec.workers ? 1 : 0);
    struct Pending {
      std::shared_ptr<CommitTicket> ticket;
      Clock::time_point begin;
    };
    std::deque<Pending> inflight;
    auto harvest = [&](bool block) {
      while (!inflight.empty()) {
        auto st = block ? std::optional<CommitTicket::State>(inflight.front().ticket->wait())
                        : (inflight.front().ticket->state() == CommitTicket::State::Pending
                               ? std::nullopt
                               : std::optional<CommitTicket::State>(
                                     inflight.front().ticket->state()));
        if (!st) break;
        if (*st == CommitTicket::State::Acked) {
          auto us = std::chrono::duration<double, std::micro>(Clock::now() -
                                                              inflight.front().begin)
                        .count();
          res.latencies_us.push_back(us);
        }
        inflight.pop_front();
      }
    };

    for (std::uint64_t i = 0; i < quota; ++i) {
      if (spec.txn_count == 0 && Clock::now() >= deadline) break;
      auto ops = detail_bench::plan_txn(rng, spec);
      ++res.issued;
      auto begin_time = Clock::now();

      if (spec.bypass) {
        // direct engine path: anchor-only by construction
        TxnId id = bypass_ids.fetch_add(1);
        auto sub = sys.anchor.begin_sub(id);
        bool failed = false;
        for (const auto& op : ops) {
          std::string table = detail_bench::table_name(false, op.table);
          std::string key = detail_bench::row_key(op.row);
          if (op.read) {
            sys.anchor.read(*sub, table, key);
          } else if (sys.anchor.write(*sub, table, key,
                                      detail_bench::make_payload(rng, spec.payload_bytes)) !=
                     WriteStatus::Ok) {
            failed = true;
            break;
          }
        }
        if (failed) {
          sys.anchor.abort_sub(*sub);
          ++res.aborted[AbortReason::WriteConflict];
          continue;
        }
        if (!sys.anchor.pre_commit(*sub)) {
          sys.anchor.abort_sub(*sub);
          ++res.aborted[AbortReason::ValidationFailed];
          continue;
        }
        sys.anchor.post_commit(*sub);
        ++res.committed;
        res.latencies_us.push_back(
            std::chrono::duration<double, std::micro>(Clock::now() - begin_time).count());
        continue;
      }

      auto txn = sys.coordinator.begin(spec.isolation);
      bool failed = false;
      for (const auto& op : ops) {
        EngineId eng = op.peer ? kPeerEngine : kAnchorEngine;
        std::string table = detail_bench::table_name(op.peer, op.table);
        std::string key = detail_bench::row_key(op.row);
        AccessResult r =
            op.read ? sys.coordinator.access(*txn, eng, AccessOp::Read, table, key)
                    : sys.coordinator.access(*txn, eng, AccessOp::Write, table, key,
                                             detail_bench::make_payload(rng, spec.payload_bytes));
        if (!r.ok) {
          ++res.aborted[r.abort_reason];
          failed = true;
          break;
        }
      }
      if (failed) {
        harvest(false);
        continue;
      }
      CommitOutcome out = sys.coordinator.commit(*txn);
      if (!out.committed) {
        ++res.aborted[out.abort_reason];
        harvest(false);
        continue;
      }
      ++res.committed;
      inflight.push_back({out.ticket, begin_time});
      harvest(false);
    }
    harvest(true);
  };

  if (spec.workers == 1) {
    worker_fn(0);
  } else {
    std::vector<std::thread> threads;
    for (unsigned w = 0; w < spec.workers; ++w) threads.emplace_back(worker_fn, w);
    for (auto& t : threads) t.join();
  }

  if (!spec.bypass) {
    sys.pipeline.drain();
    sys.pipeline.stop_daemon();
  }
  auto t1 = Clock::now();

  RunStats stats;
  std::vector<double> lats;
  for (const auto& r : results) {
    stats.issued += r.issued;
    stats.committed += r.committed;
    for (const auto& [reason, n] : r.aborted) stats.aborted_by_reason[reason] += n;
    lats.insert(lats.end(), r.latencies_us.begin(), r.latencies_us.end());
  }
  stats.elapsed_seconds = std::chrono::duration<double>(t1 - t0).count();
  stats.throughput_tps =
      stats.elapsed_seconds > 0 ? static_cast<double>(stats.committed) / stats.elapsed_seconds : 0;
  if (!lats.empty()) {
    std::sort(lats.begin(), lats.end());
    stats.latency_p95_us = lats[static_cast<std::size_t>(0.95 * (lats.size() - 1))];
  }
  stats.csr_indexes_created = sys.csr.indexes_created();
  stats.csr_indexes_recycled = sys.csr.indexes_recycled();
  stats.csr_gc_runs = sys.csr.gc_runs();
  stats.state_digest_anchor = sys.anchor.state_digest();
  stats.state_digest_peer = sys.peer.state_digest();
  return stats;
}

inline const std::vector<std::string>& wall_clock_fields() {
  static const std::vector<std::string> fields = {"elapsed_seconds", "throughput_tps",
                                                  "latency_p95_us"};
  return fields;
}

inline std::string report(const RunStats& stats, const WorkloadSpec& spec,
                          const std::string& format) {
  std::ostringstream os;
  if (format == "machine") {
    os << "format machine-v1\n";
    os << "seed " << spec.seed << "\n";
    os << "workers " << spec.workers << "\n";
    os << "isolation " << to_string(spec.isolation) << "\n";
    os << "bypass " << (spec.bypass ? 1 : 0) << "\n";
    os << "issued " << stats.issued << "\n";
    os << "committed " << stats.committed << "\n";
    os << "aborted_total " << stats.total_aborted() << "\n";
    for (auto r : {AbortReason::WriteConflict, AbortReason::ValidationFailed,
                   AbortReason::CsrInactiveIndex, AbortReason::CsrOutOfBounds,
                   AbortReason::UserAbort}) {
      auto it = stats.aborted_by_reason.find(r);
      os << "aborted_" << to_string(r) << " " << (it == stats.aborted_by_reason.end() ? 0 : it->second)
         << "\n";
    }
    os << "csr_indexes_created " << stats.csr_indexes_created << "\n";
    os << "csr_indexes_recycled " << stats.csr_indexes_recycled << "\n";
    os << "csr_gc_runs " << stats.csr_gc_runs << "\n";
    os << "state_digest_anchor " << stats.state_digest_anchor << "\n";
    os << "state_digest_peer " << stats.state_digest_peer << "\n";
    os << "elapsed_seconds " << stats.elapsed_seconds << "\n";
    os << "throughput_tps " << stats.throughput_tps << "\n";
    os << "latency_p95_us " << stats.latency_p95_us << "\n";
    return os.str();
  }
  os << "issued:           " << stats.issued << "\n";
  os << "committed:        " << stats.committed << "\n";
  os << "aborted:          " << stats.total_aborted() << "\n";
  for (const auto& [r, n] : stats.aborted_by_reason) {
    os << "  " << to_string(r) << ": " << n << "\n";
  }
  os << "throughput:       " << stats.throughput_tps << " txn/s\n";
  os << "latency p95:      " << stats.latency_p95_us << " us\n";
  os << "csr indexes:      " << stats.csr_indexes_created << " created, "
     << stats.csr_indexes_recycled << " recycled\n";
  os << "state digest:     anchor=" << stats.state_digest_anchor
     << " peer=" << stats.state_digest_peer << "\n";
  return os.str();
}

inline std::map<std::string, std::string> parse_machine_report(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto pos = line.find(' ');
    if (pos == std::string::npos) continue;
    out[line.substr(0, pos)] = line.substr(pos + 1);
  }
  return out;
}

}  // namespace crosstx
