#include <gtest/gtest.h>

#include <random>

#include "crosstx/bench.hpp"
#include "crosstx/oracle.hpp"

namespace crosstx {
namespace {

std::map<std::string, std::string> strip_wall_clock(std::map<std::string, std::string> fields) {
  for (const auto& f : wall_clock_fields()) fields.erase(f);
  return fields;
}

TEST(Workload, PlanHonorsReadAndPeerFractions) {
  WorkloadSpec spec;
  spec.accesses_per_txn = 10;
  spec.read_pct = 80;
  spec.peer_pct = 50;
  spec.tables_per_engine = 4;
  spec.rows_per_table = 100;
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    auto ops = detail_bench::plan_txn(rng, spec);
    ASSERT_EQ(ops.size(), 10u);
    int reads = 0, peers = 0;
    for (const auto& op : ops) {
      reads += op.read ? 1 : 0;
      peers += op.peer ? 1 : 0;
      EXPECT_LT(op.table, 4u);
      EXPECT_LT(op.row, 100u);
    }
    EXPECT_EQ(reads, 8);  // eight of ten accesses are point reads
    EXPECT_EQ(peers, 5);
  }
}

TEST(Workload, PeerFractionRoundsUp) {
  WorkloadSpec spec;
  spec.accesses_per_txn = 10;
  spec.peer_pct = 25;
  std::mt19937_64 rng(5);
  auto ops = detail_bench::plan_txn(rng, spec);
  int peers = 0;
  for (const auto& op : ops) peers += op.peer ? 1 : 0;
  EXPECT_EQ(peers, 3);  // ceil(2.5)
}

TEST(Workload, RecordLayoutIs232Bytes) {
  std::mt19937_64 rng(1);
  std::string p = detail_bench::make_payload(rng, 232);
  EXPECT_EQ(p.size(), 232u);  // two 8-byte integers + 216 padding characters
  std::string init = detail_bench::initial_payload(7, 232);
  EXPECT_EQ(init.size(), 232u);
}

TEST(Workload, ConfigValidation) {
  WorkloadSpec spec;
  spec.read_pct = 101;
  EXPECT_THROW(spec.validate(), ConfigError);
  spec.read_pct = 50;
  spec.workers = 0;
  EXPECT_THROW(spec.validate(), ConfigError);
  spec.workers = 1;
  spec.txn_count = 0;
  spec.seconds = 0;
  EXPECT_THROW(spec.validate(), ConfigError);
  spec.txn_count = 10;
  EXPECT_NO_THROW(spec.validate());
  spec.bypass = true;
  spec.peer_pct = 10;
  EXPECT_THROW(spec.validate(), ConfigError);
}

WorkloadSpec small_spec(std::uint64_t seed) {
  WorkloadSpec spec;
  spec.tables_per_engine = 2;
  spec.rows_per_table = 50;
  spec.accesses_per_txn = 6;
  spec.read_pct = 50;
  spec.peer_pct = 50;
  spec.workers = 1;
  spec.txn_count = 300;
  spec.seed = seed;
  return spec;
}

TEST(RunMicro, AbortReasonsPartitionIssuedTransactions) {
  WorkloadSpec spec = small_spec(11);
  spec.rows_per_table = 4;  // heavy contention forces write conflicts
  spec.workers = 4;
  spec.txn_count = 2000;
  RunStats stats = run_micro(spec);
  EXPECT_EQ(stats.issued, 2000u);
  EXPECT_EQ(stats.committed + stats.total_aborted(), stats.issued);
  EXPECT_GT(stats.total_aborted(), 0u);
}

TEST(RunMicro, DeterministicWithSingleWorker) {
  RunStats a = run_micro(small_spec(42));
  RunStats b = run_micro(small_spec(42));
  EXPECT_EQ(a.issued, b.issued);
  EXPECT_EQ(a.committed, b.committed);
  EXPECT_EQ(a.aborted_by_reason, b.aborted_by_reason);
  EXPECT_EQ(a.state_digest_anchor, b.state_digest_anchor);
  EXPECT_EQ(a.state_digest_peer, b.state_digest_peer);
  EXPECT_EQ(a.csr_indexes_created, b.csr_indexes_created);
  EXPECT_EQ(a.csr_indexes_recycled, b.csr_indexes_recycled);
  auto ra = strip_wall_clock(parse_machine_report(report(a, small_spec(42), "machine")));
  auto rb = strip_wall_clock(parse_machine_report(report(b, small_spec(42), "machine")));
  EXPECT_EQ(ra, rb);
}

TEST(RunMicro, DifferentSeedsDiverge) {
  RunStats a = run_micro(small_spec(1));
  RunStats b = run_micro(small_spec(2));
  EXPECT_NE(a.state_digest_anchor, b.state_digest_anchor);
}

TEST(RunMicro, RowConservationAndEnginePlacement) {
  WorkloadSpec spec = small_spec(7);
  HistoryRecorder rec;
  System sys({}, &rec);
  run_micro(spec, nullptr, &sys);
  // updates never create or destroy rows
  Timestamp now_a = sys.anchor.scalar_now();
  Timestamp now_p = sys.peer.scalar_now();
  for (int t = 0; t < 2; ++t) {
    EXPECT_EQ(sys.anchor.live_row_count("a" + std::to_string(t), now_a), 50u);
    EXPECT_EQ(sys.peer.live_row_count("p" + std::to_string(t), now_p), 50u);
    // rows never appear in the wrong engine
    EXPECT_EQ(sys.anchor.live_row_count("p" + std::to_string(t), now_a), 0u);
    EXPECT_EQ(sys.peer.live_row_count("a" + std::to_string(t), now_p), 0u);
  }
}

TEST(RunMicro, PeerFractionZeroNeverTouchesRegistry) {
  WorkloadSpec spec = small_spec(3);
  spec.peer_pct = 0;
  HistoryRecorder rec;
  System sys({}, &rec);
  RunStats stats = run_micro(spec, nullptr, &sys);
  EXPECT_GT(stats.committed, 0u);
  EXPECT_EQ(sys.csr.access_count(), 0u);
  for (const auto& e : rec.events()) {
    EXPECT_NE(e.kind, EventKind::CsrSelect);
    EXPECT_NE(e.kind, EventKind::CsrCommitCheck);
  }
}

TEST(RunMicro, HistoryPassesOracleChecks) {
  WorkloadSpec spec = small_spec(9);
  spec.workers = 4;
  spec.txn_count = 1500;
  spec.rows_per_table = 16;
  HistoryRecorder rec;
  System sys({}, &rec);
  run_micro(spec, nullptr, &sys);
  auto history = rec.events();
  EXPECT_TRUE(check_snapshot_skew(history).empty());
  EXPECT_TRUE(check_serial_concurrent(history).empty());
  EXPECT_TRUE(check_order_rules(history).empty());
  EXPECT_TRUE(check_atomicity_durability(history).empty());
}

TEST(Report, MachineFormatRoundTrips) {
  WorkloadSpec spec = small_spec(5);
  RunStats stats = run_micro(spec);
  std::string text = report(stats, spec, "machine");
  auto fields = parse_machine_report(text);
  EXPECT_EQ(fields.at("format"), "machine-v1");
  EXPECT_EQ(fields.at("issued"), std::to_string(stats.issued));
  EXPECT_EQ(fields.at("committed"), std::to_string(stats.committed));
  EXPECT_EQ(fields.at("aborted_total"), std::to_string(stats.total_aborted()));
  EXPECT_EQ(fields.at("state_digest_anchor"), std::to_string(stats.state_digest_anchor));
  // abort reasons sum to the total
  std::uint64_t sum = 0;
  for (const auto& [k, v] : fields) {
    if (k.rfind("aborted_", 0) == 0 && k != "aborted_total") sum += std::stoull(v);
  }
  EXPECT_EQ(sum, stats.total_aborted());
}

TEST(Report, HumanFormatMentionsCounts) {
  WorkloadSpec spec = small_spec(5);
  spec.txn_count = 10;
  RunStats stats = run_micro(spec);
  std::string text = report(stats, spec, "human");
  EXPECT_NE(text.find("committed"), std::string::npos);
  EXPECT_NE(text.find("throughput"), std::string::npos);
}

TEST(RunMicro, SlowPeerDelayApplies) {
  WorkloadSpec spec = small_spec(13);
  spec.txn_count = 20;
  spec.slow_delay_us = 200;
  RunStats slow = run_micro(spec);
  EXPECT_GT(slow.elapsed_seconds, 20 * 3 * 200e-6);  // >= 3 peer accesses per txn
}

TEST(RunMicro, BypassModeMatchesAnchorOnlySemantics) {
  WorkloadSpec spec = small_spec(17);
  spec.peer_pct = 0;
  RunStats full = run_micro(spec);
  spec.bypass = true;
  RunStats bypass = run_micro(spec);
  // same generator, same engine-visible effects
  EXPECT_EQ(bypass.issued, full.issued);
  EXPECT_EQ(bypass.state_digest_anchor, full.state_digest_anchor);
}

}  // namespace
}  // namespace crosstx
