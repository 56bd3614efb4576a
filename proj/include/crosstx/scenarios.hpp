#pragma once

#include <chrono>
#include <semaphore>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "crosstx/bench.hpp"
#include "crosstx/coordinator.hpp"
#include "crosstx/oracle.hpp"
#include "crosstx/pipeline.hpp"

namespace crosstx {

struct UnknownScenario : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ScenarioCheck {
  std::string name;
  bool detected_disabled = false;
  bool detected_enabled = false;
  bool pass = false;
};

struct VerdictReport {
  std::string scenario;
  std::vector<ScenarioCheck> checks;

  bool pass() const {
    for (const auto& c : checks) {
      if (!c.pass) return false;
    }
    return !checks.empty();
  }

  std::string text() const {
    std::ostringstream os;
    os << "scenario " << scenario << (pass() ? " PASS" : " FAIL") << "\n";
    for (const auto& c : checks) {
      os << "  " << c.name << ": disabled=" << (c.detected_disabled ? "detected" : "clean")
         << " enabled=" << (c.detected_enabled ? "detected" : "clean")
         << (c.pass ? "  ok" : "  UNEXPECTED") << "\n";
    }
    return os.str();
  }
};

namespace detail_scenario {

inline EngineConfig raw_anchor_config(Timestamp initial) {
  EngineConfig c;
  c.engine_id = kAnchorEngine;
  c.snapshot_kind = SnapshotHandle::Kind::Counter;
  c.initial_counter = initial;
  return c;
}

inline EngineConfig raw_peer_config(Timestamp initial) {
  EngineConfig c;
  c.engine_id = kPeerEngine;
  c.snapshot_kind = SnapshotHandle::Kind::ReadView;
  c.initial_counter = initial;
  return c;
}

inline void raw_commit(Engine& engine, SubTransaction& sub, HistoryRecorder& rec) {
  auto cts = engine.pre_commit(sub);
  rec.record(ev::pre_commit(sub.txn, engine.config().engine_id, *cts));
  engine.post_commit(sub);
  rec.record(ev::post_commit(sub.txn, engine.config().engine_id));
}

}  // namespace detail_scenario

// Fig-style inconsistent snapshots: S and T open their sub-transactions in
// opposite orders across the two engines (1000/100 then 3000/200).
inline VerdictReport scenario_cross_snapshot() {
  using namespace detail_scenario;
  VerdictReport rep;
  rep.scenario = "cross-snapshot";

  HistoryRecorder raw;
  {
    Engine anchor(raw_anchor_config(1000));
    Engine peer(raw_peer_config(100));
    auto s_a = anchor.begin_sub(1);
    raw.record(ev::begin(1, kAnchorEngine, s_a->snapshot.scalar()));  // 1000
    auto t_p = peer.begin_sub(2);
    raw.record(ev::begin(2, kPeerEngine, t_p->snapshot.scalar()));  // 100
    anchor.advance_counter_to(3000);
    auto t_a = anchor.begin_sub(2);
    raw.record(ev::begin(2, kAnchorEngine, t_a->snapshot.scalar()));  // 3000
    peer.advance_counter_to(200);
    auto s_p = peer.begin_sub(1);
    raw.record(ev::begin(1, kPeerEngine, s_p->snapshot.scalar()));  // 200
    raw_commit(anchor, *s_a, raw);
    raw_commit(peer, *s_p, raw);
    raw_commit(anchor, *t_a, raw);
    raw_commit(peer, *t_p, raw);
  }

  HistoryRecorder rec;
  {
    System sys({}, &rec);
    sys.anchor.advance_counter_to(1000);
    sys.peer.advance_counter_to(100);
    sys.pipeline.start_daemon();
    auto S = sys.coordinator.begin(IsolationLevel::SnapshotIsolation);
    auto T = sys.coordinator.begin(IsolationLevel::SnapshotIsolation);
    sys.coordinator.access(*S, kAnchorEngine, AccessOp::Read, "orders", "k");
    sys.coordinator.access(*T, kPeerEngine, AccessOp::Read, "products", "k");
    sys.anchor.advance_counter_to(3000);
    sys.coordinator.access(*T, kAnchorEngine, AccessOp::Read, "orders", "k");
    sys.peer.advance_counter_to(200);
    sys.coordinator.access(*S, kPeerEngine, AccessOp::Read, "products", "k");
    auto so = sys.coordinator.commit(*S);
    auto to = sys.coordinator.commit(*T);
    if (so.committed) so.ticket->wait();
    if (to.committed) to.ticket->wait();
    sys.pipeline.stop_daemon();
  }

  bool raw_skew = !check_snapshot_skew(raw.events()).empty();
  bool on_skew = !check_snapshot_skew(rec.events()).empty();
  rep.checks.push_back({"snapshot-skew", raw_skew, on_skew, raw_skew && !on_skew});
  bool raw_rules = !check_order_rules(raw.events()).empty();
  bool on_rules = !check_order_rules(rec.events()).empty();
  rep.checks.push_back({"order-rules", raw_rules, on_rules, raw_rules && !on_rules});
  return rep;
}

// Fig-style serial-concurrent anomaly: T commits in the anchor engine at 4000,
// U starts (peer snapshot 250) before T finishes in the peer engine.
inline VerdictReport scenario_serial_concurrent() {
  using namespace detail_scenario;
  VerdictReport rep;
  rep.scenario = "serial-concurrent";

  HistoryRecorder raw;
  {
    Engine anchor(raw_anchor_config(0));
    Engine peer(raw_peer_config(0));
    Timestamp load_a = anchor.draw_load_ts();
    Timestamp load_p = peer.draw_load_ts();
    anchor.load_row("orders", "k", "base", load_a);
    peer.load_row("products", "k", "base", load_p);
    anchor.advance_counter_to(3999);
    peer.advance_counter_to(240);

    auto t_a = anchor.begin_sub(1);
    raw.record(ev::begin(1, kAnchorEngine, t_a->snapshot.scalar()));
    auto t_p = peer.begin_sub(1);
    raw.record(ev::begin(1, kPeerEngine, t_p->snapshot.scalar()));
    anchor.write(*t_a, "orders", "k", "T");
    raw.record(ev::write(1, kAnchorEngine, "orders", "k"));
    peer.write(*t_p, "products", "k", "T");
    raw.record(ev::write(1, kPeerEngine, "products", "k"));

    raw_commit(anchor, *t_a, raw);  // commit timestamp 4000

    peer.advance_counter_to(250);
    auto u_p = peer.begin_sub(2);
    raw.record(ev::begin(2, kPeerEngine, u_p->snapshot.scalar()));  // 250
    auto u_a = anchor.begin_sub(2);
    raw.record(ev::begin(2, kAnchorEngine, u_a->snapshot.scalar()));  // 4000
    auto r1 = anchor.read(*u_a, "orders", "k");
    raw.record(ev::read(2, kAnchorEngine, "orders", "k", r1.observed_ts));  // sees T
    auto r2 = peer.read(*u_p, "products", "k");
    raw.record(ev::read(2, kPeerEngine, "products", "k", r2.observed_ts));  // misses T

    raw_commit(peer, *t_p, raw);  // T's peer commit lands after U's snapshot
    raw_commit(anchor, *u_a, raw);
    raw_commit(peer, *u_p, raw);
  }

  HistoryRecorder rec;
  {
    System sys({}, &rec);
    Timestamp load_a = sys.anchor.draw_load_ts();
    Timestamp load_p = sys.peer.draw_load_ts();
    sys.anchor.load_row("orders", "k", "base", load_a);
    sys.peer.load_row("products", "k", "base", load_p);
    sys.anchor.advance_counter_to(3999);
    sys.peer.advance_counter_to(240);
    sys.pipeline.start_daemon();

    auto T = sys.coordinator.begin(IsolationLevel::SnapshotIsolation);
    sys.coordinator.access(*T, kAnchorEngine, AccessOp::Write, "orders", "k",
                           std::string("T"));
    sys.coordinator.access(*T, kPeerEngine, AccessOp::Write, "products", "k",
                           std::string("T"));

    // Pause T between its two post-commits and run U through the window.
    std::binary_semaphore t_paused{0}, t_resume{0};
    sys.coordinator.set_step_hook([&](CommitStep s, TxnId id) {
      if (id == T->id && s == CommitStep::AfterAnchorPostCommit) {
        t_paused.release();
        t_resume.acquire();
      }
    });
    CommitOutcome t_out;
    std::thread t_committer([&] { t_out = sys.coordinator.commit(*T); });
    t_paused.acquire();

    CommitOutcome u_out;
    std::thread u_runner([&] {
      auto U = sys.coordinator.begin(IsolationLevel::SnapshotIsolation);
      sys.coordinator.access(*U, kPeerEngine, AccessOp::Read, "products", "k");
      sys.coordinator.access(*U, kAnchorEngine, AccessOp::Read, "orders", "k");
      u_out = sys.coordinator.commit(*U);
    });
    std::this_thread::sleep_for(std::chrono::milliseconds{20});
    t_resume.release();
    t_committer.join();
    u_runner.join();
    sys.coordinator.set_step_hook(nullptr);
    if (t_out.committed) t_out.ticket->wait();
    if (u_out.committed) u_out.ticket->wait();
    sys.pipeline.stop_daemon();
  }

  bool raw_sc = !check_serial_concurrent(raw.events()).empty();
  bool on_sc = !check_serial_concurrent(rec.events()).empty();
  rep.checks.push_back({"serial-concurrent", raw_sc, on_sc, raw_sc && !on_sc});
  bool raw_rules = !check_order_rules(raw.events()).empty();
  bool on_rules = !check_order_rules(rec.events()).empty();
  rep.checks.push_back({"order-rules", raw_rules, on_rules, raw_rules && !on_rules});
  return rep;
}

// Cross-engine write skew: T reads x (anchor) and writes y (peer), S reads y
// and writes x. Both commit under plain SI; with commit-order validation one
// of them aborts.
inline VerdictReport scenario_write_skew() {
  using namespace detail_scenario;
  VerdictReport rep;
  rep.scenario = "write-skew";

  HistoryRecorder raw;
  {
    Engine anchor(raw_anchor_config(10));
    Engine peer(raw_peer_config(10));
    Timestamp la = anchor.draw_load_ts();
    Timestamp lp = peer.draw_load_ts();
    anchor.load_row("t", "x", "0", la);
    peer.load_row("t", "y", "0", lp);

    auto t_a = anchor.begin_sub(1);
    auto t_p = peer.begin_sub(1);
    raw.record(ev::begin(1, kAnchorEngine, t_a->snapshot.scalar()));
    raw.record(ev::begin(1, kPeerEngine, t_p->snapshot.scalar()));
    auto s_a = anchor.begin_sub(2);
    auto s_p = peer.begin_sub(2);
    raw.record(ev::begin(2, kAnchorEngine, s_a->snapshot.scalar()));
    raw.record(ev::begin(2, kPeerEngine, s_p->snapshot.scalar()));

    auto tr = anchor.read(*t_a, "t", "x");
    raw.record(ev::read(1, kAnchorEngine, "t", "x", tr.observed_ts));
    auto sr = peer.read(*s_p, "t", "y");
    raw.record(ev::read(2, kPeerEngine, "t", "y", sr.observed_ts));
    peer.write(*t_p, "t", "y", "T");
    raw.record(ev::write(1, kPeerEngine, "t", "y"));
    anchor.write(*s_a, "t", "x", "S");
    raw.record(ev::write(2, kAnchorEngine, "t", "x"));

    raw_commit(anchor, *t_a, raw);
    raw_commit(peer, *t_p, raw);
    raw_commit(anchor, *s_a, raw);
    raw_commit(peer, *s_p, raw);
  }

  HistoryRecorder rec;
  bool enabled_one_abort = false;
  {
    SystemConfig cfg;
    cfg.serializable_validation = true;
    System sys(cfg, &rec);
    Timestamp la = sys.anchor.draw_load_ts();
    Timestamp lp = sys.peer.draw_load_ts();
    sys.anchor.load_row("t", "x", "0", la);
    sys.peer.load_row("t", "y", "0", lp);
    sys.pipeline.start_daemon();

    auto T = sys.coordinator.begin(IsolationLevel::Serializable);
    auto S = sys.coordinator.begin(IsolationLevel::Serializable);
    sys.coordinator.access(*T, kAnchorEngine, AccessOp::Read, "t", "x");
    sys.coordinator.access(*S, kPeerEngine, AccessOp::Read, "t", "y");
    sys.coordinator.access(*T, kPeerEngine, AccessOp::Write, "t", "y", std::string("T"));
    sys.coordinator.access(*S, kAnchorEngine, AccessOp::Write, "t", "x", std::string("S"));
    auto t_out = sys.coordinator.commit(*T);
    auto s_out = sys.coordinator.commit(*S);
    enabled_one_abort = t_out.committed != s_out.committed;
    if (t_out.committed) t_out.ticket->wait();
    if (s_out.committed) s_out.ticket->wait();
    sys.pipeline.stop_daemon();
  }

  bool raw_cycle = check_serializable(raw.events()).has_value();
  bool on_cycle = check_serializable(rec.events()).has_value();
  rep.checks.push_back({"dependency-cycle", raw_cycle, on_cycle, raw_cycle && !on_cycle});
  rep.checks.push_back({"one-aborts-under-validation", false, enabled_one_abort,
                        enabled_one_abort});
  return rep;
}

struct CrashSweepOutcome {
  int points = 0;
  int atomic_ok = 0;
  bool defining_violation_detected = false;  // partial state visible without recovery
  bool suppression_exercised = false;        // at least one point used suppression
  std::vector<std::string> notes;

  bool pass() const { return points > 0 && atomic_ok == points && defining_violation_detected; }
};

// Exhaustive crash-point sweep over one cross-engine commit: a crash is
// injected between every pair of adjacent protocol steps, the durable log
// prefixes are recovered into fresh engines, and the result must be
// all-or-nothing with no acknowledged transaction lost.
inline CrashSweepOutcome run_crash_sweep() {
  struct CrashInjected {};
  CrashSweepOutcome out;
  constexpr int kPoints = 11;
  for (int point = 0; point < kPoints; ++point) {
    HistoryRecorder rec;
    System sys({}, &rec);

    // A fully acknowledged transaction that must survive every crash point.
    auto W = sys.coordinator.begin(IsolationLevel::SnapshotIsolation);
    sys.coordinator.access(*W, kAnchorEngine, AccessOp::Write, "t0", "w", std::string("W"));
    sys.coordinator.access(*W, kPeerEngine, AccessOp::Write, "t1", "w", std::string("W"));
    auto w_out = sys.coordinator.commit(*W);
    while (w_out.ticket->state() == CommitTicket::State::Pending) sys.pipeline.daemon_step();

    auto T = sys.coordinator.begin(IsolationLevel::SnapshotIsolation);
    sys.coordinator.access(*T, kAnchorEngine, AccessOp::Write, "t0", "x", std::string("T"));
    sys.coordinator.access(*T, kPeerEngine, AccessOp::Write, "t1", "y", std::string("T"));
    bool acked = false;
    try {
      if (point == 0) throw CrashInjected{};
      int step_index = 0;
      sys.coordinator.set_step_hook([&](CommitStep, TxnId id) {
        if (id != T->id) return;
        if (++step_index == point) throw CrashInjected{};
      });
      auto t_out = sys.coordinator.commit(*T);  // hook points 1..6
      sys.coordinator.set_step_hook(nullptr);
      if (point == 7) throw CrashInjected{};
      sys.anchor.advance_durable();
      if (point == 8) throw CrashInjected{};
      sys.peer.advance_durable();
      if (point == 9) throw CrashInjected{};
      sys.pipeline.daemon_step();
      acked = t_out.ticket->state() == CommitTicket::State::Acked;
      throw CrashInjected{};  // point 10: after acknowledgment
    } catch (const CrashInjected&) {
    }
    sys.coordinator.set_step_hook(nullptr);
    rec.record(ev::crash());

    // Pre-recovery state at the point between the two post-commits is the
    // defining partial-visibility case the checker must flag.
    if (point == 4) {
      auto pre_a = sys.anchor.txns_with_committed_writes();
      auto pre_p = sys.peer.txns_with_committed_writes();
      auto pre = check_atomicity_durability(
          rec.events(), {{kAnchorEngine, pre_a}, {kPeerEngine, pre_p}});
      if (!pre.empty()) out.defining_violation_detected = true;
    }

    std::string a_img = sys.anchor.wal().crash_image();
    std::string p_img = sys.peer.wal().crash_image();
    Engine anchor2(System::make_anchor_config({}));
    Engine peer2(System::make_peer_config({}));
    RecoveryReport report = recover(a_img, p_img, anchor2, peer2);
    if (!report.suppressed.empty()) out.suppression_exercised = true;

    auto sa = anchor2.txns_with_committed_writes();
    auto sp = peer2.txns_with_committed_writes();
    bool t_in_anchor = sa.count(T->id) > 0;
    bool t_in_peer = sp.count(T->id) > 0;
    bool w_ok = sa.count(W->id) > 0 && sp.count(W->id) > 0;
    auto violations = check_atomicity_durability(
        rec.events(), {{kAnchorEngine, sa}, {kPeerEngine, sp}});
    bool ok = (t_in_anchor == t_in_peer) && w_ok && (!acked || (t_in_anchor && t_in_peer)) &&
              violations.empty();
    ++out.points;
    if (ok) {
      ++out.atomic_ok;
    } else {
      std::ostringstream os;
      os << "point " << point << ": anchor=" << t_in_anchor << " peer=" << t_in_peer
         << " w_ok=" << w_ok << " acked=" << acked << " oracle=" << violations.size();
      out.notes.push_back(os.str());
    }
  }
  return out;
}

inline VerdictReport scenario_crash_sweep() {
  VerdictReport rep;
  rep.scenario = "crash-sweep";
  CrashSweepOutcome sweep = run_crash_sweep();
  rep.checks.push_back({"partial-state-before-recovery", sweep.defining_violation_detected,
                        false, sweep.defining_violation_detected});
  rep.checks.push_back({"all-points-atomic-after-recovery", sweep.atomic_ok == sweep.points,
                        false, sweep.atomic_ok == sweep.points});
  return rep;
}

inline VerdictReport run_scenario(const std::string& name) {
  if (name == "cross-snapshot") return scenario_cross_snapshot();
  if (name == "serial-concurrent") return scenario_serial_concurrent();
  if (name == "write-skew") return scenario_write_skew();
  if (name == "crash-sweep") return scenario_crash_sweep();
  throw UnknownScenario("unknown scenario: " + name);
}

}  // namespace crosstx
