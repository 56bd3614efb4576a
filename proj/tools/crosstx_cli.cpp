// Command-line driver: microbenchmark runs, scripted anomaly scenarios,
// history-trace checking, and log recovery.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "crosstx/crosstx.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerdict = 1;
constexpr int kExitConfig = 2;

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw crosstx::ConfigError("cannot open " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

int cmd_run(const crosstx::WorkloadSpec& spec, const std::string& trace_path, bool dump_csr,
            const std::string& wal_dir, const std::string& format) {
  crosstx::HistoryRecorder recorder;
  bool want_history = !trace_path.empty();
  crosstx::SystemConfig scfg;
  scfg.serializable_validation = spec.isolation == crosstx::IsolationLevel::Serializable;
  scfg.peer_access_delay = std::chrono::microseconds{spec.slow_delay_us};
  scfg.csr_capacity = spec.csr_capacity;
  scfg.gc_threshold = spec.gc_threshold;
  scfg.flush_latency = std::chrono::microseconds{spec.flush_latency_us};
  scfg.flush_jitter_us = spec.flush_jitter_us;
  scfg.flush_jitter_seed = spec.seed;
  crosstx::System sys(scfg, want_history ? &recorder : nullptr);

  crosstx::RunStats stats = crosstx::run_micro(spec, nullptr, &sys);
  std::cout << crosstx::report(stats, spec, format);
  if (want_history) recorder.save(trace_path);
  if (dump_csr) std::cout << sys.csr.dump();
  if (!wal_dir.empty()) {
    std::filesystem::create_directories(wal_dir);
    sys.anchor.wal().dump_to_file(wal_dir + "/anchor.log", false);
    sys.peer.wal().dump_to_file(wal_dir + "/peer.log", false);
  }
  return kExitOk;
}

int cmd_scenario(const std::string& name) {
  crosstx::VerdictReport rep = crosstx::run_scenario(name);
  std::cout << rep.text();
  return rep.pass() ? kExitOk : kExitVerdict;
}

int cmd_check(const std::string& trace_path) {
  auto history = crosstx::load_history(trace_path);
  if (!history) {
    std::cerr << "cannot parse trace " << trace_path << "\n";
    return kExitConfig;
  }
  bool clean = true;
  auto skew = crosstx::check_snapshot_skew(*history);
  std::cout << "snapshot-skew " << (skew.empty() ? "ok" : "VIOLATION") << " (" << skew.size()
            << ")\n";
  clean = clean && skew.empty();
  auto sc = crosstx::check_serial_concurrent(*history);
  std::cout << "serial-concurrent " << (sc.empty() ? "ok" : "VIOLATION") << " (" << sc.size()
            << ")\n";
  clean = clean && sc.empty();
  auto rules = crosstx::check_order_rules(*history);
  std::cout << "order-rules " << (rules.empty() ? "ok" : "VIOLATION") << " (" << rules.size()
            << ")\n";
  clean = clean && rules.empty();
  auto cycle = crosstx::check_serializable(*history);
  std::cout << "serializability " << (cycle ? "CYCLE" : "ok");
  if (cycle) {
    std::cout << " [";
    for (std::size_t i = 0; i < cycle->size(); ++i) {
      if (i) std::cout << "->";
      std::cout << (*cycle)[i];
    }
    std::cout << "]";
  }
  std::cout << "\n";
  clean = clean && !cycle;
  auto ad = crosstx::check_atomicity_durability(*history);
  std::cout << "atomicity-durability " << (ad.empty() ? "ok" : "VIOLATION") << " (" << ad.size()
            << ")\n";
  clean = clean && ad.empty();
  return clean ? kExitOk : kExitVerdict;
}

int cmd_recover(const std::string& anchor_path, const std::string& peer_path) {
  std::string a = read_file(anchor_path);
  std::string p = read_file(peer_path);
  crosstx::Engine anchor(crosstx::System::make_anchor_config({}));
  crosstx::Engine peer(crosstx::System::make_peer_config({}));
  crosstx::RecoveryReport rep = crosstx::recover(a, p, anchor, peer);
  std::cout << rep.to_text();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dual-engine cross-engine transaction simulator"};
  app.require_subcommand(1);

  crosstx::WorkloadSpec spec;
  std::string isolation = "si";
  std::string trace_path, wal_dir, format = "human";
  bool dump_csr = false;
  double seconds = 0;

  auto* run = app.add_subcommand("run", "run the microbenchmark");
  run->add_option("--tables", spec.tables_per_engine, "tables per engine");
  run->add_option("--rows", spec.rows_per_table, "rows per table");
  run->add_option("--accesses", spec.accesses_per_txn, "accesses per transaction");
  run->add_option("--read-pct", spec.read_pct, "percentage of reads");
  run->add_option("--peer-pct", spec.peer_pct, "percentage of accesses routed to the peer engine");
  run->add_option("--isolation", isolation, "rc|si|serializable");
  run->add_option("--workers", spec.workers, "worker threads");
  run->add_option("--txns", spec.txn_count, "total transactions (0 with --seconds)");
  run->add_option("--seconds", seconds, "run duration (used when --txns 0)");
  run->add_option("--seed", spec.seed, "RNG seed");
  run->add_option("--csr-capacity", spec.csr_capacity, "registry keys per partition");
  run->add_option("--gc-threshold", spec.gc_threshold, "registry accesses between recycle passes");
  run->add_option("--payload-bytes", spec.payload_bytes, "record size in bytes");
  run->add_option("--slow-delay-us", spec.slow_delay_us, "peer engine per-access delay");
  run->add_option("--flush-latency-us", spec.flush_latency_us, "simulated log flush latency");
  run->add_option("--flush-jitter-us", spec.flush_jitter_us, "random extra flush latency bound");
  run->add_option("--trace", trace_path, "write the history trace to this file");
  run->add_option("--wal-dir", wal_dir, "dump both engines' logs into this directory");
  run->add_option("--format", format, "human|machine");
  run->add_flag("--dump-csr", dump_csr, "print the registry after the run");
  run->add_flag("--bypass", spec.bypass, "drive the anchor engine directly (no coordinator)");

  std::string scenario_name;
  auto* scenario = app.add_subcommand("scenario", "replay a scripted anomaly scenario");
  scenario->add_option("name", scenario_name,
                       "cross-snapshot|serial-concurrent|write-skew|crash-sweep")
      ->required();

  std::string check_trace;
  auto* check = app.add_subcommand("check", "run all oracle checks over a history trace");
  check->add_option("trace", check_trace, "trace file produced by run --trace")->required();

  std::string rec_anchor, rec_peer;
  auto* recover_cmd = app.add_subcommand("recover", "replay two log files and report");
  recover_cmd->add_option("anchor-log", rec_anchor, "anchor engine log")->required();
  recover_cmd->add_option("peer-log", rec_peer, "peer engine log")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      if (!crosstx::parse_isolation(isolation, spec.isolation)) {
        std::cerr << "bad isolation level: " << isolation << "\n";
        return kExitConfig;
      }
      if (spec.txn_count == 0) spec.seconds = seconds;
      if (format != "human" && format != "machine") {
        std::cerr << "bad format: " << format << "\n";
        return kExitConfig;
      }
      spec.validate();
      return cmd_run(spec, trace_path, dump_csr, wal_dir, format);
    }
    if (scenario->parsed()) return cmd_scenario(scenario_name);
    if (check->parsed()) return cmd_check(check_trace);
    if (recover_cmd->parsed()) return cmd_recover(rec_anchor, rec_peer);
  } catch (const crosstx::UnknownScenario& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  } catch (const crosstx::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
