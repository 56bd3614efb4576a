#pragma once

#include <cstdint>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "crosstx/types.hpp"

namespace crosstx {

enum class EventKind : std::uint8_t {
  Begin,           // anchor snapshot acquired; ts = anchor scalar
  PeerSnapshot,    // peer snapshot installed; ts = peer scalar
  Read,            // ts = observed version commit_ts (0 = absent)
  Write,
  PreCommit,       // ts = engine commit timestamp
  PostCommit,
  CsrSelect,       // in = anchor snapshot, out = selected peer value
  CsrCommitCheck,  // in = anchor key, out = peer commit ts
  Ack,             // required/durable LSNs per engine at acknowledgment
  Abort,
  Crash,
};

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::Begin: return "Begin";
    case EventKind::PeerSnapshot: return "PeerSnapshot";
    case EventKind::Read: return "Read";
    case EventKind::Write: return "Write";
    case EventKind::PreCommit: return "PreCommit";
    case EventKind::PostCommit: return "PostCommit";
    case EventKind::CsrSelect: return "CsrSelect";
    case EventKind::CsrCommitCheck: return "CsrCommitCheck";
    case EventKind::Ack: return "Ack";
    case EventKind::Abort: return "Abort";
    case EventKind::Crash: return "Crash";
  }
  return "?";
}

inline bool parse_event_kind(const std::string& s, EventKind& out) {
  for (auto k : {EventKind::Begin, EventKind::PeerSnapshot, EventKind::Read, EventKind::Write,
                 EventKind::PreCommit, EventKind::PostCommit, EventKind::CsrSelect,
                 EventKind::CsrCommitCheck, EventKind::Ack, EventKind::Abort, EventKind::Crash}) {
    if (s == to_string(k)) { out = k; return true; }
  }
  return false;
}

struct HistoryEvent {
  std::uint64_t seq = 0;
  TxnId txn = 0;
  std::optional<EngineId> engine;
  EventKind kind = EventKind::Begin;

  Timestamp ts = 0;      // Begin/PeerSnapshot/Read/PreCommit
  std::string table;     // Read/Write
  std::string key;       // Read/Write
  Timestamp in = 0;      // Csr*
  Timestamp out = 0;     // Csr*
  bool accepted = false; // Csr*
  Lsn req_anchor = 0, req_peer = 0;  // Ack (0 = engine not involved)
  Lsn dur_anchor = 0, dur_peer = 0;  // Ack
  AbortReason reason = AbortReason::None;  // Abort

  std::string to_line() const {
    std::ostringstream os;
    os << seq << ' ' << txn << ' ';
    if (engine) os << *engine; else os << '-';
    os << ' ' << to_string(kind);
    switch (kind) {
      case EventKind::Begin:
      case EventKind::PeerSnapshot:
      case EventKind::PreCommit:
        os << " ts=" << ts;
        break;
      case EventKind::Read:
        os << " table=" << table << " key=" << key << " version=" << ts;
        break;
      case EventKind::Write:
        os << " table=" << table << " key=" << key;
        break;
      case EventKind::PostCommit:
      case EventKind::Crash:
        break;
      case EventKind::CsrSelect:
      case EventKind::CsrCommitCheck:
        os << " in=" << in << " out=" << out << " accepted=" << (accepted ? 1 : 0);
        break;
      case EventKind::Ack:
        os << " req0=" << req_anchor << " dur0=" << dur_anchor << " req1=" << req_peer
           << " dur1=" << dur_peer;
        break;
      case EventKind::Abort:
        os << " reason=" << to_string(reason);
        break;
    }
    return os.str();
  }

  static std::optional<HistoryEvent> parse_line(const std::string& line) {
    std::istringstream is(line);
    HistoryEvent e;
    std::string eng, kind;
    if (!(is >> e.seq >> e.txn >> eng >> kind)) return std::nullopt;
    if (eng != "-") e.engine = static_cast<EngineId>(std::stoul(eng));
    if (!parse_event_kind(kind, e.kind)) return std::nullopt;
    std::string tok;
    while (is >> tok) {
      auto pos = tok.find('=');
      if (pos == std::string::npos) return std::nullopt;
      std::string k = tok.substr(0, pos);
      std::string v = tok.substr(pos + 1);
      if (k == "ts" || k == "version") e.ts = std::stoull(v);
      else if (k == "table") e.table = v;
      else if (k == "key") e.key = v;
      else if (k == "in") e.in = std::stoull(v);
      else if (k == "out") e.out = std::stoull(v);
      else if (k == "accepted") e.accepted = v == "1";
      else if (k == "req0") e.req_anchor = std::stoull(v);
      else if (k == "dur0") e.dur_anchor = std::stoull(v);
      else if (k == "req1") e.req_peer = std::stoull(v);
      else if (k == "dur1") e.dur_peer = std::stoull(v);
      else if (k == "reason") { if (!parse_abort_reason(v, e.reason)) return std::nullopt; }
      else return std::nullopt;
    }
    return e;
  }
};

// Globally ordered event capture. Sequence numbers are assigned under the
// same lock that appends, so seq order equals capture order.
class HistoryRecorder {
 public:
  std::uint64_t record(HistoryEvent e) {
    std::lock_guard<std::mutex> g(mu_);
    e.seq = ++next_seq_;
    events_.push_back(std::move(e));
    return next_seq_;
  }

  std::vector<HistoryEvent> events() const {
    std::lock_guard<std::mutex> g(mu_);
    return events_;
  }

  std::size_t size() const {
    std::lock_guard<std::mutex> g(mu_);
    return events_.size();
  }

  void clear() {
    std::lock_guard<std::mutex> g(mu_);
    events_.clear();
    next_seq_ = 0;
  }

  void save(const std::string& path) const {
    std::ofstream f(path, std::ios::trunc);
    for (const auto& e : events()) f << e.to_line() << '\n';
  }

 private:
  mutable std::mutex mu_;
  std::uint64_t next_seq_ = 0;
  std::vector<HistoryEvent> events_;
};

inline std::optional<std::vector<HistoryEvent>> load_history(const std::string& path) {
  std::ifstream f(path);
  if (!f) return std::nullopt;
  std::vector<HistoryEvent> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    auto e = HistoryEvent::parse_line(line);
    if (!e) return std::nullopt;
    out.push_back(std::move(*e));
  }
  return out;
}

// Convenience constructors used by the coordinator and scripted scenarios.
namespace ev {

inline HistoryEvent begin(TxnId txn, EngineId engine, Timestamp ts) {
  HistoryEvent e;
  e.txn = txn;
  e.engine = engine;
  e.kind = EventKind::Begin;
  e.ts = ts;
  return e;
}

inline HistoryEvent peer_snapshot(TxnId txn, EngineId engine, Timestamp ts) {
  HistoryEvent e;
  e.txn = txn;
  e.engine = engine;
  e.kind = EventKind::PeerSnapshot;
  e.ts = ts;
  return e;
}

inline HistoryEvent read(TxnId txn, EngineId engine, std::string table, std::string key,
                         Timestamp version_ts) {
  HistoryEvent e;
  e.txn = txn;
  e.engine = engine;
  e.kind = EventKind::Read;
  e.table = std::move(table);
  e.key = std::move(key);
  e.ts = version_ts;
  return e;
}

inline HistoryEvent write(TxnId txn, EngineId engine, std::string table, std::string key) {
  HistoryEvent e;
  e.txn = txn;
  e.engine = engine;
  e.kind = EventKind::Write;
  e.table = std::move(table);
  e.key = std::move(key);
  return e;
}

inline HistoryEvent pre_commit(TxnId txn, EngineId engine, Timestamp ts) {
  HistoryEvent e;
  e.txn = txn;
  e.engine = engine;
  e.kind = EventKind::PreCommit;
  e.ts = ts;
  return e;
}

inline HistoryEvent post_commit(TxnId txn, EngineId engine) {
  HistoryEvent e;
  e.txn = txn;
  e.engine = engine;
  e.kind = EventKind::PostCommit;
  return e;
}

inline HistoryEvent csr_select(TxnId txn, Timestamp in, Timestamp out, bool accepted) {
  HistoryEvent e;
  e.txn = txn;
  e.kind = EventKind::CsrSelect;
  e.in = in;
  e.out = out;
  e.accepted = accepted;
  return e;
}

inline HistoryEvent csr_commit_check(TxnId txn, Timestamp in, Timestamp out, bool accepted) {
  HistoryEvent e;
  e.txn = txn;
  e.kind = EventKind::CsrCommitCheck;
  e.in = in;
  e.out = out;
  e.accepted = accepted;
  return e;
}

inline HistoryEvent ack(TxnId txn, Lsn req_anchor, Lsn dur_anchor, Lsn req_peer, Lsn dur_peer) {
  HistoryEvent e;
  e.txn = txn;
  e.kind = EventKind::Ack;
  e.req_anchor = req_anchor;
  e.dur_anchor = dur_anchor;
  e.req_peer = req_peer;
  e.dur_peer = dur_peer;
  return e;
}

inline HistoryEvent abort(TxnId txn, AbortReason reason) {
  HistoryEvent e;
  e.txn = txn;
  e.kind = EventKind::Abort;
  e.reason = reason;
  return e;
}

inline HistoryEvent crash() {
  HistoryEvent e;
  e.kind = EventKind::Crash;
  return e;
}

}  // namespace ev
}  // namespace crosstx
