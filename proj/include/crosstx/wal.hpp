#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <fstream>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "crosstx/types.hpp"

namespace crosstx {

enum class LogKind : std::uint8_t {
  Insert = 1,
  Update = 2,
  Delete = 3,
  CommitBegin = 4,
  CommitEnd = 5,
  Abort = 6,
};

inline bool valid_log_kind(std::uint8_t k) { return k >= 1 && k <= 6; }

inline const char* to_string(LogKind k) {
  switch (k) {
    case LogKind::Insert: return "Insert";
    case LogKind::Update: return "Update";
    case LogKind::Delete: return "Delete";
    case LogKind::CommitBegin: return "CommitBegin";
    case LogKind::CommitEnd: return "CommitEnd";
    case LogKind::Abort: return "Abort";
  }
  return "?";
}

struct LogRecord {
  Lsn lsn = 0;  // byte offset one past the record's end; durable iff durable_lsn >= lsn
  LogKind kind = LogKind::Insert;
  TxnId txn = 0;
  std::string payload;
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline std::uint32_t get_u32(const char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}
inline std::uint64_t get_u64(const char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

}  // namespace detail

// Payload of Insert/Update/Delete records.
struct DataPayload {
  std::string table;
  std::string key;
  bool tombstone = false;
  std::string value;

  std::string serialize() const {
    std::string out;
    detail::put_u32(out, static_cast<std::uint32_t>(table.size()));
    out += table;
    detail::put_u32(out, static_cast<std::uint32_t>(key.size()));
    out += key;
    out.push_back(tombstone ? 1 : 0);
    out += value;
    return out;
  }

  static std::optional<DataPayload> parse(const std::string& bytes) {
    DataPayload p;
    std::size_t off = 0;
    if (bytes.size() < 4) return std::nullopt;
    std::uint32_t tl = detail::get_u32(bytes.data());
    off = 4;
    if (bytes.size() < off + tl + 4) return std::nullopt;
    p.table = bytes.substr(off, tl);
    off += tl;
    std::uint32_t kl = detail::get_u32(bytes.data() + off);
    off += 4;
    if (bytes.size() < off + kl + 1) return std::nullopt;
    p.key = bytes.substr(off, kl);
    off += kl;
    p.tombstone = bytes[off] != 0;
    off += 1;
    p.value = bytes.substr(off);
    return p;
  }
};

inline std::string commit_end_payload(Timestamp commit_ts) {
  std::string out;
  detail::put_u64(out, commit_ts);
  return out;
}

inline std::optional<Timestamp> parse_commit_end_payload(const std::string& bytes) {
  if (bytes.size() < 8) return std::nullopt;
  return detail::get_u64(bytes.data());
}

struct ParsedLog {
  std::vector<LogRecord> records;
  // Byte offset of the first framing violation inside a complete record, if any.
  std::optional<std::size_t> corrupt_offset;
  std::size_t valid_bytes = 0;
};

// Record framing: u32 length (bytes after this field), u8 kind, u64 lsn,
// u64 global txn id, payload. A buffer is valid up to the last complete record.
inline ParsedLog parse_log(const std::string& bytes) {
  ParsedLog out;
  std::size_t off = 0;
  while (off + 4 <= bytes.size()) {
    std::uint32_t len = detail::get_u32(bytes.data() + off);
    if (off + 4 + len > bytes.size()) break;  // incomplete tail, clean stop
    if (len < 17) {
      out.corrupt_offset = off;
      break;
    }
    const char* body = bytes.data() + off + 4;
    std::uint8_t kind = static_cast<std::uint8_t>(body[0]);
    Lsn lsn = detail::get_u64(body + 1);
    TxnId txn = detail::get_u64(body + 9);
    if (!valid_log_kind(kind) || lsn != off + 4 + len) {
      out.corrupt_offset = off;
      break;
    }
    LogRecord rec;
    rec.kind = static_cast<LogKind>(kind);
    rec.lsn = lsn;
    rec.txn = txn;
    rec.payload.assign(body + 17, len - 17);
    out.records.push_back(std::move(rec));
    off += 4 + len;
  }
  out.valid_bytes = off;
  return out;
}

// Append-only simulated write-ahead log. LSNs are cumulative byte offsets, so
// durable_lsn >= lsn means the record is fully crash-survivable.
class Wal {
 public:
  explicit Wal(std::chrono::microseconds flush_latency = std::chrono::microseconds{0},
               std::uint64_t flush_jitter_us = 0, std::uint64_t jitter_seed = 0)
      : flush_latency_(flush_latency), flush_jitter_us_(flush_jitter_us), jitter_rng_(jitter_seed) {}

  Lsn append(LogKind kind, TxnId txn, std::string payload) {
    std::lock_guard<std::mutex> g(mu_);
    std::uint32_t len = static_cast<std::uint32_t>(17 + payload.size());
    Lsn lsn = buf_.size() + 4 + len;
    detail::put_u32(buf_, len);
    buf_.push_back(static_cast<char>(kind));
    detail::put_u64(buf_, lsn);
    detail::put_u64(buf_, txn);
    buf_ += payload;
    return lsn;
  }

  Lsn next_lsn() const {
    std::lock_guard<std::mutex> g(mu_);
    return buf_.size();
  }

  Lsn current_durable() const { return durable_.load(std::memory_order_acquire); }

  // Simulates one flush: samples the frontier, waits the configured latency,
  // then raises durable_lsn to the sampled frontier.
  Lsn advance_durable() {
    Lsn target = next_lsn();
    auto delay = flush_latency_;
    if (flush_jitter_us_ > 0) {
      std::uint64_t j;
      {
        std::lock_guard<std::mutex> g(jitter_mu_);
        j = jitter_rng_() % (flush_jitter_us_ + 1);
      }
      delay += std::chrono::microseconds{j};
    }
    if (delay.count() > 0) std::this_thread::sleep_for(delay);
    Lsn cur = durable_.load(std::memory_order_relaxed);
    while (cur < target && !durable_.compare_exchange_weak(cur, target)) {
    }
    return durable_.load(std::memory_order_acquire);
  }

  // Surviving bytes after a crash: the durable prefix.
  std::string crash_image() const {
    std::lock_guard<std::mutex> g(mu_);
    return buf_.substr(0, static_cast<std::size_t>(durable_.load()));
  }

  std::string full_image() const {
    std::lock_guard<std::mutex> g(mu_);
    return buf_;
  }

  void dump_to_file(const std::string& path, bool durable_only) const {
    std::string img = durable_only ? crash_image() : full_image();
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f.write(img.data(), static_cast<std::streamsize>(img.size()));
  }

 private:
  mutable std::mutex mu_;
  std::string buf_;
  std::atomic<Lsn> durable_{0};
  std::chrono::microseconds flush_latency_;
  std::uint64_t flush_jitter_us_;
  std::mutex jitter_mu_;
  std::mt19937_64 jitter_rng_;
};

}  // namespace crosstx
