#pragma once

#include <cstdint>
#include <string>

namespace crosstx {

// Logical time. Engine-local: commit/begin timestamps, tids, watermarks.
using Timestamp = std::uint64_t;
// Log sequence number = byte offset one past the end of a record in its WAL.
using Lsn = std::uint64_t;
// Global (coordinator-assigned) transaction id.
using TxnId = std::uint64_t;
using EngineId = std::uint32_t;

inline constexpr EngineId kAnchorEngine = 0;
inline constexpr EngineId kPeerEngine = 1;

enum class IsolationLevel : std::uint8_t {
  ReadCommitted,
  SnapshotIsolation,
  Serializable,
};

enum class AbortReason : std::uint8_t {
  None = 0,
  WriteConflict,      // first-updater-wins loss or foreign uncommitted head
  ValidationFailed,   // serializable read-set validation
  CsrInactiveIndex,   // mapping routed to a sealed/absent registry index
  CsrOutOfBounds,     // commit check bounds violated
  UserAbort,
};

inline const char* to_string(IsolationLevel l) {
  switch (l) {
    case IsolationLevel::ReadCommitted: return "ReadCommitted";
    case IsolationLevel::SnapshotIsolation: return "SnapshotIsolation";
    case IsolationLevel::Serializable: return "Serializable";
  }
  return "?";
}

inline const char* to_string(AbortReason r) {
  switch (r) {
    case AbortReason::None: return "None";
    case AbortReason::WriteConflict: return "WriteConflict";
    case AbortReason::ValidationFailed: return "ValidationFailed";
    case AbortReason::CsrInactiveIndex: return "CsrInactiveIndex";
    case AbortReason::CsrOutOfBounds: return "CsrOutOfBounds";
    case AbortReason::UserAbort: return "UserAbort";
  }
  return "?";
}

inline bool parse_isolation(const std::string& s, IsolationLevel& out) {
  if (s == "rc" || s == "ReadCommitted") { out = IsolationLevel::ReadCommitted; return true; }
  if (s == "si" || s == "SnapshotIsolation") { out = IsolationLevel::SnapshotIsolation; return true; }
  if (s == "serializable" || s == "Serializable") { out = IsolationLevel::Serializable; return true; }
  return false;
}

inline bool parse_abort_reason(const std::string& s, AbortReason& out) {
  for (auto r : {AbortReason::None, AbortReason::WriteConflict, AbortReason::ValidationFailed,
                 AbortReason::CsrInactiveIndex, AbortReason::CsrOutOfBounds, AbortReason::UserAbort}) {
    if (s == to_string(r)) { out = r; return true; }
  }
  return false;
}

// FNV-1a, used for state digests.
inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 1469598103934665603ull) {
  auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 1469598103934665603ull) {
  return fnv1a(s.data(), s.size(), h);
}

inline std::uint64_t fnv1a_u64(std::uint64_t v, std::uint64_t h) {
  return fnv1a(&v, sizeof(v), h);
}

}  // namespace crosstx
