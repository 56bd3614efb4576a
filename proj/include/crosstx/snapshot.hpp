#pragma once

#include <algorithm>
#include <set>

#include "crosstx/types.hpp"

namespace crosstx {

// Watermark snapshot (read view): versions by creators below low are visible,
// at or above high invisible, in between invisible iff the creator is listed
// active. The scalar snapshot value of a read view is its high watermark.
struct ReadView {
  Timestamp low = 0;
  Timestamp high = 0;
  std::set<Timestamp> active;
};

inline bool visible_in_view(const ReadView& view, Timestamp creator) {
  if (creator < view.low) return true;
  if (creator >= view.high) return false;
  return view.active.count(creator) == 0;
}

// Lowers the view's high watermark to a registry-chosen value. Active ids at
// or above the new watermark are redundant and dropped; if the watermark falls
// below low, both collapse to it.
inline ReadView adjust_read_view(const ReadView& view, Timestamp csr_high) {
  ReadView out;
  out.high = csr_high;
  out.low = std::min(view.low, csr_high);
  for (Timestamp t : view.active) {
    if (t < csr_high) out.active.insert(t);
  }
  return out;
}

struct SnapshotHandle {
  enum class Kind : std::uint8_t { Counter, ReadView };

  Kind kind = Kind::Counter;
  Timestamp counter_ts = 0;  // Counter
  ReadView view;             // ReadView

  static SnapshotHandle counter(Timestamp ts) {
    SnapshotHandle s;
    s.kind = Kind::Counter;
    s.counter_ts = ts;
    return s;
  }

  static SnapshotHandle read_view(ReadView v) {
    SnapshotHandle s;
    s.kind = Kind::ReadView;
    s.view = std::move(v);
    return s;
  }

  // Single comparable value: counter reading, or the view's high watermark.
  Timestamp scalar() const { return kind == Kind::Counter ? counter_ts : view.high; }
};

}  // namespace crosstx
