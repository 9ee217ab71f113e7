#pragma once

#include <string>
#include <vector>

#include "vpki/credentials.hpp"

namespace vpki {

/// Per-domain lifetime grid and request limits.
struct DomainPolicy {
  TimePoint ticket_interval_seconds = 3600;    // Γ
  TimePoint pseudonym_lifetime_seconds = 300;  // τ
  TimePoint grid_epoch = 0;
  std::uint32_t pop_failure_threshold = 3;
  TimePoint clock_skew_seconds = 300;
  std::size_t max_batch = 1000;

  /// Throws invalid_argument unless Γ, τ > 0 and Γ is a multiple of τ.
  void validate() const;

  static DomainPolicy from_json_text(const std::string& text);
  static DomainPolicy load(const std::string& path);
  std::string to_json_text() const;

  bool operator==(const DomainPolicy&) const = default;
};

TimePoint floor_to_grid(TimePoint t, TimePoint step, TimePoint epoch = 0);
TimePoint ceil_to_grid(TimePoint t, TimePoint step, TimePoint epoch = 0);

/// [floor(start), ceil(end)] on the grid.
Interval snap_outward(const Interval& requested, TimePoint step, TimePoint epoch = 0);

/// The τ-grid slots covering `requested`: every [kτ, (k+1)τ) that intersects
/// it, in order. Throws EmptyRequest when there are none and invalid_argument
/// when requested.start precedes the epoch.
std::vector<Interval> align_lifetimes(const Interval& requested, TimePoint tau, TimePoint epoch = 0);

}  // namespace vpki
