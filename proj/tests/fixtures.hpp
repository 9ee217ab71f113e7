#pragma once

#include <string>

#include "vpki/privacy.hpp"

namespace testing {

/// Each vehicle switches at its own phase: vehicle v starts at 1 + 10v and
/// changes pseudonym every 100 s, so no two vehicles share a switch instant.
inline vpki::privacy::Transcript flexible_fleet(int vehicles, int per_vehicle) {
  vpki::privacy::Transcript t;
  vpki::SerialNumber serial = 1;
  for (int v = 0; v < vehicles; ++v) {
    vpki::TimePoint start = 1 + 10 * v;
    for (int k = 0; k < per_vehicle; ++k)
      t.add({{"pca-A-1", serial++}, vpki::Interval{start + 100 * k, start + 100 * (k + 1)}}, "veh-" + std::to_string(v));
  }
  t.sort();
  return t;
}

/// Every vehicle on the same τ grid.
inline vpki::privacy::Transcript fixed_fleet(int vehicles, int per_vehicle, vpki::TimePoint tau = 300) {
  vpki::privacy::Transcript t;
  vpki::SerialNumber serial = 1;
  for (int v = 0; v < vehicles; ++v)
    for (int k = 0; k < per_vehicle; ++k)
      t.add({{"pca-A-1", serial++}, vpki::Interval{tau * k, tau * (k + 1)}}, "veh-" + std::to_string(v));
  t.sort();
  return t;
}

}  // namespace testing
