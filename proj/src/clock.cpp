#include "vpki/clock.hpp"

#include <cmath>

namespace vpki {

TimePoint SystemClock::now() const {
  return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

void ManualClock::advance_to(TimePoint t) {
  auto cur = now_.load();
  while (cur < t && !now_.compare_exchange_weak(cur, t)) {
  }
}

ScaledClock::ScaledClock(TimePoint origin, double scale)
    : origin_(origin), scale_(scale), started_(std::chrono::steady_clock::now()) {}

double ScaledClock::now_seconds() const {
  std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started_;
  return static_cast<double>(origin_) + elapsed.count() * scale_;
}

TimePoint ScaledClock::now() const { return static_cast<TimePoint>(std::floor(now_seconds())); }

std::chrono::steady_clock::time_point ScaledClock::real_deadline(double virtual_offset_seconds) const {
  auto real = std::chrono::duration<double>(virtual_offset_seconds / scale_);
  return started_ + std::chrono::duration_cast<std::chrono::steady_clock::duration>(real);
}

std::int64_t monotonic_us() {
  return std::chrono::duration_cast<std::chrono::microseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

}  // namespace vpki
