#pragma once

#include <atomic>
#include <chrono>

#include "vpki/bytes.hpp"

namespace vpki {

class Clock {
 public:
  virtual ~Clock() = default;
  virtual TimePoint now() const = 0;
};

class SystemClock final : public Clock {
 public:
  TimePoint now() const override;
};

/// Set explicitly; used by tests and the as-fast-as-possible simulator.
class ManualClock final : public Clock {
 public:
  explicit ManualClock(TimePoint start = 0) : now_(start) {}
  TimePoint now() const override { return now_.load(); }
  void set(TimePoint t) { now_.store(t); }
  void advance(TimePoint dt) { now_.fetch_add(dt); }
  /// Moves forward only.
  void advance_to(TimePoint t);

 private:
  std::atomic<TimePoint> now_;
};

/// Virtual time = origin + scale * real elapsed time.
class ScaledClock final : public Clock {
 public:
  ScaledClock(TimePoint origin, double scale);
  TimePoint now() const override;
  double now_seconds() const;
  /// Real time point at which virtual time reaches `virtual_seconds` past origin.
  std::chrono::steady_clock::time_point real_deadline(double virtual_offset_seconds) const;

 private:
  TimePoint origin_;
  double scale_;
  std::chrono::steady_clock::time_point started_;
};

/// Microseconds on the monotonic clock, for latency measurement.
std::int64_t monotonic_us();

}  // namespace vpki
