#include "vpki/policy.hpp"

#include <json.hpp>

#include "vpki/errors.hpp"

namespace vpki {

void DomainPolicy::validate() const {
  if (ticket_interval_seconds <= 0 || pseudonym_lifetime_seconds <= 0)
    throw Error(ErrorCode::invalid_argument, "ticket interval and pseudonym lifetime must be positive");
  if (ticket_interval_seconds % pseudonym_lifetime_seconds != 0)
    throw Error(ErrorCode::invalid_argument, "ticket interval must be a multiple of the pseudonym lifetime");
  if (clock_skew_seconds < 0) throw Error(ErrorCode::invalid_argument, "negative clock skew");
  if (max_batch == 0) throw Error(ErrorCode::invalid_argument, "max_batch must be positive");
}

DomainPolicy DomainPolicy::from_json_text(const std::string& text) {
  DomainPolicy p;
  try {
    auto j = nlohmann::json::parse(text);
    p.ticket_interval_seconds = j.value("ticket_interval_seconds", p.ticket_interval_seconds);
    p.pseudonym_lifetime_seconds = j.value("pseudonym_lifetime_seconds", p.pseudonym_lifetime_seconds);
    p.grid_epoch = j.value("grid_epoch", p.grid_epoch);
    p.pop_failure_threshold = j.value("pop_failure_threshold", p.pop_failure_threshold);
    p.clock_skew_seconds = j.value("clock_skew_seconds", p.clock_skew_seconds);
    p.max_batch = j.value("max_batch", p.max_batch);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::invalid_argument, std::string("policy: ") + e.what());
  }
  p.validate();
  return p;
}

DomainPolicy DomainPolicy::load(const std::string& path) {
  auto bytes = read_file(path);
  return from_json_text(std::string(bytes.begin(), bytes.end()));
}

std::string DomainPolicy::to_json_text() const {
  nlohmann::json j{{"ticket_interval_seconds", ticket_interval_seconds},
                   {"pseudonym_lifetime_seconds", pseudonym_lifetime_seconds},
                   {"grid_epoch", grid_epoch},
                   {"pop_failure_threshold", pop_failure_threshold},
                   {"clock_skew_seconds", clock_skew_seconds},
                   {"max_batch", max_batch}};
  return j.dump(2);
}

TimePoint floor_to_grid(TimePoint t, TimePoint step, TimePoint epoch) {
  auto rel = t - epoch;
  auto q = rel / step;
  if (rel % step != 0 && rel < 0) --q;
  return epoch + q * step;
}

TimePoint ceil_to_grid(TimePoint t, TimePoint step, TimePoint epoch) {
  auto f = floor_to_grid(t, step, epoch);
  return f == t ? t : f + step;
}

Interval snap_outward(const Interval& requested, TimePoint step, TimePoint epoch) {
  return Interval{floor_to_grid(requested.start, step, epoch), ceil_to_grid(requested.end, step, epoch)};
}

std::vector<Interval> align_lifetimes(const Interval& requested, TimePoint tau, TimePoint epoch) {
  if (tau <= 0) throw Error(ErrorCode::invalid_argument, "pseudonym lifetime must be positive");
  if (requested.start < epoch) throw Error(ErrorCode::invalid_argument, "request starts before the grid epoch");
  if (requested.end <= requested.start) throw Error(ErrorCode::empty_request, "no slot intersects the request");
  auto closure = snap_outward(requested, tau, epoch);
  std::vector<Interval> slots;
  slots.reserve(static_cast<std::size_t>((closure.end - closure.start) / tau));
  for (auto t = closure.start; t < closure.end; t += tau) slots.push_back(Interval{t, t + tau});
  return slots;
}

}  // namespace vpki
