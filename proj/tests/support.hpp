#pragma once

#include <doctest.h>

#include <filesystem>
#include <random>
#include <string>

#include "vpki/deployment.hpp"
#include "vpki/errors.hpp"

namespace testing {

inline constexpr vpki::TimePoint kT0 = 1699999200;  // multiple of 3600

/// Runs `fn` and returns the ErrorCode it threw, or ok.
template <class Fn>
vpki::ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const vpki::Error& e) {
    return e.code();
  }
  return vpki::ErrorCode::ok;
}

inline vpki::Topology one_domain(vpki::DomainPolicy policy = {}, std::size_t pcas = 1, std::size_t replicas = 1) {
  vpki::Topology t;
  t.domains.push_back(vpki::DomainSpec{"A", pcas, replicas, policy});
  return t;
}

inline vpki::Topology two_domains(vpki::DomainPolicy policy = {}) {
  vpki::Topology t;
  t.domains.push_back(vpki::DomainSpec{"A", 1, 1, policy});
  t.domains.push_back(vpki::DomainSpec{"B", 1, 1, policy});
  return t;
}

inline std::string temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("vpki-test-" + name + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

}  // namespace testing
