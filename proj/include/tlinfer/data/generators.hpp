#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "tlinfer/data/dataset.hpp"
#include "tlinfer/stl/trace.hpp"

namespace tlinfer::data {

namespace detail {

inline std::string trace_id(const char* prefix, std::size_t i) {
  std::string digits = std::to_string(i);
  if (digits.size() < 4) digits.insert(0, 4 - digits.size(), '0');
  return std::string(prefix) + digits;
}

inline void require_even(std::size_t n) {
  if (n == 0 || n % 2 != 0) throw std::invalid_argument("trace count must be even and >= 2");
}

inline std::string provenance(const char* kind, std::uint64_t seed) {
  return std::string("generator ") + kind + " seed " + std::to_string(seed);
}

}  // namespace detail

struct StepThresholdParams {
  std::size_t n = 100;
  std::size_t length = 20;
  double positive_level = 1.0;
  double negative_level = -0.8;
  double noise = 0.1;
};

/// Constant levels plus uniform noise: n/2 positive traces near
/// `positive_level`, n/2 negative near `negative_level`.
inline Dataset gen_step_threshold(const StepThresholdParams& p, std::uint64_t seed) {
  detail::require_even(p.n);
  if (p.length < 2) throw std::invalid_argument("trace length must be >= 2");
  if (!(p.noise >= 0.0)) throw std::invalid_argument("noise must be >= 0");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-p.noise, p.noise);
  Dataset ds;
  ds.feature_names = {"x0"};
  ds.provenance = detail::provenance("step-threshold", seed);
  for (std::size_t i = 0; i < p.n; ++i) {
    const bool pos = i < p.n / 2;
    std::vector<double> v(p.length);
    for (auto& x : v) x = (pos ? p.positive_level : p.negative_level) + (p.noise > 0.0 ? u(rng) : 0.0);
    ds.traces.emplace_back(detail::trace_id("s", i), 1, std::move(v), pos ? 1.0 : -1.0);
  }
  return ds;
}

struct CctParams {
  std::size_t n = 2000;
  std::size_t length = 100;
};

inline constexpr double kCruiseSpeed = 25.0;
inline constexpr double kCruiseBand = 2.5;
/// Every anomalous trace peaks above this speed.
inline constexpr double kAnomalyFloor = 34.05;
inline constexpr double kAnomalyCeiling = 50.0;

/// Simplified cruise-control traces of a single speed feature "v".
///
/// Normal traces: a sinusoid of amplitude 2 around 25 with random period and
/// phase, plus Ornstein-Uhlenbeck noise, clamped to [22.5, 27.5].
/// Anomalous traces: the same process, then from a random onset in
/// [T/4, T/2] a linear drift that reaches a peak drawn from [34.05, 50] at
/// the final step.
inline Dataset gen_cct(const CctParams& p, std::uint64_t seed) {
  detail::require_even(p.n);
  if (p.length < 4) throw std::invalid_argument("trace length must be >= 4");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> period(20.0, 40.0), phase(0.0, 2.0 * std::numbers::pi),
      peak(kAnomalyFloor, kAnomalyCeiling);
  std::normal_distribution<double> noise(0.0, 0.3);
  const std::size_t T = p.length;
  std::uniform_int_distribution<std::size_t> onset(T / 4, T / 2);
  Dataset ds;
  ds.feature_names = {"v"};
  ds.provenance = detail::provenance("cct", seed);
  for (std::size_t i = 0; i < p.n; ++i) {
    const bool normal = i < p.n / 2;
    const double per = period(rng), ph = phase(rng);
    std::vector<double> v(T);
    double ou = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      ou += -0.2 * ou + noise(rng);
      const double s = kCruiseSpeed + 2.0 * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / per + ph) + ou;
      v[t] = std::clamp(s, kCruiseSpeed - kCruiseBand, kCruiseSpeed + kCruiseBand);
    }
    if (!normal) {
      const std::size_t t0 = onset(rng);
      const double top = peak(rng);
      const double slope = (top - v[T - 1]) / static_cast<double>(T - 1 - t0);
      for (std::size_t t = t0; t < T; ++t) v[t] += slope * static_cast<double>(t - t0);
    }
    ds.traces.emplace_back(detail::trace_id("c", i), 1, std::move(v), normal ? 1.0 : -1.0);
  }
  return ds;
}

inline constexpr std::size_t kIntervalTraceLength = 7;

/// Seven-step traces of one feature "x0". Steps 0 and 6 are uniform in
/// [0, 1) for both classes. Negatives stay in [0, 0.5) on steps 1..5;
/// positives are in [0.5, 1] on steps 1..2 and in [0, 0.5) on steps 3..5.
inline Dataset gen_interval(std::size_t n, std::uint64_t seed) {
  detail::require_even(n);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> any(0.0, 1.0), low(0.0, 0.5),
      high(0.5, std::nextafter(1.0, 2.0));
  Dataset ds;
  ds.feature_names = {"x0"};
  ds.provenance = detail::provenance("interval", seed);
  for (std::size_t i = 0; i < n; ++i) {
    const bool pos = i < n / 2;
    std::vector<double> v(kIntervalTraceLength);
    v[0] = any(rng);
    for (std::size_t t = 1; t <= 5; ++t) v[t] = (pos && t <= 2) ? high(rng) : low(rng);
    v[6] = any(rng);
    ds.traces.emplace_back(detail::trace_id("i", i), 1, std::move(v), pos ? 1.0 : -1.0);
  }
  return ds;
}

}  // namespace tlinfer::data
