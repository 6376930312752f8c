#pragma once

// Test-side oracles and random generators. Nothing here calls the monitor:
// robustness is recomputed from the max/min definitions with plain loops.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <utility>
#include <string>
#include <vector>

#include "tlinfer/ad/tape.hpp"
#include "tlinfer/stl/formula.hpp"
#include "tlinfer/stl/trace.hpp"

namespace tlinfer::testkit {

/// Robustness at step t straight from the windowed definitions.
/// `boolean` replaces atoms by their sign (0 -> +1) and uses 1 as infinity.
inline double oracle_robustness(const stl::Formula& f, const stl::Trace& tr, std::size_t t, double horizon = 1e6,
                                bool boolean = false) {
  const double inf = boolean ? 1.0 : horizon;
  const auto& v = f.node().value;
  if (const auto* a = std::get_if<stl::Atom>(&v)) {
    double s = a->bias;
    for (std::size_t k = 0; k < a->weights.size(); ++k) s += a->weights[k] * tr.at(t, k);
    return boolean ? (s >= 0.0 ? 1.0 : -1.0) : s;
  }
  auto rec = [&](const stl::Formula& g, std::size_t u) { return oracle_robustness(g, tr, u, horizon, boolean); };
  if (const auto* n = std::get_if<stl::Not>(&v)) return -rec(n->child, t);
  if (const auto* n = std::get_if<stl::And>(&v)) return std::min(rec(n->left, t), rec(n->right, t));
  if (const auto* n = std::get_if<stl::Or>(&v)) return std::max(rec(n->left, t), rec(n->right, t));
  if (const auto* n = std::get_if<stl::Once>(&v)) {
    double best = -inf;
    for (std::size_t k = 0; k <= t; ++k) {
      if (n->mask.contains(k)) best = std::max(best, rec(n->child, t - k));
    }
    return best;
  }
  if (const auto* n = std::get_if<stl::Hist>(&v)) {
    double best = inf;
    for (std::size_t k = 0; k <= t; ++k) {
      if (n->mask.contains(k)) best = std::min(best, rec(n->child, t - k));
    }
    return best;
  }
  const auto& s = std::get<stl::Since>(v);
  double best = -inf;
  for (std::size_t k = 0; k <= t; ++k) {
    if (!s.mask.contains(k)) continue;
    const std::size_t start = t - k;
    double run = rec(s.right, start);
    for (std::size_t j = start; j <= t; ++j) run = std::min(run, rec(s.left, j));
    best = std::max(best, run);
  }
  return best;
}

inline std::vector<double> oracle_signal(const stl::Formula& f, const stl::Trace& tr, double horizon = 1e6,
                                         bool boolean = false) {
  std::vector<double> out;
  for (std::size_t t = 0; t < tr.length(); ++t) out.push_back(oracle_robustness(f, tr, t, horizon, boolean));
  return out;
}

struct FormulaGen {
  std::size_t dim = 1;
  std::size_t max_depth = 3;
  bool bounded = false;     // allow bounded masks on F, G and S
  bool since = true;
  bool unit_atoms = false;  // atoms x_k >= c / x_k <= c only
};

inline stl::Formula random_atom(std::mt19937_64& rng, const FormulaGen& g) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  if (g.unit_atoms) {
    std::uniform_int_distribution<std::size_t> feat(0, g.dim - 1);
    const std::size_t k = feat(rng);
    return (rng() & 1) ? stl::ge(k, u(rng), g.dim) : stl::le(k, u(rng), g.dim);
  }
  std::vector<double> w(g.dim);
  for (auto& x : w) x = u(rng);
  return stl::atom(std::move(w), u(rng));
}

inline stl::IntervalMask random_mask(std::mt19937_64& rng, const FormulaGen& g) {
  if (!g.bounded || (rng() % 3) == 0) return stl::IntervalMask::unbounded();
  std::vector<std::size_t> offs;
  for (std::size_t k = 0; k < 6; ++k) {
    if (rng() & 1) offs.push_back(k);
  }
  if (offs.empty()) offs.push_back(rng() % 6);
  return stl::IntervalMask::steps(offs);
}

inline stl::Formula random_formula(std::mt19937_64& rng, const FormulaGen& g, std::size_t depth = 0) {
  if (depth >= g.max_depth || (depth > 0 && rng() % 4 == 0)) return random_atom(rng, g);
  const auto op = rng() % (g.since ? 6 : 5);
  auto sub = [&] { return random_formula(rng, g, depth + 1); };
  switch (op) {
    case 0: return stl::negate(sub());
    case 1: return stl::conj(sub(), sub());
    case 2: return stl::disj(sub(), sub());
    case 3: return stl::once(sub(), random_mask(rng, g));
    case 4: return stl::hist(sub(), random_mask(rng, g));
    default: {
      auto l = sub();
      auto r = sub();
      return stl::since(std::move(l), std::move(r), random_mask(rng, g));
    }
  }
}

inline stl::Trace random_trace(std::mt19937_64& rng, std::size_t dim, std::size_t length, double lo = -2.0,
                               double hi = 2.0, std::string id = "r") {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(dim * length);
  for (auto& x : v) x = u(rng);
  return stl::Trace(std::move(id), dim, std::move(v));
}

/// Fresh empty directory under the system temp path.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("tlinfer_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

using Kink = std::pair<ad::NodeId, ad::NodeId>;

// Random quantize-free expression over parameter leaves. Records the input
// pair of every min/max node so callers can check for ties.
struct RandomNet {
  std::size_t slots;
  std::uint64_t shape_seed;

  ad::NodeId build(ad::Tape& t, std::span<const double> p, std::vector<Kink>& kinks) const {
    std::mt19937_64 rng(shape_seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<ad::NodeId> pool;
    for (std::size_t i = 0; i < slots; ++i) pool.push_back(t.parameter(i, p[i]));
    pool.push_back(t.constant(u(rng)));
    for (int k = 0; k < 25; ++k) {
      auto pick = [&] { return pool[rng() % pool.size()]; };
      ad::NodeId n;
      switch (rng() % 7) {
        case 0: n = t.add(pick(), pick()); break;
        case 1: n = t.mul(pick(), pick()); break;
        case 2: n = t.neg(pick()); break;
        case 3:
        case 4: {
          const ad::NodeId a = pick(), b = pick();
          n = (k % 2) ? t.min2(a, b) : t.max2(a, b);
          if (a != b) kinks.emplace_back(a, b);
          break;
        }
        case 5: n = t.tanh(pick()); break;
        default: {
          const ad::NodeId w[] = {pick(), pick()};
          const double x[] = {u(rng), u(rng)};
          n = t.affine(w, pick(), x);
        }
      }
      pool.push_back(n);
    }
    // Sum the last few nodes so most of the graph reaches the output.
    ad::NodeId out = pool.back();
    for (std::size_t i = pool.size() - 6; i + 1 < pool.size(); ++i) out = t.add(out, t.tanh(pool[i]));
    return out;
  }

  double value(std::span<const double> p) const {
    ad::Tape t;
    std::vector<Kink> kinks;
    const auto out = build(t, p, kinks);
    t.forward();
    return t.value(out);
  }
};

}  // namespace tlinfer::testkit
