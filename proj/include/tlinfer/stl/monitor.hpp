#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "tlinfer/stl/formula.hpp"
#include "tlinfer/stl/trace.hpp"

namespace tlinfer::stl {

/// Finite surrogate for infinity used by empty windows and recurrence memory.
inline constexpr double kDefaultHorizon = 1e6;

struct MonitorOptions {
  double horizon = kDefaultHorizon;
};

namespace detail {

inline void check_dimension(const Atom& a, const Trace& tr) {
  if (a.weights.size() != tr.dim()) {
    throw std::invalid_argument("dimension mismatch: atom has " + std::to_string(a.weights.size()) +
                                " weights, trace '" + tr.id() + "' has " +
                                std::to_string(tr.dim()) + " features");
  }
}

inline double atom_value(const Atom& a, const Trace& tr, std::size_t t) {
  double v = a.bias;
  auto x = tr.row(t);
  for (std::size_t k = 0; k < x.size(); ++k) v += a.weights[k] * x[k];
  return v;
}

/// Windowed evaluation: every operator is computed from its definition as a
/// max/min over the mask-selected past offsets. `atom_fn` maps the atom's
/// affine value (allows the boolean special case).
template <class AtomFn>
std::vector<double> windowed(const Formula& f, const Trace& tr, double H, const AtomFn& atom_fn) {
  const std::size_t T = tr.length();
  return std::visit(
      [&](const auto& n) -> std::vector<double> {
        using N = std::decay_t<decltype(n)>;
        std::vector<double> out(T);
        if constexpr (std::is_same_v<N, Atom>) {
          check_dimension(n, tr);
          for (std::size_t t = 0; t < T; ++t) out[t] = atom_fn(atom_value(n, tr, t));
        } else if constexpr (std::is_same_v<N, Not>) {
          auto c = windowed(n.child, tr, H, atom_fn);
          for (std::size_t t = 0; t < T; ++t) out[t] = -c[t];
        } else if constexpr (std::is_same_v<N, And> || std::is_same_v<N, Or>) {
          auto l = windowed(n.left, tr, H, atom_fn);
          auto r = windowed(n.right, tr, H, atom_fn);
          for (std::size_t t = 0; t < T; ++t) {
            out[t] = std::is_same_v<N, And> ? std::min(l[t], r[t]) : std::max(l[t], r[t]);
          }
        } else if constexpr (std::is_same_v<N, Once> || std::is_same_v<N, Hist>) {
          constexpr bool is_once = std::is_same_v<N, Once>;
          auto c = windowed(n.child, tr, H, atom_fn);
          for (std::size_t t = 0; t < T; ++t) {
            double acc = is_once ? -H : H;
            for (std::size_t k = 0; k <= t; ++k) {
              if (!n.mask.contains(k)) continue;
              acc = is_once ? std::max(acc, c[t - k]) : std::min(acc, c[t - k]);
            }
            out[t] = acc;
          }
        } else {
          // sup over t' in t - I of min(psi[t'], min over [t', t] of phi)
          auto phi = windowed(n.left, tr, H, atom_fn);
          auto psi = windowed(n.right, tr, H, atom_fn);
          for (std::size_t t = 0; t < T; ++t) {
            double acc = -H;
            double run_min = H;
            for (std::size_t k = 0; k <= t; ++k) {
              const std::size_t tp = t - k;
              run_min = std::min(run_min, phi[tp]);
              if (n.mask.contains(k)) acc = std::max(acc, std::min(psi[tp], run_min));
            }
            out[t] = acc;
          }
        }
        return out;
      },
      f.node().value);
}

template <class AtomFn>
std::vector<double> recurrent(const Formula& f, const Trace& tr, double H, const AtomFn& atom_fn) {
  const std::size_t T = tr.length();
  return std::visit(
      [&](const auto& n) -> std::vector<double> {
        using N = std::decay_t<decltype(n)>;
        std::vector<double> out(T);
        if constexpr (std::is_same_v<N, Atom>) {
          check_dimension(n, tr);
          for (std::size_t t = 0; t < T; ++t) out[t] = atom_fn(atom_value(n, tr, t));
        } else if constexpr (std::is_same_v<N, Not>) {
          auto c = recurrent(n.child, tr, H, atom_fn);
          for (std::size_t t = 0; t < T; ++t) out[t] = -c[t];
        } else if constexpr (std::is_same_v<N, And> || std::is_same_v<N, Or>) {
          auto l = recurrent(n.left, tr, H, atom_fn);
          auto r = recurrent(n.right, tr, H, atom_fn);
          for (std::size_t t = 0; t < T; ++t) {
            out[t] = std::is_same_v<N, And> ? std::min(l[t], r[t]) : std::max(l[t], r[t]);
          }
        } else if constexpr (std::is_same_v<N, Once> || std::is_same_v<N, Hist>) {
          if (!n.mask.is_unbounded()) {
            throw std::invalid_argument("recurrent evaluation requires unbounded operators");
          }
          auto c = recurrent(n.child, tr, H, atom_fn);
          double mem = std::is_same_v<N, Once> ? -H : H;
          for (std::size_t t = 0; t < T; ++t) {
            mem = std::is_same_v<N, Once> ? std::max(c[t], mem) : std::min(c[t], mem);
            out[t] = mem;
          }
        } else {
          if (!n.mask.is_unbounded()) {
            throw std::invalid_argument("recurrent evaluation requires unbounded operators");
          }
          auto phi = recurrent(n.left, tr, H, atom_fn);
          auto psi = recurrent(n.right, tr, H, atom_fn);
          double mem = -H;
          for (std::size_t t = 0; t < T; ++t) {
            mem = std::min(phi[t], std::max(mem, psi[t]));
            out[t] = mem;
          }
        }
        return out;
      },
      f.node().value);
}

struct Identity {
  double operator()(double v) const noexcept { return v; }
};

struct SignOf {
  double operator()(double v) const noexcept { return v >= 0.0 ? 1.0 : -1.0; }
};

}  // namespace detail

/// Robustness signal of `f` over `tr`, computed from the windowed definitions.
inline std::vector<double> robustness(const Formula& f, const Trace& tr,
                                      const MonitorOptions& opts = {}) {
  return detail::windowed(f, tr, opts.horizon, detail::Identity{});
}

/// Robustness signal via single-memory recurrences; unbounded operators only.
inline std::vector<double> robustness_recurrent(const Formula& f, const Trace& tr,
                                                const MonitorOptions& opts = {}) {
  return detail::recurrent(f, tr, opts.horizon, detail::Identity{});
}

/// Robustness at the final step, using the recurrence when possible.
inline double final_robustness(const Formula& f, const Trace& tr,
                               const MonitorOptions& opts = {}) {
  return is_unbounded(f) ? robustness_recurrent(f, tr, opts).back()
                         : robustness(f, tr, opts).back();
}

/// Boolean semantics: atoms are replaced by their sign (0 -> +1) and the
/// robust min/max rules are applied unchanged, with unit-valued empty windows.
inline int boolean_eval(const Formula& f, const Trace& tr, std::size_t t) {
  if (t >= tr.length()) throw std::out_of_range("boolean_eval: step beyond trace length");
  return detail::windowed(f, tr, 1.0, detail::SignOf{})[t] >= 0.0 ? 1 : -1;
}

/// Boolean semantics at every step.
inline std::vector<double> boolean_signal(const Formula& f, const Trace& tr) {
  return detail::windowed(f, tr, 1.0, detail::SignOf{});
}

/// Classification sign convention: 0 counts as satisfied.
inline int sign_of(double v) noexcept { return v >= 0.0 ? 1 : -1; }

}  // namespace tlinfer::stl
