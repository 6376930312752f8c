#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tlinfer/data/dataset.hpp"
#include "tlinfer/stl/formula.hpp"
#include "tlinfer/stl/monitor.hpp"
#include "tlinfer/stl/text.hpp"

namespace tlinfer::enumerate {

struct OperatorSet {
  bool negation = true, conjunction = true, disjunction = true, once = true, hist = true, since = true;

  static OperatorSet all() { return {}; }
  static OperatorSet without_since() {
    OperatorSet s;
    s.since = false;
    return s;
  }
};

/// Formula shape over single-feature atoms with free thresholds.
/// Threshold slots are numbered by a left-to-right walk of the atoms.
struct Structure {
  enum class Kind { Ge, Le, Not, And, Or, Once, Hist, Since };
  Kind kind;
  std::size_t feature = 0;  // atoms only
  std::shared_ptr<const Structure> left, right;
  std::size_t length = 1;
  std::size_t slots = 1;
  std::string key;  // canonical text with slots shown as "_"

  bool is_atom() const noexcept { return kind == Kind::Ge || kind == Kind::Le; }
};

using StructurePtr = std::shared_ptr<const Structure>;

namespace detail {

inline StructurePtr make_atom(Structure::Kind k, std::size_t feature) {
  auto s = std::make_shared<Structure>();
  s->kind = k;
  s->feature = feature;
  s->key = "x" + std::to_string(feature) + (k == Structure::Kind::Ge ? " >= _" : " <= _");
  return s;
}

inline StructurePtr make_unary(Structure::Kind k, StructurePtr c) {
  auto s = std::make_shared<Structure>();
  s->kind = k;
  s->length = c->length + 1;
  s->slots = c->slots;
  const char* op = k == Structure::Kind::Not ? "!" : (k == Structure::Kind::Once ? "F " : "G ");
  s->key = std::string(op) + "(" + c->key + ")";
  s->left = std::move(c);
  return s;
}

inline StructurePtr make_binary(Structure::Kind k, StructurePtr a, StructurePtr b) {
  auto s = std::make_shared<Structure>();
  s->kind = k;
  s->length = a->length + b->length + 1;
  s->slots = a->slots + b->slots;
  const char* op = k == Structure::Kind::And ? " & " : (k == Structure::Kind::Or ? " | " : " S ");
  s->key = "(" + a->key + ")" + op + "(" + b->key + ")";
  s->left = std::move(a);
  s->right = std::move(b);
  return s;
}

inline stl::Formula build(const Structure& s, const std::vector<double>& th, std::size_t& next,
                          std::size_t dim) {
  using K = Structure::Kind;
  switch (s.kind) {
    case K::Ge: return stl::ge(s.feature, th.at(next++), dim);
    case K::Le: return stl::le(s.feature, th.at(next++), dim);
    case K::Not: return stl::negate(build(*s.left, th, next, dim));
    case K::Once: return stl::once(build(*s.left, th, next, dim));
    case K::Hist: return stl::hist(build(*s.left, th, next, dim));
    default: break;
  }
  auto l = build(*s.left, th, next, dim);
  auto r = build(*s.right, th, next, dim);
  if (s.kind == K::And) return stl::conj(std::move(l), std::move(r));
  if (s.kind == K::Or) return stl::disj(std::move(l), std::move(r));
  return stl::since(std::move(l), std::move(r));
}

// Feature of each slot in slot order.
inline void slot_features(const Structure& s, std::vector<std::size_t>& out) {
  if (s.is_atom()) {
    out.push_back(s.feature);
    return;
  }
  slot_features(*s.left, out);
  if (s.right) slot_features(*s.right, out);
}

}  // namespace detail

/// Formula with the given thresholds substituted in slot order.
inline stl::Formula instantiate(const Structure& s, const std::vector<double>& thresholds,
                                std::size_t dim) {
  if (thresholds.size() != s.slots) throw std::invalid_argument("instantiate: wrong threshold count");
  std::size_t next = 0;
  return detail::build(s, thresholds, next, dim);
}

struct StructureList {
  std::vector<StructurePtr> structures;
  bool truncated = false;
};

/// Every structure of length <= max_length over single-feature atoms
/// (x_k >= _ and x_k <= _) and the enabled operators. Double negations are
/// pruned and commutative operators keep one operand order. Stops at `cap`
/// structures: sets `truncated` when allowed, throws otherwise.
inline StructureList enumerate_structures(std::size_t max_length, std::size_t dim,
                                          const OperatorSet& ops = {}, std::size_t cap = 50'000,
                                          bool allow_truncation = false) {
  using K = Structure::Kind;
  if (max_length < 1) throw std::invalid_argument("maximum length must be >= 1");
  if (dim < 1) throw std::invalid_argument("feature count must be >= 1");
  StructureList out;
  std::vector<std::vector<StructurePtr>> by_length(max_length + 1);
  auto emit = [&](std::size_t len, StructurePtr s) {
    if (out.structures.size() >= cap) {
      if (!allow_truncation) {
        throw std::length_error("structure count exceeds cap " + std::to_string(cap));
      }
      out.truncated = true;
      return false;
    }
    out.structures.push_back(s);
    by_length[len].push_back(std::move(s));
    return true;
  };
  for (std::size_t k = 0; k < dim; ++k) {
    if (!emit(1, detail::make_atom(K::Ge, k)) || !emit(1, detail::make_atom(K::Le, k))) return out;
  }
  for (std::size_t len = 2; len <= max_length; ++len) {
    // emit() only appends to by_length[len], so iterating shorter lengths is safe.
    for (const auto& c : by_length[len - 1]) {
      if (ops.negation && c->kind != K::Not && !emit(len, detail::make_unary(K::Not, c))) return out;
      if (ops.once && !emit(len, detail::make_unary(K::Once, c))) return out;
      if (ops.hist && !emit(len, detail::make_unary(K::Hist, c))) return out;
    }
    for (std::size_t l1 = 1; l1 + 1 < len; ++l1) {
      const std::size_t l2 = len - 1 - l1;
      for (const auto& a : by_length[l1]) {
        for (const auto& b : by_length[l2]) {
          const bool ordered = l1 < l2 || (l1 == l2 && a->key <= b->key);
          if (ordered && ops.conjunction && !emit(len, detail::make_binary(K::And, a, b))) return out;
          if (ordered && ops.disjunction && !emit(len, detail::make_binary(K::Or, a, b))) return out;
          if (ops.since && !emit(len, detail::make_binary(K::Since, a, b))) return out;
        }
      }
    }
  }
  return out;
}

/// `points` evenly spaced thresholds from the smallest to the largest value
/// of each feature across the dataset.
inline std::vector<std::vector<double>> threshold_grid(const data::Dataset& ds, std::size_t points) {
  if (points < 2) throw std::invalid_argument("grid resolution must be >= 2");
  if (ds.empty()) throw std::invalid_argument("empty dataset");
  const std::size_t d = ds.dim();
  std::vector<double> lo(d, std::numeric_limits<double>::infinity()), hi(d, -std::numeric_limits<double>::infinity());
  for (const auto& tr : ds.traces) {
    for (std::size_t t = 0; t < tr.length(); ++t) {
      for (std::size_t k = 0; k < d; ++k) {
        lo[k] = std::min(lo[k], tr.at(t, k));
        hi[k] = std::max(hi[k], tr.at(t, k));
      }
    }
  }
  std::vector<std::vector<double>> grid(d);
  for (std::size_t k = 0; k < d; ++k) {
    for (std::size_t i = 0; i < points; ++i) {
      grid[k].push_back(i + 1 == points ? hi[k]
                                        : lo[k] + (hi[k] - lo[k]) * static_cast<double>(i) /
                                                      static_cast<double>(points - 1));
    }
  }
  return grid;
}

inline double formula_mcr(const stl::Formula& f, const data::Dataset& ds) {
  std::size_t wrong = 0;
  for (const auto& tr : ds.traces) {
    const int want = tr.label() >= 0.0 ? 1 : -1;
    wrong += stl::sign_of(stl::final_robustness(f, tr)) != want ? 1 : 0;
  }
  return static_cast<double>(wrong) / static_cast<double>(ds.size());
}

inline constexpr std::size_t kMaxFreeThresholds = 2;

struct Fit {
  std::vector<double> thresholds;
  double mcr = 1.0;
  stl::Formula formula;
};

/// Exhaustive grid search over threshold tuples; ties keep the
/// lexicographically smallest tuple of grid indices.
inline Fit fit_structure(const Structure& s, const data::Dataset& ds,
                         const std::vector<std::vector<double>>& grid) {
  if (s.slots > kMaxFreeThresholds) {
    throw std::invalid_argument("structure has " + std::to_string(s.slots) +
                                " free thresholds; the grid search supports at most " +
                                std::to_string(kMaxFreeThresholds));
  }
  if (ds.empty()) throw std::invalid_argument("empty dataset");
  std::vector<std::size_t> features;
  detail::slot_features(s, features);
  for (auto k : features) {
    if (k >= grid.size()) throw std::invalid_argument("grid has no thresholds for feature " + std::to_string(k));
  }
  std::vector<std::size_t> idx(s.slots, 0);
  std::optional<Fit> best;
  std::vector<double> th(s.slots);
  for (;;) {
    for (std::size_t i = 0; i < s.slots; ++i) th[i] = grid[features[i]][idx[i]];
    auto f = instantiate(s, th, ds.dim());
    const double mcr = formula_mcr(f, ds);
    if (!best || mcr < best->mcr) best = Fit{th, mcr, std::move(f)};
    // Odometer over index tuples in lexicographic order.
    std::size_t pos = s.slots;
    while (pos > 0) {
      --pos;
      if (++idx[pos] < grid[features[pos]].size()) break;
      idx[pos] = 0;
      if (pos == 0) return *best;
    }
    if (s.slots == 0) return *best;
  }
}

struct EnumConfig {
  std::size_t max_length = 2;
  std::size_t grid_points = 25;
  OperatorSet ops;
  bool early_exit = true;
  double target_mcr = 0.2;
  std::size_t structure_cap = 50'000;

  void validate() const {
    if (max_length < 1) throw std::invalid_argument("maximum length must be >= 1");
    if (grid_points < 2) throw std::invalid_argument("grid resolution must be >= 2");
  }
};

struct EnumReport {
  std::optional<stl::Formula> formula;
  std::string formula_text;
  double mcr = 1.0;
  std::size_t structures_total = 0;
  std::size_t structures_tried = 0;
  std::size_t structures_skipped = 0;  // too many free thresholds
  bool truncated = false;
  bool early_exit = false;
  double wall_seconds = 0.0;
  EnumConfig config;
};

/// Best grid-fitted formula over all enumerated structures, by (MCR,
/// canonical text). With early exit, stops at the first structure whose MCR
/// is below the target.
inline EnumReport run(const data::Dataset& ds, const EnumConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  cfg.validate();
  if (ds.empty()) throw std::invalid_argument("empty dataset");
  ds.validate();
  if (ds.label_kind != data::LabelKind::Binary) throw std::invalid_argument("enumeration needs binary labels");
  const auto list = enumerate_structures(cfg.max_length, ds.dim(), cfg.ops, cfg.structure_cap, true);
  const auto grid = threshold_grid(ds, cfg.grid_points);
  stl::FormatOptions fmt;
  fmt.feature_names = ds.feature_names;

  EnumReport rep;
  rep.config = cfg;
  rep.structures_total = list.structures.size();
  rep.truncated = list.truncated;
  for (const auto& s : list.structures) {
    if (s->slots > kMaxFreeThresholds) {
      ++rep.structures_skipped;
      continue;
    }
    ++rep.structures_tried;
    auto fit = fit_structure(*s, ds, grid);
    std::string text = stl::format(fit.formula, fmt);
    if (!rep.formula || fit.mcr < rep.mcr || (fit.mcr == rep.mcr && text < rep.formula_text)) {
      rep.formula = fit.formula;
      rep.formula_text = std::move(text);
      rep.mcr = fit.mcr;
    }
    if (cfg.early_exit && fit.mcr < cfg.target_mcr) {
      rep.early_exit = true;
      break;
    }
  }
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace tlinfer::enumerate
