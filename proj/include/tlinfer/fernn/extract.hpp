#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

#include "tlinfer/ad/quantize.hpp"
#include "tlinfer/fernn/model.hpp"
#include "tlinfer/stl/formula.hpp"

namespace tlinfer::fernn {

/// Masked window reduction on non-negative inputs r[0..T] with weights
/// q_i = 1 (keep) or the drop value (-M for Once, +M for Hist), decided by
/// the sign of the real weight w_i.
inline double interval_cell_forward(IntervalKind kind, std::span<const double> r,
                                    std::span<const double> w, double drop_magnitude) {
  if (r.empty() || r.size() != w.size()) {
    throw std::invalid_argument("interval cell: inputs and weights must have equal non-zero length");
  }
  if (!(drop_magnitude > 0.0)) throw std::invalid_argument("interval cell: M must be > 0");
  const auto keep = ad::quantize_interval(w);
  const double drop = kind == IntervalKind::Once ? -drop_magnitude : drop_magnitude;
  double out = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (r[i] < 0.0) {
      throw std::invalid_argument("interval cell: negative input; shift inputs to be non-negative");
    }
    const double v = (keep[i] ? 1.0 : drop) * r[i];
    if (i == 0 || (kind == IntervalKind::Once ? v > out : v < out)) out = v;
  }
  return out;
}

/// Offsets kept by an interval cell's current weights.
inline stl::IntervalMask interval_mask(const Model& m, const IntervalCell& cell) {
  std::span<const double> w(m.params.data() + cell.weight_slot, cell.window + 1);
  const auto keep = ad::quantize_interval(w);
  std::vector<std::size_t> offsets;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i]) offsets.push_back(i);
  }
  return stl::IntervalMask::steps(std::move(offsets));
}

/// One-hot projection of a choice block's current weights.
inline ad::OneHot choice_selection(const Model& m, const ChoiceBlock& cell) {
  return ad::quantize_choice(
      std::span<const double>(m.params.data() + cell.weight_slot, cell.inputs.size()));
}

/// Atom of an atom cell expressed over raw (denormalized) features.
/// Single-feature atoms are rescaled to a unit weight, which keeps the sign
/// of the robustness and prints as a plain threshold.
inline stl::Atom raw_atom(const Model& m, const AtomCell& cell) {
  stl::Atom a;
  a.weights.assign(m.dim, 0.0);
  a.bias = m.params[cell.bias_slot];
  for (std::size_t i = 0; i < cell.features.size(); ++i) {
    const std::size_t k = cell.features[i];
    double w = m.params[cell.weight_slot + i];
    if (m.normalization) {
      const double range = m.normalization->range(k);
      a.bias -= w * m.normalization->min[k] / range;
      w /= range;
    }
    a.weights[k] += w;
  }
  if (cell.features.size() == 1) {
    const double scale = std::abs(a.weights[cell.features[0]]);
    if (scale > 0.0) {
      a.weights[cell.features[0]] /= scale;
      a.bias /= scale;
    }
  }
  return a;
}

struct ExtractOptions {
  /// Push negations to the atoms (exact in robust semantics). When false the
  /// raw reading is returned, with a Not wherever a choice picked B_j = -1.
  bool push_negations = false;
};

namespace detail {

inline stl::Formula extract_cell(const Model& m, CellId id) {
  return std::visit(
      [&](const auto& cell) -> stl::Formula {
        using K = std::decay_t<decltype(cell)>;
        if constexpr (std::is_same_v<K, AtomCell>) {
          return stl::Formula{stl::FormulaNode{raw_atom(m, cell)}};
        } else if constexpr (std::is_same_v<K, NotCell>) {
          return stl::negate(extract_cell(m, cell.in));
        } else if constexpr (std::is_same_v<K, AndCell>) {
          return stl::conj(extract_cell(m, cell.left), extract_cell(m, cell.right));
        } else if constexpr (std::is_same_v<K, OrCell>) {
          return stl::disj(extract_cell(m, cell.left), extract_cell(m, cell.right));
        } else if constexpr (std::is_same_v<K, OnceCell>) {
          return stl::once(extract_cell(m, cell.in));
        } else if constexpr (std::is_same_v<K, HistCell>) {
          return stl::hist(extract_cell(m, cell.in));
        } else if constexpr (std::is_same_v<K, SinceCell>) {
          return stl::since(extract_cell(m, cell.left), extract_cell(m, cell.right));
        } else if constexpr (std::is_same_v<K, ChoiceBlock>) {
          const auto q = choice_selection(m, cell);
          auto chosen = extract_cell(m, cell.inputs[q.index]);
          return q.sign < 0 ? stl::negate(std::move(chosen)) : chosen;
        } else {
          auto child = extract_cell(m, cell.in);
          auto mask = interval_mask(m, cell);
          return cell.kind == IntervalKind::Once ? stl::once(std::move(child), std::move(mask))
                                                 : stl::hist(std::move(child), std::move(mask));
        }
      },
      m.cells[id]);
}

}  // namespace detail

/// Reads the formula selected by the current quantized weights, with atoms
/// in raw feature units. Its robustness sign at the final step agrees with
/// the model output sign on every trace.
inline stl::Formula extract_formula(const Model& m, const ExtractOptions& opts = {}) {
  auto f = detail::extract_cell(m, m.output);
  return opts.push_negations ? stl::push_negations(f) : f;
}

}  // namespace tlinfer::fernn
