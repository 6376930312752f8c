#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "tlinfer/ad/tape.hpp"
#include "tlinfer/stl/monitor.hpp"
#include "tlinfer/stl/trace.hpp"

namespace tlinfer::fernn {

using CellId = std::size_t;

enum class ParamRole : std::uint8_t { AtomWeight, AtomBias, ChoiceWeight, IntervalWeight };

/// Affine atom over a subset of features: sum_k w_k x[features_k] + b.
struct AtomCell {
  std::vector<std::size_t> features;
  std::size_t weight_slot;  // features.size() consecutive slots
  std::size_t bias_slot;
  friend bool operator==(const AtomCell&, const AtomCell&) = default;
};
struct NotCell {
  CellId in;
  friend bool operator==(const NotCell&, const NotCell&) = default;
};
struct AndCell {
  CellId left, right;
  friend bool operator==(const AndCell&, const AndCell&) = default;
};
struct OrCell {
  CellId left, right;
  friend bool operator==(const OrCell&, const OrCell&) = default;
};
struct OnceCell {
  CellId in;
  friend bool operator==(const OnceCell&, const OnceCell&) = default;
};
struct HistCell {
  CellId in;
  friend bool operator==(const HistCell&, const HistCell&) = default;
};
struct SinceCell {
  CellId left, right;
  friend bool operator==(const SinceCell&, const SinceCell&) = default;
};
/// Multiplexer over candidate robustness signals with one-hot quantized weights.
struct ChoiceBlock {
  std::vector<CellId> inputs;
  std::size_t weight_slot;  // inputs.size() consecutive slots
  friend bool operator==(const ChoiceBlock&, const ChoiceBlock&) = default;
};

enum class IntervalKind : std::uint8_t { Once, Hist };

/// Bounded Once/Hist whose window offsets 0..window are learned keep/drop weights.
struct IntervalCell {
  IntervalKind kind;
  CellId in;
  std::size_t window;
  std::size_t weight_slot;  // window + 1 consecutive slots
  double drop_magnitude;
  friend bool operator==(const IntervalCell&, const IntervalCell&) = default;
};

using Cell = std::variant<AtomCell, NotCell, AndCell, OrCell, OnceCell, HistCell, SinceCell,
                          ChoiceBlock, IntervalCell>;

enum class Head : std::uint8_t { Tanh, Identity };

/// Per-feature min/max used to map raw features into [0, 1].
struct Normalization {
  std::vector<double> min, max;

  double range(std::size_t k) const {
    const double r = max[k] - min[k];
    return r > 0.0 ? r : 1.0;
  }
  double apply(std::size_t k, double x) const { return (x - min[k]) / range(k); }

  static Normalization fit(const std::vector<stl::Trace>& traces) {
    if (traces.empty()) throw std::invalid_argument("normalization: no traces");
    const std::size_t d = traces.front().dim();
    Normalization n{std::vector<double>(d, INFINITY), std::vector<double>(d, -INFINITY)};
    for (const auto& tr : traces) {
      for (std::size_t t = 0; t < tr.length(); ++t) {
        for (std::size_t k = 0; k < d; ++k) {
          n.min[k] = std::min(n.min[k], tr.at(t, k));
          n.max[k] = std::max(n.max[k], tr.at(t, k));
        }
      }
    }
    return n;
  }

  friend bool operator==(const Normalization&, const Normalization&) = default;
};

/// Trainable FERNN computation graph plus its parameter values.
///
/// Cells are stored in topological order: every cell's inputs have smaller
/// ids. The output cell's value at the final step, passed through the head,
/// is the model output.
struct Model {
  std::size_t dim = 1;
  std::vector<Cell> cells;
  CellId output = 0;
  Head head = Head::Tanh;
  std::optional<Normalization> normalization;
  std::vector<double> params;
  std::vector<ParamRole> roles;
  double horizon = stl::kDefaultHorizon;
  /// Forward with one-hot quantized choice weights; false uses the raw weights.
  bool quantized = true;

  std::size_t choice_count() const {
    std::size_t n = 0;
    for (const auto& c : cells) n += std::holds_alternative<ChoiceBlock>(c) ? 1 : 0;
    return n;
  }

  /// 2^N for N choice blocks; saturates at 2^63.
  std::uint64_t embedded_structures() const {
    const std::size_t n = choice_count();
    return n >= 63 ? (std::uint64_t{1} << 63) : (std::uint64_t{1} << n);
  }

  friend bool operator==(const Model&, const Model&) = default;
};

/// Incrementally assembles a Model, allocating and initializing parameters.
///
/// Initialization: choice weights U[0.4, 0.6], atom weights |U[-1, 1]| with
/// the requested direction sign, atom biases U[0, 1], interval weights
/// U[0.5, 1] (every step kept).
class ModelBuilder {
 public:
  ModelBuilder(std::size_t dim, std::uint64_t seed) : rng_(seed) { model_.dim = dim; }

  /// Single-feature atom with a free weight of sign `direction` (+1 reads
  /// "x >= c", -1 reads "x <= c").
  CellId atom(std::size_t feature, int direction) {
    if (feature >= model_.dim) throw std::invalid_argument("atom: feature out of range");
    std::uniform_real_distribution<double> u(-1.0, 1.0), b(0.0, 1.0);
    double w = std::abs(u(rng_));
    if (w < 0.05) w = 0.05;
    return atom_fixed({feature}, {direction >= 0 ? w : -w}, b(rng_));
  }

  /// Single-feature atom whose weight starts with a random sign.
  CellId atom_free(std::size_t feature) {
    if (feature >= model_.dim) throw std::invalid_argument("atom: feature out of range");
    std::uniform_real_distribution<double> u(-1.0, 1.0), b(0.0, 1.0);
    double w = u(rng_);
    if (std::abs(w) < 0.05) w = w < 0.0 ? -0.05 : 0.05;
    return atom_fixed({feature}, {w}, b(rng_));
  }

  CellId atom_fixed(std::vector<std::size_t> features, std::vector<double> weights, double bias) {
    if (features.empty() || features.size() != weights.size()) {
      throw std::invalid_argument("atom: features and weights must match");
    }
    for (auto k : features) {
      if (k >= model_.dim) throw std::invalid_argument("atom: feature out of range");
    }
    const std::size_t ws = alloc(weights, ParamRole::AtomWeight);
    const std::size_t bs = alloc({bias}, ParamRole::AtomBias);
    return add(AtomCell{std::move(features), ws, bs});
  }

  CellId negation(CellId in) { return add(NotCell{check(in)}); }
  CellId conjunction(CellId l, CellId r) { return add(AndCell{check(l), check(r)}); }
  CellId disjunction(CellId l, CellId r) { return add(OrCell{check(l), check(r)}); }
  CellId once(CellId in) { return add(OnceCell{check(in)}); }
  CellId hist(CellId in) { return add(HistCell{check(in)}); }
  CellId since(CellId l, CellId r) { return add(SinceCell{check(l), check(r)}); }

  CellId choice(std::vector<CellId> inputs) {
    std::uniform_real_distribution<double> u(0.4, 0.6);
    std::vector<double> w(inputs.size());
    for (auto& x : w) x = u(rng_);
    return choice_fixed(std::move(inputs), std::move(w));
  }

  CellId choice_fixed(std::vector<CellId> inputs, std::vector<double> weights) {
    if (inputs.empty() || inputs.size() != weights.size()) {
      throw std::invalid_argument("choice: inputs and weights must have equal non-zero length");
    }
    for (auto in : inputs) check(in);
    const std::size_t ws = alloc(weights, ParamRole::ChoiceWeight);
    return add(ChoiceBlock{std::move(inputs), ws});
  }

  CellId interval(IntervalKind kind, CellId in, std::size_t window,
                  double drop_magnitude = stl::kDefaultHorizon) {
    std::uniform_real_distribution<double> u(0.5, 1.0);
    std::vector<double> w(window + 1);
    for (auto& x : w) x = u(rng_);
    return interval_fixed(kind, in, window, std::move(w), drop_magnitude);
  }

  CellId interval_fixed(IntervalKind kind, CellId in, std::size_t window,
                        std::vector<double> weights, double drop_magnitude = stl::kDefaultHorizon) {
    if (weights.size() != window + 1) throw std::invalid_argument("interval: need window+1 weights");
    if (!(drop_magnitude > 0.0)) throw std::invalid_argument("interval: drop magnitude must be > 0");
    const std::size_t ws = alloc(weights, ParamRole::IntervalWeight);
    return add(IntervalCell{kind, check(in), window, ws, drop_magnitude});
  }

  std::size_t size() const noexcept { return model_.cells.size(); }

  Model finish(CellId output, Head head = Head::Tanh) && {
    model_.output = check(output);
    model_.head = head;
    return std::move(model_);
  }

 private:
  CellId check(CellId id) const {
    if (id >= model_.cells.size()) throw std::invalid_argument("cell input refers to unknown cell");
    return id;
  }

  CellId add(Cell c) {
    model_.cells.push_back(std::move(c));
    return model_.cells.size() - 1;
  }

  std::size_t alloc(const std::vector<double>& values, ParamRole role) {
    const std::size_t slot = model_.params.size();
    model_.params.insert(model_.params.end(), values.begin(), values.end());
    model_.roles.insert(model_.roles.end(), values.size(), role);
    return slot;
  }

  Model model_;
  std::mt19937_64 rng_;
};

/// Applies the model's normalization record, if any.
inline stl::Trace normalize_trace(const Model& m, const stl::Trace& tr) {
  if (tr.dim() != m.dim) {
    throw std::invalid_argument("dimension mismatch: model expects " + std::to_string(m.dim) +
                                " features, trace '" + tr.id() + "' has " +
                                std::to_string(tr.dim()));
  }
  if (!m.normalization) return tr;
  std::vector<double> v(tr.values());
  for (std::size_t t = 0; t < tr.length(); ++t) {
    for (std::size_t k = 0; k < tr.dim(); ++k) v[t * tr.dim() + k] = m.normalization->apply(k, tr.at(t, k));
  }
  return stl::Trace(tr.id(), tr.dim(), std::move(v), tr.label());
}

/// Records the model unrolled over every step of an already-normalized trace
/// onto `tape` and returns the head output node at the final step.
inline ad::NodeId unroll(const Model& m, const stl::Trace& tr, ad::Tape& tape) {
  if (tr.dim() != m.dim) throw std::invalid_argument("dimension mismatch in unroll");
  const std::size_t T = tr.length();
  const std::size_t C = m.cells.size();

  std::vector<ad::NodeId> param(m.params.size());
  for (std::size_t i = 0; i < m.params.size(); ++i) param[i] = tape.parameter(i, m.params[i]);
  const ad::NodeId low = tape.constant(-m.horizon);
  const ad::NodeId high = tape.constant(m.horizon);

  std::vector<ad::NodeId> node(C * T);
  auto at = [&](CellId c, std::size_t t) { return node[c * T + t]; };
  std::vector<ad::NodeId> ids;
  std::vector<double> xs;

  for (std::size_t t = 0; t < T; ++t) {
    for (CellId c = 0; c < C; ++c) {
      ad::NodeId out = std::visit(
          [&](const auto& cell) -> ad::NodeId {
            using K = std::decay_t<decltype(cell)>;
            if constexpr (std::is_same_v<K, AtomCell>) {
              ids.assign(param.begin() + static_cast<std::ptrdiff_t>(cell.weight_slot),
                         param.begin() + static_cast<std::ptrdiff_t>(cell.weight_slot + cell.features.size()));
              xs.clear();
              for (auto k : cell.features) xs.push_back(tr.at(t, k));
              return tape.affine(ids, param[cell.bias_slot], xs);
            } else if constexpr (std::is_same_v<K, NotCell>) {
              return tape.neg(at(cell.in, t));
            } else if constexpr (std::is_same_v<K, AndCell>) {
              return tape.min2(at(cell.left, t), at(cell.right, t));
            } else if constexpr (std::is_same_v<K, OrCell>) {
              return tape.max2(at(cell.left, t), at(cell.right, t));
            } else if constexpr (std::is_same_v<K, OnceCell>) {
              return tape.max2(at(cell.in, t), t == 0 ? low : at(c, t - 1));
            } else if constexpr (std::is_same_v<K, HistCell>) {
              return tape.min2(at(cell.in, t), t == 0 ? high : at(c, t - 1));
            } else if constexpr (std::is_same_v<K, SinceCell>) {
              return tape.min2(at(cell.left, t), tape.max2(t == 0 ? low : at(c, t - 1), at(cell.right, t)));
            } else if constexpr (std::is_same_v<K, ChoiceBlock>) {
              ids.clear();
              for (auto in : cell.inputs) ids.push_back(at(in, t));
              std::vector<ad::NodeId> ws(param.begin() + static_cast<std::ptrdiff_t>(cell.weight_slot),
                                         param.begin() + static_cast<std::ptrdiff_t>(cell.weight_slot + cell.inputs.size()));
              return tape.choice(ids, ws, m.quantized);
            } else {
              const std::size_t avail = std::min(cell.window, t) + 1;
              ids.clear();
              for (std::size_t i = 0; i < avail; ++i) ids.push_back(at(cell.in, t - i));
              std::vector<ad::NodeId> ws(param.begin() + static_cast<std::ptrdiff_t>(cell.weight_slot),
                                         param.begin() + static_cast<std::ptrdiff_t>(cell.weight_slot + cell.window + 1));
              return tape.window(cell.kind == IntervalKind::Once ? ad::WindowKind::Max : ad::WindowKind::Min,
                                 ids, ws, cell.drop_magnitude);
            }
          },
          m.cells[c]);
      node[c * T + t] = out;
    }
  }
  const ad::NodeId last = at(m.output, T - 1);
  return m.head == Head::Tanh ? tape.tanh(last) : last;
}

struct ForwardResult {
  double output;
  ad::Tape tape;
  ad::NodeId output_node;
};

/// Model output on a raw trace (normalization applied internally).
inline ForwardResult forward_model(const Model& m, const stl::Trace& tr) {
  ForwardResult r{0.0, ad::Tape{}, 0};
  r.output_node = unroll(m, normalize_trace(m, tr), r.tape);
  r.tape.forward();
  r.output = r.tape.value(r.output_node);
  return r;
}

/// Output cell value at every step, before the head (normalized trace input).
inline std::vector<double> output_signal(const Model& m, const stl::Trace& tr) {
  std::vector<double> out;
  const stl::Trace norm = normalize_trace(m, tr);
  Model copy = m;
  copy.head = Head::Identity;
  for (std::size_t t = 1; t <= norm.length(); ++t) {
    std::vector<double> prefix(norm.values().begin(),
                               norm.values().begin() + static_cast<std::ptrdiff_t>(t * norm.dim()));
    stl::Trace p(norm.id(), norm.dim(), std::move(prefix));
    ad::Tape tape;
    const auto id = unroll(copy, p, tape);
    tape.forward();
    out.push_back(tape.value(id));
  }
  return out;
}

}  // namespace tlinfer::fernn
