#pragma once

#include <algorithm>
#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

namespace tlinfer::stl {

/// Set of past step offsets a temporal operator ranges over.
///
/// Unbounded covers every offset 0..t. A step set is a sorted, duplicate-free,
/// non-empty list of offsets; holes are allowed ({0,1,5,6,7}).
class IntervalMask {
 public:
  IntervalMask() = default;

  static IntervalMask unbounded() { return IntervalMask{}; }

  static IntervalMask steps(std::vector<std::size_t> offsets) {
    if (offsets.empty()) {
      throw std::invalid_argument("interval mask: step set must be non-empty");
    }
    std::sort(offsets.begin(), offsets.end());
    if (std::adjacent_find(offsets.begin(), offsets.end()) != offsets.end()) {
      throw std::invalid_argument("interval mask: duplicate step offset");
    }
    IntervalMask m;
    m.bounded_ = true;
    m.offsets_ = std::move(offsets);
    return m;
  }

  /// Contiguous closed range [first, last].
  static IntervalMask range(std::size_t first, std::size_t last) {
    if (first > last) {
      throw std::invalid_argument("interval mask: lower bound exceeds upper bound");
    }
    std::vector<std::size_t> offsets;
    for (std::size_t k = first; k <= last; ++k) offsets.push_back(k);
    return steps(std::move(offsets));
  }

  bool is_unbounded() const noexcept { return !bounded_; }
  const std::vector<std::size_t>& offsets() const noexcept { return offsets_; }

  bool contiguous() const noexcept {
    return bounded_ && offsets_.back() - offsets_.front() + 1 == offsets_.size();
  }

  bool contains(std::size_t k) const noexcept {
    return !bounded_ || std::binary_search(offsets_.begin(), offsets_.end(), k);
  }

  friend bool operator==(const IntervalMask&, const IntervalMask&) = default;

 private:
  bool bounded_ = false;
  std::vector<std::size_t> offsets_;
};

struct FormulaNode;

/// Immutable ptSTL formula tree. Copies share structure.
class Formula {
 public:
  explicit Formula(FormulaNode node);

  const FormulaNode& node() const noexcept { return *node_; }

  template <class T>
  const T* as() const noexcept;

  template <class T>
  bool is() const noexcept {
    return as<T>() != nullptr;
  }

  friend bool operator==(const Formula& a, const Formula& b);

 private:
  std::shared_ptr<const FormulaNode> node_;
};

/// Linear predicate weights . x[t] + bias >= 0.
struct Atom {
  std::vector<double> weights;
  double bias = 0.0;
  friend bool operator==(const Atom&, const Atom&) = default;
};
struct Not {
  Formula child;
};
struct And {
  Formula left, right;
};
struct Or {
  Formula left, right;
};
struct Once {
  IntervalMask mask;
  Formula child;
};
struct Hist {
  IntervalMask mask;
  Formula child;
};
struct Since {
  IntervalMask mask;
  Formula left, right;
};

struct FormulaNode {
  std::variant<Atom, Not, And, Or, Once, Hist, Since> value;
};

inline Formula::Formula(FormulaNode node)
    : node_(std::make_shared<const FormulaNode>(std::move(node))) {}

template <class T>
const T* Formula::as() const noexcept {
  return std::get_if<T>(&node_->value);
}

inline bool operator==(const Formula& a, const Formula& b) {
  if (a.node_ == b.node_) return true;
  const auto& va = a.node_->value;
  const auto& vb = b.node_->value;
  if (va.index() != vb.index()) return false;
  return std::visit(
      [&](const auto& x) -> bool {
        using T = std::decay_t<decltype(x)>;
        const auto& y = std::get<T>(vb);
        if constexpr (std::is_same_v<T, Atom>) {
          return x == y;
        } else if constexpr (std::is_same_v<T, Not>) {
          return x.child == y.child;
        } else if constexpr (std::is_same_v<T, And> || std::is_same_v<T, Or>) {
          return x.left == y.left && x.right == y.right;
        } else if constexpr (std::is_same_v<T, Since>) {
          return x.mask == y.mask && x.left == y.left && x.right == y.right;
        } else {
          return x.mask == y.mask && x.child == y.child;
        }
      },
      va);
}

// Construction helpers.

inline Formula atom(std::vector<double> weights, double bias) {
  return Formula{FormulaNode{Atom{std::move(weights), bias}}};
}

/// x[feature] >= threshold over a `dim`-dimensional signal.
inline Formula ge(std::size_t feature, double threshold, std::size_t dim = 1) {
  std::vector<double> w(std::max(dim, feature + 1), 0.0);
  w[feature] = 1.0;
  return atom(std::move(w), -threshold);
}

/// x[feature] <= threshold over a `dim`-dimensional signal.
inline Formula le(std::size_t feature, double threshold, std::size_t dim = 1) {
  std::vector<double> w(std::max(dim, feature + 1), 0.0);
  w[feature] = -1.0;
  return atom(std::move(w), threshold);
}

inline Formula negate(Formula f) { return Formula{FormulaNode{Not{std::move(f)}}}; }
inline Formula conj(Formula l, Formula r) {
  return Formula{FormulaNode{And{std::move(l), std::move(r)}}};
}
inline Formula disj(Formula l, Formula r) {
  return Formula{FormulaNode{Or{std::move(l), std::move(r)}}};
}
inline Formula once(Formula f, IntervalMask mask = IntervalMask::unbounded()) {
  return Formula{FormulaNode{Once{std::move(mask), std::move(f)}}};
}
inline Formula hist(Formula f, IntervalMask mask = IntervalMask::unbounded()) {
  return Formula{FormulaNode{Hist{std::move(mask), std::move(f)}}};
}
inline Formula since(Formula l, Formula r, IntervalMask mask = IntervalMask::unbounded()) {
  return Formula{FormulaNode{Since{std::move(mask), std::move(l), std::move(r)}}};
}

/// Count of atoms plus operators; every operator node counts once.
inline std::size_t formula_length(const Formula& f) {
  return std::visit(
      [](const auto& n) -> std::size_t {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Atom>) {
          return 1;
        } else if constexpr (std::is_same_v<T, Not> || std::is_same_v<T, Once> ||
                             std::is_same_v<T, Hist>) {
          return 1 + formula_length(n.child);
        } else {
          return 1 + formula_length(n.left) + formula_length(n.right);
        }
      },
      f.node().value);
}

inline std::size_t formula_depth(const Formula& f) {
  return std::visit(
      [](const auto& n) -> std::size_t {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Atom>) {
          return 0;
        } else if constexpr (std::is_same_v<T, Not> || std::is_same_v<T, Once> ||
                             std::is_same_v<T, Hist>) {
          return 1 + formula_depth(n.child);
        } else {
          return 1 + std::max(formula_depth(n.left), formula_depth(n.right));
        }
      },
      f.node().value);
}

/// True when no temporal operator carries a bounded mask.
inline bool is_unbounded(const Formula& f) {
  return std::visit(
      [](const auto& n) -> bool {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Atom>) {
          return true;
        } else if constexpr (std::is_same_v<T, Not>) {
          return is_unbounded(n.child);
        } else if constexpr (std::is_same_v<T, And> || std::is_same_v<T, Or>) {
          return is_unbounded(n.left) && is_unbounded(n.right);
        } else if constexpr (std::is_same_v<T, Since>) {
          return n.mask.is_unbounded() && is_unbounded(n.left) && is_unbounded(n.right);
        } else {
          return n.mask.is_unbounded() && is_unbounded(n.child);
        }
      },
      f.node().value);
}

/// Rebuilds `f` with every atom replaced by `fn(atom)`.
template <class Fn>
Formula map_atoms(const Formula& f, Fn&& fn) {
  return std::visit(
      [&](const auto& n) -> Formula {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Atom>) {
          return Formula{FormulaNode{Atom(fn(n))}};
        } else if constexpr (std::is_same_v<T, Not>) {
          return negate(map_atoms(n.child, fn));
        } else if constexpr (std::is_same_v<T, And>) {
          return conj(map_atoms(n.left, fn), map_atoms(n.right, fn));
        } else if constexpr (std::is_same_v<T, Or>) {
          return disj(map_atoms(n.left, fn), map_atoms(n.right, fn));
        } else if constexpr (std::is_same_v<T, Once>) {
          return once(map_atoms(n.child, fn), n.mask);
        } else if constexpr (std::is_same_v<T, Hist>) {
          return hist(map_atoms(n.child, fn), n.mask);
        } else {
          return since(map_atoms(n.left, fn), map_atoms(n.right, fn), n.mask);
        }
      },
      f.node().value);
}

/// Largest atom weight-vector length in `f`.
inline std::size_t atom_dimension(const Formula& f) {
  std::size_t dim = 0;
  map_atoms(f, [&](const Atom& a) {
    dim = std::max(dim, a.weights.size());
    return a;
  });
  return dim;
}

/// Zero-pads every atom to `dim` weights. Throws if an atom is wider.
inline Formula with_dimension(const Formula& f, std::size_t dim) {
  return map_atoms(f, [dim](const Atom& a) {
    if (a.weights.size() > dim) {
      throw std::invalid_argument("atom references feature beyond signal dimension " +
                                  std::to_string(dim));
    }
    Atom out = a;
    out.weights.resize(dim, 0.0);
    return out;
  });
}

/// Pushes negations towards the atoms using the exact robust dualities
/// !F = G!, !G = F!, !(a & b) = !a | !b, !(a | b) = !a & !b and !!a = a, and
/// folds a negation over an atom into the atom (w, b) -> (-w, -b). Robustness
/// is preserved exactly. Negations over Since remain in place.
inline Formula push_negations(const Formula& f, bool negated = false) {
  return std::visit(
      [&](const auto& n) -> Formula {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Atom>) {
          if (!negated) return f;
          Atom a = n;
          for (double& w : a.weights) w = -w;
          a.bias = -a.bias;
          return Formula{FormulaNode{std::move(a)}};
        } else if constexpr (std::is_same_v<T, Not>) {
          return push_negations(n.child, !negated);
        } else if constexpr (std::is_same_v<T, And>) {
          auto l = push_negations(n.left, negated);
          auto r = push_negations(n.right, negated);
          return negated ? disj(std::move(l), std::move(r)) : conj(std::move(l), std::move(r));
        } else if constexpr (std::is_same_v<T, Or>) {
          auto l = push_negations(n.left, negated);
          auto r = push_negations(n.right, negated);
          return negated ? conj(std::move(l), std::move(r)) : disj(std::move(l), std::move(r));
        } else if constexpr (std::is_same_v<T, Once>) {
          auto c = push_negations(n.child, negated);
          return negated ? hist(std::move(c), n.mask) : once(std::move(c), n.mask);
        } else if constexpr (std::is_same_v<T, Hist>) {
          auto c = push_negations(n.child, negated);
          return negated ? once(std::move(c), n.mask) : hist(std::move(c), n.mask);
        } else {
          auto s = since(push_negations(n.left), push_negations(n.right), n.mask);
          return negated ? negate(std::move(s)) : s;
        }
      },
      f.node().value);
}

}  // namespace tlinfer::stl
