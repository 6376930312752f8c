#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "tlinfer/fernn/model.hpp"
#include "tlinfer/stl/formula.hpp"

namespace tlinfer::fernn {

inline constexpr std::size_t kMinArchitectureLength = 2;
inline constexpr std::size_t kMaxArchitectureLength = 6;

struct ArchitectureOptions {
  bool use_since = true;
  std::uint64_t seed = 0;
  Head head = Head::Tanh;
};

namespace detail {

// Length-budgeted tower of choice blocks.
//
// tower(1) chooses among single-feature atoms (each feature, both directions).
// tower(l) chooses among
//   F tower(l-1), G tower(l-1)                       (shared sub-tower)
//   a & b, a | b      with a = tower(l1), b = tower(l2), l1 + l2 = l - 1
//   a S b             with budgets summing to l - 2
// A choice may negate its pick. Negations push through F, G, &, | for free;
// only a Since can keep one, and its branch reserves a unit for it. So every
// reading has length <= l once negations are pushed down, and the all-F
// reading has length exactly l.
class TowerBuilder {
 public:
  TowerBuilder(ModelBuilder& b, std::size_t dim, bool use_since)
      : b_(b), dim_(dim), use_since_(use_since) {}

  CellId atoms() {
    std::vector<CellId> in;
    for (std::size_t k = 0; k < dim_; ++k) {
      in.push_back(b_.atom(k, +1));
      in.push_back(b_.atom(k, -1));
    }
    return b_.choice(std::move(in));
  }

  CellId tower(std::size_t budget, std::map<std::size_t, CellId>* chain = nullptr) {
    CellId out;
    if (budget <= 1) {
      out = atoms();
    } else {
      const CellId sub = tower(budget - 1, chain);
      std::vector<CellId> candidates{b_.once(sub), b_.hist(sub)};
      if (budget - 1 >= 2) {
        const std::size_t l1 = (budget - 1) / 2;
        const CellId a = tower(l1);
        const CellId c = tower(budget - 1 - l1);
        candidates.push_back(b_.conjunction(a, c));
        candidates.push_back(b_.disjunction(a, c));
      }
      if (use_since_ && budget >= 4) {
        const std::size_t l1 = (budget - 2) / 2;
        const CellId a = tower(l1);
        const CellId c = tower(budget - 2 - l1);
        candidates.push_back(b_.since(a, c));
      }
      out = b_.choice(std::move(candidates));
    }
    if (chain) (*chain)[budget] = out;
    return out;
  }

 private:
  ModelBuilder& b_;
  std::size_t dim_;
  bool use_since_;
};

inline void check_length(std::size_t length) {
  if (length < kMinArchitectureLength || length > kMaxArchitectureLength) {
    throw std::invalid_argument("unsupported formula length " + std::to_string(length) +
                                " (supported: 2..6)");
  }
}

}  // namespace detail

/// Model whose readings are formulas of length at most `length`, with at
/// least one reading of exactly that length.
inline Model build_fixed_length(std::size_t length, std::size_t dim,
                                const ArchitectureOptions& opts = {}) {
  detail::check_length(length);
  if (dim == 0) throw std::invalid_argument("feature count must be >= 1");
  ModelBuilder b(dim, opts.seed);
  detail::TowerBuilder towers(b, dim, opts.use_since);
  const CellId out = towers.tower(length);
  return std::move(b).finish(out, opts.head);
}

/// Nested towers of lengths 2..max_length joined by a final choice block.
/// Each shorter tower is the unary sub-tower of the next, so they share cells.
inline Model build_up_to_length(std::size_t max_length, std::size_t dim,
                                const ArchitectureOptions& opts = {}) {
  detail::check_length(max_length);
  if (dim == 0) throw std::invalid_argument("feature count must be >= 1");
  ModelBuilder b(dim, opts.seed);
  detail::TowerBuilder towers(b, dim, opts.use_since);
  std::map<std::size_t, CellId> chain;
  towers.tower(max_length, &chain);
  std::vector<CellId> branches;
  for (std::size_t l = kMinArchitectureLength; l <= max_length; ++l) branches.push_back(chain.at(l));
  const CellId out = branches.size() == 1 ? branches.front() : b.choice(std::move(branches));
  return std::move(b).finish(out, opts.head);
}

/// Cell ids of the per-length sub-networks of an up-to-length model, in
/// increasing length order (the inputs of its final choice block).
inline std::vector<CellId> length_branches(const Model& m) {
  const auto* top = std::get_if<ChoiceBlock>(&m.cells.at(m.output));
  if (!top) return {m.output};
  return top->inputs;
}

/// Length-2 model "Once_I atom" or "Hist_I atom" whose interval I is learned
/// over offsets 0..window. The atom has a free-sign weight per feature, with
/// a choice block over features when there are several.
inline Model build_interval_model(IntervalKind kind, std::size_t window, std::size_t dim,
                                  const ArchitectureOptions& opts = {},
                                  double drop_magnitude = stl::kDefaultHorizon) {
  if (dim == 0) throw std::invalid_argument("feature count must be >= 1");
  ModelBuilder b(dim, opts.seed);
  std::vector<CellId> atoms;
  for (std::size_t k = 0; k < dim; ++k) atoms.push_back(b.atom_free(k));
  const CellId a = dim == 1 ? atoms.front() : b.choice(std::move(atoms));
  const CellId out = b.interval(kind, a, window, drop_magnitude);
  return std::move(b).finish(out, opts.head);
}

/// Hardwired model computing the robustness of `f` exactly: every operator's
/// output goes through a single-input choice with weight 1. Bounded Once/Hist
/// become interval cells with the mask encoded as keep/drop weights.
inline Model compile_formula(const stl::Formula& f, std::size_t dim, Head head = Head::Identity) {
  ModelBuilder b(dim, 0);
  auto pass = [&](CellId c) { return b.choice_fixed({c}, {1.0}); };
  auto rec = [&](auto&& self, const stl::Formula& g) -> CellId {
    return std::visit(
        [&](const auto& n) -> CellId {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, stl::Atom>) {
            if (n.weights.size() != dim) throw std::invalid_argument("dimension mismatch in compile");
            std::vector<std::size_t> features(dim);
            for (std::size_t k = 0; k < dim; ++k) features[k] = k;
            return b.atom_fixed(std::move(features), n.weights, n.bias);
          } else if constexpr (std::is_same_v<T, stl::Not>) {
            return pass(b.negation(self(self, n.child)));
          } else if constexpr (std::is_same_v<T, stl::And>) {
            return pass(b.conjunction(self(self, n.left), self(self, n.right)));
          } else if constexpr (std::is_same_v<T, stl::Or>) {
            return pass(b.disjunction(self(self, n.left), self(self, n.right)));
          } else if constexpr (std::is_same_v<T, stl::Once> || std::is_same_v<T, stl::Hist>) {
            const CellId in = self(self, n.child);
            constexpr bool is_once = std::is_same_v<T, stl::Once>;
            if (n.mask.is_unbounded()) return pass(is_once ? b.once(in) : b.hist(in));
            const std::size_t window = n.mask.offsets().back();
            std::vector<double> w(window + 1, -1.0);
            for (auto k : n.mask.offsets()) w[k] = 1.0;
            return pass(b.interval_fixed(is_once ? IntervalKind::Once : IntervalKind::Hist, in,
                                         window, std::move(w)));
          } else {
            if (!n.mask.is_unbounded()) {
              throw std::invalid_argument("compile: bounded Since is not supported");
            }
            return pass(b.since(self(self, n.left), self(self, n.right)));
          }
        },
        g.node().value);
  };
  const CellId out = rec(rec, f);
  return std::move(b).finish(out, head);
}

}  // namespace tlinfer::fernn
