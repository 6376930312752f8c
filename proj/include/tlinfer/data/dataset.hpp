#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tlinfer/stl/formula.hpp"
#include "tlinfer/stl/monitor.hpp"
#include "tlinfer/stl/trace.hpp"

namespace tlinfer::data {

enum class LabelKind { Binary, Continuous };

inline const char* to_string(LabelKind k) { return k == LabelKind::Binary ? "binary" : "continuous"; }

/// Labeled traces sharing one feature dimension and label kind.
struct Dataset {
  std::vector<stl::Trace> traces;
  std::vector<std::string> feature_names;
  LabelKind label_kind = LabelKind::Binary;
  std::string provenance;

  std::size_t size() const noexcept { return traces.size(); }
  bool empty() const noexcept { return traces.empty(); }
  std::size_t dim() const { return feature_names.size(); }

  /// Throws unless dimensions, label kind and ids are consistent.
  void validate() const {
    std::set<std::string> ids;
    for (const auto& tr : traces) {
      if (tr.dim() != dim()) {
        throw std::invalid_argument("trace '" + tr.id() + "' has " + std::to_string(tr.dim()) +
                                    " features, dataset has " + std::to_string(dim()));
      }
      if (!ids.insert(tr.id()).second) throw std::invalid_argument("duplicate trace id '" + tr.id() + "'");
      if (!std::isfinite(tr.label())) throw std::invalid_argument("non-finite label in '" + tr.id() + "'");
      if (label_kind == LabelKind::Binary && tr.label() != 1.0 && tr.label() != -1.0) {
        throw std::invalid_argument("mixed label kinds: trace '" + tr.id() + "' has non-binary label");
      }
    }
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Default feature names x0..x{d-1}, matching the formula grammar.
inline std::vector<std::string> default_feature_names(std::size_t d) {
  std::vector<std::string> names;
  for (std::size_t k = 0; k < d; ++k) names.push_back("x" + std::to_string(k));
  return names;
}

/// Dataset whose traces run in reverse chronological order. Past-time
/// formulas evaluated at the last step of a reversed trace read as
/// future-time formulas at step 0 of the original.
inline Dataset reverse(const Dataset& ds) {
  Dataset out = ds;
  for (auto& tr : out.traces) tr = tr.reversed();
  return out;
}

/// Relabels each trace with the labeling formula's robustness at step 0 of
/// the original trace, read as a future-time formula (i.e. evaluated at the
/// last step of the reversed trace).
inline Dataset label_continuous(const Dataset& ds, const stl::Formula& labeling) {
  Dataset out = ds;
  const auto f = stl::with_dimension(labeling, ds.dim());
  for (auto& tr : out.traces) tr.set_label(stl::final_robustness(f, tr.reversed()));
  out.label_kind = LabelKind::Continuous;
  return out;
}

struct Split {
  Dataset train, test;
};

/// Seeded shuffle, then the first round(fraction * n) traces train.
inline Split split(const Dataset& ds, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("train fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = idx.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(idx[i - 1], idx[pick(rng)]);
  }
  std::size_t n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(ds.size())));
  n_train = std::clamp<std::size_t>(n_train, ds.size() > 1 ? 1 : 0, ds.size() > 1 ? ds.size() - 1 : ds.size());
  Split s{ds, ds};
  s.train.traces.clear();
  s.test.traces.clear();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    (i < n_train ? s.train : s.test).traces.push_back(ds.traces[idx[i]]);
  }
  return s;
}

}  // namespace tlinfer::data
