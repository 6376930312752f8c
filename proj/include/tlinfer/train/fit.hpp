#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "tlinfer/ad/tape.hpp"
#include "tlinfer/data/dataset.hpp"
#include "tlinfer/fernn/extract.hpp"
#include "tlinfer/fernn/model.hpp"
#include "tlinfer/stl/formula.hpp"
#include "tlinfer/stl/monitor.hpp"
#include "tlinfer/stl/text.hpp"
#include "tlinfer/train/adam.hpp"

namespace tlinfer::train {

struct TrainConfig {
  double lr = 0.003;
  std::size_t max_epochs = 5000;
  std::size_t patience = 50;
  bool early_stop = true;
  /// Halve the learning rate on each plateau instead of stopping, and stop
  /// only after `plateau_reductions` reductions plus one more plateau.
  bool plateau_schedule = false;
  std::size_t plateau_reductions = 5;
  double plateau_factor = 0.5;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  std::size_t batch_size = 0;  // 0 = full batch
  bool normalize = true;
  bool reverse_traces = false;
  /// Divide continuous labels by their largest magnitude on the train split.
  bool scale_continuous_labels = true;
  /// Also train a copy whose choice blocks use the raw weights.
  bool compare_unquantized = false;

  void validate() const {
    if (!(lr > 0.0) || !std::isfinite(lr)) throw std::invalid_argument("learning rate must be > 0");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
      throw std::invalid_argument("split fraction must lie in (0, 1)");
    }
    if (patience < 1) throw std::invalid_argument("patience must be >= 1");
    if (!(plateau_factor > 0.0 && plateau_factor < 1.0)) {
      throw std::invalid_argument("plateau factor must lie in (0, 1)");
    }
  }
};

struct TrainReport {
  stl::Formula formula = stl::atom({1.0}, 0.0);
  std::string formula_text;
  std::size_t formula_length = 0;
  double train_mcr = 0.0;
  double test_mcr = 0.0;
  std::vector<double> losses;
  std::size_t epochs = 0;
  std::size_t best_epoch = 0;
  double best_loss = 0.0;
  std::size_t lr_reductions = 0;
  double final_lr = 0.0;
  std::uint64_t skipped_gradients = 0;
  double label_scale = 1.0;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  std::uint64_t embedded_structures = 0;
  std::optional<double> unquantized_train_mcr, unquantized_test_mcr;
  double wall_seconds = 0.0;
  TrainConfig config;
};

/// +1 when v >= 0, else -1.
inline int label_sign(double v) noexcept { return v >= 0.0 ? 1 : -1; }

inline void require_nonempty(const data::Dataset& ds) {
  if (ds.empty()) throw std::invalid_argument("empty dataset");
}

/// Fraction of traces whose final-step robustness sign differs from the
/// label sign. Continuous labels are thresholded at 0.
inline double evaluate_mcr(const stl::Formula& f, const data::Dataset& ds) {
  require_nonempty(ds);
  std::size_t wrong = 0;
  for (const auto& tr : ds.traces) {
    wrong += stl::sign_of(stl::final_robustness(f, tr)) != label_sign(tr.label()) ? 1 : 0;
  }
  return static_cast<double>(wrong) / static_cast<double>(ds.size());
}

/// Same, using the model output sign.
inline double evaluate_mcr(const fernn::Model& m, const data::Dataset& ds) {
  require_nonempty(ds);
  std::size_t wrong = 0;
  for (const auto& tr : ds.traces) {
    wrong += stl::sign_of(fernn::forward_model(m, tr).output) != label_sign(tr.label()) ? 1 : 0;
  }
  return static_cast<double>(wrong) / static_cast<double>(ds.size());
}

namespace detail {

// Unrolled tapes of the training traces. Kept across epochs when they fit in
// the node budget; otherwise rebuilt per trace on a scratch tape.
class TapeCache {
 public:
  static constexpr std::size_t kNodeBudget = 40'000'000;

  TapeCache(const fernn::Model& m, const std::vector<stl::Trace>& normalized) : traces_(normalized) {
    std::size_t total = 0;
    for (const auto& tr : traces_) {
      ad::Tape t;
      const auto out = fernn::unroll(m, tr, t);
      total += t.size();
      if (total > kNodeBudget) {
        tapes_.clear();
        outputs_.clear();
        return;
      }
      tapes_.push_back(std::move(t));
      outputs_.push_back(out);
    }
  }

  /// Forward (and backward with the MAE gradient) for trace i; returns |y - target|.
  double run(const fernn::Model& m, std::size_t i, double target, double scale,
             std::span<double> grads) {
    ad::Tape* tape;
    ad::NodeId out;
    if (!tapes_.empty()) {
      tape = &tapes_[i];
      out = outputs_[i];
      tape->set_parameters(m.params);
    } else {
      scratch_.clear();
      out = fernn::unroll(m, traces_[i], scratch_);
      tape = &scratch_;
    }
    tape->forward();
    const double y = tape->value(out);
    const double diff = y - target;
    const double g = diff > 0.0 ? scale : (diff < 0.0 ? -scale : 0.0);
    if (g != 0.0) {
      tape->backward(out, g);
      tape->accumulate_parameter_gradients(grads);
    }
    return std::abs(diff);
  }

  std::size_t size() const noexcept { return traces_.size(); }

 private:
  const std::vector<stl::Trace>& traces_;
  std::vector<ad::Tape> tapes_;
  std::vector<ad::NodeId> outputs_;
  ad::Tape scratch_;
};

struct LoopResult {
  std::vector<double> losses;
  std::size_t best_epoch = 0;
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t reductions = 0;
  double final_lr = 0.0;
  std::uint64_t skipped = 0;
};

inline LoopResult optimize(fernn::Model& m, const std::vector<stl::Trace>& train,
                           const std::vector<double>& targets, const TrainConfig& cfg) {
  const std::vector<stl::Trace> normalized = [&] {
    std::vector<stl::Trace> out;
    out.reserve(train.size());
    for (const auto& tr : train) out.push_back(fernn::normalize_trace(m, tr));
    return out;
  }();
  TapeCache cache(m, normalized);
  const std::size_t n = train.size();
  const std::size_t batch = cfg.batch_size == 0 ? n : std::min(cfg.batch_size, n);

  AdamState adam(m.params.size());
  std::vector<double> grads(m.params.size());
  std::vector<double> best_params = m.params;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(cfg.seed ^ 0x5deece66dULL);

  LoopResult r;
  double lr = cfg.lr;
  std::size_t stagnant = 0;
  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    if (batch < n) std::shuffle(order.begin(), order.end(), rng);
    double loss = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t stop = std::min(n, start + batch);
      const double scale = 1.0 / static_cast<double>(stop - start);
      std::fill(grads.begin(), grads.end(), 0.0);
      if (start == 0) {
        // The loss is recorded for the parameters in effect at epoch start.
        if (batch < n) {
          std::vector<double> dummy(m.params.size());
          for (std::size_t i = 0; i < n; ++i) loss += cache.run(m, i, targets[i], 0.0, dummy);
          loss /= static_cast<double>(n);
        }
      }
      double batch_loss = 0.0;
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t i = order[k];
        batch_loss += cache.run(m, i, targets[i], scale, grads);
      }
      if (batch == n) loss = batch_loss / static_cast<double>(n);
      if (start == 0 && loss < r.best_loss) {
        r.best_loss = loss;
        r.best_epoch = epoch;
        best_params = m.params;
        stagnant = 0;
      } else if (start == 0) {
        ++stagnant;
      }
      r.skipped += adam_step(m.params, grads, adam, lr);
    }
    r.losses.push_back(loss);
    if (stagnant >= cfg.patience) {
      if (cfg.plateau_schedule && r.reductions < cfg.plateau_reductions) {
        lr *= cfg.plateau_factor;
        ++r.reductions;
        stagnant = 0;
      } else if (cfg.early_stop || cfg.plateau_schedule) {
        break;
      }
    }
  }
  m.params = best_params;
  r.final_lr = lr;
  return r;
}

}  // namespace detail

/// Trains `m` in place on the train split of `ds` and reports on both splits.
///
/// Per epoch: quantized forward over the training traces, mean absolute
/// error of the final-step output against the labels, straight-through
/// backward, one Adam step (per mini-batch when configured). Training stops
/// once the loss has not improved for `patience` epochs and the parameters
/// with the lowest loss are restored.
inline TrainReport fit(fernn::Model& m, const data::Dataset& input, const TrainConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  cfg.validate();
  require_nonempty(input);
  input.validate();
  if (input.size() < 2) throw std::invalid_argument("need at least 2 traces to split");
  if (input.dim() != m.dim) {
    throw std::invalid_argument("dimension mismatch: model expects " + std::to_string(m.dim) +
                                " features, dataset has " + std::to_string(input.dim()));
  }
  const bool binary = input.label_kind == data::LabelKind::Binary;
  if (binary != (m.head == fernn::Head::Tanh)) {
    throw std::invalid_argument(binary ? "binary labels need a tanh head"
                                       : "continuous labels need an identity head");
  }

  const data::Dataset ds = cfg.reverse_traces ? data::reverse(input) : input;
  const data::Split parts = data::split(ds, cfg.train_fraction, cfg.seed);
  m.normalization.reset();
  if (cfg.normalize) m.normalization = fernn::Normalization::fit(parts.train.traces);

  TrainReport rep;
  rep.config = cfg;
  rep.train_size = parts.train.size();
  rep.test_size = parts.test.size();
  rep.embedded_structures = m.embedded_structures();

  std::vector<double> targets;
  for (const auto& tr : parts.train.traces) targets.push_back(tr.label());
  if (!binary && cfg.scale_continuous_labels) {
    double peak = 0.0;
    for (double y : targets) peak = std::max(peak, std::abs(y));
    if (peak > 0.0) {
      rep.label_scale = peak;
      for (double& y : targets) y /= peak;
    }
  }

  const fernn::Model initial = m;
  auto loop = detail::optimize(m, parts.train.traces, targets, cfg);
  rep.losses = std::move(loop.losses);
  rep.epochs = rep.losses.size();
  rep.best_epoch = loop.best_epoch;
  rep.best_loss = loop.best_loss;
  rep.lr_reductions = loop.reductions;
  rep.final_lr = loop.final_lr;
  rep.skipped_gradients = loop.skipped;

  rep.formula = fernn::extract_formula(m);
  stl::FormatOptions fmt;
  fmt.feature_names = input.feature_names;
  rep.formula_text = stl::format(rep.formula, fmt);
  rep.formula_length = stl::formula_length(stl::push_negations(rep.formula));
  rep.train_mcr = evaluate_mcr(m, parts.train);
  rep.test_mcr = evaluate_mcr(m, parts.test);

  if (cfg.compare_unquantized) {
    fernn::Model soft = initial;
    soft.quantized = false;
    detail::optimize(soft, parts.train.traces, targets, cfg);
    rep.unquantized_train_mcr = evaluate_mcr(soft, parts.train);
    rep.unquantized_test_mcr = evaluate_mcr(soft, parts.test);
  }
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace tlinfer::train
