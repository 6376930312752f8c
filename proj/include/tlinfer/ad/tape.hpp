#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "tlinfer/ad/quantize.hpp"

namespace tlinfer::ad {

using NodeId = std::uint32_t;

enum class Op : std::uint8_t {
  Constant,
  Parameter,
  Add,
  Mul,
  Neg,
  Min,
  Max,
  Tanh,
  Affine,
  Choice,      // alpha * B_j * r_j with straight-through weight gradient
  SoftChoice,  // sum_i W_i r_i, used for the unquantized comparison
  Window,      // masked max/min over a window with keep/drop weights
};

/// Direction of a masked window reduction.
enum class WindowKind : std::uint8_t { Max, Min };

/// Append-only scalar tape for reverse-mode differentiation.
///
/// Constructors only record; forward() computes every value in insertion
/// order, backward() sweeps adjoints in reverse. Inputs always reference
/// earlier nodes, so insertion order is a topological order.
///
/// min/max route the whole adjoint to the winning argument, ties to the
/// first. Choice and Window nodes pass the adjoint to their weights as if the
/// quantization map were the identity.
class Tape {
 public:
  void clear() {
    nodes_.clear();
    links_.clear();
    data_.clear();
    values_.clear();
    adjoints_.clear();
    forward_done_ = false;
  }

  std::size_t size() const noexcept { return nodes_.size(); }

  NodeId constant(double c) { return push({Op::Constant, 0, 0, 0, 0, 0, c}); }

  /// Leaf bound to parameter slot `slot` with the given current value.
  NodeId parameter(std::size_t slot, double value) {
    return push({Op::Parameter, 0, static_cast<std::uint32_t>(slot), 0, 0, 0, value});
  }

  NodeId add(NodeId a, NodeId b) { return push({Op::Add, 0, a, b, 0, 0, 0.0}); }
  NodeId mul(NodeId a, NodeId b) { return push({Op::Mul, 0, a, b, 0, 0, 0.0}); }
  NodeId neg(NodeId a) { return push({Op::Neg, 0, a, 0, 0, 0, 0.0}); }
  NodeId min2(NodeId a, NodeId b) { return push({Op::Min, 0, a, b, 0, 0, 0.0}); }
  NodeId max2(NodeId a, NodeId b) { return push({Op::Max, 0, a, b, 0, 0, 0.0}); }
  NodeId tanh(NodeId a) { return push({Op::Tanh, 0, a, 0, 0, 0, 0.0}); }

  /// w . x + b with parameter nodes w, b and constant inputs x.
  NodeId affine(std::span<const NodeId> w, NodeId b, std::span<const double> x) {
    if (w.size() != x.size()) throw std::invalid_argument("affine: weight/input length mismatch");
    const auto begin = static_cast<std::uint32_t>(links_.size());
    links_.insert(links_.end(), w.begin(), w.end());
    const auto data_begin = static_cast<std::uint32_t>(data_.size());
    data_.insert(data_.end(), x.begin(), x.end());
    return push({Op::Affine, 0, b, data_begin, begin, static_cast<std::uint32_t>(w.size()), 0.0});
  }

  /// Choice block output. With `quantized`, forward is alpha * B_j * r_j for
  /// the one-hot projection of the weights; otherwise sum_i W_i r_i.
  NodeId choice(std::span<const NodeId> inputs, std::span<const NodeId> weights,
                bool quantized = true) {
    if (inputs.empty() || inputs.size() != weights.size()) {
      throw std::invalid_argument("choice: inputs and weights must have equal non-zero length");
    }
    const auto begin = static_cast<std::uint32_t>(links_.size());
    links_.insert(links_.end(), inputs.begin(), inputs.end());
    links_.insert(links_.end(), weights.begin(), weights.end());
    return push({quantized ? Op::Choice : Op::SoftChoice, 0, 0, 0, begin,
                 static_cast<std::uint32_t>(inputs.size()), 0.0});
  }

  /// Masked window reduction over inputs r_0..r_{m-1} (m <= weights.size()).
  ///
  /// Weights are quantized to keep (factor 1) or drop (factor -M for Max,
  /// +M for Min). Inputs are shifted to be >= 1 within the window before
  /// weighting and the shift is removed afterwards, so kept entries reduce
  /// exactly and dropped entries cannot win unless nothing is kept.
  ///
  /// Backward treats each weight as its keep bit: it receives the change in
  /// the output that flipping that bit would cause. The kept winner gets
  /// (winner - runner-up among kept entries); a dropped entry gets how far
  /// it would move the output if kept; other kept entries get 0.
  NodeId window(WindowKind kind, std::span<const NodeId> inputs, std::span<const NodeId> weights,
                double drop_magnitude) {
    if (inputs.empty() || inputs.size() > weights.size()) {
      throw std::invalid_argument("window: need 1..weights.size() inputs");
    }
    if (!(drop_magnitude > 0.0)) throw std::invalid_argument("window: drop magnitude must be > 0");
    const auto begin = static_cast<std::uint32_t>(links_.size());
    links_.insert(links_.end(), inputs.begin(), inputs.end());
    links_.insert(links_.end(), weights.begin(), weights.end());
    return push({Op::Window, static_cast<std::uint8_t>(kind),
                 static_cast<std::uint32_t>(inputs.size()), 0, begin,
                 static_cast<std::uint32_t>(inputs.size() + weights.size()), drop_magnitude});
  }

  void forward() {
    values_.assign(nodes_.size(), 0.0);
    for (std::size_t i = 0; i < nodes_.size(); ++i) values_[i] = eval(nodes_[i]);
    forward_done_ = true;
  }

  double value(NodeId id) const {
    require_forward();
    return values_.at(id);
  }

  /// Seeds d(out) = seed and propagates adjoints to every node.
  void backward(NodeId out, double seed = 1.0) {
    require_forward();
    if (out >= nodes_.size()) throw std::out_of_range("backward: unknown node");
    adjoints_.assign(nodes_.size(), 0.0);
    adjoints_[out] = seed;
    for (std::size_t i = out + 1; i-- > 0;) {
      const double g = adjoints_[i];
      if (g != 0.0) propagate(nodes_[i], g);
    }
  }

  double adjoint(NodeId id) const {
    if (adjoints_.size() != nodes_.size()) throw std::logic_error("adjoint read before backward()");
    return adjoints_.at(id);
  }

  /// Adds each parameter node's adjoint into grads[slot].
  void accumulate_parameter_gradients(std::span<double> grads) const {
    if (adjoints_.size() != nodes_.size()) throw std::logic_error("gradients read before backward()");
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (nodes_[i].op == Op::Parameter) grads[nodes_[i].a] += adjoints_[i];
    }
  }

  /// Rebinds every parameter leaf to params[slot]; the graph is reused.
  void set_parameters(std::span<const double> params) {
    for (auto& n : nodes_) {
      if (n.op == Op::Parameter) n.payload = params[n.a];
    }
    forward_done_ = false;
  }

  std::vector<double> parameter_gradients(std::size_t slots) const {
    std::vector<double> g(slots, 0.0);
    accumulate_parameter_gradients(g);
    return g;
  }

 private:
  struct Node {
    Op op;
    std::uint8_t flag;
    std::uint32_t a, b;
    std::uint32_t begin, count;
    double payload;
  };

  NodeId push(const Node& n) {
    const auto id = static_cast<NodeId>(nodes_.size());
    if (n.op == Op::Add || n.op == Op::Mul || n.op == Op::Min || n.op == Op::Max) {
      check_input(n.a, id);
      check_input(n.b, id);
    } else if (n.op == Op::Neg || n.op == Op::Tanh || n.op == Op::Affine) {
      check_input(n.a, id);
    }
    for (std::uint32_t k = 0; k < n.count && n.op != Op::Affine; ++k) {
      check_input(links_[n.begin + k], id);
    }
    if (n.op == Op::Choice || n.op == Op::SoftChoice) {
      for (std::uint32_t k = 0; k < n.count; ++k) check_input(links_[n.begin + n.count + k], id);
    }
    if (n.op == Op::Affine) {
      for (std::uint32_t k = 0; k < n.count; ++k) check_input(links_[n.begin + k], id);
    }
    nodes_.push_back(n);
    forward_done_ = false;
    return id;
  }

  static void check_input(NodeId in, NodeId self) {
    if (in >= self) throw std::invalid_argument("tape: input must reference an earlier node");
  }

  void require_forward() const {
    if (!forward_done_) throw std::logic_error("tape: forward() must run before reading values");
  }

  struct WindowEval {
    double out;
    std::size_t winner;
    double factor;  // 1 or the drop factor applied to the winner
    double runner_up;  // best kept input other than the winner; out if none
  };

  WindowEval eval_window(const Node& n) const {
    const std::size_t m = n.a;
    const std::size_t nw = n.count - m;
    const NodeId* r = &links_[n.begin];
    const NodeId* w = &links_[n.begin + m];
    thread_local std::vector<double> wv;
    wv.resize(nw);
    for (std::size_t i = 0; i < nw; ++i) wv[i] = values_[w[i]];
    const auto keep = quantize_interval(wv);
    const bool is_max = static_cast<WindowKind>(n.flag) == WindowKind::Max;
    double lo = values_[r[0]];
    for (std::size_t i = 1; i < m; ++i) lo = std::min(lo, values_[r[i]]);
    const double shift = std::max(0.0, -lo) + 1.0;
    const double drop = is_max ? -n.payload : n.payload;
    WindowEval best{0.0, 0, 1.0, 0.0};
    for (std::size_t i = 0; i < m; ++i) {
      const double s = values_[r[i]] + shift;
      const double q = keep[i] ? 1.0 : drop;
      const double v = q * s;
      if (i == 0 || (is_max ? v > best.out : v < best.out)) best = {v, i, q, 0.0};
    }
    best.out -= shift;
    best.runner_up = best.out;
    bool found = false;
    for (std::size_t i = 0; i < m; ++i) {
      if (i == best.winner || !keep[i]) continue;
      const double v = values_[r[i]];
      if (!found || (is_max ? v > best.runner_up : v < best.runner_up)) best.runner_up = v;
      found = true;
    }
    return best;
  }

  double eval(const Node& n) const {
    switch (n.op) {
      case Op::Constant:
      case Op::Parameter: return n.payload;
      case Op::Add: return values_[n.a] + values_[n.b];
      case Op::Mul: return values_[n.a] * values_[n.b];
      case Op::Neg: return -values_[n.a];
      case Op::Min: return std::min(values_[n.a], values_[n.b]);
      case Op::Max: return std::max(values_[n.a], values_[n.b]);
      case Op::Tanh: return std::tanh(values_[n.a]);
      case Op::Affine: {
        double v = values_[n.a];
        for (std::uint32_t k = 0; k < n.count; ++k) {
          v += values_[links_[n.begin + k]] * data_[n.b + k];
        }
        return v;
      }
      case Op::Choice: {
        thread_local std::vector<double> wv;
        wv.resize(n.count);
        for (std::uint32_t k = 0; k < n.count; ++k) wv[k] = values_[links_[n.begin + n.count + k]];
        const OneHot q = quantize_choice(wv);
        return q.alpha * q.sign * values_[links_[n.begin + q.index]];
      }
      case Op::SoftChoice: {
        double v = 0.0;
        for (std::uint32_t k = 0; k < n.count; ++k) {
          v += values_[links_[n.begin + n.count + k]] * values_[links_[n.begin + k]];
        }
        return v;
      }
      case Op::Window: return eval_window(n).out;
    }
    return 0.0;
  }

  void propagate(const Node& n, double g) {
    switch (n.op) {
      case Op::Constant:
      case Op::Parameter: break;
      case Op::Add:
        adjoints_[n.a] += g;
        adjoints_[n.b] += g;
        break;
      case Op::Mul:
        adjoints_[n.a] += g * values_[n.b];
        adjoints_[n.b] += g * values_[n.a];
        break;
      case Op::Neg: adjoints_[n.a] -= g; break;
      case Op::Min: adjoints_[values_[n.a] <= values_[n.b] ? n.a : n.b] += g; break;
      case Op::Max: adjoints_[values_[n.a] >= values_[n.b] ? n.a : n.b] += g; break;
      case Op::Tanh: {
        const double t = std::tanh(values_[n.a]);
        adjoints_[n.a] += g * (1.0 - t * t);
        break;
      }
      case Op::Affine:
        adjoints_[n.a] += g;
        for (std::uint32_t k = 0; k < n.count; ++k) {
          adjoints_[links_[n.begin + k]] += g * data_[n.b + k];
        }
        break;
      case Op::Choice: {
        thread_local std::vector<double> wv;
        wv.resize(n.count);
        for (std::uint32_t k = 0; k < n.count; ++k) wv[k] = values_[links_[n.begin + n.count + k]];
        const OneHot q = quantize_choice(wv);
        adjoints_[links_[n.begin + q.index]] += g * q.alpha * q.sign;
        for (std::uint32_t k = 0; k < n.count; ++k) {
          adjoints_[links_[n.begin + n.count + k]] += g * values_[links_[n.begin + k]];
        }
        break;
      }
      case Op::SoftChoice:
        for (std::uint32_t k = 0; k < n.count; ++k) {
          const NodeId r = links_[n.begin + k];
          const NodeId w = links_[n.begin + n.count + k];
          adjoints_[r] += g * values_[w];
          adjoints_[w] += g * values_[r];
        }
        break;
      case Op::Window: {
        const WindowEval e = eval_window(n);
        const std::size_t m = n.a;
        const bool is_max = static_cast<WindowKind>(n.flag) == WindowKind::Max;
        adjoints_[links_[n.begin + e.winner]] += g * e.factor;
        std::vector<double> wv(n.count - m);
        for (std::size_t i = 0; i < wv.size(); ++i) wv[i] = values_[links_[n.begin + m + i]];
        const auto keep = quantize_interval(wv);
        for (std::size_t i = 0; i < m; ++i) {
          const double v = values_[links_[n.begin + i]];
          double flip = 0.0;
          if (i == e.winner) {
            flip = v - e.runner_up;
          } else if (!keep[i]) {
            flip = is_max ? std::max(0.0, v - e.out) : std::min(0.0, v - e.out);
          }
          if (flip != 0.0) adjoints_[links_[n.begin + m + i]] += g * flip;
        }
        break;
      }
    }
  }

  std::vector<Node> nodes_;
  std::vector<NodeId> links_;
  std::vector<double> data_;
  std::vector<double> values_;
  std::vector<double> adjoints_;
  bool forward_done_ = false;
};

}  // namespace tlinfer::ad
