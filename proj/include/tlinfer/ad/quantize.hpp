#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace tlinfer::ad {

/// One-hot +-1 projection of a real weight vector: W ~ alpha * sign * e_index.
struct OneHot {
  std::size_t index = 0;
  int sign = 1;
  double alpha = 0.0;

  /// Dense B vector of length n.
  std::vector<double> dense(std::size_t n) const {
    std::vector<double> b(n, 0.0);
    b.at(index) = sign;
    return b;
  }

  friend bool operator==(const OneHot&, const OneHot&) = default;
};

/// Minimizer of ||W - alpha B||^2 over one-hot +-1 B and alpha >= 0.
///
/// J = alpha^2 - 2 alpha W.B + W.W, so B picks the entry of largest magnitude
/// (lowest index on ties) with its sign, and alpha = W.B = |W_j|. sign(0) = +1,
/// so the all-zero vector maps to B = e_0, alpha = 0.
inline OneHot quantize_choice(std::span<const double> w) {
  if (w.empty()) throw std::invalid_argument("quantize_choice: empty weight vector");
  OneHot q;
  double best = std::abs(w[0]);
  for (std::size_t i = 1; i < w.size(); ++i) {
    if (std::abs(w[i]) > best) {
      best = std::abs(w[i]);
      q.index = i;
    }
  }
  q.sign = w[q.index] >= 0.0 ? 1 : -1;
  q.alpha = best;
  return q;
}

/// J(B, alpha) = ||W - alpha B||^2.
inline double quantization_error(std::span<const double> w, const OneHot& q) {
  double j = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double b = i == q.index ? q.alpha * q.sign : 0.0;
    j += (w[i] - b) * (w[i] - b);
  }
  return j;
}

/// Keep/drop decision for interval weights: keep where w_i >= 0. When every
/// weight is negative the largest one is kept so the window is never empty.
inline std::vector<bool> quantize_interval(std::span<const double> w) {
  if (w.empty()) throw std::invalid_argument("quantize_interval: empty weight vector");
  std::vector<bool> keep(w.size());
  bool any = false;
  std::size_t best = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    keep[i] = w[i] >= 0.0;
    any = any || keep[i];
    if (w[i] > w[best]) best = i;
  }
  if (!any) keep[best] = true;
  return keep;
}

}  // namespace tlinfer::ad
