#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tlinfer::stl {

/// Uniformly sampled multivariate signal with a scalar label.
///
/// Values are stored row-major: row t holds the `dim` features at step t.
class Trace {
 public:
  Trace() = default;

  Trace(std::string id, std::size_t dim, std::vector<double> values, double label = 0.0)
      : id_(std::move(id)), dim_(dim), values_(std::move(values)), label_(label) {
    if (dim_ == 0) throw std::invalid_argument("trace '" + id_ + "': dimension must be >= 1");
    if (values_.empty() || values_.size() % dim_ != 0) {
      throw std::invalid_argument("trace '" + id_ + "': needs at least one complete row");
    }
  }

  /// Single-feature trace from a sequence of samples.
  static Trace scalar(std::vector<double> samples, double label = 0.0, std::string id = "t") {
    return Trace(std::move(id), 1, std::move(samples), label);
  }

  const std::string& id() const noexcept { return id_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t length() const noexcept { return dim_ == 0 ? 0 : values_.size() / dim_; }
  double label() const noexcept { return label_; }
  void set_label(double label) noexcept { label_ = label; }

  std::span<const double> row(std::size_t t) const {
    return std::span<const double>(values_).subspan(t * dim_, dim_);
  }
  double at(std::size_t t, std::size_t k) const { return values_[t * dim_ + k]; }
  double& at(std::size_t t, std::size_t k) { return values_[t * dim_ + k]; }

  const std::vector<double>& values() const noexcept { return values_; }

  /// Same samples in reverse chronological order.
  Trace reversed() const {
    std::vector<double> out;
    out.reserve(values_.size());
    for (std::size_t t = length(); t-- > 0;) {
      auto r = row(t);
      out.insert(out.end(), r.begin(), r.end());
    }
    return Trace(id_, dim_, std::move(out), label_);
  }

  friend bool operator==(const Trace&, const Trace&) = default;

 private:
  std::string id_;
  std::size_t dim_ = 0;
  std::vector<double> values_;
  double label_ = 0.0;
};

}  // namespace tlinfer::stl
