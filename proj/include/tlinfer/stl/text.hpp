#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <type_traits>
#include <vector>

#include "tlinfer/stl/formula.hpp"

namespace tlinfer::stl {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : std::runtime_error("parse error at position " + std::to_string(position) + ": " + what),
        position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

struct ParseOptions {
  /// Extra feature identifiers; feature k may be written as names[k] or x<k>.
  std::vector<std::string> feature_names;
  /// Signal dimension; atoms are padded to it. Defaults to the number of
  /// feature names, or the largest referenced index + 1.
  std::optional<std::size_t> dim;
};

struct FormatOptions {
  std::vector<std::string> feature_names;
};

/// Shortest representation that round-trips; integral values keep a ".0".
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, end);
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

namespace detail {

class Parser {
 public:
  Parser(std::string_view text, const ParseOptions& opts) : src_(text), opts_(opts) {}

  Formula run() {
    Formula f = formula();
    skip_ws();
    if (pos_ != src_.size()) fail("unexpected trailing input");
    std::size_t dim = opts_.dim.value_or(
        std::max(opts_.feature_names.size(), atom_dimension(f)));
    if (atom_dimension(f) > dim) fail("feature index beyond dimension " + std::to_string(dim));
    return with_dimension(f, dim);
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  char peek() {
    skip_ws();
    return pos_ < src_.size() ? src_[pos_] : '\0';
  }

  bool accept(std::string_view tok) {
    skip_ws();
    if (src_.substr(pos_, tok.size()) == tok) {
      pos_ += tok.size();
      return true;
    }
    return false;
  }

  void expect(std::string_view tok) {
    if (!accept(tok)) fail("expected '" + std::string(tok) + "'");
  }

  // A lone F, G or S not followed by an identifier character is an operator.
  bool at_keyword(char k) {
    skip_ws();
    if (pos_ >= src_.size() || src_[pos_] != k) return false;
    if (pos_ + 1 < src_.size()) {
      char c = src_[pos_ + 1];
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') return false;
    }
    return true;
  }

  Formula formula() {
    Formula left = unary();
    auto combine = [&](Formula l) -> std::optional<Formula> {
      if (accept("&")) return conj(std::move(l), unary());
      if (accept("|")) return disj(std::move(l), unary());
      if (at_keyword('S')) {
        ++pos_;
        IntervalMask m = mask();
        return since(std::move(l), unary(), std::move(m));
      }
      return std::nullopt;
    };
    auto combined = combine(left);
    if (!combined) return left;
    char c = peek();
    if (c == '&' || c == '|' || at_keyword('S')) {
      fail("parentheses required around operator arguments");
    }
    return *combined;
  }

  Formula unary() {
    if (accept("!")) return negate(unary());
    if (at_keyword('F') || at_keyword('G')) {
      const char op = src_[pos_++];
      IntervalMask m = mask();
      Formula child = unary();
      return op == 'F' ? once(std::move(child), std::move(m)) : hist(std::move(child), std::move(m));
    }
    if (accept("(")) {
      Formula f = formula();
      expect(")");
      return f;
    }
    return parse_atom();
  }

  std::size_t integer() {
    skip_ws();
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(src_.data() + pos_, src_.data() + src_.size(), v);
    if (ec != std::errc{}) fail("malformed mask: expected a non-negative integer");
    pos_ = static_cast<std::size_t>(ptr - src_.data());
    return v;
  }

  IntervalMask mask() {
    skip_ws();
    if (!accept("[")) return IntervalMask::unbounded();
    const std::size_t start = pos_;
    try {
      if (accept("{")) {
        std::vector<std::size_t> offsets{integer()};
        while (accept(",")) offsets.push_back(integer());
        expect("}");
        expect("]");
        std::vector<std::size_t> sorted = offsets;
        std::sort(sorted.begin(), sorted.end());
        if (sorted != offsets) throw std::invalid_argument("step set must be sorted ascending");
        return IntervalMask::steps(std::move(offsets));
      }
      std::size_t a = integer();
      expect(",");
      std::size_t b = integer();
      expect("]");
      return IntervalMask::range(a, b);
    } catch (const std::invalid_argument& e) {
      throw ParseError(std::string("malformed mask: ") + e.what(), start);
    }
  }

  std::optional<double> number() {
    skip_ws();
    if (pos_ >= src_.size()) return std::nullopt;
    const char c0 = src_[pos_];
    const bool numeric = std::isdigit(static_cast<unsigned char>(c0)) || c0 == '.' ||
                         (c0 == '-' && next_is_number());
    if (!numeric) return std::nullopt;
    const char* first = src_.data() + pos_;
    const char* last = src_.data() + src_.size();
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr == first) return std::nullopt;
    pos_ += static_cast<std::size_t>(ptr - first);
    return v;
  }

  std::optional<std::size_t> identifier() {
    skip_ws();
    const std::size_t start = pos_;
    if (pos_ >= src_.size() ||
        !(std::isalpha(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
      return std::nullopt;
    }
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
      ++pos_;
    }
    std::string_view name = src_.substr(start, pos_ - start);
    for (std::size_t k = 0; k < opts_.feature_names.size(); ++k) {
      if (opts_.feature_names[k] == name) return k;
    }
    if (name.size() > 1 && name[0] == 'x' &&
        std::all_of(name.begin() + 1, name.end(),
                    [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      std::size_t k = 0;
      std::from_chars(name.data() + 1, name.data() + name.size(), k);
      if (opts_.dim && k >= *opts_.dim) {
        pos_ = start;
        fail("unknown feature '" + std::string(name) + "'");
      }
      return k;
    }
    pos_ = start;
    fail("unknown feature '" + std::string(name) + "'");
  }

  // linear := term (('+' | '-') term)* ; term := [number ['*']] ident | number
  void linear(std::map<std::size_t, double>& w, double& c, double sign) {
    bool first = true;
    for (;;) {
      double s = sign;
      if (!first) {
        if (accept("+")) {
        } else if (accept("-")) {
          s = -sign;
        } else {
          return;
        }
      }
      first = false;
      auto coef = number();
      skip_ws();
      if (coef) {
        accept("*");
        skip_ws();
        if (pos_ < src_.size() &&
            (std::isalpha(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
          auto k = identifier();
          w[*k] += s * *coef;
        } else {
          c += s * *coef;
        }
      } else {
        auto k = identifier();
        if (!k) fail("expected an atom");
        w[*k] += s;
      }
    }
  }

  bool next_is_number() {
    std::size_t p = pos_ + 1;
    while (p < src_.size() && std::isspace(static_cast<unsigned char>(src_[p]))) ++p;
    return p < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[p])) || src_[p] == '.');
  }

  Formula parse_atom() {
    std::map<std::size_t, double> w;
    double c = 0.0;
    const std::size_t start = pos_;
    skip_ws();
    if (pos_ >= src_.size()) fail("unexpected end of input");
    linear(w, c, 1.0);
    bool geq;
    if (accept(">=") || accept(">")) {
      geq = true;
    } else if (accept("<=") || accept("<")) {
      geq = false;
    } else {
      fail("expected '>=' or '<=' in atom");
    }
    linear(w, c, -1.0);
    if (w.empty()) {
      pos_ = start;
      fail("atom references no feature");
    }
    const std::size_t dim = w.rbegin()->first + 1;
    std::vector<double> weights(dim, 0.0);
    for (auto [k, v] : w) weights[k] = geq ? v : -v;
    const double bias = geq ? c : -c;
    // Keep the exact encoding of single-feature comparisons: x >= c is (1, -c).
    return atom(std::move(weights), bias == 0.0 ? 0.0 : bias);
  }

  std::string_view src_;
  const ParseOptions& opts_;
  std::size_t pos_ = 0;
};

inline std::string feature_name(std::size_t k, const FormatOptions& opts) {
  if (k < opts.feature_names.size()) return opts.feature_names[k];
  return "x" + std::to_string(k);
}

inline std::string format_atom(const Atom& a, const FormatOptions& opts) {
  std::size_t nonzero = 0, feature = 0;
  for (std::size_t k = 0; k < a.weights.size(); ++k) {
    if (a.weights[k] != 0.0) {
      ++nonzero;
      feature = k;
    }
  }
  if (nonzero == 1 && std::abs(a.weights[feature]) == 1.0) {
    const double w = a.weights[feature];
    const double threshold = w > 0 ? -a.bias : a.bias;
    return feature_name(feature, opts) + (w > 0 ? " >= " : " <= ") +
           format_number(threshold == 0.0 ? 0.0 : threshold);
  }
  std::string s;
  for (std::size_t k = 0; k < a.weights.size(); ++k) {
    if (a.weights[k] == 0.0) continue;
    if (!s.empty()) s += " + ";
    s += format_number(a.weights[k]) + "*" + feature_name(k, opts);
  }
  if (s.empty()) s = "0.0*" + feature_name(0, opts);
  return s + " + " + format_number(a.bias) + " >= 0.0";
}

inline std::string format_mask(const IntervalMask& m) {
  if (m.is_unbounded()) return "";
  const auto& o = m.offsets();
  if (m.contiguous()) {
    return "[" + std::to_string(o.front()) + "," + std::to_string(o.back()) + "]";
  }
  std::string s = "[{";
  for (std::size_t i = 0; i < o.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(o[i]);
  }
  return s + "}]";
}

}  // namespace detail

/// Parses the ASCII formula grammar:
///   atoms     x<k> >= c, x<k> <= c, or a linear form "2*x0 + -1*x1 + 0.5 >= 0"
///   unary     !f, F f, G f, F[a,b] f, G[{i,j,...}] f
///   binary    (f) & (g), (f) | (g), (f) S (g), (f) S[a,b] (g)
inline Formula parse(std::string_view text, const ParseOptions& opts = {}) {
  return detail::Parser(text, opts).run();
}

/// Canonical text; operator arguments are always parenthesized.
inline std::string format(const Formula& f, const FormatOptions& opts = {}) {
  auto wrap = [&](const Formula& g) { return "(" + format(g, opts) + ")"; };
  return std::visit(
      [&](const auto& n) -> std::string {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Atom>) {
          return detail::format_atom(n, opts);
        } else if constexpr (std::is_same_v<T, Not>) {
          return "!" + wrap(n.child);
        } else if constexpr (std::is_same_v<T, And>) {
          return wrap(n.left) + " & " + wrap(n.right);
        } else if constexpr (std::is_same_v<T, Or>) {
          return wrap(n.left) + " | " + wrap(n.right);
        } else if constexpr (std::is_same_v<T, Once>) {
          return "F" + detail::format_mask(n.mask) + " " + wrap(n.child);
        } else if constexpr (std::is_same_v<T, Hist>) {
          return "G" + detail::format_mask(n.mask) + " " + wrap(n.child);
        } else {
          return wrap(n.left) + " S" + detail::format_mask(n.mask) + " " + wrap(n.right);
        }
      },
      f.node().value);
}

}  // namespace tlinfer::stl
