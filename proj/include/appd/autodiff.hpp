#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace appd::ad {

class Tape;

/// Tape-backed scalar. A Var either references a node on a tape (active) or
/// holds a plain constant (idx < 0, no tape). Arithmetic between constants
/// stays off the tape entirely, so wrapping fixed quantities as Var costs
/// nothing until they interact with an active value.
class Var {
 public:
  Var() = default;
  Var(double v) : val_(v) {}  // NOLINT: implicit constant promotion is the point

  double value() const { return val_; }
  bool active() const { return idx_ >= 0; }
  std::int32_t index() const { return idx_; }
  Tape* tape() const { return tape_; }

 private:
  friend class Tape;
  Var(double v, std::int32_t idx, Tape* tape) : val_(v), idx_(idx), tape_(tape) {}

  double val_ = 0.0;
  std::int32_t idx_ = -1;
  Tape* tape_ = nullptr;
};

/// Arena of computation nodes; each node stores its parents and the local
/// partial derivatives evaluated at record time, so the reverse sweep is a
/// single pass of multiply-accumulate.
class Tape {
 public:
  Var input(double v) {
    nodes_.push_back(Node{-1, -1, 0.0, 0.0});
    return Var(v, static_cast<std::int32_t>(nodes_.size() - 1), this);
  }

  std::vector<Var> inputs(std::span<const double> values) {
    std::vector<Var> out;
    out.reserve(values.size());
    for (double v : values) out.push_back(input(v));
    return out;
  }

  std::size_t size() const { return nodes_.size(); }

  void clear() { nodes_.clear(); }
  void reserve(std::size_t n) { nodes_.reserve(n); }

  /// Adjoints of every node with respect to `output`. Nodes recorded after
  /// `output` get adjoint zero.
  std::vector<double> gradient(const Var& output) const {
    std::vector<double> adj;
    gradient(output, adj);
    return adj;
  }

  /// Buffer-reusing variant of gradient().
  void gradient(const Var& output, std::vector<double>& adj) const {
    adj.assign(nodes_.size(), 0.0);
    if (!output.active() || output.tape() != this) return;
    adj[output.index()] = 1.0;
    for (std::int32_t i = output.index(); i >= 0; --i) {
      const double a = adj[i];
      if (a == 0.0) continue;
      const Node& n = nodes_[i];
      if (n.a >= 0) adj[n.a] += n.da * a;
      if (n.b >= 0) adj[n.b] += n.db * a;
    }
  }

  Var unary(double val, const Var& x, double dx) {
    if (!x.active()) return Var(val);
    nodes_.push_back(Node{x.index(), -1, dx, 0.0});
    return Var(val, static_cast<std::int32_t>(nodes_.size() - 1), this);
  }

  static Var record_unary(double val, const Var& x, double dx) {
    return x.active() ? x.tape()->unary(val, x, dx) : Var(val);
  }

  static Var record_binary(double val, const Var& x, double dx, const Var& y, double dy) {
    Tape* t = x.active() ? x.tape() : y.tape();
    if (t == nullptr) return Var(val);
    assert(!x.active() || !y.active() || x.tape() == y.tape());
    t->nodes_.push_back(Node{x.index(), y.index(), dx, dy});
    return Var(val, static_cast<std::int32_t>(t->nodes_.size() - 1), t);
  }

 private:
  struct Node {
    std::int32_t a;
    std::int32_t b;
    double da;
    double db;
  };
  std::vector<Node> nodes_;
};

// --- arithmetic -------------------------------------------------------------

inline Var operator+(const Var& x, const Var& y) {
  return Tape::record_binary(x.value() + y.value(), x, 1.0, y, 1.0);
}
inline Var operator-(const Var& x, const Var& y) {
  return Tape::record_binary(x.value() - y.value(), x, 1.0, y, -1.0);
}
inline Var operator*(const Var& x, const Var& y) {
  return Tape::record_binary(x.value() * y.value(), x, y.value(), y, x.value());
}
inline Var operator/(const Var& x, const Var& y) {
  const double inv = 1.0 / y.value();
  return Tape::record_binary(x.value() * inv, x, inv, y, -x.value() * inv * inv);
}
inline Var operator-(const Var& x) { return Tape::record_unary(-x.value(), x, -1.0); }
inline Var operator+(const Var& x) { return x; }

inline Var& operator+=(Var& x, const Var& y) { return x = x + y; }
inline Var& operator-=(Var& x, const Var& y) { return x = x - y; }
inline Var& operator*=(Var& x, const Var& y) { return x = x * y; }
inline Var& operator/=(Var& x, const Var& y) { return x = x / y; }

inline bool operator<(const Var& x, const Var& y) { return x.value() < y.value(); }
inline bool operator>(const Var& x, const Var& y) { return x.value() > y.value(); }
inline bool operator<=(const Var& x, const Var& y) { return x.value() <= y.value(); }
inline bool operator>=(const Var& x, const Var& y) { return x.value() >= y.value(); }

// --- elementary functions ---------------------------------------------------

inline Var cos(const Var& x) {
  return Tape::record_unary(std::cos(x.value()), x, -std::sin(x.value()));
}
inline Var sin(const Var& x) {
  return Tape::record_unary(std::sin(x.value()), x, std::cos(x.value()));
}
inline Var exp(const Var& x) {
  const double e = std::exp(x.value());
  return Tape::record_unary(e, x, e);
}
inline Var log(const Var& x) {
  return Tape::record_unary(std::log(x.value()), x, 1.0 / x.value());
}
inline Var sqrt(const Var& x) {
  const double s = std::sqrt(x.value());
  return Tape::record_unary(s, x, 0.5 / s);
}
inline Var tanh(const Var& x) {
  const double t = std::tanh(x.value());
  return Tape::record_unary(t, x, 1.0 - t * t);
}

}  // namespace appd::ad

namespace appd {

// Scalar helpers shared by the double and Var code paths. Unqualified calls
// from templates resolve to these for double and, via ADL, to the ad::
// overloads for Var.

inline double softplus(double x) {
  return x > 30.0 ? x : std::log1p(std::exp(x));
}
inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }
/// max(x, lo) with derivative 1 on the open region x > lo.
inline double floor_at(double x, double lo) { return x > lo ? x : lo; }

namespace ad {

inline Var softplus(const Var& x) {
  const double v = x.value();
  const double y = v > 30.0 ? v : std::log1p(std::exp(v));
  return Tape::record_unary(y, x, appd::logistic(v));
}
inline Var logistic(const Var& x) {
  const double s = appd::logistic(x.value());
  return Tape::record_unary(s, x, s * (1.0 - s));
}
inline Var floor_at(const Var& x, double lo) {
  return x.value() > lo ? x : Tape::record_unary(lo, x, 0.0);
}

}  // namespace ad

// ---------------------------------------------------------------------------
// Flattened parameter vectors with a stable, named index map.
// ---------------------------------------------------------------------------

struct ParamLayout {
  struct Segment {
    std::string name;
    std::size_t offset = 0;
    std::size_t count = 0;
  };
  std::vector<Segment> segments;
  std::size_t total = 0;

  std::size_t add(const std::string& name, std::size_t count) {
    segments.push_back(Segment{name, total, count});
    total += count;
    return total - count;
  }

  const Segment& find(const std::string& name) const {
    for (const auto& s : segments) {
      if (s.name == name) return s;
    }
    throw std::out_of_range("no parameter segment named " + name);
  }
};

struct ParamVector {
  ParamLayout layout;
  std::vector<double> values;

  std::span<double> segment(const std::string& name) {
    const auto& s = layout.find(name);
    return std::span<double>(values).subspan(s.offset, s.count);
  }
  std::span<const double> segment(const std::string& name) const {
    const auto& s = layout.find(name);
    return std::span<const double>(values).subspan(s.offset, s.count);
  }
  std::size_t size() const { return values.size(); }
};

class NonFiniteLossError : public std::runtime_error {
 public:
  explicit NonFiniteLossError(const std::string& what) : std::runtime_error(what) {}
};

/// A differentiable scalar loss: builds its value on the supplied tape from
/// the given parameter variables.
using LossFn = std::function<ad::Var(ad::Tape&, std::span<const ad::Var>)>;

inline double eval_loss(const LossFn& loss, std::span<const double> at) {
  ad::Tape tape;
  auto vars = tape.inputs(at);
  return loss(tape, vars).value();
}

/// Reverse-mode gradient of `loss` at `at`. Shape (layout) is preserved.
inline ParamVector grad(const LossFn& loss, const ParamVector& at) {
  ad::Tape tape;
  auto vars = tape.inputs(at.values);
  ad::Var out = loss(tape, vars);
  if (!std::isfinite(out.value())) {
    std::string names;
    for (const auto& s : at.layout.segments) {
      names += names.empty() ? s.name : ", " + s.name;
    }
    throw NonFiniteLossError("loss is not finite at parameters [" + names + "]");
  }
  std::vector<double> adj = tape.gradient(out);
  ParamVector g{at.layout, std::vector<double>(at.values.size(), 0.0)};
  for (std::size_t i = 0; i < vars.size(); ++i) {
    g.values[i] = adj[vars[i].index()];
  }
  return g;
}

struct FiniteDiffReport {
  struct Entry {
    std::size_t index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_err = 0.0;
  };
  double max_rel_err = 0.0;
  bool pass = true;
  std::vector<Entry> failures;
};

/// Central-difference comparison of grad() against the double evaluation
/// path. Coordinates whose analytic gradient is below `active_floor` are
/// reported but not gated.
inline FiniteDiffReport finite_diff_check(const LossFn& loss, const ParamVector& at,
                                          double h, double tol,
                                          double active_floor = 1e-6) {
  if (h < 1e-7 || h > 1e-3) {
    throw std::invalid_argument("finite_diff_check: h outside [1e-7, 1e-3]");
  }
  ParamVector g = grad(loss, at);
  FiniteDiffReport report;
  std::vector<double> point = at.values;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double saved = point[i];
    point[i] = saved + h;
    const double fp = eval_loss(loss, point);
    point[i] = saved - h;
    const double fm = eval_loss(loss, point);
    point[i] = saved;
    const double numeric = (fp - fm) / (2.0 * h);
    const double analytic = g.values[i];
    const double denom = std::max(std::abs(analytic), std::abs(numeric));
    const double rel = denom > 0.0 ? std::abs(analytic - numeric) / denom : 0.0;
    if (std::abs(analytic) > active_floor || std::abs(numeric) > active_floor) {
      report.max_rel_err = std::max(report.max_rel_err, rel);
      if (rel > tol) {
        report.pass = false;
        report.failures.push_back({i, analytic, numeric, rel});
      }
    }
  }
  return report;
}

}  // namespace appd
