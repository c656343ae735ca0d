#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace ppsynth::ad {

// Reverse-mode tape over scalar doubles. Each node records at most two
// parents with the local partial derivatives; the reverse sweep is a single
// backwards pass. Evaluation is purely deterministic: the same inputs build
// the same tape and produce bit-identical values and gradients.
class Tape {
 public:
  struct Node {
    int a;
    int b;
    double da;
    double db;
  };

  void clear() {
    nodes_.clear();
    vals_.clear();
  }

  int push_leaf(double v) {
    nodes_.push_back({-1, -1, 0.0, 0.0});
    vals_.push_back(v);
    return static_cast<int>(nodes_.size()) - 1;
  }

  int push_unary(int a, double da, double v) {
    nodes_.push_back({a, -1, da, 0.0});
    vals_.push_back(v);
    return static_cast<int>(nodes_.size()) - 1;
  }

  int push_binary(int a, int b, double da, double db, double v) {
    nodes_.push_back({a, b, da, db});
    vals_.push_back(v);
    return static_cast<int>(nodes_.size()) - 1;
  }

  double value(int i) const { return vals_[i]; }
  size_t size() const { return nodes_.size(); }

  // adjoints of every node with d(node[root])/d(node[i]); root seeded with 1
  void backward(int root, std::vector<double>& adj) const {
    adj.assign(nodes_.size(), 0.0);
    if (root < 0) return;
    adj[root] = 1.0;
    for (int i = root; i >= 0; --i) {
      const Node& n = nodes_[i];
      double a = adj[i];
      if (a == 0.0) continue;
      if (n.a >= 0) adj[n.a] += n.da * a;
      if (n.b >= 0) adj[n.b] += n.db * a;
    }
  }

  void reserve(size_t n) {
    nodes_.reserve(n);
    vals_.reserve(n);
  }

 private:
  std::vector<Node> nodes_;
  std::vector<double> vals_;
};

// Variable handle; value is cached locally so reads avoid the indirection.
class Var {
 public:
  Var() : tape_(nullptr), idx_(-1), val_(0.0) {}
  Var(Tape* t, int idx) : tape_(t), idx_(idx), val_(t->value(idx)) {}
  Var(Tape* t, double constant) : tape_(t), idx_(t->push_leaf(constant)), val_(constant) {}

  double value() const { return val_; }
  int index() const { return idx_; }
  Tape* tape() const { return tape_; }

 private:
  Tape* tape_;
  int idx_;
  double val_;
};

inline Var make_var(Tape& t, double v) { return Var(&t, v); }

inline Var operator+(const Var& x, const Var& y) {
  Tape* t = x.tape();
  return Var(t, t->push_binary(x.index(), y.index(), 1.0, 1.0, x.value() + y.value()));
}
inline Var operator+(const Var& x, double c) {
  Tape* t = x.tape();
  return Var(t, t->push_unary(x.index(), 1.0, x.value() + c));
}
inline Var operator+(double c, const Var& y) { return y + c; }

inline Var operator-(const Var& x, const Var& y) {
  Tape* t = x.tape();
  return Var(t, t->push_binary(x.index(), y.index(), 1.0, -1.0, x.value() - y.value()));
}
inline Var operator-(const Var& x, double c) {
  Tape* t = x.tape();
  return Var(t, t->push_unary(x.index(), 1.0, x.value() - c));
}
inline Var operator-(double c, const Var& y) {
  Tape* t = y.tape();
  return Var(t, t->push_unary(y.index(), -1.0, c - y.value()));
}
inline Var operator-(const Var& x) {
  Tape* t = x.tape();
  return Var(t, t->push_unary(x.index(), -1.0, -x.value()));
}

inline Var operator*(const Var& x, const Var& y) {
  Tape* t = x.tape();
  return Var(t, t->push_binary(x.index(), y.index(), y.value(), x.value(), x.value() * y.value()));
}
inline Var operator*(const Var& x, double c) {
  Tape* t = x.tape();
  return Var(t, t->push_unary(x.index(), c, x.value() * c));
}
inline Var operator*(double c, const Var& y) { return y * c; }

inline Var operator/(const Var& x, const Var& y) {
  Tape* t = x.tape();
  double inv = 1.0 / y.value();
  double v = x.value() * inv;
  return Var(t, t->push_binary(x.index(), y.index(), inv, -v * inv, v));
}
inline Var operator/(const Var& x, double c) { return x * (1.0 / c); }
inline Var operator/(double c, const Var& y) {
  Tape* t = y.tape();
  double inv = 1.0 / y.value();
  return Var(t, t->push_unary(y.index(), -c * inv * inv, c * inv));
}

inline Var exp(const Var& x) {
  Tape* t = x.tape();
  double v = std::exp(x.value());
  return Var(t, t->push_unary(x.index(), v, v));
}
inline Var log(const Var& x) {
  Tape* t = x.tape();
  return Var(t, t->push_unary(x.index(), 1.0 / x.value(), std::log(x.value())));
}
inline Var log1p(const Var& x) {
  Tape* t = x.tape();
  return Var(t, t->push_unary(x.index(), 1.0 / (1.0 + x.value()), std::log1p(x.value())));
}
inline Var sqrt(const Var& x) {
  Tape* t = x.tape();
  double v = std::sqrt(x.value());
  return Var(t, t->push_unary(x.index(), 0.5 / v, v));
}
inline Var pow(const Var& x, const Var& y) {
  Tape* t = x.tape();
  double v = std::pow(x.value(), y.value());
  double dx = y.value() * std::pow(x.value(), y.value() - 1.0);
  // d/dy x^y = x^y log x; log of a non-positive base is the caller's problem
  // and surfaces as NaN, which the model layer turns into a flagged -inf.
  double dy = v * std::log(x.value());
  return Var(t, t->push_binary(x.index(), y.index(), dx, dy, v));
}
inline Var pow(const Var& x, double c) {
  Tape* t = x.tape();
  double v = std::pow(x.value(), c);
  return Var(t, t->push_unary(x.index(), c * std::pow(x.value(), c - 1.0), v));
}

Var lgamma(const Var& x);

// logistic sigmoid and its inverse
inline Var inv_logit(const Var& x) {
  Tape* t = x.tape();
  double v = 1.0 / (1.0 + std::exp(-x.value()));
  return Var(t, t->push_unary(x.index(), v * (1.0 - v), v));
}
inline Var logit(const Var& x) {
  Tape* t = x.tape();
  double p = x.value();
  return Var(t, t->push_unary(x.index(), 1.0 / (p * (1.0 - p)), std::log(p / (1.0 - p))));
}

// double overloads so density code can be written once and instantiated for
// both plain evaluation and tape evaluation
inline double value_of(double x) { return x; }
inline double value_of(const Var& x) { return x.value(); }
inline double inv_logit(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }
inline double log1p(double x) { return std::log1p(x); }

}  // namespace ppsynth::ad
