#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "povmap/util.hpp"

namespace povmap::ad {

/// Operation record: node value depends on parents a/b with local partials da/db.
/// Nodes are stored in evaluation order; inputs are the first `n_inputs` nodes.
class Tape {
  public:
    struct Node {
        int32_t a;
        int32_t b;
        double da;
        double db;
    };

    int32_t input(double) {
        nodes_.push_back({-1, -1, 0.0, 0.0});
        return static_cast<int32_t>(nodes_.size() - 1);
    }

    int32_t unary(int32_t a, double da) {
        nodes_.push_back({a, -1, da, 0.0});
        return static_cast<int32_t>(nodes_.size() - 1);
    }

    int32_t binary(int32_t a, double da, int32_t b, double db) {
        nodes_.push_back({a, b, da, db});
        return static_cast<int32_t>(nodes_.size() - 1);
    }

    void clear() { nodes_.clear(); }
    size_t size() const { return nodes_.size(); }
    void reserve(size_t n) { nodes_.reserve(n); }

    /// Reverse sweep from `out`; writes d(out)/d(input_i) for the first
    /// `n_inputs` nodes into `grad` (resized).
    void gradient(int32_t out, size_t n_inputs, std::vector<double>& grad) {
        adj_.assign(nodes_.size(), 0.0);
        adj_[static_cast<size_t>(out)] = 1.0;
        for (int32_t i = out; i >= 0; --i) {
            const double a_i = adj_[static_cast<size_t>(i)];
            if (a_i == 0.0) continue;
            const Node& n = nodes_[static_cast<size_t>(i)];
            if (n.a >= 0) adj_[static_cast<size_t>(n.a)] += n.da * a_i;
            if (n.b >= 0) adj_[static_cast<size_t>(n.b)] += n.db * a_i;
        }
        grad.assign(adj_.begin(), adj_.begin() + static_cast<ptrdiff_t>(n_inputs));
    }

  private:
    std::vector<Node> nodes_;
    std::vector<double> adj_;
};

/// Scalar participating in taped computations. A Var with index -1 is a
/// constant (not recorded); this lets plain literals mix in freely.
class Var {
  public:
    Var() : v_(0.0), i_(-1), t_(nullptr) {}
    Var(double v) : v_(v), i_(-1), t_(nullptr) {}  // NOLINT: implicit constants intended
    Var(Tape& t, double v) : v_(v), i_(t.input(v)), t_(&t) {}

    double val() const { return v_; }
    int32_t index() const { return i_; }
    bool tracked() const { return i_ >= 0; }

    static Var raw(Tape* t, double v, int32_t i) {
        Var r;
        r.v_ = v;
        r.i_ = i;
        r.t_ = t;
        return r;
    }

    friend Var unary_op(const Var& x, double v, double dx) {
        if (!x.tracked()) return Var(v);
        return raw(x.t_, v, x.t_->unary(x.i_, dx));
    }

    friend Var binary_op(const Var& x, const Var& y, double v, double dx, double dy) {
        Tape* t = x.tracked() ? x.t_ : y.t_;
        if (!t) return Var(v);
        if (x.tracked() && y.tracked()) {
            assert(x.t_ == y.t_);
            return raw(t, v, t->binary(x.i_, dx, y.i_, dy));
        }
        if (x.tracked()) return raw(t, v, t->unary(x.i_, dx));
        return raw(t, v, t->unary(y.i_, dy));
    }

    Var& operator+=(const Var& o) { return *this = *this + o; }
    Var& operator-=(const Var& o) { return *this = *this - o; }
    Var& operator*=(const Var& o) { return *this = *this * o; }
    Var& operator/=(const Var& o) { return *this = *this / o; }

    friend Var operator+(const Var& x, const Var& y) { return binary_op(x, y, x.v_ + y.v_, 1.0, 1.0); }
    friend Var operator-(const Var& x, const Var& y) { return binary_op(x, y, x.v_ - y.v_, 1.0, -1.0); }
    friend Var operator*(const Var& x, const Var& y) { return binary_op(x, y, x.v_ * y.v_, y.v_, x.v_); }
    friend Var operator/(const Var& x, const Var& y) {
        const double inv = 1.0 / y.v_;
        return binary_op(x, y, x.v_ * inv, inv, -x.v_ * inv * inv);
    }
    friend Var operator-(const Var& x) { return unary_op(x, -x.v_, -1.0); }

    friend bool operator<(const Var& x, const Var& y) { return x.v_ < y.v_; }
    friend bool operator>(const Var& x, const Var& y) { return x.v_ > y.v_; }
    friend bool operator<=(const Var& x, const Var& y) { return x.v_ <= y.v_; }
    friend bool operator>=(const Var& x, const Var& y) { return x.v_ >= y.v_; }

    friend Var log(const Var& x) { return unary_op(x, std::log(x.v_), 1.0 / x.v_); }
    friend Var log1p(const Var& x) { return unary_op(x, std::log1p(x.v_), 1.0 / (1.0 + x.v_)); }
    friend Var exp(const Var& x) {
        const double e = std::exp(x.v_);
        return unary_op(x, e, e);
    }
    friend Var sqrt(const Var& x) {
        const double s = std::sqrt(x.v_);
        return unary_op(x, s, 0.5 / s);
    }
    friend Var lgamma(const Var& x) { return unary_op(x, std::lgamma(x.v_), povmap::digamma(x.v_)); }
    friend Var fabs(const Var& x) { return x.v_ < 0.0 ? -x : x; }
    friend Var max(const Var& x, const Var& y) { return x.v_ >= y.v_ ? x : y; }
    friend Var min(const Var& x, const Var& y) { return x.v_ <= y.v_ ? x : y; }

    friend Var pow_int(const Var& x, long n) {
        if (n == 0) return Var(1.0);
        if (n == 1) return x;
        const double v = std::pow(x.v_, static_cast<double>(n));
        const double d = static_cast<double>(n) * std::pow(x.v_, static_cast<double>(n - 1));
        return unary_op(x, v, d);
    }

    friend double value(const Var& x) { return x.v_; }

  private:
    double v_;
    int32_t i_;
    Tape* t_;
};

}  // namespace povmap::ad

namespace povmap {

// double counterparts so templated numeric code instantiates for both types
inline double value(double x) { return x; }
inline double pow_int(double x, long n) { return std::pow(x, static_cast<double>(n)); }

}  // namespace povmap
