#pragma once

// Truncated multivariate Taylor jets over the four variables (x1, x2, X, Y).
//
// A Jet of order n stores the Taylor coefficients (partial derivative divided
// by the product of exponent factorials) of a scalar function at a point, for
// every multi-index of total degree <= n. Arithmetic and elementary-function
// composition are exact through the stored order; only terms of total degree
// greater than the order are discarded.

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "finsler/errors.hpp"

namespace finsler::jets {

inline constexpr int kNumVars = 4;  // x1, x2, X, Y
inline constexpr int kMaxOrder = 8;

struct MultiIndex {
    std::array<int, 4> e{0, 0, 0, 0};

    constexpr MultiIndex() = default;
    constexpr MultiIndex(int e0, int e1, int e2, int e3) : e{e0, e1, e2, e3} {}

    int degree() const { return e[0] + e[1] + e[2] + e[3]; }
    bool operator==(const MultiIndex&) const = default;
};

// Per-order coefficient layout: graded lexicographic index list, a dense
// position lookup, and the precomputed triple list (ia, ib, ic) driving
// truncated multiplication.
class JetLayout {
public:
    struct Triple {
        std::int32_t a, b, c;
    };

    static const JetLayout& of(int order);

    int order() const { return order_; }
    int size() const { return static_cast<int>(indices_.size()); }
    const std::vector<MultiIndex>& indices() const { return indices_; }
    const std::vector<Triple>& products() const { return products_; }

    // position of a multi-index, or -1 when its degree exceeds the order
    int position(const MultiIndex& mi) const;

private:
    explicit JetLayout(int order);

    int order_;
    int stride_;
    std::vector<MultiIndex> indices_;
    std::vector<std::int32_t> positions_;
    std::vector<Triple> products_;
};

class Jet {
public:
    Jet() : order_(0), c_(1, 0.0) {}

    static Jet constant(double value, int order);
    // jet of the coordinate function `var` (0 = x1, 1 = x2, 2 = X, 3 = Y)
    static Jet variable(double value, int var, int order);

    int order() const { return order_; }
    double value() const { return c_[0]; }

    double coeff(const MultiIndex& mi) const;
    void set_coeff(const MultiIndex& mi, double v);
    std::span<const double> coeffs() const { return c_; }

    // partial derivative value: coefficient times the exponent factorials
    double partial(const MultiIndex& mi) const;

    // jet of the partial derivative with respect to one variable (order drops by one)
    Jet derivative(int var) const;
    Jet truncated(int order) const;

    Jet operator-() const;
    Jet& operator+=(const Jet& rhs);
    Jet& operator-=(const Jet& rhs);
    Jet& operator+=(double rhs);
    Jet& operator-=(double rhs);
    Jet& operator*=(double rhs);

    friend Jet operator+(Jet a, const Jet& b) { return a += b; }
    friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
    friend Jet operator+(Jet a, double b) { return a += b; }
    friend Jet operator-(Jet a, double b) { return a -= b; }
    friend Jet operator+(double a, Jet b) { return b += a; }
    friend Jet operator-(double a, const Jet& b) { return (-b) += a; }
    friend Jet operator*(Jet a, double b) { return a *= b; }
    friend Jet operator*(double a, Jet b) { return b *= a; }
    friend Jet operator*(const Jet& a, const Jet& b);
    friend Jet operator/(const Jet& a, const Jet& b);
    friend Jet operator/(double a, const Jet& b);
    friend Jet operator/(Jet a, double b) { return a *= (1.0 / b); }

private:
    friend class JetOps;
    explicit Jet(int order) : order_(order), c_(JetLayout::of(order).size(), 0.0) {}

    int order_;
    std::vector<double> c_;
};

// elementary functions composed onto jets
Jet pow_int(const Jet& a, long long n);
Jet pow_real(const Jet& a, double r);  // requires positive value part
Jet sqrt(const Jet& a);                // requires positive value part
Jet cbrt(const Jet& a);                // real cube root; requires nonzero value part
Jet sin(const Jet& a);
Jet cos(const Jet& a);
Jet exp(const Jet& a);
Jet ln(const Jet& a);  // requires positive value part
Jet abs(const Jet& a); // requires nonzero value part

enum class JetOp {
    Add, Sub, Mul, Div, Neg,
    PowInt, PowReal,
    Sqrt, Cbrt, Sin, Cos, Exp, Ln, Abs,
};

// Generic dispatch over the elementary operation set. PowInt / PowReal take the
// exponent as the value part of the second argument.
Jet jet_apply(JetOp op, std::span<const Jet> args);

// --- finite-difference oracle ------------------------------------------------

// A scalar field over (x1, x2, X, Y) evaluable both through jets and as a
// plain scalar function. The scalar path is what the finite-difference oracle
// differentiates, keeping it independent of the Taylor recurrences it checks.
struct Field4 {
    std::function<Jet(const std::array<Jet, 4>&)> jet_fn;
    std::function<double(const std::array<double, 4>&)> scalar_fn;
};

struct FdCheck {
    double jet_value;
    double fd_value;
    double rel_error;
};

// Nested central differences, step 1e-4 per differentiation, one Richardson
// extrapolation level (combining the h and 2h stencils). Degrees above 3 are
// rejected: double precision cannot support them.
double fd_partial(const std::function<double(const std::array<double, 4>&)>& f,
                  const std::array<double, 4>& point, const MultiIndex& idx,
                  double h = 1e-4);

FdCheck fd_crosscheck(const Field4& f, const std::array<double, 4>& point,
                      const MultiIndex& idx, int jet_order = 4);

}  // namespace finsler::jets
