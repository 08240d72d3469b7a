#include "finsler/jet.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>

namespace finsler::jets {

namespace {

int factorial(int n) {
    int f = 1;
    for (int k = 2; k <= n; ++k) f *= k;
    return f;
}

void check_order(int order) {
    if (order < 0 || order > kMaxOrder)
        throw DegreeExceedsOrder("jet order " + std::to_string(order) + " outside 0.." +
                                 std::to_string(kMaxOrder));
}

}  // namespace

// --- layout -------------------------------------------------------------------

JetLayout::JetLayout(int order) : order_(order), stride_(order + 1) {
    // graded lexicographic enumeration
    for (int d = 0; d <= order; ++d) {
        for (int e0 = d; e0 >= 0; --e0)
            for (int e1 = d - e0; e1 >= 0; --e1)
                for (int e2 = d - e0 - e1; e2 >= 0; --e2)
                    indices_.push_back(MultiIndex(e0, e1, e2, d - e0 - e1 - e2));
    }
    positions_.assign(static_cast<std::size_t>(stride_) * stride_ * stride_ * stride_, -1);
    for (std::size_t i = 0; i < indices_.size(); ++i) {
        const auto& e = indices_[i].e;
        positions_[((e[0] * stride_ + e[1]) * stride_ + e[2]) * stride_ + e[3]] =
            static_cast<std::int32_t>(i);
    }
    for (std::size_t ia = 0; ia < indices_.size(); ++ia) {
        for (std::size_t ib = 0; ib < indices_.size(); ++ib) {
            const auto& a = indices_[ia].e;
            const auto& b = indices_[ib].e;
            MultiIndex sum(a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]);
            if (sum.degree() > order) continue;
            products_.push_back({static_cast<std::int32_t>(ia), static_cast<std::int32_t>(ib),
                                 static_cast<std::int32_t>(position(sum))});
        }
    }
}

int JetLayout::position(const MultiIndex& mi) const {
    for (int v = 0; v < kNumVars; ++v)
        if (mi.e[v] < 0 || mi.e[v] > order_) return -1;
    if (mi.degree() > order_) return -1;
    return positions_[((mi.e[0] * stride_ + mi.e[1]) * stride_ + mi.e[2]) * stride_ + mi.e[3]];
}

const JetLayout& JetLayout::of(int order) {
    check_order(order);
    static std::array<std::unique_ptr<JetLayout>, kMaxOrder + 1> cache;
    static std::mutex m;
    std::lock_guard<std::mutex> lock(m);
    if (!cache[order]) cache[order].reset(new JetLayout(order));
    return *cache[order];
}

// --- construction and access ----------------------------------------------------

Jet Jet::constant(double value, int order) {
    check_order(order);
    Jet j(order);
    j.c_[0] = value;
    return j;
}

Jet Jet::variable(double value, int var, int order) {
    if (var < 0 || var >= kNumVars)
        throw DomainError("jet variable index " + std::to_string(var) + " outside 0..3");
    if (order < 1) throw DegreeExceedsOrder("coordinate jet requires order >= 1");
    check_order(order);
    Jet j(order);
    j.c_[0] = value;
    MultiIndex mi;
    mi.e[var] = 1;
    j.c_[JetLayout::of(order).position(mi)] = 1.0;
    return j;
}

double Jet::coeff(const MultiIndex& mi) const {
    int pos = JetLayout::of(order_).position(mi);
    if (pos < 0)
        throw DegreeExceedsOrder("multi-index degree " + std::to_string(mi.degree()) +
                                 " exceeds jet order " + std::to_string(order_));
    return c_[pos];
}

void Jet::set_coeff(const MultiIndex& mi, double v) {
    int pos = JetLayout::of(order_).position(mi);
    if (pos < 0)
        throw DegreeExceedsOrder("multi-index degree " + std::to_string(mi.degree()) +
                                 " exceeds jet order " + std::to_string(order_));
    c_[pos] = v;
}

double Jet::partial(const MultiIndex& mi) const {
    double scale = 1.0;
    for (int v = 0; v < kNumVars; ++v) scale *= factorial(mi.e[v]);
    return coeff(mi) * scale;
}

Jet Jet::derivative(int var) const {
    if (var < 0 || var >= kNumVars)
        throw DomainError("derivative variable index outside 0..3");
    if (order_ == 0) throw DegreeExceedsOrder("cannot differentiate an order-0 jet");
    Jet out(order_ - 1);
    const auto& lo = JetLayout::of(order_ - 1);
    const auto& hi = JetLayout::of(order_);
    for (int i = 0; i < lo.size(); ++i) {
        MultiIndex mi = lo.indices()[i];
        mi.e[var] += 1;
        out.c_[i] = c_[hi.position(mi)] * mi.e[var];
    }
    return out;
}

Jet Jet::truncated(int order) const {
    check_order(order);
    if (order == order_) return *this;
    Jet out(order);
    const auto& lo = JetLayout::of(std::min(order, order_));
    const auto& self = JetLayout::of(order_);
    const auto& tgt = JetLayout::of(order);
    for (int i = 0; i < lo.size(); ++i) {
        const MultiIndex& mi = lo.indices()[i];
        out.c_[tgt.position(mi)] = c_[self.position(mi)];
    }
    return out;
}

// --- linear arithmetic -----------------------------------------------------------

namespace {
void require_same_order(const Jet& a, const Jet& b) {
    if (a.order() != b.order())
        throw OrderMismatch("jet orders differ: " + std::to_string(a.order()) + " vs " +
                            std::to_string(b.order()));
}
}  // namespace

Jet Jet::operator-() const {
    Jet out = *this;
    for (double& v : out.c_) v = -v;
    return out;
}

Jet& Jet::operator+=(const Jet& rhs) {
    require_same_order(*this, rhs);
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += rhs.c_[i];
    return *this;
}

Jet& Jet::operator-=(const Jet& rhs) {
    require_same_order(*this, rhs);
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= rhs.c_[i];
    return *this;
}

Jet& Jet::operator+=(double rhs) {
    c_[0] += rhs;
    return *this;
}

Jet& Jet::operator-=(double rhs) {
    c_[0] -= rhs;
    return *this;
}

Jet& Jet::operator*=(double rhs) {
    for (double& v : c_) v *= rhs;
    return *this;
}

Jet operator*(const Jet& a, const Jet& b) {
    require_same_order(a, b);
    Jet out(a.order_);
    for (const auto& t : JetLayout::of(a.order_).products())
        out.c_[t.c] += a.c_[t.a] * b.c_[t.b];
    return out;
}

// --- univariate composition ------------------------------------------------------

class JetOps {
public:
    // f(g) = sum_k series[k] * (g - g0)^k, Horner form; series[k] = f^(k)(g0)/k!
    static Jet compose(const Jet& g, std::span<const double> series) {
        Jet w = g;
        w.c_[0] = 0.0;
        int n = g.order();
        Jet acc = Jet::constant(series[n], n);
        for (int k = n - 1; k >= 0; --k) {
            acc = acc * w;
            acc.c_[0] += series[k];
        }
        return acc;
    }
};

namespace {

// series for t^r around t0 via c_k = c_{k-1} * (r - k + 1) / (k * t0);
// c0 supplied by the caller (handles the real cube root of negative values)
std::vector<double> power_series(double t0, double r, double c0, int n) {
    std::vector<double> s(n + 1);
    s[0] = c0;
    for (int k = 1; k <= n; ++k) s[k] = s[k - 1] * (r - k + 1) / (k * t0);
    return s;
}

}  // namespace

Jet operator/(const Jet& a, const Jet& b) {
    require_same_order(a, b);
    double b0 = b.value();
    if (b0 == 0.0) throw DivisionByZeroValue("division by a jet with zero value part");
    return a * JetOps::compose(b, power_series(b0, -1.0, 1.0 / b0, b.order()));
}

Jet operator/(double a, const Jet& b) {
    double b0 = b.value();
    if (b0 == 0.0) throw DivisionByZeroValue("division by a jet with zero value part");
    return a * JetOps::compose(b, power_series(b0, -1.0, 1.0 / b0, b.order()));
}

Jet pow_int(const Jet& a, long long n) {
    if (n < 0) {
        if (a.value() == 0.0)
            throw DivisionByZeroValue("negative integer power of a jet with zero value part");
        return 1.0 / pow_int(a, -n);
    }
    Jet result = Jet::constant(1.0, a.order());
    Jet base = a;
    while (n > 0) {
        if (n & 1) result = result * base;
        base = base * base;
        n >>= 1;
    }
    return result;
}

Jet pow_real(const Jet& a, double r) {
    double t0 = a.value();
    if (t0 <= 0.0) throw DomainError("pow with non-integer exponent requires a positive base");
    return JetOps::compose(a, power_series(t0, r, std::pow(t0, r), a.order()));
}

Jet sqrt(const Jet& a) {
    double t0 = a.value();
    if (t0 <= 0.0) throw DomainError("sqrt of a jet with non-positive value part");
    return JetOps::compose(a, power_series(t0, 0.5, std::sqrt(t0), a.order()));
}

Jet cbrt(const Jet& a) {
    double t0 = a.value();
    if (t0 == 0.0) throw DomainError("cbrt of a jet with zero value part");
    return JetOps::compose(a, power_series(t0, 1.0 / 3.0, std::cbrt(t0), a.order()));
}

Jet exp(const Jet& a) {
    int n = a.order();
    std::vector<double> s(n + 1);
    s[0] = std::exp(a.value());
    for (int k = 1; k <= n; ++k) s[k] = s[k - 1] / k;
    return JetOps::compose(a, s);
}

Jet ln(const Jet& a) {
    double t0 = a.value();
    if (t0 <= 0.0) throw DomainError("ln of a jet with non-positive value part");
    int n = a.order();
    std::vector<double> s(n + 1);
    s[0] = std::log(t0);
    // d/dt ln = 1/t: shift of the power series for t^-1
    for (int k = 1; k <= n; ++k) s[k] = (k == 1 ? 1.0 / t0 : s[k - 1] * (-(k - 1.0)) / (k * t0));
    return JetOps::compose(a, s);
}

Jet sin(const Jet& a) {
    int n = a.order();
    std::vector<double> s(n + 1);
    double sv = std::sin(a.value()), cv = std::cos(a.value());
    const double cycle[4] = {sv, cv, -sv, -cv};
    for (int k = 0; k <= n; ++k) s[k] = cycle[k % 4] / factorial(k);
    return JetOps::compose(a, s);
}

Jet cos(const Jet& a) {
    int n = a.order();
    std::vector<double> s(n + 1);
    double sv = std::sin(a.value()), cv = std::cos(a.value());
    const double cycle[4] = {cv, -sv, -cv, sv};
    for (int k = 0; k <= n; ++k) s[k] = cycle[k % 4] / factorial(k);
    return JetOps::compose(a, s);
}

Jet abs(const Jet& a) {
    double t0 = a.value();
    if (t0 == 0.0) throw DomainError("abs of a jet with zero value part");
    return t0 > 0.0 ? a : -a;
}

Jet jet_apply(JetOp op, std::span<const Jet> args) {
    auto unary = [&]() -> const Jet& {
        if (args.size() != 1) throw DomainError("unary jet op expects 1 argument");
        return args[0];
    };
    auto binary = [&]() {
        if (args.size() != 2) throw DomainError("binary jet op expects 2 arguments");
    };
    switch (op) {
        case JetOp::Add: binary(); return args[0] + args[1];
        case JetOp::Sub: binary(); return args[0] - args[1];
        case JetOp::Mul: binary(); return args[0] * args[1];
        case JetOp::Div: binary(); return args[0] / args[1];
        case JetOp::Neg: return -unary();
        case JetOp::PowInt: binary(); return pow_int(args[0], std::llround(args[1].value()));
        case JetOp::PowReal: binary(); return pow_real(args[0], args[1].value());
        case JetOp::Sqrt: return sqrt(unary());
        case JetOp::Cbrt: return cbrt(unary());
        case JetOp::Sin: return sin(unary());
        case JetOp::Cos: return cos(unary());
        case JetOp::Exp: return exp(unary());
        case JetOp::Ln: return ln(unary());
        case JetOp::Abs: return abs(unary());
    }
    throw DomainError("unhandled jet op");
}

// --- finite-difference oracle ----------------------------------------------------

namespace {

double nested_central(const std::function<double(const std::array<double, 4>&)>& f,
                      std::array<double, 4> point, MultiIndex idx, double h) {
    for (int v = 0; v < kNumVars; ++v) {
        if (idx.e[v] == 0) continue;
        idx.e[v] -= 1;
        auto hi = point, lo = point;
        hi[v] += h;
        lo[v] -= h;
        return (nested_central(f, hi, idx, h) - nested_central(f, lo, idx, h)) / (2.0 * h);
    }
    return f(point);
}

}  // namespace

double fd_partial(const std::function<double(const std::array<double, 4>&)>& f,
                  const std::array<double, 4>& point, const MultiIndex& idx, double h) {
    if (idx.degree() > 3)
        throw DegreeExceedsOrder("finite differences are unreliable beyond third order");
    if (idx.degree() == 0) return f(point);
    double d1 = nested_central(f, point, idx, h);
    double d2 = nested_central(f, point, idx, 2.0 * h);
    return (4.0 * d1 - d2) / 3.0;
}

FdCheck fd_crosscheck(const Field4& f, const std::array<double, 4>& point, const MultiIndex& idx,
                      int jet_order) {
    if (idx.degree() > 3)
        throw DegreeExceedsOrder("finite differences are unreliable beyond third order");
    std::array<Jet, 4> args;
    for (int v = 0; v < kNumVars; ++v) args[v] = Jet::variable(point[v], v, jet_order);
    double jet_value = f.jet_fn(args).partial(idx);
    double fd_value = fd_partial(f.scalar_fn, point, idx);
    double denom = std::max({1.0, std::fabs(jet_value), std::fabs(fd_value)});
    return {jet_value, fd_value, std::fabs(jet_value - fd_value) / denom};
}

}  // namespace finsler::jets
