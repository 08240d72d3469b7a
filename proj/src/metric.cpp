#include "finsler/metric.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace finsler::metrics {

using expr::ConstEnv;
using expr::Expr;

// --- kind table ------------------------------------------------------------------

const char* kind_name(MetricKind kind) {
    switch (kind) {
        case MetricKind::KropinaGeneral: return "KropinaGeneral";
        case MetricKind::KropinaCanonical: return "KropinaCanonical";
        case MetricKind::Parabolic: return "Parabolic";
        case MetricKind::MinkowskiLinear: return "MinkowskiLinear";
        case MetricKind::MinkowskiRational: return "MinkowskiRational";
        case MetricKind::CubicGeneral: return "CubicGeneral";
        case MetricKind::CubicExceptional: return "CubicExceptional";
    }
    return "?";
}

MetricKind kind_from_name(const std::string& name) {
    static const std::map<std::string, MetricKind> table = {
        {"KropinaGeneral", MetricKind::KropinaGeneral},
        {"KropinaCanonical", MetricKind::KropinaCanonical},
        {"Parabolic", MetricKind::Parabolic},
        {"MinkowskiLinear", MetricKind::MinkowskiLinear},
        {"MinkowskiRational", MetricKind::MinkowskiRational},
        {"CubicGeneral", MetricKind::CubicGeneral},
        {"CubicExceptional", MetricKind::CubicExceptional},
    };
    auto it = table.find(name);
    if (it == table.end()) throw MalformedSpec("unknown metric kind '" + name + "'");
    return it->second;
}

bool kind_is_kropina(MetricKind kind) {
    switch (kind) {
        case MetricKind::KropinaGeneral:
        case MetricKind::KropinaCanonical:
        case MetricKind::Parabolic:
        case MetricKind::MinkowskiLinear:
        case MetricKind::MinkowskiRational: return true;
        default: return false;
    }
}

bool kind_is_cubic(MetricKind kind) {
    return kind == MetricKind::CubicGeneral || kind == MetricKind::CubicExceptional;
}

// --- spec serialization ------------------------------------------------------------

MetricSpec MetricSpec::from_json(const nlohmann::json& j) {
    MetricSpec spec;
    if (!j.is_object() || !j.contains("kind"))
        throw MalformedSpec("metric spec must be an object with a 'kind' field");
    spec.kind = kind_from_name(j.at("kind").get<std::string>());
    if (j.contains("exprs")) {
        for (auto& [name, value] : j.at("exprs").items()) {
            if (!value.is_string()) throw MalformedSpec("expr '" + name + "' must be a string");
            spec.exprs[name] = value.get<std::string>();
        }
    }
    if (j.contains("constants")) {
        for (auto& [name, value] : j.at("constants").items()) {
            if (!value.is_number()) throw MalformedSpec("constant '" + name + "' must be a number");
            spec.constants[name] = value.get<double>();
        }
    }
    return spec;
}

nlohmann::json MetricSpec::to_json() const {
    nlohmann::json j;
    j["kind"] = kind_name(kind);
    j["exprs"] = nlohmann::json::object();
    for (const auto& [name, src] : exprs) j["exprs"][name] = src;
    j["constants"] = nlohmann::json::object();
    for (const auto& [name, v] : constants) j["constants"][name] = v;
    return j;
}

// --- shared helpers ------------------------------------------------------------------

namespace {

void collect_constants(const expr::Node& n, std::vector<std::string>& out) {
    switch (n.kind) {
        case expr::Node::Kind::Const: out.push_back(n.cname); break;
        case expr::Node::Kind::Unary: collect_constants(*n.a, out); break;
        case expr::Node::Kind::Binary:
            collect_constants(*n.a, out);
            collect_constants(*n.b, out);
            break;
        default: break;
    }
}

Expr parse_field(const MetricSpec& spec, const std::string& name) {
    auto it = spec.exprs.find(name);
    if (it == spec.exprs.end())
        throw MalformedSpec(std::string(kind_name(spec.kind)) + " spec requires expr '" + name + "'");
    Expr e;
    try {
        e = Expr::parse(it->second);
    } catch (const Error& err) {
        throw MalformedSpec("expr '" + name + "': " + err.what());
    }
    std::vector<std::string> names;
    collect_constants(*e.root(), names);
    for (const auto& cname : names)
        if (!spec.constants.count(cname))
            throw MalformedSpec("expr '" + name + "' references unbound constant '" + cname + "'");
    return e;
}

double require_constant(const MetricSpec& spec, const std::string& name) {
    auto it = spec.constants.find(name);
    if (it == spec.constants.end())
        throw MalformedSpec(std::string(kind_name(spec.kind)) + " spec requires constant '" + name +
                            "'");
    return it->second;
}

void check_direction_order(const Jet& x1, const Jet& x2, const Jet& X, const Jet& Y) {
    if (x1.order() != x2.order() || X.order() != Y.order() || x1.order() != X.order() + 1)
        throw OrderMismatch("metric evaluation expects base jets one order above direction jets");
}

// quadratic/linear Kropina assembly with the singularity guards
Jet kropina_form(const Jet& A, const Jet& B, const Jet& C, const Jet& D, const Jet& X,
                 const Jet& Y) {
    double delta = A.value() * D.value() * D.value() - B.value() * D.value() + C.value();
    if (std::fabs(delta) < kDegenerateConicTol)
        throw DegenerateConic("Delta = A D^2 - B D + C vanishes at the evaluation point");
    Jet den = X + D * Y;
    if (std::fabs(den.value()) < kSingularDirectionTol)
        throw SingularDirection("direction lies on X + D Y = 0");
    return (A * X * X + B * X * Y + C * Y * Y) / den;
}

Jet cubic_form(const Jet& A, const Jet& B, const Jet& C, const Jet& D, const Jet& X, const Jet& Y) {
    double a = A.value(), b = B.value(), c = C.value(), d = D.value();
    double R = (a * b - d * c) * (a * b - d * c) - 4.0 * (a * d - c * c) * (c * b - d * d);
    if (std::fabs(R) < kDegenerateCubicTol)
        throw DegenerateCubic("discriminant R vanishes at the evaluation point");
    Jet F = A * X * X * X + B * Y * Y * Y + 3.0 * (C * X * X * Y) + 3.0 * (D * X * Y * Y);
    if (std::fabs(F.value()) < kSingularDirectionTol)
        throw SingularDirection("cubic form vanishes along this direction");
    return jets::cbrt(F);
}

}  // namespace

// --- base class -----------------------------------------------------------------------

Jet Metric::eval(const EvalPoint& pt, int order) const {
    if (pt.X == 0.0 && pt.Y == 0.0) throw SingularDirection("zero direction vector");
    Jet x1 = Jet::variable(pt.x1, 0, order + 1);
    Jet x2 = Jet::variable(pt.x2, 1, order + 1);
    Jet X = Jet::variable(pt.X, 2, order);
    Jet Y = Jet::variable(pt.Y, 3, order);
    return eval_jets(x1, x2, X, Y);
}

double Metric::value(const EvalPoint& pt) const { return eval(pt, 1).value(); }

double Metric::coefficient_D(double x1, double x2) const {
    return coefficients(x1, x2, 0).D.value();
}

// --- concrete kinds --------------------------------------------------------------------

namespace {

// A, B, C, D given as expressions over (x1, x2)
class FormMetric : public Metric {
public:
    FormMetric(MetricKind kind, Expr A, Expr B, Expr C, Expr D, ConstEnv env)
        : kind_(kind), A_(std::move(A)), B_(std::move(B)), C_(std::move(C)), D_(std::move(D)),
          env_(std::move(env)) {}

    MetricKind kind() const override { return kind_; }

    Jet eval_jets(const Jet& x1, const Jet& x2, const Jet& X, const Jet& Y) const override {
        check_direction_order(x1, x2, X, Y);
        Jet u = x1.truncated(X.order());
        Jet v = x2.truncated(X.order());
        Jet A = A_.eval(env_, u, v), B = B_.eval(env_, u, v);
        Jet C = C_.eval(env_, u, v), D = D_.eval(env_, u, v);
        return kind_is_cubic(kind_) ? cubic_form(A, B, C, D, X, Y) : kropina_form(A, B, C, D, X, Y);
    }

    Coefficients coefficients(double x1, double x2, int order) const override {
        Jet u = Jet::variable(x1, 0, order);
        Jet v = Jet::variable(x2, 1, order);
        if (order == 0) {
            u = Jet::constant(x1, 0);
            v = Jet::constant(x2, 0);
        }
        return {A_.eval(env_, u, v), B_.eval(env_, u, v), C_.eval(env_, u, v),
                D_.eval(env_, u, v)};
    }

private:
    MetricKind kind_;
    Expr A_, B_, C_, D_;
    ConstEnv env_;
};

// chain-rule recovery of (d1 phi, d2 phi) composed with general base jets
std::array<Jet, 2> gradient_at(const Expr& phi, const ConstEnv& env, const Jet& x1, const Jet& x2) {
    Jet composed = phi.eval(env, x1, x2);
    Jet amb1 = composed.derivative(0), amb2 = composed.derivative(1);
    Jet u1 = x1.derivative(0), u2 = x1.derivative(1);
    Jet v1 = x2.derivative(0), v2 = x2.derivative(1);
    Jet det = u1 * v2 - v1 * u2;
    if (std::fabs(det.value()) < 1e-12)
        throw DomainSingularity("base-point jets have a singular jacobian");
    Jet g1 = (amb1 * v2 - v1 * amb2) / det;
    Jet g2 = (u1 * amb2 - amb1 * u2) / det;
    return {g1, g2};
}

// L = (phi_x1 X^2 + phi_x2 XY + k Y^2)/X
class CanonicalMetric : public Metric {
public:
    CanonicalMetric(MetricKind kind, Expr phi, ConstEnv env, double k)
        : kind_(kind), phi_(std::move(phi)), env_(std::move(env)), k_(k) {
        if (std::fabs(k_) < kDegenerateConicTol)
            throw MalformedSpec("canonical metric requires k != 0");
    }

    MetricKind kind() const override { return kind_; }

    Jet eval_jets(const Jet& x1, const Jet& x2, const Jet& X, const Jet& Y) const override {
        check_direction_order(x1, x2, X, Y);
        auto grad = gradient_at(phi_, env_, x1, x2);
        Jet A = grad[0], B = grad[1];
        Jet C = Jet::constant(k_, X.order());
        Jet D = Jet::constant(0.0, X.order());
        return kropina_form(A, B, C, D, X, Y);
    }

    Coefficients coefficients(double x1, double x2, int order) const override {
        Jet u = Jet::variable(x1, 0, order + 1);
        Jet v = Jet::variable(x2, 1, order + 1);
        Jet phi = phi_.eval(env_, u, v);
        return {phi.derivative(0), phi.derivative(1), Jet::constant(k_, order),
                Jet::constant(0.0, order)};
    }

    const Expr& phi() const { return phi_; }
    const ConstEnv& env() const { return env_; }
    double k() const { return k_; }

private:
    MetricKind kind_;
    Expr phi_;
    ConstEnv env_;
    double k_;
};

// L = (a X + Y)^2 / X with a(x1, x2) defined by x2 + x1 a + sigma(a) = 0
class ParabolicMetric : public Metric {
public:
    ParabolicMetric(Expr sigma, ConstEnv env) : sigma_(std::move(sigma)), env_(std::move(env)) {
        if (sigma_.uses_var(1))
            throw MalformedSpec("parabolic sigma is a function of one parameter; write it in x1");
    }

    MetricKind kind() const override { return MetricKind::Parabolic; }

    Jet eval_jets(const Jet& x1, const Jet& x2, const Jet& X, const Jet& Y) const override {
        check_direction_order(x1, x2, X, Y);
        Jet a = a_jet(x1.truncated(X.order()), x2.truncated(X.order()));
        Jet den = X;
        if (std::fabs(den.value()) < kSingularDirectionTol)
            throw SingularDirection("direction lies on X = 0");
        Jet num = a * X + Y;
        return num * num / den;
    }

    Coefficients coefficients(double x1, double x2, int order) const override {
        Jet u = Jet::variable(x1, 0, order);
        Jet v = Jet::variable(x2, 1, order);
        if (order == 0) {
            u = Jet::constant(x1, 0);
            v = Jet::constant(x2, 0);
        }
        Jet a = a_jet(u, v);
        return {a * a, 2.0 * a, Jet::constant(1.0, order), Jet::constant(0.0, order)};
    }

    const Expr& sigma() const { return sigma_; }
    const ConstEnv& env() const { return env_; }

private:
    // jet of the implicit root: scalar Newton for the value, then a contraction
    // in jet arithmetic that gains at least one Taylor degree per sweep
    Jet a_jet(const Jet& x1, const Jet& x2) const {
        ParabolicSolveInfo info;
        double a0 = solve_parabolic_a(sigma_, env_, x1.value(), x2.value(), &info);
        if (info.multiplicity_warning)
            throw ImplicitSolveFailed("jet expansion of a(x) requires a simple root");
        int order = x1.order();
        double c = info.derivative;
        Jet a = Jet::constant(a0, order);
        for (int sweep = 0; sweep < order + 2; ++sweep) {
            Jet F = x2 + x1 * a + sigma_.eval(env_, a, Jet::constant(0.0, order));
            a -= F * (1.0 / c);
        }
        Jet F = x2 + x1 * a + sigma_.eval(env_, a, Jet::constant(0.0, order));
        for (double coeff : F.coeffs())
            if (std::fabs(coeff) > 1e-9)
                throw ImplicitSolveFailed("jet expansion of a(x) did not converge");
        return a;
    }

    Expr sigma_;
    ConstEnv env_;
};

// metric composed with a coordinate map into the inner metric's coordinates
class TransformedMetric : public Metric {
public:
    TransformedMetric(std::shared_ptr<const Metric> inner, std::shared_ptr<const CoordinateMap> map)
        : inner_(std::move(inner)), map_(std::move(map)) {}

    MetricKind kind() const override { return inner_->kind(); }

    Jet eval_jets(const Jet& x1, const Jet& x2, const Jet& X, const Jet& Y) const override {
        check_direction_order(x1, x2, X, Y);
        auto mapped = map_->components(x1, x2);
        auto J = map_->jacobian(x1.truncated(X.order()), x2.truncated(X.order()));
        Jet Xb = J[0][0] * X + J[0][1] * Y;
        Jet Yb = J[1][0] * X + J[1][1] * Y;
        return inner_->eval_jets(mapped[0], mapped[1], Xb, Yb);
    }

    Coefficients coefficients(double x1, double x2, int order) const override {
        return is_cubic() ? recover_cubic_coefficients(*this, x1, x2, order)
                          : recover_kropina_coefficients(*this, x1, x2, order);
    }

private:
    std::shared_ptr<const Metric> inner_;
    std::shared_ptr<const CoordinateMap> map_;
};

}  // namespace

// --- spec -> metric -------------------------------------------------------------------

std::shared_ptr<Metric> make_metric(const MetricSpec& spec) {
    switch (spec.kind) {
        case MetricKind::KropinaGeneral:
        case MetricKind::CubicGeneral:
            return std::make_shared<FormMetric>(spec.kind, parse_field(spec, "A"),
                                                parse_field(spec, "B"), parse_field(spec, "C"),
                                                parse_field(spec, "D"), spec.constants);
        case MetricKind::KropinaCanonical: {
            double k = spec.constants.count("k") ? spec.constants.at("k") : 1.0;
            return std::make_shared<CanonicalMetric>(spec.kind, parse_field(spec, "phi"),
                                                     spec.constants, k);
        }
        case MetricKind::Parabolic:
            return std::make_shared<ParabolicMetric>(parse_field(spec, "sigma"), spec.constants);
        case MetricKind::MinkowskiLinear: {
            require_constant(spec, "k1");
            require_constant(spec, "k2");
            require_constant(spec, "k3");
            Expr phi = Expr::parse("k1*x1 + k2*x2 + k3");
            return std::make_shared<CanonicalMetric>(spec.kind, std::move(phi), spec.constants, 1.0);
        }
        case MetricKind::MinkowskiRational: {
            for (const char* name : {"k1", "k2", "k3", "k4"}) require_constant(spec, name);
            Expr phi = Expr::parse("(x2^2 + k2*x2 + k3)/(k1 - x1) + k4");
            return std::make_shared<CanonicalMetric>(spec.kind, std::move(phi), spec.constants, 1.0);
        }
        case MetricKind::CubicExceptional: {
            for (const char* name : {"k1", "k2", "k3", "k4"}) require_constant(spec, name);
            MetricSpec inner = spec;
            inner.exprs = {
                {"A", "k1*(3*k1*x2^2 - 3*k3*x2 + k4)/(k1*x1 + k2)^6"},
                {"B", "0"},
                {"C", "(-2*k1*x2 + k3)/(k1*x1 + k2)^5"},
                {"D", "1/(k1*x1 + k2)^4"},
            };
            return std::make_shared<FormMetric>(spec.kind, parse_field(inner, "A"),
                                                parse_field(inner, "B"), parse_field(inner, "C"),
                                                parse_field(inner, "D"), spec.constants);
        }
    }
    throw MalformedSpec("unhandled metric kind");
}

// --- invariants -----------------------------------------------------------------------

double delta_invariant(const Metric& metric, double x1, double x2) {
    if (!metric.is_kropina()) throw MalformedSpec("Delta invariant requires a Kropina-family metric");
    Coefficients co = metric.coefficients(x1, x2, 0);
    double A = co.A.value(), B = co.B.value(), C = co.C.value(), D = co.D.value();
    return A * D * D - B * D + C;
}

double cubic_discriminant(const Metric& metric, double x1, double x2) {
    if (!metric.is_cubic()) throw MalformedSpec("discriminant R requires a cubic metric");
    Coefficients co = metric.coefficients(x1, x2, 0);
    double A = co.A.value(), B = co.B.value(), C = co.C.value(), D = co.D.value();
    return (A * B - D * C) * (A * B - D * C) - 4.0 * (A * D - C * C) * (C * B - D * D);
}

// --- parabolic implicit solve -----------------------------------------------------------

namespace {

double sigma_scalar(const Expr& sigma, const ConstEnv& env, double a) {
    return sigma.eval_scalar(env, a, 0.0);
}

double sigma_derivative(const Expr& sigma, const ConstEnv& env, double a) {
    Jet aj = Jet::variable(a, 0, 1);
    return sigma.eval(env, aj, Jet::constant(0.0, 1)).partial(jets::MultiIndex(1, 0, 0, 0));
}

}  // namespace

double solve_parabolic_a(const Expr& sigma, const ConstEnv& env, double x1, double x2,
                         ParabolicSolveInfo* info) {
    auto F = [&](double a) { return x2 + x1 * a + sigma_scalar(sigma, env, a); };
    auto dF = [&](double a) { return x1 + sigma_derivative(sigma, env, a); };

    constexpr double lo = -10.0, hi = 10.0;
    constexpr int n = 2000;
    const double step = (hi - lo) / n;

    std::vector<double> roots;
    auto refine = [&](double a, double bl, double bh) -> std::optional<double> {
        for (int it = 0; it < 80; ++it) {
            double f = F(a);
            if (std::fabs(f) < 1e-12) return a;
            double d = dF(a);
            double next = (d != 0.0) ? a - f / d : std::numeric_limits<double>::quiet_NaN();
            if (!std::isfinite(next) || next < bl || next > bh) {
                // bisection step keeps the iterate inside a sign-change bracket
                double fl = F(bl);
                next = 0.5 * (bl + bh);
                if (fl * F(next) <= 0.0)
                    bh = next;
                else
                    bl = next;
                next = 0.5 * (bl + bh);
            }
            a = next;
        }
        return std::fabs(F(a)) < 1e-12 ? std::optional<double>(a) : std::nullopt;
    };

    double prev_a = lo, prev_f;
    bool prev_ok;
    try {
        prev_f = F(lo);
        prev_ok = std::isfinite(prev_f);
    } catch (const Error&) {
        prev_ok = false;
        prev_f = 0;
    }
    for (int i = 1; i <= n; ++i) {
        double a = lo + i * step;
        double f;
        bool ok;
        try {
            f = F(a);
            ok = std::isfinite(f);
        } catch (const Error&) {
            ok = false;
            f = 0;
        }
        if (ok && std::fabs(f) < 1e-12) roots.push_back(a);
        else if (ok && prev_ok && prev_f * f < 0.0) {
            if (auto r = refine(0.5 * (prev_a + a), prev_a, a)) roots.push_back(*r);
        }
        prev_a = a;
        prev_f = f;
        prev_ok = ok;
    }

    if (roots.empty()) throw ImplicitSolveFailed("no root of x2 + x1 a + sigma(a) in [-10, 10]");

    std::sort(roots.begin(), roots.end());
    roots.erase(std::unique(roots.begin(), roots.end(),
                            [](double a, double b) { return std::fabs(a - b) < 1e-8; }),
                roots.end());
    // smallest |a|, the negative one on ties
    double best = roots[0];
    for (double r : roots) {
        if (std::fabs(r) < std::fabs(best) - 1e-12) best = r;
        else if (std::fabs(std::fabs(r) - std::fabs(best)) <= 1e-12 && r < best) best = r;
    }

    if (info) {
        info->residual = std::fabs(F(best));
        info->derivative = dF(best);
        info->multiplicity_warning = std::fabs(info->derivative) < 1e-8;
    }
    return best;
}

// --- coordinate maps -------------------------------------------------------------------

std::array<double, 2> CoordinateMap::apply(double x1, double x2) const {
    auto c = components(Jet::constant(x1, 0), Jet::constant(x2, 0));
    return {c[0].value(), c[1].value()};
}

namespace {

class RationalKillForward : public CoordinateMap {
public:
    RationalKillForward(double k1, double k2) : k1_(k1), k2_(k2) {}

    std::array<Jet, 2> components(const Jet& x1, const Jet& x2) const override {
        Jet den = x2 - k2_;
        if (std::fabs(den.value()) < 1e-12) throw DomainSingularity("map singular at x2 = k2");
        return {(x1 + k1_) / den, 1.0 / den};
    }

    std::array<std::array<Jet, 2>, 2> jacobian(const Jet& x1, const Jet& x2) const override {
        Jet den = x2 - k2_;
        if (std::fabs(den.value()) < 1e-12) throw DomainSingularity("map singular at x2 = k2");
        Jet den2 = den * den;
        return {{{1.0 / den, -(x1 + k1_) / den2}, {Jet::constant(0.0, x1.order()), -1.0 / den2}}};
    }

    std::shared_ptr<CoordinateMap> inverse() const override;

private:
    double k1_, k2_;
};

class RationalKillInverse : public CoordinateMap {
public:
    RationalKillInverse(double k1, double k2) : k1_(k1), k2_(k2) {}

    std::array<Jet, 2> components(const Jet& x1, const Jet& x2) const override {
        if (std::fabs(x2.value()) < 1e-12) throw DomainSingularity("inverse map singular at xb2 = 0");
        return {x1 / x2 - k1_, k2_ + 1.0 / x2};
    }

    std::array<std::array<Jet, 2>, 2> jacobian(const Jet& x1, const Jet& x2) const override {
        if (std::fabs(x2.value()) < 1e-12) throw DomainSingularity("inverse map singular at xb2 = 0");
        Jet den2 = x2 * x2;
        return {{{1.0 / x2, -x1 / den2}, {Jet::constant(0.0, x1.order()), -1.0 / den2}}};
    }

    std::shared_ptr<CoordinateMap> inverse() const override {
        return std::make_shared<RationalKillForward>(k1_, k2_);
    }

private:
    double k1_, k2_;
};

std::shared_ptr<CoordinateMap> RationalKillForward::inverse() const {
    return std::make_shared<RationalKillInverse>(k1_, k2_);
}

class ShearMap : public CoordinateMap {
public:
    explicit ShearMap(double k1) : k1_(k1) {}

    std::array<Jet, 2> components(const Jet& x1, const Jet& x2) const override {
        return {x1 + k1_ * x2, x2};
    }

    std::array<std::array<Jet, 2>, 2> jacobian(const Jet& x1, const Jet& x2) const override {
        (void)x2;
        int n = x1.order();
        return {{{Jet::constant(1.0, n), Jet::constant(k1_, n)},
                 {Jet::constant(0.0, n), Jet::constant(1.0, n)}}};
    }

    std::shared_ptr<CoordinateMap> inverse() const override {
        return std::make_shared<ShearMap>(-k1_);
    }

private:
    double k1_;
};

}  // namespace

KillTransform kill_D_transform_rational(double k1, double k2) {
    auto fwd = std::make_shared<RationalKillForward>(k1, k2);
    return {fwd, fwd->inverse()};
}

KillTransform kill_D_transform_constant(double k1) {
    auto fwd = std::make_shared<ShearMap>(k1);
    return {fwd, fwd->inverse()};
}

std::shared_ptr<Metric> transformed_metric(std::shared_ptr<const Metric> inner,
                                           std::shared_ptr<const CoordinateMap> map) {
    return std::make_shared<TransformedMetric>(std::move(inner), std::move(map));
}

// --- coefficient recovery ---------------------------------------------------------------

namespace {

// gaussian elimination over the jet ring, pivoting on value-part magnitude
std::vector<Jet> jet_solve(std::vector<std::vector<Jet>> M, std::vector<Jet> rhs) {
    const std::size_t n = rhs.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::fabs(M[r][col].value()) > std::fabs(M[pivot][col].value())) pivot = r;
        if (std::fabs(M[pivot][col].value()) < 1e-10)
            throw MalformedSpec("coefficient recovery: singular direction system");
        std::swap(M[pivot], M[col]);
        std::swap(rhs[pivot], rhs[col]);
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            Jet factor = M[r][col] / M[col][col];
            for (std::size_t c = col; c < n; ++c) M[r][c] -= factor * M[col][c];
            rhs[r] -= factor * rhs[col];
        }
    }
    std::vector<Jet> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(rhs[i] / M[i][i]);
    return out;
}

std::vector<std::pair<std::array<double, 2>, Jet>> sample_directions(const Metric& metric,
                                                                     double x1, double x2,
                                                                     int order, std::size_t want) {
    static const double angles[] = {0.19, 1.03, 1.87, 2.61, 3.45, 4.29, 5.13, 5.77};
    Jet x1b = Jet::variable(x1, 0, order + 1);
    Jet x2b = Jet::variable(x2, 1, order + 1);
    std::vector<std::pair<std::array<double, 2>, Jet>> out;
    for (double t : angles) {
        if (out.size() >= want) break;
        double dx = std::cos(t), dy = std::sin(t);
        try {
            Jet L = metric.eval_jets(x1b, x2b, Jet::constant(dx, order), Jet::constant(dy, order));
            out.push_back({{dx, dy}, L});
        } catch (const SingularDirection&) {
        } catch (const DivisionByZeroValue&) {
        }
    }
    if (out.size() < want)
        throw MalformedSpec("coefficient recovery: not enough regular directions");
    return out;
}

}  // namespace

Coefficients recover_kropina_coefficients(const Metric& metric, double x1, double x2, int order) {
    auto samples = sample_directions(metric, x1, x2, order, 4);
    std::vector<std::vector<Jet>> M;
    std::vector<Jet> rhs;
    for (auto& [d, L] : samples) {
        double dx = d[0], dy = d[1];
        M.push_back({Jet::constant(dx * dx, order), Jet::constant(dx * dy, order),
                     Jet::constant(dy * dy, order), -(L * dy)});
        rhs.push_back(L * dx);
    }
    auto sol = jet_solve(std::move(M), std::move(rhs));
    return {sol[0], sol[1], sol[2], sol[3]};
}

Coefficients recover_cubic_coefficients(const Metric& metric, double x1, double x2, int order) {
    auto samples = sample_directions(metric, x1, x2, order, 4);
    std::vector<std::vector<Jet>> M;
    std::vector<Jet> rhs;
    for (auto& [d, L] : samples) {
        double dx = d[0], dy = d[1];
        M.push_back({Jet::constant(dx * dx * dx, order), Jet::constant(dy * dy * dy, order),
                     Jet::constant(3.0 * dx * dx * dy, order),
                     Jet::constant(3.0 * dx * dy * dy, order)});
        rhs.push_back(jets::pow_int(L, 3));
    }
    auto sol = jet_solve(std::move(M), std::move(rhs));
    return {sol[0], sol[1], sol[2], sol[3]};
}

}  // namespace finsler::metrics
