#include "finsler/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

namespace finsler::analysis {

using jets::Jet;
using jets::MultiIndex;
using metrics::Coefficients;

// --- grids -----------------------------------------------------------------------

std::vector<std::array<double, 2>> GridSpec::base_points() const {
    std::vector<std::array<double, 2>> pts;
    pts.reserve(static_cast<std::size_t>(n1) * n2);
    for (int i = 0; i < n1; ++i) {
        double x1 = n1 == 1 ? x1min : x1min + (x1max - x1min) * i / (n1 - 1);
        for (int j = 0; j < n2; ++j) {
            double x2 = n2 == 1 ? x2min : x2min + (x2max - x2min) * j / (n2 - 1);
            pts.push_back({x1, x2});
        }
    }
    return pts;
}

std::vector<std::array<double, 2>> GridSpec::directions() const {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<std::array<double, 2>> out;
    out.reserve(dirs);
    for (int j = 0; j < dirs; ++j) {
        double angle = 2.0 * M_PI * (j + uni(rng)) / dirs;
        out.push_back({std::cos(angle), std::sin(angle)});
    }
    return out;
}

nlohmann::json GridSpec::to_json() const {
    return nlohmann::json{
        {"x1", {x1min, x1max, n1}}, {"x2", {x2min, x2max, n2}},
        {"dirs", dirs},             {"seed", seed},
        {"singular_skip", singular_skip},
    };
}

double ResidualReport::max_residual() const {
    double m = 0.0;
    for (const auto& e : equations) m = std::max(m, e.max_abs);
    return m;
}

const EquationResidual& ResidualReport::equation(const std::string& label) const {
    for (const auto& e : equations)
        if (e.label == label) return e;
    throw UnknownSystem("no equation labelled '" + label + "' in system " + system);
}

nlohmann::json ResidualReport::to_json() const {
    nlohmann::json eqs = nlohmann::json::array();
    for (const auto& e : equations) {
        nlohmann::json at;
        if (e.has_direction)
            at = {e.at[0], e.at[1], e.at[2], e.at[3]};
        else
            at = {e.at[0], e.at[1]};
        eqs.push_back({{"label", e.label}, {"max_residual", e.max_abs}, {"at_point", at}});
    }
    return nlohmann::json{{"system", system},       {"equations", eqs}, {"grid", grid.to_json()},
                          {"notes", notes},         {"evaluated", evaluated},
                          {"skipped", skipped}};
}

// --- shared sweep helpers -----------------------------------------------------------

namespace {

struct Tracker {
    double max_abs = 0.0;
    std::array<double, 4> at{0, 0, 0, 0};
    long index = -1;

    void update(double v, const std::array<double, 4>& where, long idx) {
        v = std::fabs(v);
        if (v > max_abs || index < 0) {
            max_abs = v;
            at = where;
            index = idx;
        }
    }
    // keeps the earliest index on exact ties so chunked sweeps merge deterministically
    void merge(const Tracker& other) {
        if (other.index < 0) return;
        if (index < 0 || other.max_abs > max_abs) {
            *this = other;
        }
    }
};

struct SweepResult {
    std::vector<Tracker> trackers;
    long evaluated = 0;
    long skipped = 0;

    explicit SweepResult(std::size_t n) : trackers(n) {}
    void merge(const SweepResult& other) {
        for (std::size_t i = 0; i < trackers.size(); ++i) trackers[i].merge(other.trackers[i]);
        evaluated += other.evaluated;
        skipped += other.skipped;
    }
};

// chunked parallel sweep with deterministic max-merge (first index wins ties)
SweepResult sweep(long count, std::size_t n_equations, int threads,
                  const std::function<void(long, SweepResult&)>& body) {
    unsigned hw = std::thread::hardware_concurrency();
    unsigned n_threads = threads > 0 ? static_cast<unsigned>(threads) : (hw ? hw : 1u);
    n_threads = std::min<unsigned>(n_threads, 16);
    if (count < 64 || n_threads <= 1) {
        SweepResult r(n_equations);
        for (long i = 0; i < count; ++i) body(i, r);
        return r;
    }
    long chunk = (count + n_threads - 1) / n_threads;
    std::vector<SweepResult> parts(n_threads, SweepResult(n_equations));
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_threads; ++t) {
        pool.emplace_back([&, t]() {
            long lo = t * chunk, hi = std::min<long>(count, (t + 1) * chunk);
            for (long i = lo; i < hi; ++i) body(i, parts[t]);
        });
    }
    for (auto& th : pool) th.join();
    SweepResult r(n_equations);
    for (auto& p : parts) r.merge(p);
    return r;
}

// relative distance of a direction from the metric's singular set
double direction_margin(const Metric& metric, double x1, double x2, double dx, double dy) {
    Coefficients co = metric.coefficients(x1, x2, 0);
    if (metric.is_cubic()) {
        double F = co.A.value() * dx * dx * dx + co.B.value() * dy * dy * dy +
                   3.0 * co.C.value() * dx * dx * dy + 3.0 * co.D.value() * dx * dy * dy;
        return std::fabs(F);
    }
    return std::fabs(dx + co.D.value() * dy);
}

void finalize(ResidualReport& report, const SweepResult& r,
              const std::vector<std::string>& labels, bool has_direction) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
        EquationResidual eq;
        eq.label = labels[i];
        eq.max_abs = r.trackers[i].max_abs;
        eq.at = r.trackers[i].at;
        eq.has_direction = has_direction;
        report.equations.push_back(eq);
    }
    report.evaluated = r.evaluated;
    report.skipped = r.skipped;
}

double phi_d(const Jet& phi, int a, int b) {  // partial with a x1-derivatives, b x2-derivatives
    return phi.partial(MultiIndex(a, b, 0, 0));
}

}  // namespace

// --- field sets ------------------------------------------------------------------------

FieldSet fields_from_exprs(const expr::Expr& A, const expr::Expr& B, const expr::Expr& C,
                           const expr::Expr& D, const expr::ConstEnv& env) {
    return {[A, B, C, D, env](double x1, double x2, int order) -> Coefficients {
        Jet u = order > 0 ? Jet::variable(x1, 0, order) : Jet::constant(x1, 0);
        Jet v = order > 0 ? Jet::variable(x2, 1, order) : Jet::constant(x2, 0);
        return {A.eval(env, u, v), B.eval(env, u, v), C.eval(env, u, v), D.eval(env, u, v)};
    }};
}

FieldSet fields_from_metric(std::shared_ptr<const Metric> metric) {
    return {[metric](double x1, double x2, int order) {
        return metric->coefficients(x1, x2, order);
    }};
}

// --- projectivity ------------------------------------------------------------------------

std::array<double, 2> projectivity_residual(const Metric& metric, const EvalPoint& pt, int order) {
    Jet L = metric.eval(pt, std::max(order, 2));
    std::array<double, 2> out;
    for (int i = 0; i < 2; ++i) {
        MultiIndex dxi;
        dxi.e[i] = 1;
        MultiIndex m1, m2;
        m1.e[0] = 1;
        m1.e[2 + i] = 1;
        m2.e[1] = 1;
        m2.e[2 + i] = 1;
        out[i] = L.partial(dxi) - L.partial(m1) * pt.X - L.partial(m2) * pt.Y;
    }
    return out;
}

ResidualReport projectivity_report(const Metric& metric, const GridSpec& grid) {
    auto pts = grid.base_points();
    auto dirs = grid.directions();
    long count = static_cast<long>(pts.size()) * dirs.size();
    auto result = sweep(count, 2, grid.threads, [&](long idx, SweepResult& r) {
        const auto& bp = pts[idx / dirs.size()];
        const auto& d = dirs[idx % dirs.size()];
        if (direction_margin(metric, bp[0], bp[1], d[0], d[1]) < grid.singular_skip) {
            ++r.skipped;
            return;
        }
        auto e = projectivity_residual(metric, {bp[0], bp[1], d[0], d[1]});
        std::array<double, 4> where{bp[0], bp[1], d[0], d[1]};
        r.trackers[0].update(e[0], where, idx);
        r.trackers[1].update(e[1], where, idx);
        ++r.evaluated;
    });
    ResidualReport report;
    report.system = "projectivity";
    report.grid = grid;
    finalize(report, result, {"E1", "E2"}, true);
    return report;
}

// --- system (I) ---------------------------------------------------------------------------

ResidualReport system_I_residuals(const FieldSet& fields, const GridSpec& grid) {
    auto pts = grid.base_points();
    const std::vector<std::string> labels = {"I.1", "I.2", "I.3", "I.4", "I.D-transport"};

    // Delta must stay away from zero for the reduction to be valid
    for (const auto& bp : pts) {
        Coefficients c0 = fields.at(bp[0], bp[1], 0);
        double delta = c0.A.value() * c0.D.value() * c0.D.value() -
                       c0.B.value() * c0.D.value() + c0.C.value();
        if (std::fabs(delta) < 1e-9)
            throw DegenerateConic("Delta vanishes on the grid at (" + std::to_string(bp[0]) + ", " +
                                  std::to_string(bp[1]) + ")");
    }

    auto result = sweep(static_cast<long>(pts.size()), labels.size(), grid.threads,
                        [&](long idx, SweepResult& r) {
        const auto& bp = pts[idx];
        Coefficients co = fields.at(bp[0], bp[1], 1);
        const MultiIndex d1(1, 0, 0, 0), d2(0, 1, 0, 0);
        double A = co.A.value(), B = co.B.value(), C = co.C.value(), D = co.D.value();
        double A1 = co.A.partial(d1), A2 = co.A.partial(d2);
        double B1 = co.B.partial(d1), B2 = co.B.partial(d2);
        double C1 = co.C.partial(d1), C2 = co.C.partial(d2);
        double D1 = co.D.partial(d1), D2 = co.D.partial(d2);

        std::array<double, 4> where{bp[0], bp[1], 0, 0};
        r.trackers[0].update(D * A1 + A2 - B1 + A * D1, where, idx);
        r.trackers[1].update(D * D * A1 - A * D * D1 + 3.0 * D * A2 - 2.0 * C1 - D * B1 + 2.0 * B * D1,
                             where, idx);
        r.trackers[2].update(2.0 * D * D * A2 - 3.0 * D * C1 - C2 + D * B2 + 3.0 * C * D1 +
                                 B * D2 - 2.0 * A * D * D2,
                             where, idx);
        r.trackers[3].update(D * D * C1 - D * D * B2 + D * C2 - C * D * D1 + B * D * D2 -
                                 2.0 * C * D2,
                             where, idx);
        r.trackers[4].update(D * D1 - D2, where, idx);
        ++r.evaluated;
    });

    ResidualReport report;
    report.system = "I";
    report.grid = grid;
    finalize(report, result, labels, false);
    return report;
}

// --- system (beta) -------------------------------------------------------------------------

ResidualReport system_beta_residuals(const expr::Expr& D, const expr::ConstEnv& env,
                                     const GridSpec& grid) {
    auto pts = grid.base_points();
    auto result = sweep(static_cast<long>(pts.size()), 2, grid.threads,
                        [&](long idx, SweepResult& r) {
        const auto& bp = pts[idx];
        Jet Dj = D.eval(env, Jet::variable(bp[0], 0, 2), Jet::variable(bp[1], 1, 2));
        double Dv = Dj.value();
        double D1 = Dj.partial(MultiIndex(1, 0, 0, 0));
        double D2 = Dj.partial(MultiIndex(0, 1, 0, 0));
        double D11 = Dj.partial(MultiIndex(2, 0, 0, 0));
        std::array<double, 4> where{bp[0], bp[1], 0, 0};
        r.trackers[0].update(D11, where, idx);
        r.trackers[1].update(D2 - Dv * D1, where, idx);
        ++r.evaluated;
    });
    ResidualReport report;
    report.system = "beta";
    report.grid = grid;
    finalize(report, result, {"beta.1", "beta.2"}, false);
    return report;
}

// --- singular direction flow ------------------------------------------------------------------

std::array<double, 2> singular_direction(const Metric& metric, double x1, double x2) {
    double D = metric.coefficient_D(x1, x2);
    double norm = std::hypot(D, 1.0);
    return {D / norm, -1.0 / norm};
}

double flow_line_straightness(const Metric& metric, std::array<double, 2> x0, double arc_length,
                              int steps, const geodesics::BoundingBox& box) {
    if (steps < 16) throw Error("flow_line_straightness requires steps >= 16");
    std::vector<geodesics::GeodesicSample> samples;
    double h = arc_length / steps;
    std::array<double, 2> y = x0;
    auto field = [&](const std::array<double, 2>& p) -> std::array<double, 2> {
        try {
            return singular_direction(metric, p[0], p[1]);
        } catch (const Error& e) {
            throw IntegrationLeftDomain(std::string("singular direction field undefined: ") +
                                        e.what());
        }
    };
    samples.push_back({0.0, y[0], y[1], 0, 0});
    for (int s = 0; s < steps; ++s) {
        if (!box.contains(y[0], y[1]))
            throw IntegrationLeftDomain("flow line left the bounding box");
        auto k1 = field(y);
        auto k2 = field({y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]});
        auto k3 = field({y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]});
        auto k4 = field({y[0] + h * k3[0], y[1] + h * k3[1]});
        y[0] += h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]);
        y[1] += h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]);
        samples.push_back({(s + 1) * h, y[0], y[1], 0, 0});
    }
    return geodesics::straightness(samples);
}

// --- p-functions -------------------------------------------------------------------------------

PFunctions p_functions(const Metric& metric, const EvalPoint& pt, int order) {
    order = std::max(order, 3);
    Jet L = metric.eval(pt, order);
    if (std::fabs(L.value()) < 1e-12) throw ZeroMetricValue("L vanishes at the evaluation point");
    int m = order - 1;
    Jet X = Jet::variable(pt.X, 2, m);
    Jet Y = Jet::variable(pt.Y, 3, m);
    Jet p = (L.derivative(0) * X + L.derivative(1) * Y) / (2.0 * L.truncated(m));

    PFunctions out;
    out.p = p.value();
    for (int i = 0; i < 2; ++i) {
        MultiIndex dXi;
        dXi.e[2 + i] = 1;
        out.p_i[i] = p.partial(dXi);
        MultiIndex dxi;
        dxi.e[i] = 1;
        out.dp_dx[i] = p.partial(dxi);
        for (int j = 0; j < 2; ++j) {
            MultiIndex dXiXj;
            dXiXj.e[2 + i] += 1;
            dXiXj.e[2 + j] += 1;
            out.p_ij[i][j] = p.partial(dXiXj);
            MultiIndex dXixj;
            dXixj.e[2 + i] = 1;
            dXixj.e[j] = 1;
            out.dpi_dx[i][j] = p.partial(dXixj);
        }
    }
    return out;
}

MinkowskiResidual minkowski_residual(const Metric& metric, const EvalPoint& pt) {
    PFunctions pf = p_functions(metric, pt);
    MinkowskiResidual out{0, 0, 0};
    for (int i = 0; i < 2; ++i) {
        out.grad_block = std::max(out.grad_block, std::fabs(pf.dp_dx[i] - pf.p * pf.p_i[i]));
        for (int j = 0; j < 2; ++j) {
            out.pij_block = std::max(out.pij_block, std::fabs(pf.p_ij[i][j]));
            out.pair_block =
                std::max(out.pair_block, std::fabs(pf.dpi_dx[j][i] - pf.p_i[j] * pf.p_i[i]));
        }
    }
    return out;
}

ResidualReport minkowski_report(const Metric& metric, const GridSpec& grid) {
    auto pts = grid.base_points();
    auto dirs = grid.directions();
    long count = static_cast<long>(pts.size()) * dirs.size();
    auto result = sweep(count, 3, grid.threads, [&](long idx, SweepResult& r) {
        const auto& bp = pts[idx / dirs.size()];
        const auto& d = dirs[idx % dirs.size()];
        if (direction_margin(metric, bp[0], bp[1], d[0], d[1]) < grid.singular_skip) {
            ++r.skipped;
            return;
        }
        EvalPoint pt{bp[0], bp[1], d[0], d[1]};
        double Lv = metric.value(pt);
        if (std::fabs(Lv) < 1e-6) {  // p is undefined where L vanishes
            ++r.skipped;
            return;
        }
        auto mr = minkowski_residual(metric, pt);
        std::array<double, 4> where{bp[0], bp[1], d[0], d[1]};
        r.trackers[0].update(mr.pij_block, where, idx);
        r.trackers[1].update(mr.grad_block, where, idx);
        r.trackers[2].update(mr.pair_block, where, idx);
        ++r.evaluated;
    });
    ResidualReport report;
    report.system = "III";
    report.grid = grid;
    finalize(report, result, {"III.p_ij", "III.grad", "II.grad"}, true);
    return report;
}

// --- canonical-potential systems ------------------------------------------------------------------

ResidualReport system_IIprime_residuals(const expr::Expr& phi, const expr::ConstEnv& env,
                                        const GridSpec& grid) {
    auto pts = grid.base_points();
    auto result = sweep(static_cast<long>(pts.size()), 3, grid.threads,
                        [&](long idx, SweepResult& r) {
        const auto& bp = pts[idx];
        Jet f = phi.eval(env, Jet::variable(bp[0], 0, 3), Jet::variable(bp[1], 1, 3));
        std::array<double, 4> where{bp[0], bp[1], 0, 0};
        r.trackers[0].update(2.0 * phi_d(f, 1, 1) - phi_d(f, 0, 1) * phi_d(f, 0, 2), where, idx);
        r.trackers[1].update(phi_d(f, 2, 0) - phi_d(f, 1, 0) * phi_d(f, 0, 2), where, idx);
        r.trackers[2].update(phi_d(f, 0, 3), where, idx);
        ++r.evaluated;
    });
    ResidualReport report;
    report.system = "II-prime";
    report.grid = grid;
    finalize(report, result, {"IIp.1", "IIp.2", "IIp.3"}, false);
    return report;
}

ResidualReport constant_curvature_residuals(const expr::Expr& phi, const expr::ConstEnv& env,
                                            const GridSpec& grid) {
    auto pts = grid.base_points();
    const std::vector<std::string> labels = {"cc.1", "cc.2", "cc.3", "cc.4",
                                             "cc.5", "cc.6", "cc.7"};
    auto result = sweep(static_cast<long>(pts.size()), labels.size(), grid.threads,
                        [&](long idx, SweepResult& r) {
        const auto& bp = pts[idx];
        Jet f = phi.eval(env, Jet::variable(bp[0], 0, 3), Jet::variable(bp[1], 1, 3));
        double f1 = phi_d(f, 1, 0), f2 = phi_d(f, 0, 1);
        double f11 = phi_d(f, 2, 0), f12 = phi_d(f, 1, 1), f22 = phi_d(f, 0, 2);
        double f111 = phi_d(f, 3, 0), f112 = phi_d(f, 2, 1), f122 = phi_d(f, 1, 2),
               f222 = phi_d(f, 0, 3);
        std::array<double, 4> where{bp[0], bp[1], 0, 0};
        r.trackers[0].update(f222, where, idx);
        r.trackers[1].update(2.0 * f122 - f22 * f22, where, idx);
        r.trackers[2].update(f2 * f122 - 2.0 * f22 * f12 + f112, where, idx);
        r.trackers[3].update(3.0 * f1 * f22 * f22 - 6.0 * f2 * f2 * f122 +
                                 12.0 * f22 * f12 * f2 - 12.0 * f12 * f12 - 6.0 * f22 * f11 +
                                 2.0 * f111,
                             where, idx);
        r.trackers[4].update(5.0 * f2 * f1 * f122 - 14.0 * f1 * f22 * f12 + 14.0 * f11 * f12 -
                                 2.0 * f2 * f2 * f112 + 4.0 * f2 * f12 * f12 +
                                 2.0 * f2 * f22 * f11 - 3.0 * f2 * f111,
                             where, idx);
        r.trackers[5].update(2.0 * f1 * f1 * f122 - 2.0 * f1 * f111 - f2 * f2 * f111 -
                                 2.0 * f1 * f22 * f11 - 4.0 * f1 * f12 * f12 +
                                 6.0 * f2 * f11 * f12 + 4.0 * f11 * f11 - f2 * f1 * f112,
                             where, idx);
        r.trackers[6].update(2.0 * f1 * f11 * f12 - f1 * f1 * f112 + f2 * f1 * f111 -
                                 2.0 * f2 * f11 * f11,
                             where, idx);
        ++r.evaluated;
    });
    ResidualReport report;
    report.system = "constant-curvature";
    report.grid = grid;
    finalize(report, result, labels, false);
    return report;
}

// --- curvature bundle ------------------------------------------------------------------------------

CurvatureBundle curvature_bundle(const Metric& metric, const EvalPoint& pt, double projective_tol) {
    auto proj = projectivity_residual(metric, pt);
    if (std::max(std::fabs(proj[0]), std::fabs(proj[1])) > projective_tol)
        throw NotProjectiveAtPoint("connection formula needs projective coordinates at this point");

    int order = 4;
    Jet L = metric.eval(pt, order);
    if (std::fabs(L.value()) < 1e-12) throw ZeroMetricValue("L vanishes at the evaluation point");
    int m = order - 1;
    Jet X = Jet::variable(pt.X, 2, m);
    Jet Y = Jet::variable(pt.Y, 3, m);
    Jet p = (L.derivative(0) * X + L.derivative(1) * Y) / (2.0 * L.truncated(m));  // order 3

    Jet p_i[2] = {p.derivative(2), p.derivative(3)};  // order 2
    Jet p1 = p.truncated(1);
    CurvatureBundle out{};

    Jet P[2][2] = {{Jet::constant(0, 1), Jet::constant(0, 1)},
                   {Jet::constant(0, 1), Jet::constant(0, 1)}};
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            Jet dpi_dxj = p_i[i].derivative(j);                     // order 1
            Jet p_ij = p_i[i].derivative(2 + j);                    // order 1
            P[i][j] = dpi_dxj - p_i[i].truncated(1) * p_i[j].truncated(1) - p_ij * p1;
            out.P[i][j] = P[i][j].value();
            for (int k = 0; k < 2; ++k) {
                MultiIndex dXk;
                dXk.e[2 + k] = 1;
                out.dP_dX[k][i][j] = P[i][j].partial(dXk);
            }
        }
    }

    PFunctions pf = p_functions(metric, pt, order);
    const double Xv[2] = {pt.X, pt.Y};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k)
                out.G[i][j][k] = (i == j ? pf.p_i[k] : 0.0) + (i == k ? pf.p_i[j] : 0.0) +
                                 Xv[i] * pf.p_ij[j][k];

    // K^i_jkl = delta^i_j (P_kl - P_lk) + delta^i_k P_jl - delta^i_l P_jk
    //           + X^i (dP_kl/dX^j - dP_lk/dX^j)
    // The delta^i_l term restores antisymmetry in (k, l) and the trace identity.
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k)
                for (int l = 0; l < 2; ++l) {
                    double v = 0.0;
                    if (i == j) v += out.P[k][l] - out.P[l][k];
                    if (i == k) v += out.P[j][l];
                    if (i == l) v -= out.P[j][k];
                    v += Xv[i] * (out.dP_dX[j][k][l] - out.dP_dX[j][l][k]);
                    out.K[i][j][k][l] = v;
                }
    return out;
}

double skewness_condition_residual(const Metric& metric, const EvalPoint& pt,
                                   double projective_tol) {
    CurvatureBundle cb = curvature_bundle(metric, pt, projective_tol);
    return std::fabs(cb.P[0][1] - cb.P[1][0]);
}

// --- cubic branch -----------------------------------------------------------------------------------

ResidualReport cubic_system_alpha_residuals(const FieldSet& fields, const GridSpec& grid) {
    auto pts = grid.base_points();
    const std::vector<std::string> labels = {"alpha.A1",  "alpha.A2",  "alpha.C2", "alpha.D1",
                                             "alpha.D2",  "alpha.B22", "alpha.B12", "alpha.B11"};

    for (const auto& bp : pts) {
        Coefficients c0 = fields.at(bp[0], bp[1], 0);
        if (std::fabs(c0.B.value()) < 1e-9)
            throw BZeroOnGrid("B vanishes on the grid at (" + std::to_string(bp[0]) + ", " +
                              std::to_string(bp[1]) + ")");
    }

    auto result = sweep(static_cast<long>(pts.size()), labels.size(), grid.threads,
                        [&](long idx, SweepResult& r) {
        const auto& bp = pts[idx];
        Coefficients co = fields.at(bp[0], bp[1], 2);
        const MultiIndex d1(1, 0, 0, 0), d2(0, 1, 0, 0);
        double A = co.A.value(), B = co.B.value(), C = co.C.value(), D = co.D.value();
        double A1 = co.A.partial(d1), A2 = co.A.partial(d2);
        double B1 = co.B.partial(d1), B2 = co.B.partial(d2);
        double C1 = co.C.partial(d1), C2 = co.C.partial(d2);
        double D1 = co.D.partial(d1), D2 = co.D.partial(d2);
        double B11 = co.B.partial(MultiIndex(2, 0, 0, 0));
        double B12 = co.B.partial(MultiIndex(1, 1, 0, 0));
        double B22 = co.B.partial(MultiIndex(0, 2, 0, 0));
        (void)C1;

        std::array<double, 4> where{bp[0], bp[1], 0, 0};
        r.trackers[0].update(A1 - 2.0 * A / B * B1 + A * D / (B * B) * B2, where, idx);
        r.trackers[1].update(A2 - (A * B - C * D) / (2.0 * B * B) * B2 - C / B * B1, where, idx);
        r.trackers[2].update(C2 - 2.0 * D / (3.0 * B) * B1 - (2.0 * B * C - D * D) / (3.0 * B * B) * B2,
                             where, idx);
        r.trackers[3].update(D1 - 4.0 * D / (3.0 * B) * B1 - (B * C - 2.0 * D * D) / (3.0 * B * B) * B2,
                             where, idx);
        r.trackers[4].update(D2 - B1 / 3.0 - 2.0 / 3.0 * D / B * B2, where, idx);
        r.trackers[5].update(6.0 * B * B22 - 7.0 * B2 * B2, where, idx);
        r.trackers[6].update(B12 - 4.0 / (3.0 * B) * B1 * B2 + D / (6.0 * B * B) * B2 * B2, where,
                             idx);
        r.trackers[7].update(B11 - 4.0 / (3.0 * B) * B1 * B1 -
                                 (B * C - 2.0 * D * D) / (6.0 * B * B * B) * B2 * B2,
                             where, idx);
        ++r.evaluated;
    });

    ResidualReport report;
    report.system = "alpha-cubic";
    report.grid = grid;
    finalize(report, result, labels, false);
    report.notes.push_back(
        "dC/dx1 equation excluded: ill-posed as stated (a coefficient divides by dB/dx2); the "
        "integrability-derived form C1 = (5C/3B) B1 + (AB - 5CD)/(6B^2) B2 is informational only");
    return report;
}

ResidualReport cubic_exceptional_check(double k1, double k2, double k3, double k4,
                                       const GridSpec& grid) {
    metrics::MetricSpec spec;
    spec.kind = metrics::MetricKind::CubicExceptional;
    spec.constants = {{"k1", k1}, {"k2", k2}, {"k3", k3}, {"k4", k4}};
    auto metric = metrics::make_metric(spec);

    // reject the degenerate parameter set up front
    for (const auto& bp : grid.base_points()) {
        double R = metrics::cubic_discriminant(*metric, bp[0], bp[1]);
        if (std::fabs(R) < metrics::kDegenerateCubicTol)
            throw DegenerateCubic("discriminant R vanishes on the grid");
    }

    auto pts = grid.base_points();
    auto dirs = grid.directions();
    long count = static_cast<long>(pts.size()) * dirs.size();
    auto result = sweep(count, 4, grid.threads, [&](long idx, SweepResult& r) {
        const auto& bp = pts[idx / dirs.size()];
        const auto& d = dirs[idx % dirs.size()];
        if (direction_margin(*metric, bp[0], bp[1], d[0], d[1]) < grid.singular_skip) {
            ++r.skipped;
            return;
        }
        EvalPoint pt{bp[0], bp[1], d[0], d[1]};
        auto e = projectivity_residual(*metric, pt);
        auto mr = minkowski_residual(*metric, pt);
        std::array<double, 4> where{bp[0], bp[1], d[0], d[1]};
        r.trackers[0].update(e[0], where, idx);
        r.trackers[1].update(e[1], where, idx);
        r.trackers[2].update(mr.pij_block, where, idx);
        r.trackers[3].update(mr.grad_block, where, idx);
        ++r.evaluated;
    });

    ResidualReport report;
    report.system = "cubic-exceptional";
    report.grid = grid;
    finalize(report, result, {"E1", "E2", "III.p_ij", "III.grad"}, true);
    return report;
}

}  // namespace finsler::analysis
