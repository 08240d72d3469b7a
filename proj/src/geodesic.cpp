#include "finsler/geodesic.hpp"

#include <cmath>
#include <cstdio>

namespace finsler::geodesics {

using jets::Jet;
using jets::MultiIndex;

FundamentalTensor fundamental_tensor(const Metric& metric, const EvalPoint& pt) {
    Jet L = metric.eval(pt, 2);
    Jet L2 = L * L;
    FundamentalTensor out;
    out.g[0][0] = 0.5 * L2.partial(MultiIndex(0, 0, 2, 0));
    out.g[0][1] = 0.5 * L2.partial(MultiIndex(0, 0, 1, 1));
    out.g[1][0] = out.g[0][1];
    out.g[1][1] = 0.5 * L2.partial(MultiIndex(0, 0, 0, 2));
    out.det = out.g[0][0] * out.g[1][1] - out.g[0][1] * out.g[1][0];
    if (std::fabs(out.det) < 1e-10)
        throw DegenerateTensor("fundamental tensor is singular at this state");
    return out;
}

std::array<double, 2> spray(const Metric& metric, const EvalPoint& pt) {
    Jet L = metric.eval(pt, 2);
    Jet L2 = L * L;
    FundamentalTensor ft;
    ft.g[0][0] = 0.5 * L2.partial(MultiIndex(0, 0, 2, 0));
    ft.g[0][1] = 0.5 * L2.partial(MultiIndex(0, 0, 1, 1));
    ft.g[1][0] = ft.g[0][1];
    ft.g[1][1] = 0.5 * L2.partial(MultiIndex(0, 0, 0, 2));
    ft.det = ft.g[0][0] * ft.g[1][1] - ft.g[0][1] * ft.g[1][0];
    if (std::fabs(ft.det) < 1e-10)
        throw DegenerateTensor("fundamental tensor is singular at this state");

    const double Xv[2] = {pt.X, pt.Y};
    double rhs[2];
    for (int k = 0; k < 2; ++k) {
        MultiIndex dxk;   // d/dx^k
        dxk.e[k] = 1;
        double s = -L2.partial(dxk);
        for (int j = 0; j < 2; ++j) {
            MultiIndex mixed;  // d^2/(dX^k dx^j)
            mixed.e[2 + k] = 1;
            mixed.e[j] = 1;
            s += L2.partial(mixed) * Xv[j];
        }
        rhs[k] = s;
    }
    double inv[2][2] = {{ft.g[1][1] / ft.det, -ft.g[0][1] / ft.det},
                        {-ft.g[1][0] / ft.det, ft.g[0][0] / ft.det}};
    return {0.25 * (inv[0][0] * rhs[0] + inv[0][1] * rhs[1]),
            0.25 * (inv[1][0] * rhs[0] + inv[1][1] * rhs[1])};
}

const char* termination_name(Termination t) {
    switch (t) {
        case Termination::Completed: return "completed";
        case Termination::DegenerateTensor: return "degenerate-tensor";
        case Termination::SingularDirection: return "singular-direction";
        case Termination::LeftDomain: return "left-domain";
    }
    return "?";
}

double straightness(const std::vector<GeodesicSample>& samples) {
    if (samples.size() < 3) throw DegenerateChord("straightness requires at least 3 samples");
    const auto& a = samples.front();
    const auto& b = samples.back();
    double ux = b.x1 - a.x1, uy = b.x2 - a.x2;
    double len = std::hypot(ux, uy);
    if (len < 1e-9) throw DegenerateChord("endpoint chord is degenerate");
    double worst = 0.0;
    for (const auto& s : samples) {
        double px = s.x1 - a.x1, py = s.x2 - a.x2;
        double dist = std::fabs(px * uy - py * ux) / len;
        worst = std::max(worst, dist);
    }
    return worst / len;
}

GeodesicTrace integrate_geodesic(const Metric& metric, std::array<double, 2> x0,
                                 std::array<double, 2> v0, double t_end, int steps,
                                 const BoundingBox& box) {
    if (steps < 16) throw Error("integrate_geodesic requires steps >= 16");
    struct State {
        double x1, x2, v1, v2;
    };
    auto rhs = [&](const State& s, State& out) {
        auto G = spray(metric, {s.x1, s.x2, s.v1, s.v2});
        out = {s.v1, s.v2, -2.0 * G[0], -2.0 * G[1]};
    };
    // proactive singular-direction guard for the rational-form families
    auto near_singular = [&](const State& s) {
        if (!metric.is_kropina()) return false;
        double D = metric.coefficient_D(s.x1, s.x2);
        double norm = std::hypot(s.v1, s.v2);
        return std::fabs(s.v1 + D * s.v2) < 1e-6 * norm;
    };

    GeodesicTrace trace;
    State y{x0[0], x0[1], v0[0], v0[1]};
    double h = t_end / steps;
    trace.samples.push_back({0.0, y.x1, y.x2, y.v1, y.v2});

    State k1, k2, k3, k4;
    try {
        if (near_singular(y)) throw SingularDirection("initial direction is singular");
        rhs(y, k1);
    } catch (const Error& e) {
        throw ImmediateSingularity(std::string("integration fails at t = 0: ") + e.what());
    }

    for (int step = 0; step < steps; ++step) {
        double t = step * h;
        try {
            if (!box.contains(y.x1, y.x2)) {
                trace.termination = Termination::LeftDomain;
                break;
            }
            if (near_singular(y)) {
                trace.termination = Termination::SingularDirection;
                break;
            }
            rhs(y, k1);
            State m{y.x1 + 0.5 * h * k1.x1, y.x2 + 0.5 * h * k1.x2, y.v1 + 0.5 * h * k1.v1,
                    y.v2 + 0.5 * h * k1.v2};
            rhs(m, k2);
            m = {y.x1 + 0.5 * h * k2.x1, y.x2 + 0.5 * h * k2.x2, y.v1 + 0.5 * h * k2.v1,
                 y.v2 + 0.5 * h * k2.v2};
            rhs(m, k3);
            m = {y.x1 + h * k3.x1, y.x2 + h * k3.x2, y.v1 + h * k3.v1, y.v2 + h * k3.v2};
            rhs(m, k4);
            y.x1 += h / 6.0 * (k1.x1 + 2 * k2.x1 + 2 * k3.x1 + k4.x1);
            y.x2 += h / 6.0 * (k1.x2 + 2 * k2.x2 + 2 * k3.x2 + k4.x2);
            y.v1 += h / 6.0 * (k1.v1 + 2 * k2.v1 + 2 * k3.v1 + k4.v1);
            y.v2 += h / 6.0 * (k1.v2 + 2 * k2.v2 + 2 * k3.v2 + k4.v2);
        } catch (const DegenerateTensor&) {
            trace.termination = Termination::DegenerateTensor;
            break;
        } catch (const SingularDirection&) {
            trace.termination = Termination::SingularDirection;
            break;
        } catch (const Error&) {
            trace.termination = Termination::LeftDomain;
            break;
        }
        trace.samples.push_back({t + h, y.x1, y.x2, y.v1, y.v2});
    }

    trace.t_end = trace.samples.back().t;
    trace.deviation = trace.samples.size() >= 3 ? straightness(trace.samples) : 0.0;
    return trace;
}

std::string GeodesicTrace::csv() const {
    std::string out = "t,x1,x2,v1,v2\n";
    char buf[160];
    for (const auto& s : samples) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", s.t, s.x1, s.x2, s.v1,
                      s.v2);
        out += buf;
    }
    return out;
}

nlohmann::json GeodesicTrace::summary_json() const {
    const auto& a = samples.front();
    const auto& b = samples.back();
    return nlohmann::json{
        {"start", {a.x1, a.x2}},        {"start_velocity", {a.v1, a.v2}},
        {"end", {b.x1, b.x2}},          {"end_velocity", {b.v1, b.v2}},
        {"deviation", deviation},       {"termination", termination_name(termination)},
        {"samples", samples.size()},    {"t_end", t_end},
    };
}

}  // namespace finsler::geodesics
