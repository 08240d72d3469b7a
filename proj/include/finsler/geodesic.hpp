#pragma once

// Geodesic spray extraction and fixed-step integration, plus the straightness
// measure that turns "straight geodesics" into a number.

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "finsler/metric.hpp"

namespace finsler::geodesics {

using metrics::EvalPoint;
using metrics::Metric;

struct FundamentalTensor {
    std::array<std::array<double, 2>, 2> g;
    double det;
};

// g_ij = 1/2 d^2(L^2)/dX^i dX^j
FundamentalTensor fundamental_tensor(const Metric& metric, const EvalPoint& pt);

// spray coefficients G^i with geodesic equation xdd^i + 2 G^i(x, xd) = 0
std::array<double, 2> spray(const Metric& metric, const EvalPoint& pt);

struct BoundingBox {
    double x1min = -1e100, x1max = 1e100;
    double x2min = -1e100, x2max = 1e100;
    bool contains(double x1, double x2) const {
        return x1 >= x1min && x1 <= x1max && x2 >= x2min && x2 <= x2max;
    }
};

enum class Termination { Completed, DegenerateTensor, SingularDirection, LeftDomain };
const char* termination_name(Termination t);

struct GeodesicSample {
    double t, x1, x2, v1, v2;
};

struct GeodesicTrace {
    std::vector<GeodesicSample> samples;
    Termination termination = Termination::Completed;
    double deviation = 0.0;
    double t_end = 0.0;

    std::string csv() const;
    nlohmann::json summary_json() const;
};

// max perpendicular distance of the samples from the endpoint chord, divided
// by the chord length
double straightness(const std::vector<GeodesicSample>& samples);

// classical fixed-step RK4 on xdd = -2 G(x, xd); halts early (with the reason
// recorded) on a degenerate tensor, the singular direction, or leaving `box`
GeodesicTrace integrate_geodesic(const Metric& metric, std::array<double, 2> x0,
                                 std::array<double, 2> v0, double t_end, int steps,
                                 const BoundingBox& box = {});

}  // namespace finsler::geodesics
