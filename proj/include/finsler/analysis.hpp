#pragma once

// Numerical residual evaluation for every differential system in scope, the
// p-function machinery, and the curvature bundle. Each system becomes a
// max-over-grid residual report.

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "finsler/expr.hpp"
#include "finsler/geodesic.hpp"
#include "finsler/metric.hpp"

namespace finsler::analysis {

using metrics::EvalPoint;
using metrics::Metric;

struct GridSpec {
    double x1min = 0.05, x1max = 0.95;
    double x2min = 0.05, x2max = 0.95;
    int n1 = 11, n2 = 11;
    int dirs = 16;
    std::uint64_t seed = 0;
    double singular_skip = 1e-3;  // relative distance to singular sets below which
                                  // a point/direction pair is skipped
    int threads = 0;              // 0 = hardware concurrency

    std::vector<std::array<double, 2>> base_points() const;
    std::vector<std::array<double, 2>> directions() const;  // unit vectors, seeded jitter
    nlohmann::json to_json() const;
};

struct EquationResidual {
    std::string label;
    double max_abs = 0.0;
    std::array<double, 4> at{0, 0, 0, 0};
    bool has_direction = false;
};

struct ResidualReport {
    std::string system;
    std::vector<EquationResidual> equations;
    GridSpec grid;
    std::vector<std::string> notes;
    long evaluated = 0;
    long skipped = 0;

    double max_residual() const;
    const EquationResidual& equation(const std::string& label) const;
    nlohmann::json to_json() const;
};

// coefficient fields A, B, C, D as jets at a base point
struct FieldSet {
    std::function<metrics::Coefficients(double x1, double x2, int order)> at;
};
FieldSet fields_from_exprs(const expr::Expr& A, const expr::Expr& B, const expr::Expr& C,
                           const expr::Expr& D, const expr::ConstEnv& env);
FieldSet fields_from_metric(std::shared_ptr<const Metric> metric);

// --- projectivity (straight geodesics in these coordinates) ---------------------

// dL/dx^i - d^2L/(dx^a dX^i) X^a for i = 1, 2
std::array<double, 2> projectivity_residual(const Metric& metric, const EvalPoint& pt,
                                            int order = 2);
ResidualReport projectivity_report(const Metric& metric, const GridSpec& grid);

// --- coefficient systems for the rational form ----------------------------------

// the four first-order equations for A, B, C, D plus the derived transport
// equation D dD/dx1 - dD/dx2 = 0 (reported when Delta stays away from zero)
ResidualReport system_I_residuals(const FieldSet& fields, const GridSpec& grid);

// d^2 D/d(x1)^2 = 0 and dD/dx2 - D dD/dx1 = 0
ResidualReport system_beta_residuals(const expr::Expr& D, const expr::ConstEnv& env,
                                     const GridSpec& grid);

// unit vector along X + D Y = 0, oriented as (D, -1)
std::array<double, 2> singular_direction(const Metric& metric, double x1, double x2);

// integrate the singular direction field from x0 over the given arc length and
// measure the deviation of the flow line from its chord
double flow_line_straightness(const Metric& metric, std::array<double, 2> x0, double arc_length,
                              int steps,
                              const geodesics::BoundingBox& box = {});

// --- p-function machinery ---------------------------------------------------------

struct PFunctions {
    double p;
    std::array<double, 2> p_i;                  // dp/dX^i
    std::array<std::array<double, 2>, 2> p_ij;  // d^2 p/dX^i dX^j
    std::array<double, 2> dp_dx;                // dp/dx^i
    std::array<std::array<double, 2>, 2> dpi_dx;  // dp_i/dx^j indexed [i][j]
};
PFunctions p_functions(const Metric& metric, const EvalPoint& pt, int order = 4);

struct MinkowskiResidual {
    double pij_block;   // max |p_ij|
    double grad_block;  // max |dp/dx^i - p p_i|
    double pair_block;  // max |dp_j/dx^i - p_j p_i|
};
MinkowskiResidual minkowski_residual(const Metric& metric, const EvalPoint& pt);
ResidualReport minkowski_report(const Metric& metric, const GridSpec& grid);

// reduction of the Minkowski condition to the canonical potential phi
ResidualReport system_IIprime_residuals(const expr::Expr& phi, const expr::ConstEnv& env,
                                        const GridSpec& grid);

// --- curvature ---------------------------------------------------------------------

struct CurvatureBundle {
    double G[2][2][2];      // connection coefficients, symmetric in the lower pair
    double P[2][2];
    double dP_dX[2][2][2];  // dP_kl/dX^j indexed [j][k][l]
    double K[2][2][2][2];   // curvature components K^i_jkl
};

// connection G^i_jk = delta^i_j p_k + delta^i_k p_j + X^i p_jk (projective
// coordinates only; the residual gate rejects other points)
CurvatureBundle curvature_bundle(const Metric& metric, const EvalPoint& pt,
                                 double projective_tol = 1e-8);
double skewness_condition_residual(const Metric& metric, const EvalPoint& pt,
                                   double projective_tol = 1e-8);

// the seven scalar equations equivalent to P_12 = P_21 for the canonical form
ResidualReport constant_curvature_residuals(const expr::Expr& phi, const expr::ConstEnv& env,
                                            const GridSpec& grid);

// --- cubic branch --------------------------------------------------------------------

// the eight well-posed equations of the first- and second-order system for the
// cubic form with B != 0 (the ill-posed dC/dx1 line is excluded and noted)
ResidualReport cubic_system_alpha_residuals(const FieldSet& fields, const GridSpec& grid);

// exceptional family (B = 0): projectivity plus the Minkowski system on a grid
ResidualReport cubic_exceptional_check(double k1, double k2, double k3, double k4,
                                       const GridSpec& grid);

}  // namespace finsler::analysis
