#pragma once

// Metric families: the rational (Kropina-type) form L = (A X^2 + B XY + C Y^2)/(X + D Y),
// its canonical / parabolic / Minkowski specializations, and the cubic form
// L^3 = A X^3 + B Y^3 + 3C X^2 Y + 3D X Y^2. Every metric evaluates to a jet.

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "finsler/expr.hpp"
#include "finsler/jet.hpp"

namespace finsler::metrics {

using jets::Jet;

enum class MetricKind {
    KropinaGeneral,
    KropinaCanonical,
    Parabolic,
    MinkowskiLinear,
    MinkowskiRational,
    CubicGeneral,
    CubicExceptional,
};

const char* kind_name(MetricKind kind);
MetricKind kind_from_name(const std::string& name);
bool kind_is_kropina(MetricKind kind);
bool kind_is_cubic(MetricKind kind);

struct EvalPoint {
    double x1 = 0, x2 = 0, X = 1, Y = 0;
};

// Serializable description of a metric family instance.
struct MetricSpec {
    MetricKind kind = MetricKind::KropinaCanonical;
    std::map<std::string, std::string> exprs;  // name -> expression source
    expr::ConstEnv constants;

    static MetricSpec from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    bool operator==(const MetricSpec&) const = default;
};

// Coefficient jets of the quadratic/linear or cubic form at one base point.
struct Coefficients {
    Jet A, B, C, D;
};

// default singularity guards (absolute; grids are O(1)-scaled)
inline constexpr double kSingularDirectionTol = 1e-9;
inline constexpr double kDegenerateConicTol = 1e-9;
inline constexpr double kDegenerateCubicTol = 1e-12;

class Metric {
public:
    virtual ~Metric() = default;

    virtual MetricKind kind() const = 0;
    bool is_kropina() const { return kind_is_kropina(kind()); }
    bool is_cubic() const { return kind_is_cubic(kind()); }

    // Core evaluation. Base-point jets x1, x2 must carry one order more than
    // the direction jets X, Y; the result has the direction order. The extra
    // order feeds the coefficient derivatives of the canonical form.
    virtual Jet eval_jets(const Jet& x1, const Jet& x2, const Jet& X, const Jet& Y) const = 0;

    // jet of L at a point through `order`
    Jet eval(const EvalPoint& pt, int order) const;
    double value(const EvalPoint& pt) const;

    // coefficient jets A, B, C, D in base coordinates at (x1, x2)
    virtual Coefficients coefficients(double x1, double x2, int order) const = 0;

    // D(x) for the singular direction X + D Y = 0 (Kropina kinds)
    double coefficient_D(double x1, double x2) const;
};

std::shared_ptr<Metric> make_metric(const MetricSpec& spec);

// Delta = A D^2 - B D + C (irreducibility of the level conics); Kropina kinds only.
double delta_invariant(const Metric& metric, double x1, double x2);

// R = (AB - DC)^2 - 4(AD - C^2)(CB - D^2); cubic kinds only.
double cubic_discriminant(const Metric& metric, double x1, double x2);

struct ParabolicSolveInfo {
    double residual = 0;
    double derivative = 0;  // x1 + sigma'(a) at the root
    bool multiplicity_warning = false;
};

// Root a of x2 + x1*a + sigma(a) = 0, bracket-scanned over [-10, 10] and
// refined by Newton to |residual| < 1e-12. With several roots the one of
// smallest |a| is returned (the negative one on ties).
double solve_parabolic_a(const expr::Expr& sigma, const expr::ConstEnv& env, double x1, double x2,
                         ParabolicSolveInfo* info = nullptr);

// --- coordinate transformations --------------------------------------------------

// Plane diffeomorphism with explicit jacobian, jet-evaluable components, and inverse.
class CoordinateMap {
public:
    virtual ~CoordinateMap() = default;
    virtual std::array<double, 2> apply(double x1, double x2) const;
    virtual std::array<Jet, 2> components(const Jet& x1, const Jet& x2) const = 0;
    virtual std::array<std::array<Jet, 2>, 2> jacobian(const Jet& x1, const Jet& x2) const = 0;
    virtual std::shared_ptr<CoordinateMap> inverse() const = 0;
};

// Coordinate changes that remove the D coefficient.
// rational case (D = (x1 + k1)/(k2 - x2)):  xb1 = (x1 + k1)/(x2 - k2), xb2 = 1/(x2 - k2)
// constant case (D = k1):                   xb1 = x1 + k1*x2,          xb2 = x2
struct KillTransform {
    std::shared_ptr<CoordinateMap> forward;
    std::shared_ptr<CoordinateMap> inverse;
};
KillTransform kill_D_transform_rational(double k1, double k2);
KillTransform kill_D_transform_constant(double k1);

// Metric seen through a coordinate map: eval at x uses the inner metric at
// map(x) with directions pushed by the jacobian. `map` sends these coordinates
// into the inner metric's coordinates.
std::shared_ptr<Metric> transformed_metric(std::shared_ptr<const Metric> inner,
                                           std::shared_ptr<const CoordinateMap> map);

// Numerical recovery of the form coefficients from L alone (works for any
// metric of the right family, including transformed ones): least-squares over
// a direction palette.
Coefficients recover_kropina_coefficients(const Metric& metric, double x1, double x2, int order);
Coefficients recover_cubic_coefficients(const Metric& metric, double x1, double x2, int order);

}  // namespace finsler::metrics
