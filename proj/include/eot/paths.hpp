#ifndef EOT_PATHS_HPP
#define EOT_PATHS_HPP

#include <optional>
#include <vector>

#include "eot/costs.hpp"
#include "eot/measures.hpp"

namespace eot {

// Piecewise-linear path on [0, 1]; velocity is constant on each segment, so
// velocity-based actions evaluate exactly.
struct PiecewiseLinearPath {
    std::vector<double> times;
    std::vector<Point> points;

    PiecewiseLinearPath(std::vector<double> ts, std::vector<Point> ps);

    std::size_t knots() const { return times.size(); }
    std::size_t dim() const { return points[0].dim(); }
    const Point& start() const { return points.front(); }
    const Point& end() const { return points.back(); }

    // Adds interior knots (positions interpolated linearly); times must lie
    // strictly inside existing spans.
    PiecewiseLinearPath refined(const std::vector<double>& extra_times) const;

    nlohmann::json to_json() const;
    static PiecewiseLinearPath from_json(const nlohmann::json& j);
};

enum class ActionKind { kinetic, mogulskii, twisted_walk };

// Velocity action along a path: integral of c_Z(velocity), with the
// twisted-walk variant evaluating after pulling the path back through the
// inverse twist.
class ActionFunctional {
public:
    static ActionFunctional kinetic();
    static ActionFunctional mogulskii(CramerTransform ct);
    static ActionFunctional twisted_walk(CramerTransform ct, Twist tw);

    ActionKind kind() const { return kind_; }
    const CramerTransform& transform() const { return *ct_; }
    const Twist& twist() const { return *twist_; }

    // c_Z applied to one velocity (kinetic uses |v|^2/2).
    double velocity_cost(const Point& v) const;

private:
    ActionFunctional() = default;
    ActionKind kind_ = ActionKind::kinetic;
    std::optional<CramerTransform> ct_;
    std::optional<Twist> twist_;
};

double action(const ActionFunctional& af, const PiecewiseLinearPath& path);

struct GeodesicResult {
    PiecewiseLinearPath path;
    double cost;
};

// Minimizer of the action among paths pinned at x and y. Mogulskii kinds
// return the two-knot constant-velocity segment; twisted walks return the
// warped line sampled on a uniform knot grid. When the displacement leaves
// the effective domain, cost is +inf and the straight line stands in.
GeodesicResult geodesic(const ActionFunctional& af, const Point& x, const Point& y,
                        std::size_t knots = 64);

// inf over paths of the action between x and y.
double static_cost(const ActionFunctional& af, const Point& x, const Point& y);

struct BridgeMarginal {
    Point mean;
    double variance;  // per coordinate, isotropic
};

// Time-t marginal of the Brownian bridge with diffusion 1/k pinned at (x, y):
// mean (1-t)x + ty, variance t(1-t)/k.
BridgeMarginal brownian_bridge_marginal(int k, const Point& x, const Point& y, double t);

struct FlowResult {
    DiscreteMeasure measure;
    double covered_mass;
    bool mass_warning;  // grid captured less than 1 - 1e-6 of the mixture
};

// Time-t marginal of the bridge mixture of pi, discretized on eval_grid
// (1-D). At t = 0 or 1 the exact coupling marginal is returned.
FlowResult mixture_flow(const Coupling& pi, int k, double t, std::span<const Point> eval_grid);

// Uniform 1-D grid spanning the coupling's supports plus 4 sigma_max margins.
std::vector<Point> default_flow_grid(const Coupling& pi, int k, std::size_t n_points = 512);

// Atoms (1-t)x_i + t y_j weighted by pi_ij; coincident atoms merged.
DiscreteMeasure displacement_interpolation(const Coupling& pi, double t);

}  // namespace eot

#endif
