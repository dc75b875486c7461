#include "eot/paths.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace eot {

PiecewiseLinearPath::PiecewiseLinearPath(std::vector<double> ts, std::vector<Point> ps)
    : times(std::move(ts)), points(std::move(ps)) {
    if (times.size() != points.size() || times.size() < 2) {
        throw std::invalid_argument("path: need >= 2 knots with matching times");
    }
    if (times.front() != 0.0 || times.back() != 1.0) {
        throw std::invalid_argument("path: times must start at 0 and end at 1");
    }
    const std::size_t d = points[0].dim();
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (points[i].dim() != d) throw std::invalid_argument("path: mixed dimensions");
        if (i > 0 && !(times[i] > times[i - 1])) {
            throw std::invalid_argument("path: times must be strictly increasing");
        }
    }
}

PiecewiseLinearPath PiecewiseLinearPath::refined(const std::vector<double>& extra_times) const {
    std::vector<double> ts = times;
    std::vector<Point> ps = points;
    for (double t : extra_times) {
        auto it = std::lower_bound(ts.begin(), ts.end(), t);
        if (it != ts.end() && *it == t) continue;
        if (it == ts.begin() || it == ts.end()) {
            throw std::invalid_argument("refined: time outside [0, 1]");
        }
        const std::size_t idx = std::size_t(it - ts.begin());
        const double t0 = ts[idx - 1], t1 = ts[idx];
        const double lambda = (t - t0) / (t1 - t0);
        ps.insert(ps.begin() + long(idx), lerp(ps[idx - 1], ps[idx], lambda));
        ts.insert(it, t);
    }
    return PiecewiseLinearPath(std::move(ts), std::move(ps));
}

nlohmann::json PiecewiseLinearPath::to_json() const {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : points) pts.push_back(p.coords);
    return {{"times", times}, {"points", pts}};
}

PiecewiseLinearPath PiecewiseLinearPath::from_json(const nlohmann::json& j) {
    std::vector<Point> pts;
    for (const auto& row : j.at("points")) pts.emplace_back(row.get<std::vector<double>>());
    return PiecewiseLinearPath(j.at("times").get<std::vector<double>>(), std::move(pts));
}

ActionFunctional ActionFunctional::kinetic() {
    ActionFunctional af;
    af.kind_ = ActionKind::kinetic;
    return af;
}

ActionFunctional ActionFunctional::mogulskii(CramerTransform ct) {
    ActionFunctional af;
    af.kind_ = ActionKind::mogulskii;
    af.ct_ = std::move(ct);
    return af;
}

ActionFunctional ActionFunctional::twisted_walk(CramerTransform ct, Twist tw) {
    ActionFunctional af;
    af.kind_ = ActionKind::twisted_walk;
    af.ct_ = std::move(ct);
    af.twist_ = std::move(tw);
    return af;
}

double ActionFunctional::velocity_cost(const Point& v) const {
    if (kind_ == ActionKind::kinetic) return 0.5 * sq_norm(v);
    return (*ct_)(v);
}

namespace {

// Sum of dt * c(velocity) over segments; exact for piecewise-linear paths.
double velocity_action(const ActionFunctional& af, const std::vector<double>& ts,
                       const std::vector<Point>& ps) {
    StableSum s;
    for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
        const double dt = ts[i + 1] - ts[i];
        const Point v = (1.0 / dt) * (ps[i + 1] - ps[i]);
        const double c = af.velocity_cost(v);
        if (c == kInf) return kInf;
        s.add(dt * c);
    }
    return s.total();
}

}  // namespace

double action(const ActionFunctional& af, const PiecewiseLinearPath& path) {
    if (af.kind() != ActionKind::twisted_walk) {
        return velocity_action(af, path.times, path.points);
    }
    // Pull the knots back through the inverse twist, then evaluate the plain
    // velocity action on the pulled-back polyline.
    const Point& origin = path.start();
    std::vector<Point> pulled;
    pulled.reserve(path.knots());
    for (std::size_t i = 0; i < path.knots(); ++i) {
        const auto q = af.twist().inverse(path.times[i], path.points[i] - origin);
        if (!q) return kInf;
        pulled.push_back(origin + *q);
    }
    ActionFunctional base = ActionFunctional::mogulskii(af.transform());
    return velocity_action(base, path.times, pulled);
}

GeodesicResult geodesic(const ActionFunctional& af, const Point& x, const Point& y,
                        std::size_t knots) {
    if (x.dim() != y.dim()) throw std::invalid_argument("geodesic: dimension mismatch");
    const PiecewiseLinearPath straight({0.0, 1.0}, {x, y});

    if (af.kind() != ActionKind::twisted_walk) {
        const Point v = y - x;
        const double c =
            af.kind() == ActionKind::kinetic ? 0.5 * sq_norm(v) : af.transform()(v);
        return {straight, c};
    }

    const auto w = af.twist().inverse(1.0, y - x);
    if (!w) return {straight, kInf};
    const double c = af.transform()(*w);
    if (c == kInf) return {straight, kInf};

    if (knots < 2) knots = 2;
    std::vector<double> ts(knots);
    std::vector<Point> ps(knots);
    for (std::size_t i = 0; i < knots; ++i) {
        const double t = double(i) / double(knots - 1);
        ts[i] = t;
        const auto img = af.twist().forward(t, t * (*w));
        if (!img) throw std::runtime_error("geodesic: twist not defined along the warped line");
        ps[i] = x + *img;
    }
    // Pin the endpoints exactly.
    ts.front() = 0.0;
    ts.back() = 1.0;
    ps.front() = x;
    ps.back() = y;
    return {PiecewiseLinearPath(std::move(ts), std::move(ps)), c};
}

double static_cost(const ActionFunctional& af, const Point& x, const Point& y) {
    if (af.kind() != ActionKind::twisted_walk) {
        const Point v = y - x;
        return af.kind() == ActionKind::kinetic ? 0.5 * sq_norm(v) : af.transform()(v);
    }
    const auto w = af.twist().inverse(1.0, y - x);
    if (!w) return kInf;
    return af.transform()(*w);
}

BridgeMarginal brownian_bridge_marginal(int k, const Point& x, const Point& y, double t) {
    if (k < 1) throw std::invalid_argument("brownian_bridge_marginal: k >= 1 required");
    if (!(t >= 0.0 && t <= 1.0)) {
        throw std::invalid_argument("brownian_bridge_marginal: t must be in [0, 1]");
    }
    if (x.dim() != y.dim()) throw std::invalid_argument("brownian_bridge_marginal: dim mismatch");
    return {lerp(x, y, t), t * (1.0 - t) / double(k)};
}

FlowResult mixture_flow(const Coupling& pi, int k, double t, std::span<const Point> eval_grid) {
    if (k < 1) throw std::invalid_argument("mixture_flow: k >= 1 required");
    if (t == 0.0) return {marginal(pi, MarginalSide::source), 1.0, false};
    if (t == 1.0) return {marginal(pi, MarginalSide::target), 1.0, false};
    if (!(t > 0.0 && t < 1.0)) throw std::invalid_argument("mixture_flow: t must be in [0, 1]");
    if (pi.source_support()[0].dim() != 1) {
        throw std::invalid_argument("mixture_flow: grid evaluation requires dimension 1");
    }
    if (eval_grid.size() < 2) throw std::invalid_argument("mixture_flow: grid needs >= 2 points");
    for (std::size_t l = 0; l < eval_grid.size(); ++l) {
        if (eval_grid[l].dim() != 1) throw std::invalid_argument("mixture_flow: grid must be 1-D");
        if (l > 0 && !(eval_grid[l][0] > eval_grid[l - 1][0])) {
            throw std::invalid_argument("mixture_flow: grid must be strictly increasing");
        }
    }

    const double var = t * (1.0 - t) / double(k);
    const double sigma = std::sqrt(var);
    const std::size_t n = pi.source_size(), m = pi.target_size();

    std::vector<double> density(eval_grid.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const double w = pi.weight(i, j);
            if (w <= 0.0) continue;
            const double mean = (1.0 - t) * pi.source_support()[i][0] + t * pi.target_support()[j][0];
            for (std::size_t l = 0; l < eval_grid.size(); ++l) {
                const double z = (eval_grid[l][0] - mean) / sigma;
                density[l] += w * std::exp(-0.5 * z * z);
            }
        }
    }
    const double total = stable_sum(density);
    if (!(total > 0.0)) throw std::runtime_error("mixture_flow: grid misses the mixture entirely");
    for (double& d : density) d /= total;
    // Exact normalization mass on the last grid point.
    {
        StableSum rest;
        for (std::size_t l = 0; l + 1 < density.size(); ++l) rest.add(density[l]);
        density.back() = std::max(0.0, 1.0 - rest.total());
    }

    // Mass captured by the grid extent, bin edges half a spacing beyond the ends.
    const double a = eval_grid.front()[0] - 0.5 * (eval_grid[1][0] - eval_grid[0][0]);
    const double b = eval_grid.back()[0] +
                     0.5 * (eval_grid[eval_grid.size() - 1][0] - eval_grid[eval_grid.size() - 2][0]);
    StableSum captured;
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const double w = pi.weight(i, j);
            if (w <= 0.0) continue;
            const double mean = (1.0 - t) * pi.source_support()[i][0] + t * pi.target_support()[j][0];
            const double hi = 0.5 * std::erfc(-(b - mean) / sigma * inv_sqrt2);
            const double lo = 0.5 * std::erfc(-(a - mean) / sigma * inv_sqrt2);
            captured.add(w * (hi - lo));
        }
    }
    const double covered = captured.total();

    std::vector<Point> grid_pts(eval_grid.begin(), eval_grid.end());
    return {DiscreteMeasure(std::move(grid_pts), std::move(density)), covered,
            covered < 1.0 - 1e-6};
}

std::vector<Point> default_flow_grid(const Coupling& pi, int k, std::size_t n_points) {
    if (pi.source_support()[0].dim() != 1) {
        throw std::invalid_argument("default_flow_grid: requires dimension 1");
    }
    if (n_points < 2) throw std::invalid_argument("default_flow_grid: need >= 2 points");
    double lo = kInf, hi = -kInf;
    for (const auto& p : pi.source_support()) {
        lo = std::min(lo, p[0]);
        hi = std::max(hi, p[0]);
    }
    for (const auto& p : pi.target_support()) {
        lo = std::min(lo, p[0]);
        hi = std::max(hi, p[0]);
    }
    const double sigma_max = std::sqrt(0.25 / double(k));
    lo -= 4.0 * sigma_max;
    hi += 4.0 * sigma_max;
    std::vector<Point> grid(n_points);
    for (std::size_t l = 0; l < n_points; ++l) {
        grid[l] = Point{lo + (hi - lo) * double(l) / double(n_points - 1)};
    }
    return grid;
}

DiscreteMeasure displacement_interpolation(const Coupling& pi, double t) {
    if (!(t >= 0.0 && t <= 1.0)) {
        throw std::invalid_argument("displacement_interpolation: t must be in [0, 1]");
    }
    std::vector<Point> atoms;
    std::vector<double> weights;
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < pi.source_size(); ++i) {
        for (std::size_t j = 0; j < pi.target_size(); ++j) {
            const double w = pi.weight(i, j);
            if (w <= 0.0) continue;
            Point a = lerp(pi.source_support()[i], pi.target_support()[j], t);
            auto [it, inserted] = index.emplace(a.key(), atoms.size());
            if (inserted) {
                atoms.push_back(std::move(a));
                weights.push_back(w);
            } else {
                weights[it->second] += w;
            }
        }
    }
    return DiscreteMeasure(std::move(atoms), std::move(weights));
}

}  // namespace eot
