#ifndef EOT_MEASURES_HPP
#define EOT_MEASURES_HPP

#include <span>
#include <string>
#include <vector>

#include "eot/numerics.hpp"

#include "json.hpp"

namespace eot {

// A location in the d-dimensional state space.
struct Point {
    std::vector<double> coords;

    Point() = default;
    Point(std::initializer_list<double> cs) : coords(cs) {}
    explicit Point(std::vector<double> cs) : coords(std::move(cs)) {}

    std::size_t dim() const { return coords.size(); }
    double operator[](std::size_t i) const { return coords[i]; }

    std::string key() const { return coord_key(coords); }
};

Point operator+(const Point& a, const Point& b);
Point operator-(const Point& a, const Point& b);
Point operator*(double s, const Point& a);
double norm(const Point& a);
double sq_norm(const Point& a);
double distance(const Point& a, const Point& b);
// (1-t) a + t b
Point lerp(const Point& a, const Point& b, double t);

// Finitely supported probability measure. Weights must be nonnegative and
// sum to 1 within 1e-12; points must be pairwise distinct under the
// 12-significant-digit canonical identity. Drift beyond the tolerance is an
// input error, not repaired here.
class DiscreteMeasure {
public:
    DiscreteMeasure(std::vector<Point> points, std::vector<double> weights);

    static DiscreteMeasure dirac(Point p);
    static DiscreteMeasure uniform(std::vector<Point> points);

    const std::vector<Point>& points() const { return points_; }
    const std::vector<double>& weights() const { return weights_; }
    std::size_t size() const { return points_.size(); }
    std::size_t dim() const { return points_.empty() ? 0 : points_[0].dim(); }

    nlohmann::json to_json() const;
    static DiscreteMeasure from_json(const nlohmann::json& j);

private:
    std::vector<Point> points_;
    std::vector<double> weights_;
};

// Joint weight matrix over a source x target support; total mass 1 within
// 1e-12, entries nonnegative.
class Coupling {
public:
    Coupling(std::vector<Point> source_support, std::vector<Point> target_support,
             std::vector<double> weights_row_major);

    static Coupling product(const DiscreteMeasure& p, const DiscreteMeasure& q);

    const std::vector<Point>& source_support() const { return source_; }
    const std::vector<Point>& target_support() const { return target_; }
    std::size_t source_size() const { return source_.size(); }
    std::size_t target_size() const { return target_.size(); }
    double weight(std::size_t i, std::size_t j) const { return weights_[i * target_.size() + j]; }
    const std::vector<double>& weights() const { return weights_; }

    nlohmann::json to_json() const;
    static Coupling from_json(const nlohmann::json& j);

private:
    std::vector<Point> source_;
    std::vector<Point> target_;
    std::vector<double> weights_;  // row-major
};

enum class MarginalSide { source, target };

DiscreteMeasure marginal(const Coupling& c, MarginalSide side);

// sum_i p_i log(p_i / q_i) with the 0 log 0 = 0 convention. Returns +inf
// exactly when some p_i > 0 has q_i = 0. Inputs must be nonnegative vectors
// of equal length, each summing to 1.
double relative_entropy(std::span<const double> p, std::span<const double> q);
double relative_entropy(const Coupling& p, const Coupling& q);

// Same quantity against a reference supplied in log form; usable when the
// reference underflows in linear scale.
double relative_entropy_log_ref(std::span<const double> p, std::span<const double> log_q);

// (1/2) sum |p - q| over the merged support.
double tv_distance(const DiscreteMeasure& p, const DiscreteMeasure& q);

// TV between two couplings on identical supports.
double coupling_tv(const Coupling& a, const Coupling& b);

// Exact 1-D Wasserstein-1 via CDF difference; requires dim 1.
double wasserstein1_1d(const DiscreteMeasure& p, const DiscreteMeasure& q);

// H(P|R) - [H(P0|R0) + sum_x P0(x) H(P(.|x)|R(.|x))]. Zero up to rounding
// whenever finite; NaN when H(P|R) is infinite.
double entropy_chain_rule_residual(const Coupling& P, const Coupling& R);

}  // namespace eot

#endif
