#ifndef EOT_COSTS_HPP
#define EOT_COSTS_HPP

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eot/measures.hpp"
#include "eot/numerics.hpp"

#include "json.hpp"

namespace eot {

enum class LawKind { standard_normal, rademacher, exponential1, poisson1, finite_support };

// Law of the single-step increment Z. All kinds have finite exponential
// moments on their zeta domain, so the log-Laplace transform is well defined.
class SourceLaw {
public:
    static SourceLaw standard_normal(std::size_t dim = 1);
    static SourceLaw rademacher();
    static SourceLaw exponential1();
    static SourceLaw poisson1();
    static SourceLaw finite_support(std::vector<double> points, std::vector<double> probs);

    LawKind kind() const { return kind_; }
    std::size_t dim() const { return dim_; }
    const std::vector<double>& support_points() const { return points_; }
    const std::vector<double>& support_probs() const { return probs_; }

    // E[Z], one value per coordinate.
    std::vector<double> mean() const;

    // log E[exp(zeta . Z)]; +inf outside the finiteness domain.
    double log_laplace(std::span<const double> zeta) const;

    // 1-D pieces (per coordinate for standard_normal).
    double log_mgf(double zeta) const;
    double dlog_mgf(double zeta) const;   // strictly increasing on the domain
    double d2log_mgf(double zeta) const;
    // Open interval on which the mgf is finite.
    std::pair<double, double> zeta_domain() const;

    // Convex hull of the support: [v_min, v_max]; +-inf when unbounded.
    double v_min() const;
    double v_max() const;
    // -log of the point mass sitting at the hull endpoint (+inf if none);
    // the lower-semicontinuous boundary value of the Cramer transform.
    double boundary_cost_lo() const;
    double boundary_cost_hi() const;

    std::string name() const;

private:
    SourceLaw(LawKind kind, std::size_t dim) : kind_(kind), dim_(dim) {}

    LawKind kind_;
    std::size_t dim_;
    std::vector<double> points_;  // finite_support only
    std::vector<double> probs_;
};

double log_laplace(const SourceLaw& law, std::span<const double> zeta);

enum class CramerMode { closed_form, numerical };

// c_Z(v) = sup_zeta { zeta.v - log E[exp(zeta.Z)] }. Nonnegative, convex,
// zero exactly at v = E[Z]; +inf strictly outside the closed convex hull of
// the support. The numerical mode solves the stationarity equation by
// bracketing plus safeguarded Newton; the closed-form mode uses the catalog
// formulas (finite-support laws always go through the numerical path).
class CramerTransform {
public:
    explicit CramerTransform(SourceLaw law, CramerMode mode = CramerMode::closed_form)
        : law_(std::move(law)), mode_(mode) {}

    const SourceLaw& law() const { return law_; }
    CramerMode mode() const { return mode_; }
    std::size_t dim() const { return law_.dim(); }

    double operator()(std::span<const double> v) const;
    double operator()(const Point& v) const { return (*this)(std::span<const double>(v.coords)); }

private:
    SourceLaw law_;
    CramerMode mode_;
};

double cramer_closed(const SourceLaw& law, std::span<const double> v);
double cramer_numerical(const SourceLaw& law, std::span<const double> v);

// c_{aZ+b}(v) = c_Z(a^{-1}(v-b)); a must be invertible.
double affine_transport(const CramerTransform& ct, const Matrix& a, std::span<const double> b,
                        std::span<const double> v);

// Continuous injective reparametrization of displacements, optionally
// time-indexed for path use. beta is the inverse of alpha at each time.
class Twist {
public:
    using Map = std::function<std::optional<Point>(double t, const Point&)>;

    static Twist identity();
    // alpha_p(v) = 2^{-1/p} |v|^{2/p-1} v, whose pullback of the quadratic
    // rate gives the power cost |v|^p.
    static Twist power(double p);
    static Twist custom(Map forward, Map inverse, bool time_dependent);

    bool time_dependent() const { return time_dependent_; }
    std::optional<Point> forward(double t, const Point& v) const { return forward_(t, v); }
    std::optional<Point> inverse(double t, const Point& v) const { return inverse_(t, v); }
    // Time-independent twists evaluate at t = 1.
    std::optional<Point> forward(const Point& v) const { return forward_(1.0, v); }
    std::optional<Point> inverse(const Point& v) const { return inverse_(1.0, v); }

private:
    Twist(Map fwd, Map inv, bool td)
        : forward_(std::move(fwd)), inverse_(std::move(inv)), time_dependent_(td) {}

    Map forward_;
    Map inverse_;
    bool time_dependent_;
};

// c(x, y) = c_Z(beta(y - x)); +inf where beta is undefined.
double twisted_cost(const CramerTransform& ct, const Twist& tw, const Point& x, const Point& y);

enum class CostKind { cramer_shift, twisted, power, table };

// Static transport cost c(x, y) in [0, +inf].
class CostFunction {
public:
    static CostFunction cramer_shift(CramerTransform ct);
    static CostFunction twisted(CramerTransform ct, Twist tw);
    static CostFunction power(double p);
    static CostFunction table(Matrix entries);

    CostKind kind() const { return kind_; }
    // Analytic kinds only; table costs are index-based.
    double operator()(const Point& x, const Point& y) const;
    const Matrix& entries() const;

private:
    CostFunction() = default;
    CostKind kind_ = CostKind::power;
    std::optional<CramerTransform> ct_;
    std::optional<Twist> twist_;
    double p_ = 2.0;
    std::optional<Matrix> table_;
};

// Entry (i, j) = c(src[i], tgt[j]); +inf entries preserved. Table costs
// require matching dimensions.
Matrix cost_matrix(const CostFunction& cf, std::span<const Point> src, std::span<const Point> tgt);

// Parses {"kind": "power"|"cramer"|"twisted"|"table", ...}. File paths are
// resolved relative to base_dir.
CostFunction cost_from_spec(const nlohmann::json& spec, const std::filesystem::path& base_dir);

// CSV cost table; the literal "inf" marks forbidden cells.
Matrix load_cost_csv(const std::filesystem::path& path);

SourceLaw law_from_name(const std::string& name, std::size_t dim = 1);

}  // namespace eot

#endif
