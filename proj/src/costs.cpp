#include "eot/costs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace eot {

namespace {

void check_prob_sum(const std::vector<double>& probs) {
    StableSum s;
    for (double p : probs) {
        if (!(p >= 0.0)) throw std::invalid_argument("SourceLaw: negative probability");
        s.add(p);
    }
    if (std::abs(s.total() - 1.0) > 1e-12) {
        throw std::invalid_argument("SourceLaw: probabilities must sum to 1");
    }
}

// log(cosh(z)) without overflow.
double log_cosh(double z) {
    const double a = std::abs(z);
    return a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
}

}  // namespace

SourceLaw SourceLaw::standard_normal(std::size_t dim) {
    if (dim < 1) throw std::invalid_argument("standard_normal: dim >= 1 required");
    return SourceLaw(LawKind::standard_normal, dim);
}

SourceLaw SourceLaw::rademacher() { return SourceLaw(LawKind::rademacher, 1); }
SourceLaw SourceLaw::exponential1() { return SourceLaw(LawKind::exponential1, 1); }
SourceLaw SourceLaw::poisson1() { return SourceLaw(LawKind::poisson1, 1); }

SourceLaw SourceLaw::finite_support(std::vector<double> points, std::vector<double> probs) {
    if (points.empty() || points.size() != probs.size()) {
        throw std::invalid_argument("finite_support: need matching nonempty points/probs");
    }
    for (double z : points) {
        if (!std::isfinite(z)) throw std::invalid_argument("finite_support: non-finite point");
    }
    check_prob_sum(probs);
    SourceLaw law(LawKind::finite_support, 1);
    law.points_ = std::move(points);
    law.probs_ = std::move(probs);
    return law;
}

std::vector<double> SourceLaw::mean() const {
    switch (kind_) {
        case LawKind::standard_normal:
            return std::vector<double>(dim_, 0.0);
        case LawKind::rademacher:
            return {0.0};
        case LawKind::exponential1:
        case LawKind::poisson1:
            return {1.0};
        case LawKind::finite_support: {
            StableSum s;
            for (std::size_t i = 0; i < points_.size(); ++i) s.add(probs_[i] * points_[i]);
            return {s.total()};
        }
    }
    return {};
}

double SourceLaw::log_mgf(double zeta) const {
    switch (kind_) {
        case LawKind::standard_normal:
            return 0.5 * zeta * zeta;
        case LawKind::rademacher:
            return log_cosh(zeta);
        case LawKind::exponential1:
            return zeta < 1.0 ? -std::log1p(-zeta) : kInf;
        case LawKind::poisson1:
            return std::expm1(zeta);
        case LawKind::finite_support: {
            std::vector<double> terms(points_.size());
            for (std::size_t i = 0; i < points_.size(); ++i) {
                terms[i] = probs_[i] > 0.0 ? std::log(probs_[i]) + zeta * points_[i] : -kInf;
            }
            return log_sum_exp(terms);
        }
    }
    return kNaN;
}

double SourceLaw::dlog_mgf(double zeta) const {
    switch (kind_) {
        case LawKind::standard_normal:
            return zeta;
        case LawKind::rademacher:
            return std::tanh(zeta);
        case LawKind::exponential1:
            return 1.0 / (1.0 - zeta);
        case LawKind::poisson1:
            return std::exp(zeta);
        case LawKind::finite_support: {
            // Mean of the exponentially tilted law.
            double mx = -kInf;
            for (std::size_t i = 0; i < points_.size(); ++i) {
                if (probs_[i] > 0.0) mx = std::max(mx, std::log(probs_[i]) + zeta * points_[i]);
            }
            StableSum den, num;
            for (std::size_t i = 0; i < points_.size(); ++i) {
                if (probs_[i] <= 0.0) continue;
                const double w = std::exp(std::log(probs_[i]) + zeta * points_[i] - mx);
                den.add(w);
                num.add(w * points_[i]);
            }
            return num.total() / den.total();
        }
    }
    return kNaN;
}

double SourceLaw::d2log_mgf(double zeta) const {
    switch (kind_) {
        case LawKind::standard_normal:
            return 1.0;
        case LawKind::rademacher: {
            const double t = std::tanh(zeta);
            return 1.0 - t * t;
        }
        case LawKind::exponential1:
            return sq(1.0 / (1.0 - zeta));
        case LawKind::poisson1:
            return std::exp(zeta);
        case LawKind::finite_support: {
            double mx = -kInf;
            for (std::size_t i = 0; i < points_.size(); ++i) {
                if (probs_[i] > 0.0) mx = std::max(mx, std::log(probs_[i]) + zeta * points_[i]);
            }
            StableSum den, num1, num2;
            for (std::size_t i = 0; i < points_.size(); ++i) {
                if (probs_[i] <= 0.0) continue;
                const double w = std::exp(std::log(probs_[i]) + zeta * points_[i] - mx);
                den.add(w);
                num1.add(w * points_[i]);
                num2.add(w * points_[i] * points_[i]);
            }
            const double m1 = num1.total() / den.total();
            return std::max(0.0, num2.total() / den.total() - m1 * m1);
        }
    }
    return kNaN;
}

std::pair<double, double> SourceLaw::zeta_domain() const {
    if (kind_ == LawKind::exponential1) return {-kInf, 1.0};
    return {-kInf, kInf};
}

double SourceLaw::v_min() const {
    switch (kind_) {
        case LawKind::standard_normal:
            return -kInf;
        case LawKind::rademacher:
            return -1.0;
        case LawKind::exponential1:
        case LawKind::poisson1:
            return 0.0;
        case LawKind::finite_support: {
            double v = kInf;
            for (std::size_t i = 0; i < points_.size(); ++i) {
                if (probs_[i] > 0.0) v = std::min(v, points_[i]);
            }
            return v;
        }
    }
    return kNaN;
}

double SourceLaw::v_max() const {
    switch (kind_) {
        case LawKind::standard_normal:
        case LawKind::exponential1:
        case LawKind::poisson1:
            return kInf;
        case LawKind::rademacher:
            return 1.0;
        case LawKind::finite_support: {
            double v = -kInf;
            for (std::size_t i = 0; i < points_.size(); ++i) {
                if (probs_[i] > 0.0) v = std::max(v, points_[i]);
            }
            return v;
        }
    }
    return kNaN;
}

double SourceLaw::boundary_cost_lo() const {
    switch (kind_) {
        case LawKind::standard_normal:
            return kInf;
        case LawKind::rademacher:
            return std::log(2.0);
        case LawKind::exponential1:
            return kInf;  // no atom at 0
        case LawKind::poisson1:
            return 1.0;  // -log P(Z=0) = -log e^{-1}
        case LawKind::finite_support: {
            const double lo = v_min();
            StableSum mass;
            for (std::size_t i = 0; i < points_.size(); ++i) {
                if (probs_[i] > 0.0 && points_[i] == lo) mass.add(probs_[i]);
            }
            return mass.total() > 0.0 ? -std::log(mass.total()) : kInf;
        }
    }
    return kNaN;
}

double SourceLaw::boundary_cost_hi() const {
    switch (kind_) {
        case LawKind::standard_normal:
        case LawKind::exponential1:
        case LawKind::poisson1:
            return kInf;
        case LawKind::rademacher:
            return std::log(2.0);
        case LawKind::finite_support: {
            const double hi = v_max();
            StableSum mass;
            for (std::size_t i = 0; i < points_.size(); ++i) {
                if (probs_[i] > 0.0 && points_[i] == hi) mass.add(probs_[i]);
            }
            return mass.total() > 0.0 ? -std::log(mass.total()) : kInf;
        }
    }
    return kNaN;
}

std::string SourceLaw::name() const {
    switch (kind_) {
        case LawKind::standard_normal:
            return "normal";
        case LawKind::rademacher:
            return "rademacher";
        case LawKind::exponential1:
            return "exponential1";
        case LawKind::poisson1:
            return "poisson1";
        case LawKind::finite_support:
            return "finite";
    }
    return "?";
}

double SourceLaw::log_laplace(std::span<const double> zeta) const {
    if (kind_ == LawKind::standard_normal) {
        double s = 0.0;
        for (double z : zeta) s += 0.5 * z * z;
        return s;
    }
    if (zeta.size() != 1) {
        throw std::invalid_argument("log_laplace: law " + name() + " is one-dimensional");
    }
    return log_mgf(zeta[0]);
}

double log_laplace(const SourceLaw& law, std::span<const double> zeta) {
    return law.log_laplace(zeta);
}

namespace {

// Conjugate of the 1-D log-mgf at an interior point of the velocity domain.
// The stationarity equation dlog_mgf(zeta) = v has a unique root; bracket it
// starting from [-1, 1] and polish with bisection-safeguarded Newton.
double conjugate_interior_1d(const SourceLaw& law, double v) {
    const auto [dom_lo, dom_hi] = law.zeta_domain();
    auto clip = [&](double x) {
        if (x <= dom_lo) x = dom_hi == kInf ? dom_lo + 1.0 : 0.5 * (dom_lo + dom_hi);
        if (x >= dom_hi) x = dom_lo == -kInf ? dom_hi - 1.0 : 0.5 * (dom_lo + dom_hi);
        return x;
    };
    double lo = clip(-1.0);
    double hi = clip(1.0);
    if (lo > hi) std::swap(lo, hi);

    while (law.dlog_mgf(hi) < v) {
        if (std::abs(hi) > 1e6) return law.boundary_cost_hi();
        lo = hi;
        if (dom_hi == kInf) {
            hi = hi > 0.0 ? hi * 2.0 : 1.0;
        } else {
            const double gap = dom_hi - hi;
            if (gap < 1e-13 * std::max(1.0, std::abs(dom_hi))) return law.boundary_cost_hi();
            hi = dom_hi - 0.5 * gap;
        }
    }
    while (law.dlog_mgf(lo) > v) {
        if (std::abs(lo) > 1e6) return law.boundary_cost_lo();
        hi = lo;
        if (dom_lo == -kInf) {
            lo = lo < 0.0 ? lo * 2.0 : -1.0;
        } else {
            const double gap = lo - dom_lo;
            if (gap < 1e-13 * std::max(1.0, std::abs(dom_lo))) return law.boundary_cost_lo();
            lo = dom_lo + 0.5 * gap;
        }
    }

    double z = 0.5 * (lo + hi);
    for (int iter = 0; iter < 200; ++iter) {
        const double g = law.dlog_mgf(z) - v;
        if (std::abs(g) <= 1e-13 * std::max(1.0, std::abs(v))) break;
        if (g > 0.0) {
            hi = z;
        } else {
            lo = z;
        }
        const double h = law.d2log_mgf(z);
        double next = h > 0.0 ? z - g / h : kNaN;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - z) <= 1e-16 * std::max(1.0, std::abs(z))) {
            z = next;
            break;
        }
        z = next;
    }
    return std::max(0.0, z * v - law.log_mgf(z));
}

double conjugate_1d(const SourceLaw& law, double v) {
    const double vlo = law.v_min();
    const double vhi = law.v_max();
    if (v < vlo || v > vhi) return kInf;
    if (v == vlo) return law.boundary_cost_lo();
    if (v == vhi) return law.boundary_cost_hi();
    return conjugate_interior_1d(law, v);
}

void check_eval_dim(const SourceLaw& law, std::size_t vdim) {
    if (law.kind() == LawKind::standard_normal) return;  // isotropic family, any d via d=1
    if (vdim != 1) {
        throw std::invalid_argument("cramer: law " + law.name() + " is one-dimensional");
    }
}

}  // namespace

double cramer_closed(const SourceLaw& law, std::span<const double> v) {
    check_eval_dim(law, v.size());
    switch (law.kind()) {
        case LawKind::standard_normal: {
            double s = 0.0;
            for (double x : v) s += 0.5 * x * x;
            return s;
        }
        case LawKind::rademacher: {
            const double x = v[0];
            if (std::abs(x) > 1.0) return kInf;
            if (std::abs(x) == 1.0) return std::log(2.0);
            return 0.5 * ((1.0 + x) * std::log1p(x) + (1.0 - x) * std::log1p(-x));
        }
        case LawKind::exponential1: {
            const double x = v[0];
            return x > 0.0 ? x - 1.0 - std::log(x) : kInf;
        }
        case LawKind::poisson1: {
            const double x = v[0];
            if (x < 0.0) return kInf;
            if (x == 0.0) return 1.0;
            return x * std::log(x) - x + 1.0;
        }
        case LawKind::finite_support:
            return cramer_numerical(law, v);
    }
    return kNaN;
}

double cramer_numerical(const SourceLaw& law, std::span<const double> v) {
    check_eval_dim(law, v.size());
    if (law.kind() == LawKind::standard_normal) {
        // Separable across coordinates.
        const SourceLaw margin = SourceLaw::standard_normal(1);
        StableSum s;
        for (double x : v) {
            const double c = conjugate_1d(margin, x);
            if (c == kInf) return kInf;
            s.add(c);
        }
        return s.total();
    }
    return conjugate_1d(law, v[0]);
}

double CramerTransform::operator()(std::span<const double> v) const {
    return mode_ == CramerMode::closed_form ? cramer_closed(law_, v) : cramer_numerical(law_, v);
}

double affine_transport(const CramerTransform& ct, const Matrix& a, std::span<const double> b,
                        std::span<const double> v) {
    if (a.rows() != v.size() || b.size() != v.size()) {
        throw std::invalid_argument("affine_transport: shape mismatch");
    }
    std::vector<double> rhs(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) rhs[i] = v[i] - b[i];
    const std::vector<double> u = solve_linear(a, std::move(rhs));
    return ct(std::span<const double>(u));
}

Twist Twist::identity() {
    auto id = [](double, const Point& v) -> std::optional<Point> { return v; };
    return Twist(id, id, false);
}

Twist Twist::power(double p) {
    if (!(p > 0.0)) throw std::invalid_argument("Twist::power: p > 0 required");
    auto scale_map = [](double expo, double coeff, const Point& v) -> std::optional<Point> {
        const double r = norm(v);
        if (r == 0.0) return Point(std::vector<double>(v.dim(), 0.0));
        return (coeff * std::pow(r, expo)) * v;
    };
    auto fwd = [p, scale_map](double, const Point& v) {
        return scale_map(2.0 / p - 1.0, std::pow(2.0, -1.0 / p), v);
    };
    auto inv = [p, scale_map](double, const Point& v) {
        return scale_map(p / 2.0 - 1.0, std::sqrt(2.0), v);
    };
    return Twist(fwd, inv, false);
}

Twist Twist::custom(Map forward, Map inverse, bool time_dependent) {
    return Twist(std::move(forward), std::move(inverse), time_dependent);
}

double twisted_cost(const CramerTransform& ct, const Twist& tw, const Point& x, const Point& y) {
    const auto w = tw.inverse(y - x);
    if (!w) return kInf;
    return ct(*w);
}

CostFunction CostFunction::cramer_shift(CramerTransform ct) {
    CostFunction cf;
    cf.kind_ = CostKind::cramer_shift;
    cf.ct_ = std::move(ct);
    return cf;
}

CostFunction CostFunction::twisted(CramerTransform ct, Twist tw) {
    CostFunction cf;
    cf.kind_ = CostKind::twisted;
    cf.ct_ = std::move(ct);
    cf.twist_ = std::move(tw);
    return cf;
}

CostFunction CostFunction::power(double p) {
    if (!(p > 0.0)) throw std::invalid_argument("CostFunction::power: p > 0 required");
    CostFunction cf;
    cf.kind_ = CostKind::power;
    cf.p_ = p;
    return cf;
}

CostFunction CostFunction::table(Matrix entries) {
    for (double x : entries.data()) {
        if (std::isnan(x) || x < 0.0) {
            throw std::invalid_argument("CostFunction::table: entries must be in [0, inf]");
        }
    }
    CostFunction cf;
    cf.kind_ = CostKind::table;
    cf.table_ = std::move(entries);
    return cf;
}

double CostFunction::operator()(const Point& x, const Point& y) const {
    switch (kind_) {
        case CostKind::cramer_shift:
            return (*ct_)(y - x);
        case CostKind::twisted:
            return twisted_cost(*ct_, *twist_, x, y);
        case CostKind::power:
            return std::pow(distance(x, y), p_);
        case CostKind::table:
            throw std::logic_error("table cost is index-based; use cost_matrix");
    }
    return kNaN;
}

const Matrix& CostFunction::entries() const {
    if (kind_ != CostKind::table) throw std::logic_error("entries(): not a table cost");
    return *table_;
}

Matrix cost_matrix(const CostFunction& cf, std::span<const Point> src, std::span<const Point> tgt) {
    if (cf.kind() == CostKind::table) {
        const Matrix& t = cf.entries();
        if (t.rows() != src.size() || t.cols() != tgt.size()) {
            throw std::invalid_argument("cost_matrix: table shape does not match supports");
        }
        return t;
    }
    Matrix m(src.size(), tgt.size());
    for (std::size_t i = 0; i < src.size(); ++i) {
        for (std::size_t j = 0; j < tgt.size(); ++j) {
            const double c = cf(src[i], tgt[j]);
            if (std::isnan(c) || c < 0.0) {
                throw std::runtime_error("cost_matrix: cost evaluated outside [0, inf]");
            }
            m(i, j) = c;
        }
    }
    return m;
}

SourceLaw law_from_name(const std::string& name, std::size_t dim) {
    if (name == "normal" || name == "standard_normal") return SourceLaw::standard_normal(dim);
    if (name == "rademacher") return SourceLaw::rademacher();
    if (name == "exponential1") return SourceLaw::exponential1();
    if (name == "poisson1") return SourceLaw::poisson1();
    throw std::invalid_argument("unknown source law: " + name);
}

namespace {

SourceLaw law_from_spec(const nlohmann::json& spec) {
    const std::string name = spec.at("law").get<std::string>();
    if (name == "finite" || name == "finite_support") {
        return SourceLaw::finite_support(spec.at("points").get<std::vector<double>>(),
                                         spec.at("probs").get<std::vector<double>>());
    }
    return law_from_name(name);
}

}  // namespace

CostFunction cost_from_spec(const nlohmann::json& spec, const std::filesystem::path& base_dir) {
    const std::string kind = spec.at("kind").get<std::string>();
    CramerMode mode = CramerMode::closed_form;
    if (spec.contains("mode") && spec.at("mode").get<std::string>() == "numerical") {
        mode = CramerMode::numerical;
    }
    if (kind == "power") {
        return CostFunction::power(spec.at("p").get<double>());
    }
    if (kind == "cramer") {
        return CostFunction::cramer_shift(CramerTransform(law_from_spec(spec), mode));
    }
    if (kind == "twisted") {
        const double p = spec.at("power_p").get<double>();
        SourceLaw law = spec.contains("law") ? law_from_spec(spec) : SourceLaw::standard_normal(1);
        return CostFunction::twisted(CramerTransform(std::move(law), mode), Twist::power(p));
    }
    if (kind == "table") {
        return CostFunction::table(load_cost_csv(base_dir / spec.at("path").get<std::string>()));
    }
    throw std::invalid_argument("unknown cost kind: " + kind);
}

Matrix load_cost_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open cost table: " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            // trim
            const auto b = tok.find_first_not_of(" \t\r");
            const auto e = tok.find_last_not_of(" \t\r");
            if (b == std::string::npos) throw std::runtime_error("cost table: empty cell");
            tok = tok.substr(b, e - b + 1);
            if (tok == "inf" || tok == "+inf" || tok == "Inf") {
                row.push_back(kInf);
            } else {
                std::size_t used = 0;
                const double x = std::stod(tok, &used);
                if (used != tok.size()) throw std::runtime_error("cost table: bad cell '" + tok + "'");
                row.push_back(x);
            }
        }
        if (!rows.empty() && row.size() != rows[0].size()) {
            throw std::runtime_error("cost table: ragged rows");
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("cost table: empty file");
    Matrix m(rows.size(), rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
    }
    return m;
}

}  // namespace eot
