#include "eot/measures.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace eot {

Point operator+(const Point& a, const Point& b) {
    Point r = a;
    for (std::size_t i = 0; i < r.coords.size(); ++i) r.coords[i] += b.coords[i];
    return r;
}

Point operator-(const Point& a, const Point& b) {
    Point r = a;
    for (std::size_t i = 0; i < r.coords.size(); ++i) r.coords[i] -= b.coords[i];
    return r;
}

Point operator*(double s, const Point& a) {
    Point r = a;
    for (double& c : r.coords) c *= s;
    return r;
}

double sq_norm(const Point& a) {
    double s = 0.0;
    for (double c : a.coords) s += c * c;
    return s;
}

double norm(const Point& a) { return std::sqrt(sq_norm(a)); }

double distance(const Point& a, const Point& b) { return norm(a - b); }

Point lerp(const Point& a, const Point& b, double t) {
    Point r = a;
    for (std::size_t i = 0; i < r.coords.size(); ++i) {
        r.coords[i] = (1.0 - t) * a.coords[i] + t * b.coords[i];
    }
    return r;
}

namespace {

void check_weights(const std::vector<double>& w, const char* what) {
    StableSum total;
    for (double x : w) {
        if (!(x >= 0.0)) throw std::invalid_argument(std::string(what) + ": negative weight");
        total.add(x);
    }
    if (std::abs(total.total() - 1.0) > 1e-12) {
        throw std::invalid_argument(std::string(what) + ": weights sum to " +
                                    std::to_string(total.total()) + ", expected 1");
    }
}

void check_points(const std::vector<Point>& pts, const char* what) {
    if (pts.empty()) throw std::invalid_argument(std::string(what) + ": empty support");
    const std::size_t d = pts[0].dim();
    if (d == 0) throw std::invalid_argument(std::string(what) + ": zero-dimensional point");
    std::map<std::string, std::size_t> seen;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (pts[i].dim() != d) {
            throw std::invalid_argument(std::string(what) + ": mixed point dimensions");
        }
        for (double c : pts[i].coords) {
            if (!std::isfinite(c)) {
                throw std::invalid_argument(std::string(what) + ": non-finite coordinate");
            }
        }
        auto [it, inserted] = seen.emplace(pts[i].key(), i);
        if (!inserted) {
            throw std::invalid_argument(std::string(what) + ": duplicate support point");
        }
    }
}

std::vector<Point> points_from_json(const nlohmann::json& arr) {
    std::vector<Point> pts;
    for (const auto& row : arr) {
        pts.emplace_back(row.get<std::vector<double>>());
    }
    return pts;
}

nlohmann::json points_to_json(const std::vector<Point>& pts) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : pts) arr.push_back(p.coords);
    return arr;
}

}  // namespace

DiscreteMeasure::DiscreteMeasure(std::vector<Point> points, std::vector<double> weights)
    : points_(std::move(points)), weights_(std::move(weights)) {
    if (points_.size() != weights_.size()) {
        throw std::invalid_argument("DiscreteMeasure: points/weights size mismatch");
    }
    check_points(points_, "DiscreteMeasure");
    check_weights(weights_, "DiscreteMeasure");
}

DiscreteMeasure DiscreteMeasure::dirac(Point p) {
    return DiscreteMeasure({std::move(p)}, {1.0});
}

DiscreteMeasure DiscreteMeasure::uniform(std::vector<Point> points) {
    const std::size_t n = points.size();
    if (n == 0) throw std::invalid_argument("DiscreteMeasure::uniform: empty support");
    return DiscreteMeasure(std::move(points), std::vector<double>(n, 1.0 / double(n)));
}

nlohmann::json DiscreteMeasure::to_json() const {
    return {{"dim", dim()}, {"points", points_to_json(points_)}, {"weights", weights_}};
}

DiscreteMeasure DiscreteMeasure::from_json(const nlohmann::json& j) {
    auto pts = points_from_json(j.at("points"));
    auto w = j.at("weights").get<std::vector<double>>();
    if (j.contains("dim")) {
        const auto d = j.at("dim").get<std::size_t>();
        for (const auto& p : pts) {
            if (p.dim() != d) throw std::invalid_argument("measure json: dim mismatch");
        }
    }
    return DiscreteMeasure(std::move(pts), std::move(w));
}

Coupling::Coupling(std::vector<Point> source_support, std::vector<Point> target_support,
                   std::vector<double> weights_row_major)
    : source_(std::move(source_support)),
      target_(std::move(target_support)),
      weights_(std::move(weights_row_major)) {
    check_points(source_, "Coupling(source)");
    check_points(target_, "Coupling(target)");
    if (source_[0].dim() != target_[0].dim()) {
        throw std::invalid_argument("Coupling: source/target dimension mismatch");
    }
    if (weights_.size() != source_.size() * target_.size()) {
        throw std::invalid_argument("Coupling: weight matrix shape mismatch");
    }
    check_weights(weights_, "Coupling");
}

Coupling Coupling::product(const DiscreteMeasure& p, const DiscreteMeasure& q) {
    std::vector<double> w(p.size() * q.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        for (std::size_t j = 0; j < q.size(); ++j) {
            w[i * q.size() + j] = p.weights()[i] * q.weights()[j];
        }
    }
    return Coupling(p.points(), q.points(), std::move(w));
}

nlohmann::json Coupling::to_json() const {
    return {{"dim", source_[0].dim()},
            {"source_support", points_to_json(source_)},
            {"target_support", points_to_json(target_)},
            {"weights", weights_}};
}

Coupling Coupling::from_json(const nlohmann::json& j) {
    return Coupling(points_from_json(j.at("source_support")),
                    points_from_json(j.at("target_support")),
                    j.at("weights").get<std::vector<double>>());
}

DiscreteMeasure marginal(const Coupling& c, MarginalSide side) {
    const std::size_t n = c.source_size(), m = c.target_size();
    if (side == MarginalSide::source) {
        std::vector<double> w(n);
        for (std::size_t i = 0; i < n; ++i) {
            StableSum s;
            for (std::size_t j = 0; j < m; ++j) s.add(c.weight(i, j));
            w[i] = s.total();
        }
        return DiscreteMeasure(c.source_support(), std::move(w));
    }
    std::vector<double> w(m);
    for (std::size_t j = 0; j < m; ++j) {
        StableSum s;
        for (std::size_t i = 0; i < n; ++i) s.add(c.weight(i, j));
        w[j] = s.total();
    }
    return DiscreteMeasure(c.target_support(), std::move(w));
}

namespace {

void check_prob_vector(std::span<const double> p, const char* name) {
    StableSum s;
    for (double x : p) {
        if (!(x >= 0.0)) throw std::invalid_argument(std::string(name) + ": negative entry");
        s.add(x);
    }
    if (std::abs(s.total() - 1.0) > 1e-9) {
        throw std::invalid_argument(std::string(name) + ": not a probability vector");
    }
}

}  // namespace

double relative_entropy(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw std::invalid_argument("relative_entropy: shape mismatch");
    check_prob_vector(p, "relative_entropy(p)");
    check_prob_vector(q, "relative_entropy(q)");
    StableSum s;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > 0.0) {
            if (q[i] <= 0.0) return kInf;
            s.add(p[i] * std::log(p[i] / q[i]));
        }
    }
    return std::max(0.0, s.total());
}

double relative_entropy(const Coupling& p, const Coupling& q) {
    if (p.source_size() != q.source_size() || p.target_size() != q.target_size()) {
        throw std::invalid_argument("relative_entropy: coupling shape mismatch");
    }
    return relative_entropy(std::span<const double>(p.weights()),
                            std::span<const double>(q.weights()));
}

double relative_entropy_log_ref(std::span<const double> p, std::span<const double> log_q) {
    if (p.size() != log_q.size()) {
        throw std::invalid_argument("relative_entropy_log_ref: shape mismatch");
    }
    StableSum s;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > 0.0) {
            if (log_q[i] == -kInf) return kInf;
            s.add(p[i] * (std::log(p[i]) - log_q[i]));
        }
    }
    return std::max(0.0, s.total());
}

namespace {

// Weights of both measures over the union of supports, matched by canonical
// point identity.
std::pair<std::vector<double>, std::vector<double>> merged_weights(const DiscreteMeasure& p,
                                                                   const DiscreteMeasure& q) {
    if (p.dim() != q.dim()) throw std::invalid_argument("merged supports: dimension mismatch");
    std::map<std::string, std::size_t> index;
    std::vector<double> wp, wq;
    for (std::size_t i = 0; i < p.size(); ++i) {
        index.emplace(p.points()[i].key(), i);
        wp.push_back(p.weights()[i]);
        wq.push_back(0.0);
    }
    for (std::size_t j = 0; j < q.size(); ++j) {
        auto it = index.find(q.points()[j].key());
        if (it != index.end()) {
            wq[it->second] = q.weights()[j];
        } else {
            wp.push_back(0.0);
            wq.push_back(q.weights()[j]);
        }
    }
    return {std::move(wp), std::move(wq)};
}

}  // namespace

double tv_distance(const DiscreteMeasure& p, const DiscreteMeasure& q) {
    auto [wp, wq] = merged_weights(p, q);
    StableSum s;
    for (std::size_t i = 0; i < wp.size(); ++i) s.add(std::abs(wp[i] - wq[i]));
    return 0.5 * s.total();
}

double coupling_tv(const Coupling& a, const Coupling& b) {
    if (a.source_size() != b.source_size() || a.target_size() != b.target_size()) {
        throw std::invalid_argument("coupling_tv: shape mismatch");
    }
    StableSum s;
    for (std::size_t i = 0; i < a.weights().size(); ++i) {
        s.add(std::abs(a.weights()[i] - b.weights()[i]));
    }
    return 0.5 * s.total();
}

double wasserstein1_1d(const DiscreteMeasure& p, const DiscreteMeasure& q) {
    if (p.dim() != 1 || q.dim() != 1) {
        throw std::invalid_argument("wasserstein1_1d: requires dimension 1");
    }
    struct Atom {
        double x;
        double dw;  // contribution to F_p - F_q
    };
    std::vector<Atom> atoms;
    atoms.reserve(p.size() + q.size());
    for (std::size_t i = 0; i < p.size(); ++i) atoms.push_back({p.points()[i][0], p.weights()[i]});
    for (std::size_t j = 0; j < q.size(); ++j) atoms.push_back({q.points()[j][0], -q.weights()[j]});
    std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.x < b.x; });

    StableSum w1;
    StableSum cdf_gap;
    for (std::size_t i = 0; i + 1 < atoms.size(); ++i) {
        cdf_gap.add(atoms[i].dw);
        w1.add(std::abs(cdf_gap.total()) * (atoms[i + 1].x - atoms[i].x));
    }
    return w1.total();
}

double entropy_chain_rule_residual(const Coupling& P, const Coupling& R) {
    const std::size_t n = P.source_size(), m = P.target_size();
    if (n != R.source_size() || m != R.target_size()) {
        throw std::invalid_argument("entropy_chain_rule_residual: shape mismatch");
    }
    const double h_joint = relative_entropy(P, R);
    if (!std::isfinite(h_joint)) return kNaN;

    const DiscreteMeasure p0 = marginal(P, MarginalSide::source);
    const DiscreteMeasure r0 = marginal(R, MarginalSide::source);
    const double h_marg = relative_entropy(std::span<const double>(p0.weights()),
                                           std::span<const double>(r0.weights()));

    StableSum cond;
    for (std::size_t i = 0; i < n; ++i) {
        const double pi = p0.weights()[i];
        if (pi <= 0.0) continue;
        const double ri = r0.weights()[i];
        std::vector<double> prow(m), rrow(m);
        for (std::size_t j = 0; j < m; ++j) {
            prow[j] = P.weight(i, j) / pi;
            rrow[j] = R.weight(i, j) / ri;
        }
        cond.add(pi * relative_entropy(prow, rrow));
    }
    return h_joint - (h_marg + cond.total());
}

}  // namespace eot
