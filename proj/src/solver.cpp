#include "eot/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

#include "eot/oracle.hpp"

namespace eot {

GibbsKernel build_kernel(const DiscreteMeasure& mu0, const DiscreteMeasure& r, const Matrix& cost,
                         int k) {
    if (k < 1) throw std::invalid_argument("build_kernel: k >= 1 required");
    if (cost.rows() != mu0.size() || cost.cols() != r.size()) {
        throw std::invalid_argument("build_kernel: cost matrix shape mismatch");
    }
    const std::size_t n = mu0.size(), m = r.size();

    std::vector<double> log_r(m);
    for (std::size_t j = 0; j < m; ++j) {
        log_r[j] = r.weights()[j] > 0.0 ? std::log(r.weights()[j]) : -kInf;
    }

    Matrix log_rho(n, m);
    std::vector<double> log_z(n);
    std::vector<double> row(m);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const double c = cost(i, j);
            row[j] = (c == kInf || log_r[j] == -kInf) ? -kInf : -double(k) * c + log_r[j];
        }
        const double z = log_sum_exp(row);
        if (z == -kInf) {
            std::string coords = "(";
            for (std::size_t d = 0; d < mu0.points()[i].dim(); ++d) {
                coords += (d ? ", " : "") + std::to_string(mu0.points()[i][d]);
            }
            coords += ")";
            throw std::invalid_argument("build_kernel: source point " + std::to_string(i) + " at " +
                                        coords + " has no finite-cost target with positive reference weight");
        }
        log_z[i] = z;
        for (std::size_t j = 0; j < m; ++j) log_rho(i, j) = row[j] == -kInf ? -kInf : row[j] - z;
    }

    return {k, mu0.points(), r.points(), std::move(log_rho), std::move(log_z), mu0, r};
}

namespace {

// Weights of mu1 expressed over the kernel's target support, matched by
// canonical point identity.
std::vector<double> target_weights_on_support(const DiscreteMeasure& mu1,
                                              const GibbsKernel& kernel) {
    std::map<std::string, std::size_t> index;
    for (std::size_t j = 0; j < kernel.target_support.size(); ++j) {
        index.emplace(kernel.target_support[j].key(), j);
    }
    std::vector<double> w(kernel.target_support.size(), 0.0);
    for (std::size_t a = 0; a < mu1.size(); ++a) {
        auto it = index.find(mu1.points()[a].key());
        if (it == index.end()) {
            if (mu1.weights()[a] > 0.0) {
                throw infeasible_error("sinkhorn: target atom " + std::to_string(a) +
                                       " lies outside the kernel's target support");
            }
            continue;
        }
        w[it->second] += mu1.weights()[a];
    }
    return w;
}

double l1_error(const std::vector<double>& got, const std::vector<double>& want) {
    StableSum s;
    for (std::size_t i = 0; i < got.size(); ++i) s.add(std::abs(got[i] - want[i]));
    return s.total();
}

}  // namespace

SolveReport sinkhorn(const GibbsKernel& kernel, const DiscreteMeasure& mu1_target, double tol,
                     int max_iter, const Potentials* warm) {
    const std::size_t n = kernel.source_support.size();
    const std::size_t m = kernel.target_support.size();
    const std::vector<double>& mu0w = kernel.mu0.weights();
    const std::vector<double> mu1w = target_weights_on_support(mu1_target, kernel);

    // Structural feasibility: every positive target atom reachable from some
    // positive source mass, and symmetrically for the sources.
    for (std::size_t j = 0; j < m; ++j) {
        if (mu1w[j] <= 0.0) continue;
        bool reachable = false;
        for (std::size_t i = 0; i < n && !reachable; ++i) {
            reachable = mu0w[i] > 0.0 && kernel.log_rho(i, j) != -kInf;
        }
        if (!reachable) {
            throw infeasible_error("sinkhorn: target atom " + std::to_string(j) +
                                   " is unreachable from every positive source atom");
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (mu0w[i] <= 0.0) continue;
        bool can_ship = false;
        for (std::size_t j = 0; j < m && !can_ship; ++j) {
            can_ship = mu1w[j] > 0.0 && kernel.log_rho(i, j) != -kInf;
        }
        if (!can_ship) {
            throw infeasible_error("sinkhorn: source atom " + std::to_string(i) +
                                   " cannot reach any positive target atom");
        }
    }

    // A = log mu0_i + log_rho_ij, the kernel joint in log scale.
    Matrix A(n, m);
    std::vector<double> log_mu0(n), log_mu1(m);
    for (std::size_t i = 0; i < n; ++i) log_mu0[i] = mu0w[i] > 0.0 ? std::log(mu0w[i]) : -kInf;
    for (std::size_t j = 0; j < m; ++j) log_mu1[j] = mu1w[j] > 0.0 ? std::log(mu1w[j]) : -kInf;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            A(i, j) = log_mu0[i] == -kInf ? -kInf : log_mu0[i] + kernel.log_rho(i, j);
        }
    }

    std::vector<double> u(n, 0.0), v(m, 0.0);
    if (warm) {
        if (warm->u.size() != n || warm->v.size() != m) {
            throw std::invalid_argument("sinkhorn: warm-start potential size mismatch");
        }
        u = warm->u;
        v = warm->v;
    }

    std::vector<double> row_terms(m), col_terms(n);
    std::vector<double> row_mass(n), col_mass(m);
    auto marginal_error = [&]() {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) row_terms[j] = u[i] + A(i, j) + v[j];
            const double lse = log_sum_exp(row_terms);
            row_mass[i] = lse == -kInf ? 0.0 : std::exp(lse);
        }
        for (std::size_t j = 0; j < m; ++j) {
            for (std::size_t i = 0; i < n; ++i) col_terms[i] = u[i] + A(i, j) + v[j];
            const double lse = log_sum_exp(col_terms);
            col_mass[j] = lse == -kInf ? 0.0 : std::exp(lse);
        }
        return std::max(l1_error(row_mass, mu0w), l1_error(col_mass, mu1w));
    };

    int iterations = 0;
    double err = marginal_error();
    while (err > tol && iterations < max_iter) {
        // u-step: match the source marginal.
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) row_terms[j] = A(i, j) + v[j];
            u[i] = log_mu0[i] == -kInf ? -kInf : log_mu0[i] - log_sum_exp(row_terms);
        }
        // v-step: match the target marginal.
        for (std::size_t j = 0; j < m; ++j) {
            for (std::size_t i = 0; i < n; ++i) col_terms[i] = A(i, j) + u[i];
            v[j] = log_mu1[j] == -kInf ? -kInf : log_mu1[j] - log_sum_exp(col_terms);
        }
        ++iterations;
        err = marginal_error();
    }

    // Fold the residual normalization into u so the coupling sums to 1
    // exactly; the Gibbs factorization is preserved.
    std::vector<double> w(n * m);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const double lg = u[i] + A(i, j) + v[j];
            w[i * m + j] = lg == -kInf ? 0.0 : std::exp(lg);
        }
    }
    const double total = stable_sum(w);
    if (!(total > 0.0) || !std::isfinite(total)) {
        throw std::runtime_error("sinkhorn: coupling mass degenerated");
    }
    const double log_total = std::log(total);
    for (std::size_t i = 0; i < n; ++i) {
        if (u[i] != -kInf) u[i] -= log_total;
    }
    for (double& x : w) x /= total;
    {
        StableSum rest;
        for (std::size_t idx = 0; idx + 1 < w.size(); ++idx) rest.add(w[idx]);
        w.back() = std::max(0.0, 1.0 - rest.total());
    }

    SolveReport report{
        Coupling(kernel.source_support, kernel.target_support, std::move(w)),
        Potentials{std::move(u), std::move(v)},
        iterations,
        0.0,
        0.0,
        0.0,
        err <= tol,
        kernel.k,
    };

    // Recompute the error on the delivered coupling.
    for (std::size_t i = 0; i < n; ++i) {
        StableSum s;
        for (std::size_t j = 0; j < m; ++j) s.add(report.coupling.weight(i, j));
        row_mass[i] = s.total();
    }
    for (std::size_t j = 0; j < m; ++j) {
        StableSum s;
        for (std::size_t i = 0; i < n; ++i) s.add(report.coupling.weight(i, j));
        col_mass[j] = s.total();
    }
    report.marginal_error = std::max(l1_error(row_mass, mu0w), l1_error(col_mass, mu1w));
    report.converged = report.marginal_error <= tol;

    report.value = entropic_value(report.coupling, kernel);
    StableSum zshift;
    for (std::size_t i = 0; i < n; ++i) {
        if (row_mass[i] > 0.0) zshift.add(row_mass[i] * kernel.log_z[i]);
    }
    report.value_penalized = report.value - zshift.total() / double(kernel.k);
    return report;
}

DiscreteMeasure moving_constraint(const DiscreteMeasure& mu1, const GibbsKernel& kernel) {
    const std::size_t n = kernel.source_support.size();
    const std::size_t m = kernel.target_support.size();
    const std::vector<double>& mu0w = kernel.mu0.weights();

    std::vector<char> reachable(m, 0);
    bool any = false;
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            if (mu0w[i] > 0.0 && kernel.log_rho(i, j) != -kInf) {
                reachable[j] = 1;
                any = true;
                break;
            }
        }
    }
    if (!any) throw std::runtime_error("moving_constraint: no reachable target point");

    std::map<std::string, std::size_t> index;
    for (std::size_t j = 0; j < m; ++j) index.emplace(kernel.target_support[j].key(), j);

    bool already_supported = true;
    for (std::size_t a = 0; a < mu1.size(); ++a) {
        auto it = index.find(mu1.points()[a].key());
        if (it == index.end() || !reachable[it->second]) {
            already_supported = false;
            break;
        }
    }
    if (already_supported) return mu1;

    std::vector<double> w(m, 0.0);
    for (std::size_t a = 0; a < mu1.size(); ++a) {
        const Point& p = mu1.points()[a];
        std::size_t best = SIZE_MAX;
        double best_d = kInf;
        for (std::size_t j = 0; j < m; ++j) {
            if (!reachable[j]) continue;
            const double d = distance(p, kernel.target_support[j]);
            if (d < best_d) {
                best_d = d;
                best = j;
            }
        }
        w[best] += mu1.weights()[a];
    }
    std::vector<Point> pts;
    std::vector<double> weights;
    for (std::size_t j = 0; j < m; ++j) {
        if (w[j] > 0.0) {
            pts.push_back(kernel.target_support[j]);
            weights.push_back(w[j]);
        }
    }
    return DiscreteMeasure(std::move(pts), std::move(weights));
}

double entropic_value(const Coupling& pi, const GibbsKernel& kernel) {
    const std::size_t n = kernel.source_support.size();
    const std::size_t m = kernel.target_support.size();
    if (pi.source_size() != n || pi.target_size() != m) {
        throw std::invalid_argument("entropic_value: coupling shape mismatch");
    }
    std::vector<double> log_joint(n * m);
    for (std::size_t i = 0; i < n; ++i) {
        const double log_mu0 =
            kernel.mu0.weights()[i] > 0.0 ? std::log(kernel.mu0.weights()[i]) : -kInf;
        for (std::size_t j = 0; j < m; ++j) {
            log_joint[i * m + j] = log_mu0 == -kInf ? -kInf : log_mu0 + kernel.log_rho(i, j);
        }
    }
    return relative_entropy_log_ref(pi.weights(), log_joint) / double(kernel.k);
}

namespace {

// Oracle plans live on mu1^k's own support; widen them back onto the
// kernel's full target support for TV comparisons with solver couplings.
Coupling expand_plan_columns(const Coupling& plan, const std::vector<Point>& target_support) {
    std::map<std::string, std::size_t> index;
    for (std::size_t j = 0; j < target_support.size(); ++j) {
        index.emplace(target_support[j].key(), j);
    }
    const std::size_t n = plan.source_size(), m = target_support.size();
    std::vector<double> w(n * m, 0.0);
    for (std::size_t jj = 0; jj < plan.target_size(); ++jj) {
        const auto it = index.find(plan.target_support()[jj].key());
        if (it == index.end()) throw std::logic_error("expand_plan_columns: unknown target atom");
        for (std::size_t i = 0; i < n; ++i) w[i * m + it->second] = plan.weight(i, jj);
    }
    return Coupling(plan.source_support(), target_support, std::move(w));
}

// Columns of the full cost matrix restricted to mu1k's atoms.
Matrix select_cost_columns(const Matrix& cost, const std::vector<Point>& target_support,
                           const DiscreteMeasure& mu1k) {
    std::map<std::string, std::size_t> index;
    for (std::size_t j = 0; j < target_support.size(); ++j) {
        index.emplace(target_support[j].key(), j);
    }
    Matrix sub(cost.rows(), mu1k.size());
    for (std::size_t jj = 0; jj < mu1k.size(); ++jj) {
        const auto it = index.find(mu1k.points()[jj].key());
        if (it == index.end()) throw std::logic_error("select_cost_columns: atom off support");
        for (std::size_t i = 0; i < cost.rows(); ++i) sub(i, jj) = cost(i, it->second);
    }
    return sub;
}

}  // namespace

AnnealReport anneal(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1, const Matrix& cost,
                    const DiscreteMeasure& r, const std::vector<int>& schedule, double tol,
                    int max_iter, bool with_oracle) {
    if (schedule.empty()) throw std::invalid_argument("anneal: empty schedule");
    for (std::size_t s = 1; s < schedule.size(); ++s) {
        if (schedule[s] <= schedule[s - 1]) {
            throw std::invalid_argument("anneal: schedule must be strictly increasing");
        }
    }

    // Reachability is k-independent, so mu1^k and the oracle are fixed along
    // the schedule. A broken instance fails every row the same way; report
    // it per row instead of aborting the schedule.
    std::optional<GibbsKernel> first;
    std::optional<DiscreteMeasure> mu1k;
    std::string preamble_error;
    bool preamble_infeasible = false;
    try {
        first = build_kernel(mu0, r, cost, schedule.front());
        mu1k = moving_constraint(mu1, *first);
    } catch (const infeasible_error& e) {
        preamble_error = e.what();
        preamble_infeasible = true;
    } catch (const std::exception& e) {
        preamble_error = e.what();
    }
    if (!preamble_error.empty()) {
        AnnealReport failed{{}, std::nullopt, mu1};
        for (int k : schedule) {
            AnnealRow row;
            row.k = k;
            row.error = preamble_error;
            row.infeasible = preamble_infeasible;
            failed.rows.push_back(std::move(row));
        }
        return failed;
    }

    std::optional<OracleResult> oracle;
    std::optional<Coupling> oracle_plan_full;
    if (with_oracle) {
        oracle = lp_solve(mu0, *mu1k, select_cost_columns(cost, first->target_support, *mu1k));
        if (oracle->unique && oracle->plan) {
            oracle_plan_full = expand_plan_columns(*oracle->plan, first->target_support);
        }
    }

    AnnealReport report{{}, std::nullopt, *mu1k};
    if (oracle) report.oracle_value = oracle->value;

    std::optional<Potentials> prev;
    int prev_k = 0;
    for (int k : schedule) {
        AnnealRow row;
        row.k = k;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            const GibbsKernel kernel = k == first->k ? *first : build_kernel(mu0, r, cost, k);
            std::optional<Potentials> warm;
            if (prev) {
                warm = *prev;
                const double scale = double(k) / double(prev_k);
                for (double& x : warm->u) {
                    if (x != -kInf) x *= scale;
                }
                for (double& x : warm->v) {
                    if (x != -kInf) x *= scale;
                }
            }
            SolveReport solve = sinkhorn(kernel, *mu1k, tol, max_iter, warm ? &*warm : nullptr);
            row.value = solve.value;
            row.value_penalized = solve.value_penalized;
            row.iterations = solve.iterations;
            row.converged = solve.converged;
            if (oracle) {
                row.gap = solve.value_penalized - oracle->value;
                if (oracle_plan_full) {
                    row.tv = coupling_tv(solve.coupling, *oracle_plan_full);
                }
            }
            prev = solve.potentials;
            prev_k = k;
            row.coupling = std::move(solve.coupling);
        } catch (const infeasible_error& e) {
            row.error = e.what();
            row.infeasible = true;
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                          .count();
        report.rows.push_back(std::move(row));
    }
    return report;
}

}  // namespace eot
