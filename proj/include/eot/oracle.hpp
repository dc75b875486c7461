#ifndef EOT_ORACLE_HPP
#define EOT_ORACLE_HPP

#include <functional>
#include <optional>
#include <vector>

#include "eot/measures.hpp"
#include "eot/numerics.hpp"

namespace eot {

struct OracleResult {
    std::optional<Coupling> plan;  // empty when no finite-cost plan exists
    double value = kInf;
    bool unique = false;
    // Final simplex duals (phi, psi) with phi_i + psi_j <= c_ij on finite
    // cells; present for finite optima.
    std::optional<std::vector<double>> dual_u;
    std::optional<std::vector<double>> dual_v;
};

// Exact transportation LP: northwest-corner start, Dantzig entering rule,
// tree pivots. Infinite cost entries are forbidden cells (symbolic big-M);
// degeneracy is removed by a symbolic Charnes perturbation of the demands
// which is stripped from the final flows. The uniqueness flag is set only
// when every non-basic reduced cost exceeds 1e-10.
OracleResult lp_solve(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1, const Matrix& cost);

// 1-D quantile coupling by sorted mass sweeping, optimal for costs
// c(x, y) = h(y - x) with h convex.
OracleResult monotone_1d(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1,
                         const std::function<double(double)>& h);

// Optimal transport cost; +inf when only infinite-cost plans exist.
double tc_value(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1, const Matrix& cost);

}  // namespace eot

#endif
