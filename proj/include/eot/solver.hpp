#ifndef EOT_SOLVER_HPP
#define EOT_SOLVER_HPP

#include <optional>
#include <string>
#include <vector>

#include "eot/measures.hpp"
#include "eot/numerics.hpp"

namespace eot {

// Structurally infeasible marginal constraints, detected before iterating;
// distinct from running out of iterations.
class infeasible_error : public std::runtime_error {
public:
    explicit infeasible_error(const std::string& what) : std::runtime_error(what) {}
};

// Reference coupling mu0(dx) rho^{k,x}(dy) in log form. Each row of log_rho
// is a probability in log scale: log rho^{k,x_i}(y_j) =
// -k c(x_i, y_j) + log r(y_j) - log Z_k(x_i), entries -inf exactly where the
// cost is infinite.
struct GibbsKernel {
    int k;
    std::vector<Point> source_support;
    std::vector<Point> target_support;
    Matrix log_rho;
    std::vector<double> log_z;  // per-row normalizer log Z_k(x_i)
    DiscreteMeasure mu0;
    DiscreteMeasure target_ref;
};

// Every row needs at least one finite cost against a positive reference
// weight; a fully unreachable source point is a construction error naming it.
GibbsKernel build_kernel(const DiscreteMeasure& mu0, const DiscreteMeasure& r, const Matrix& cost,
                         int k);

// Dual log-scalings of the iterative proportional fitting iteration.
struct Potentials {
    std::vector<double> u;
    std::vector<double> v;
};

struct SolveReport {
    Coupling coupling;
    Potentials potentials;
    int iterations;
    double marginal_error;  // max L1 error over the two marginals
    double value;           // (1/k) H(pi | kernel joint)
    // Normalizer-corrected value (1/k) H(pi | mu0 x r) + sum pi c; this is
    // the quantity comparable with the optimal transport cost.
    double value_penalized;
    bool converged;
    int k;
};

// Log-domain IPFP: alternating marginal-matching updates on (u, v) until the
// max marginal L1 error drops below tol. Returns the coupling
// pi_ij = exp(u_i + log mu0_i + log_rho_ij + v_j).
SolveReport sinkhorn(const GibbsKernel& kernel, const DiscreteMeasure& mu1_target,
                     double tol = 1e-9, int max_iter = 50000,
                     const Potentials* warm = nullptr);

// Relocates each target atom to the nearest reachable point of the kernel's
// target support (ties to the lowest index); returns mu1 unchanged when it
// already sits on reachable support.
DiscreteMeasure moving_constraint(const DiscreteMeasure& mu1, const GibbsKernel& kernel);

// (1/k) H(pi | mu0 x rho^{k,.}) evaluated against the log-form reference;
// +inf on absolute-continuity failure.
double entropic_value(const Coupling& pi, const GibbsKernel& kernel);

struct AnnealRow {
    int k = 0;
    double value = kNaN;
    double value_penalized = kNaN;
    std::optional<double> gap;  // value_penalized - oracle T_c(mu0, mu1^k)
    std::optional<double> tv;   // TV to the oracle plan when it is unique
    int iterations = 0;
    bool converged = false;
    std::string error;  // nonempty when this row failed
    bool infeasible = false;
    double wall_ms = 0.0;
    std::optional<Coupling> coupling;
};

struct AnnealReport {
    std::vector<AnnealRow> rows;
    std::optional<double> oracle_value;
    DiscreteMeasure mu1_moved;
};

// Solves the schedule of increasing k with warm-started potentials (scaled
// by k_new/k_old across stages). Row-level failures are recorded and the
// remaining rows still run.
AnnealReport anneal(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1, const Matrix& cost,
                    const DiscreteMeasure& r, const std::vector<int>& schedule, double tol = 1e-9,
                    int max_iter = 50000, bool with_oracle = true);

}  // namespace eot

#endif
