#ifndef EOT_EXPERIMENTS_HPP
#define EOT_EXPERIMENTS_HPP

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "eot/costs.hpp"
#include "eot/measures.hpp"
#include "eot/oracle.hpp"
#include "eot/solver.hpp"

namespace eot {

class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

struct ExperimentConfig {
    DiscreteMeasure mu0;
    DiscreteMeasure mu1;
    nlohmann::json cost_spec;
    CostFunction cost;
    std::vector<int> schedule;
    std::optional<DiscreteMeasure> reference;  // default: uniform on mu1's support
    double tol = 1e-9;
    int max_iter = 50000;
    std::filesystem::path out_dir = ".";
    bool deterministic = false;
    std::vector<double> times = {0.5};
    std::size_t grid_points = 512;
    bool with_oracle = true;
    std::uint64_t perturb_seed = 20240914;

    // Single JSON document; file references resolve relative to its directory.
    static ExperimentConfig from_json(const nlohmann::json& j,
                                      const std::filesystem::path& base_dir);
    static ExperimentConfig from_file(const std::filesystem::path& path);

    // The fixed in-repo acceptance instance: uniform{0,1} -> uniform{2,3},
    // half-quadratic cost, uniform reference, schedule 4..4096.
    static ExperimentConfig canonical();

    DiscreteMeasure effective_reference() const;
    Matrix cost_matrix_on_supports() const;
};

struct ConvergenceRow {
    int k = 0;
    double value = kNaN;
    std::optional<double> gap;
    std::optional<double> tv;
    std::vector<double> w1;  // one entry per requested interpolation time
    int iterations = 0;
    double wall_ms = 0.0;
    std::string error;
};

struct ConvergenceTable {
    std::vector<double> times;  // labels for the w1 columns (may be empty)
    std::vector<ConvergenceRow> rows;
    bool deterministic = false;
    std::optional<bool> tv_decreasing;  // trend flag; set when >= 2 TV entries

    std::string to_csv() const;
    static ConvergenceTable from_csv(const std::string& text);
};

// Value-convergence experiment: per-k entropic value and gap to the exact
// transport cost. Writes value_convergence.csv under cfg.out_dir.
ConvergenceTable run_value_convergence(const ExperimentConfig& cfg);

// Plan-convergence experiment: per-k TV distance to the unique oracle plan,
// after a seeded cost perturbation of +delta*1e-7 forcing uniqueness. Writes
// plan_convergence.csv.
ConvergenceTable run_plan_convergence(const ExperimentConfig& cfg);

// Interpolation experiment (1-D, half-quadratic cost): per-k W1 distance at
// each requested time between the bridge-mixture flow of the entropic plan
// and the displacement interpolation of the exact plan. Writes
// interpolation.csv plus one flow CSV per (k, t).
ConvergenceTable run_interpolation(const ExperimentConfig& cfg);

struct CostSuiteRow {
    std::string name;
    std::string metric;
    double observed = 0.0;
    double bound = 0.0;
    bool pass = false;
};

struct CostSuiteReport {
    std::vector<CostSuiteRow> rows;
    bool all_pass = true;

    std::string to_csv() const;
};

// Closed-form vs numerical conjugate agreement on interior grids, action
// lower bounds over random polylines, and the twisted-geodesic consistency
// checks. Writes cost_suite.csv when out_dir is given.
CostSuiteReport run_cost_suite(const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                               bool deterministic = false);

// Seeded uniform(0,1) matrix used for the +1e-7 uniqueness perturbation.
Matrix perturbation_noise(std::size_t rows, std::size_t cols, std::uint64_t seed);

// Doubles print with 17 significant digits so re-parsing is exact.
std::string format_double(double x);
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace eot

#endif
