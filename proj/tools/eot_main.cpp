// Command-line front end: cost evaluation, single solves, annealed schedules,
// the exact oracle, interpolation flows, and the full experiment suite.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "eot/costs.hpp"
#include "eot/experiments.hpp"
#include "eot/measures.hpp"
#include "eot/oracle.hpp"
#include "eot/paths.hpp"
#include "eot/solver.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInfeasible = 2;
constexpr int kExitUnconverged = 3;
constexpr int kExitConfig = 4;

eot::DiscreteMeasure load_measure(const std::string& path) {
    return eot::DiscreteMeasure::from_json(nlohmann::json::parse(eot::read_text_file(path)));
}

// Inline JSON when the argument starts with '{', otherwise a file path.
std::pair<nlohmann::json, std::filesystem::path> load_cost_spec(const std::string& arg) {
    if (!arg.empty() && arg.front() == '{') {
        return {nlohmann::json::parse(arg), std::filesystem::current_path()};
    }
    const std::filesystem::path p(arg);
    return {nlohmann::json::parse(eot::read_text_file(p)), p.parent_path()};
}

eot::DiscreteMeasure resolve_reference(const std::string& ref, const eot::DiscreteMeasure& mu1) {
    if (ref == "uniform") return eot::DiscreteMeasure::uniform(mu1.points());
    return load_measure(ref);
}

std::vector<int> parse_schedule(const std::string& s) {
    std::vector<int> out;
    std::size_t pos = 0;
    while (pos < s.size()) {
        std::size_t next = s.find(',', pos);
        if (next == std::string::npos) next = s.size();
        out.push_back(std::stoi(s.substr(pos, next - pos)));
        pos = next + 1;
    }
    return out;
}

nlohmann::json json_double(double x) {
    if (std::isfinite(x)) return x;
    return eot::format_double(x);
}

nlohmann::json potentials_json(const eot::Potentials& p) {
    nlohmann::json u = nlohmann::json::array(), v = nlohmann::json::array();
    for (double x : p.u) u.push_back(json_double(x));
    for (double x : p.v) v.push_back(json_double(x));
    return {{"u", u}, {"v", v}};
}

std::string optional_cell(const std::optional<double>& x) {
    return x ? eot::format_double(*x) : std::string("na");
}

struct GlobalOpts {
    std::optional<std::string> config;
    bool deterministic = false;
    std::optional<std::string> out_dir;
};

eot::ExperimentConfig config_for(const GlobalOpts& g) {
    eot::ExperimentConfig cfg =
        g.config ? eot::ExperimentConfig::from_file(*g.config) : eot::ExperimentConfig::canonical();
    if (g.deterministic) cfg.deterministic = true;
    if (g.out_dir) cfg.out_dir = *g.out_dir;
    return cfg;
}

int run_solve(const std::string& mu0_path, const std::string& mu1_path, const std::string& cost_arg,
              int k, const std::string& ref, double tol, int max_iter, const std::string& out) {
    const eot::DiscreteMeasure mu0 = load_measure(mu0_path);
    const eot::DiscreteMeasure mu1 = load_measure(mu1_path);
    const auto [cost_json, base] = load_cost_spec(cost_arg);
    const eot::CostFunction cf = eot::cost_from_spec(cost_json, base);
    const eot::DiscreteMeasure r = resolve_reference(ref, mu1);
    const eot::Matrix cmat = eot::cost_matrix(cf, mu0.points(), r.points());
    const eot::GibbsKernel kernel = eot::build_kernel(mu0, r, cmat, k);
    const eot::SolveReport report = eot::sinkhorn(kernel, mu1, tol, max_iter);

    nlohmann::json j = {
        {"k", report.k},
        {"value", json_double(report.value)},
        {"value_penalized", json_double(report.value_penalized)},
        {"iterations", report.iterations},
        {"marginal_error", json_double(report.marginal_error)},
        {"converged", report.converged},
        {"coupling", report.coupling.to_json()},
        {"potentials", potentials_json(report.potentials)},
    };
    eot::write_text_file(out, j.dump(2) + "\n");
    if (!report.converged) {
        std::cerr << "solve: not converged after " << report.iterations << " iterations\n";
        return kExitUnconverged;
    }
    return kExitOk;
}

int run_anneal(const GlobalOpts& g, const std::string& mu0_path, const std::string& mu1_path,
               const std::string& cost_arg, const std::string& schedule_str, const std::string& ref,
               double tol, int max_iter, bool with_oracle) {
    const eot::DiscreteMeasure mu0 = load_measure(mu0_path);
    const eot::DiscreteMeasure mu1 = load_measure(mu1_path);
    const auto [cost_json, base] = load_cost_spec(cost_arg);
    const eot::CostFunction cf = eot::cost_from_spec(cost_json, base);
    const eot::DiscreteMeasure r = resolve_reference(ref, mu1);
    const eot::Matrix cmat = eot::cost_matrix(cf, mu0.points(), r.points());
    const std::vector<int> schedule = parse_schedule(schedule_str);

    const eot::AnnealReport report =
        eot::anneal(mu0, mu1, cmat, r, schedule, tol, max_iter, with_oracle);

    std::string csv = "k,value,gap,tv,iters\n";
    bool any_infeasible = false, any_unconverged = false;
    for (const auto& row : report.rows) {
        csv += std::to_string(row.k) + ",";
        csv += (row.error.empty() ? eot::format_double(row.value) : std::string("na")) + ",";
        csv += optional_cell(row.gap) + "," + optional_cell(row.tv) + ",";
        csv += std::to_string(row.iterations) + "\n";
        any_infeasible = any_infeasible || row.infeasible;
        any_unconverged = any_unconverged || (!row.converged && row.error.empty()) ||
                          (!row.error.empty() && !row.infeasible);
        if (!row.error.empty()) std::cerr << "anneal k=" << row.k << ": " << row.error << "\n";
    }
    const std::filesystem::path out_dir = g.out_dir ? *g.out_dir : ".";
    std::filesystem::create_directories(out_dir);
    eot::write_text_file(out_dir / "anneal.csv", csv);
    if (any_infeasible) return kExitInfeasible;
    if (any_unconverged) return kExitUnconverged;
    return kExitOk;
}

int run_oracle(const std::string& mu0_path, const std::string& mu1_path,
               const std::string& cost_arg, const std::string& out) {
    const eot::DiscreteMeasure mu0 = load_measure(mu0_path);
    const eot::DiscreteMeasure mu1 = load_measure(mu1_path);
    const auto [cost_json, base] = load_cost_spec(cost_arg);
    const eot::CostFunction cf = eot::cost_from_spec(cost_json, base);
    const eot::Matrix cmat = eot::cost_matrix(cf, mu0.points(), mu1.points());
    const eot::OracleResult result = eot::lp_solve(mu0, mu1, cmat);

    nlohmann::json j = {
        {"value", json_double(result.value)},
        {"unique", result.unique},
        {"plan", result.plan ? result.plan->to_json() : nlohmann::json(nullptr)},
    };
    eot::write_text_file(out, j.dump(2) + "\n");
    return result.plan ? kExitOk : kExitInfeasible;
}

int run_cost_cmd(const std::string& cost_arg, const std::string& x_csv, const std::string& y_csv,
                 const std::string& mu0_path, const std::string& mu1_path, const std::string& out) {
    const auto [cost_json, base] = load_cost_spec(cost_arg);
    const eot::CostFunction cf = eot::cost_from_spec(cost_json, base);
    if (!mu0_path.empty() && !mu1_path.empty()) {
        const eot::DiscreteMeasure mu0 = load_measure(mu0_path);
        const eot::DiscreteMeasure mu1 = load_measure(mu1_path);
        const eot::Matrix m = eot::cost_matrix(cf, mu0.points(), mu1.points());
        std::string csv;
        for (std::size_t i = 0; i < m.rows(); ++i) {
            for (std::size_t j = 0; j < m.cols(); ++j) {
                csv += (j ? "," : "") + eot::format_double(m(i, j));
            }
            csv += "\n";
        }
        if (out.empty()) {
            std::cout << csv;
        } else {
            eot::write_text_file(out, csv);
        }
        return kExitOk;
    }
    if (x_csv.empty() || y_csv.empty()) {
        throw eot::config_error("cost: need either --x/--y or --mu0/--mu1");
    }
    auto parse_point = [](const std::string& s) {
        std::vector<double> coords;
        std::size_t pos = 0;
        while (pos < s.size()) {
            std::size_t next = s.find(',', pos);
            if (next == std::string::npos) next = s.size();
            coords.push_back(std::stod(s.substr(pos, next - pos)));
            pos = next + 1;
        }
        return eot::Point(coords);
    };
    std::cout << eot::format_double(cf(parse_point(x_csv), parse_point(y_csv))) << "\n";
    return kExitOk;
}

int run_suite(const GlobalOpts& g) {
    const eot::ExperimentConfig cfg = config_for(g);
    std::filesystem::create_directories(cfg.out_dir);

    int exit_code = kExitOk;
    auto note = [&](const std::string& name, bool ok) {
        std::cout << (ok ? "ok   " : "FAIL ") << name << "\n";
        if (!ok && exit_code == kExitOk) exit_code = kExitUnconverged;
    };

    const eot::CostSuiteReport costs = eot::run_cost_suite(cfg.out_dir, cfg.deterministic);
    note("cost_suite", costs.all_pass);

    const eot::ConvergenceTable values = eot::run_value_convergence(cfg);
    bool values_ok = !values.rows.empty();
    for (const auto& row : values.rows) values_ok = values_ok && row.error.empty();
    note("value_convergence", values_ok);

    const eot::ConvergenceTable plans = eot::run_plan_convergence(cfg);
    bool plans_ok = !plans.rows.empty();
    for (const auto& row : plans.rows) plans_ok = plans_ok && row.error.empty();
    note("plan_convergence", plans_ok);

    if (cfg.mu0.dim() == 1 && cfg.cost_spec.value("kind", "") == "cramer" &&
        cfg.cost_spec.value("law", "") == "normal") {
        const eot::ConvergenceTable interp = eot::run_interpolation(cfg);
        bool interp_ok = !interp.rows.empty();
        for (const auto& row : interp.rows) interp_ok = interp_ok && row.error.empty();
        note("interpolation", interp_ok);
    } else {
        std::cout << "skip interpolation (needs 1-D half-quadratic instance)\n";
    }
    return exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"entropic optimal transport in the zero-noise limit"};
    app.require_subcommand(1);

    GlobalOpts global;
    std::string config_path, out_dir_path;
    app.add_option("--config", config_path, "experiment config JSON");
    app.add_flag("--deterministic", global.deterministic, "zero wall-time columns in CSVs");
    app.add_option("--out-dir", out_dir_path, "output directory");

    std::string mu0_path, mu1_path, cost_arg, ref = "uniform";
    std::string schedule_str = "4,16,64,256,1024,4096";
    std::string x_csv, y_csv, oracle_flag = "on";
    std::string cost_out, solve_out = "report.json", oracle_out = "oracle.json";
    double tol = 1e-9;
    int max_iter = 50000;
    int k = 1;

    CLI::App* cost_cmd = app.add_subcommand("cost", "evaluate a cost spec at points");
    cost_cmd->add_option("--cost", cost_arg, "cost spec (inline JSON or file)")->required();
    cost_cmd->add_option("--x", x_csv, "source point, comma-separated coordinates");
    cost_cmd->add_option("--y", y_csv, "target point, comma-separated coordinates");
    cost_cmd->add_option("--mu0", mu0_path, "source measure file (matrix mode)");
    cost_cmd->add_option("--mu1", mu1_path, "target measure file (matrix mode)");
    cost_cmd->add_option("--out", cost_out, "write matrix CSV here instead of stdout");

    CLI::App* solve_cmd = app.add_subcommand("solve", "single entropic solve");
    solve_cmd->add_option("--mu0", mu0_path)->required();
    solve_cmd->add_option("--mu1", mu1_path)->required();
    solve_cmd->add_option("--cost", cost_arg)->required();
    solve_cmd->add_option("--k", k)->required();
    solve_cmd->add_option("--ref", ref, "uniform | measure file");
    solve_cmd->add_option("--tol", tol);
    solve_cmd->add_option("--max-iter", max_iter);
    solve_cmd->add_option("--out", solve_out, "report JSON path");

    CLI::App* anneal_cmd = app.add_subcommand("anneal", "solve an increasing k schedule");
    anneal_cmd->add_option("--mu0", mu0_path)->required();
    anneal_cmd->add_option("--mu1", mu1_path)->required();
    anneal_cmd->add_option("--cost", cost_arg)->required();
    anneal_cmd->add_option("--schedule", schedule_str, "comma-separated increasing k values");
    anneal_cmd->add_option("--ref", ref, "uniform | measure file");
    anneal_cmd->add_option("--tol", tol);
    anneal_cmd->add_option("--max-iter", max_iter);
    anneal_cmd->add_option("--oracle", oracle_flag, "on | off");

    CLI::App* oracle_cmd = app.add_subcommand("oracle", "exact transport solve");
    oracle_cmd->add_option("--mu0", mu0_path)->required();
    oracle_cmd->add_option("--mu1", mu1_path)->required();
    oracle_cmd->add_option("--cost", cost_arg)->required();
    oracle_cmd->add_option("--out", oracle_out, "result JSON path");

    CLI::App* interp_cmd = app.add_subcommand("interpolate", "bridge-mixture flow experiment");
    (void)interp_cmd;

    CLI::App* suite_cmd = app.add_subcommand("suite", "run all experiments");
    (void)suite_cmd;

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    if (!config_path.empty()) global.config = config_path;
    if (!out_dir_path.empty()) global.out_dir = out_dir_path;

    try {
        if (cost_cmd->parsed()) {
            return run_cost_cmd(cost_arg, x_csv, y_csv, mu0_path, mu1_path, cost_out);
        }
        if (solve_cmd->parsed()) {
            return run_solve(mu0_path, mu1_path, cost_arg, k, ref, tol, max_iter, solve_out);
        }
        if (anneal_cmd->parsed()) {
            return run_anneal(global, mu0_path, mu1_path, cost_arg, schedule_str, ref, tol,
                              max_iter, oracle_flag != "off");
        }
        if (oracle_cmd->parsed()) {
            return run_oracle(mu0_path, mu1_path, cost_arg, oracle_out);
        }
        if (interp_cmd->parsed()) {
            const eot::ExperimentConfig cfg = config_for(global);
            const eot::ConvergenceTable table = eot::run_interpolation(cfg);
            bool ok = !table.rows.empty();
            for (const auto& row : table.rows) ok = ok && row.error.empty();
            return ok ? kExitOk : kExitUnconverged;
        }
        if (suite_cmd->parsed()) {
            return run_suite(global);
        }
    } catch (const eot::infeasible_error& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return kExitInfeasible;
    } catch (const eot::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitConfig;
}
