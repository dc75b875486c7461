#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <sstream>

#include "eot/experiments.hpp"
#include "eot/paths.hpp"
#include "test_support.hpp"

using namespace eot;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("eot_exp_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

ExperimentConfig small_canonical(const std::filesystem::path& out, bool deterministic = true) {
    ExperimentConfig cfg = ExperimentConfig::canonical();
    cfg.schedule = {4, 16, 64};
    cfg.out_dir = out;
    cfg.deterministic = deterministic;
    return cfg;
}

}  // namespace

TEST_CASE("config parsing") {
    const ExperimentConfig cfg = ExperimentConfig::canonical();
    CHECK(cfg.mu0.size() == 2);
    CHECK(cfg.schedule.size() == 6);
    CHECK(cfg.times == std::vector<double>{0.5});
    CHECK(cfg.tol == 1e-9);

    nlohmann::json bad = {
        {"mu0", cfg.mu0.to_json()},
        {"mu1", cfg.mu1.to_json()},
        {"cost", {{"kind", "power"}, {"p", 2.0}}},
        {"schedule", {16, 4}},
    };
    CHECK_THROWS_AS((void)ExperimentConfig::from_json(bad, "."), config_error);
    bad["schedule"] = {4, 16};
    bad["times"] = {0.5, 1.5};
    CHECK_THROWS_AS((void)ExperimentConfig::from_json(bad, "."), config_error);

    // file-referenced measures resolve relative to the config directory
    const auto dir = fresh_dir("cfg");
    write_text_file(dir / "mu0.json", cfg.mu0.to_json().dump());
    nlohmann::json with_file = {
        {"mu0", {{"file", "mu0.json"}}},
        {"mu1", cfg.mu1.to_json()},
        {"cost", {{"kind", "cramer"}, {"law", "normal"}}},
        {"schedule", {4, 16}},
    };
    const ExperimentConfig loaded = ExperimentConfig::from_json(with_file, dir);
    CHECK(loaded.mu0.points()[1][0] == 1.0);
}

TEST_CASE("value convergence run and csv round trip") {
    const auto dir = fresh_dir("value");
    const ConvergenceTable table = run_value_convergence(small_canonical(dir));
    REQUIRE(table.rows.size() == 3);
    for (const auto& row : table.rows) {
        CHECK(row.error.empty());
        REQUIRE(row.gap.has_value());
        CHECK(*row.gap > 0.0);
    }
    CHECK(*table.rows.back().gap < *table.rows.front().gap);

    const std::string text = read_text_file(dir / "value_convergence.csv");
    CHECK(text.rfind("k,value,gap,tv,iters,wall_ms,error\n", 0) == 0);
    const ConvergenceTable parsed = ConvergenceTable::from_csv(text);
    CHECK(parsed.to_csv() == text);
    REQUIRE(parsed.rows.size() == 3);
    CHECK(parsed.rows[1].k == table.rows[1].k);
    CHECK(parsed.rows[1].value == table.rows[1].value);
    CHECK(*parsed.rows[1].gap == *table.rows[1].gap);
}

TEST_CASE("deterministic mode emits byte-identical csv") {
    const auto dir1 = fresh_dir("det1");
    const auto dir2 = fresh_dir("det2");
    run_value_convergence(small_canonical(dir1));
    run_value_convergence(small_canonical(dir2));
    CHECK(read_text_file(dir1 / "value_convergence.csv") ==
          read_text_file(dir2 / "value_convergence.csv"));

    run_plan_convergence(small_canonical(dir1));
    run_plan_convergence(small_canonical(dir2));
    CHECK(read_text_file(dir1 / "plan_convergence.csv") ==
          read_text_file(dir2 / "plan_convergence.csv"));
}

TEST_CASE("plan convergence trend") {
    const auto dir = fresh_dir("plan");
    ExperimentConfig cfg = small_canonical(dir);
    cfg.schedule = {4, 16, 64, 256};
    const ConvergenceTable table = run_plan_convergence(cfg);
    REQUIRE(table.rows.size() == 4);
    for (const auto& row : table.rows) REQUIRE(row.tv.has_value());
    REQUIRE(table.tv_decreasing.has_value());
    CHECK(*table.tv_decreasing);
}

TEST_CASE("interpolation run emits flow csvs") {
    const auto dir = fresh_dir("interp");
    ExperimentConfig cfg = small_canonical(dir);
    cfg.schedule = {4, 16};
    cfg.times = {0.0, 0.5, 1.0};
    cfg.grid_points = 128;
    const ConvergenceTable table = run_interpolation(cfg);
    REQUIRE(table.rows.size() == 2);
    for (const auto& row : table.rows) {
        REQUIRE(row.w1.size() == 3);
        REQUIRE(row.tv.has_value());
        // endpoints pin to the coupling marginals, so the gap is at most the
        // plan TV plus the solver tolerance, spread over the support span
        const double endpoint_bound = 10.0 * (*row.tv + cfg.tol);
        CHECK(row.w1[0] <= endpoint_bound);
        CHECK(row.w1[2] <= endpoint_bound);
        CHECK(row.w1[1] < 1.0);
    }
    CHECK(table.rows[1].w1[1] < table.rows[0].w1[1]);
    CHECK(std::filesystem::exists(dir / "flow_k4_t0.5.csv"));
    CHECK(std::filesystem::exists(dir / "flow_k16_t0.5.csv"));
    const std::string flow = read_text_file(dir / "flow_k4_t0.5.csv");
    CHECK(flow.rfind("t,grid_point,density_weight\n", 0) == 0);

    // flow rows re-parse to the exact in-memory doubles
    {
        std::vector<Point> grid_pts;
        std::vector<double> weights;
        std::stringstream ss(flow);
        std::string line;
        std::getline(ss, line);  // header
        while (std::getline(ss, line)) {
            if (line.empty()) continue;
            double t, g, w;
            REQUIRE(std::sscanf(line.c_str(), "%lf,%lf,%lf", &t, &g, &w) == 3);
            CHECK(t == 0.5);
            grid_pts.push_back(Point{g});
            weights.push_back(w);
        }
        REQUIRE(grid_pts.size() == cfg.grid_points);
        // recompute the same flow; deterministic, so doubles match exactly
        const Matrix cmat = cfg.cost_matrix_on_supports();
        const AnnealReport rep = anneal(cfg.mu0, cfg.mu1, cmat, cfg.effective_reference(), {4},
                                        cfg.tol, cfg.max_iter, true);
        REQUIRE(rep.rows[0].coupling.has_value());
        const auto fresh_grid = default_flow_grid(*rep.rows[0].coupling, 4, cfg.grid_points);
        const FlowResult fresh = mixture_flow(*rep.rows[0].coupling, 4, 0.5, fresh_grid);
        for (std::size_t l = 0; l < grid_pts.size(); ++l) {
            CHECK(grid_pts[l][0] == fresh.measure.points()[l][0]);
            CHECK(weights[l] == fresh.measure.weights()[l]);
        }
    }

    // a non-quadratic cost is rejected up front
    ExperimentConfig wrong = cfg;
    wrong.cost_spec = {{"kind", "power"}, {"p", 2.0}};
    CHECK_THROWS_AS((void)run_interpolation(wrong), config_error);
}

TEST_CASE("broken instances produce row-level error records") {
    const auto dir = fresh_dir("broken");
    ExperimentConfig cfg = small_canonical(dir);
    // a cost table with no finite entries makes every kernel row unreachable
    write_text_file(dir / "allinf.csv", "inf,inf\ninf,inf\n");
    cfg.cost_spec = {{"kind", "table"}, {"path", "allinf.csv"}};
    cfg.cost = cost_from_spec(cfg.cost_spec, dir);
    const ConvergenceTable table = run_value_convergence(cfg);
    REQUIRE(table.rows.size() == cfg.schedule.size());
    for (const auto& row : table.rows) {
        CHECK_FALSE(row.error.empty());
    }
    // rows round-trip through the csv with the error text preserved
    const ConvergenceTable parsed =
        ConvergenceTable::from_csv(read_text_file(dir / "value_convergence.csv"));
    CHECK_FALSE(parsed.rows[0].error.empty());
}

TEST_CASE("non-unique oracle marks the tv column not applicable") {
    const auto dir = fresh_dir("nonunique");
    ExperimentConfig cfg = small_canonical(dir);
    // constant costs make every plan optimal
    write_text_file(dir / "flat.csv", "1.0,1.0\n1.0,1.0\n");
    cfg.cost_spec = {{"kind", "table"}, {"path", "flat.csv"}};
    cfg.cost = cost_from_spec(cfg.cost_spec, dir);
    cfg.schedule = {4, 16};
    const ConvergenceTable table = run_value_convergence(cfg);
    REQUIRE(table.rows.size() == 2);
    for (const auto& row : table.rows) {
        CHECK(row.error.empty());
        CHECK_FALSE(row.tv.has_value());
        REQUIRE(row.gap.has_value());
    }
    const std::string csv = read_text_file(dir / "value_convergence.csv");
    CHECK(csv.find(",na,") != std::string::npos);
    CHECK_FALSE(table.tv_decreasing.has_value());
}

TEST_CASE("cost suite passes") {
    const auto dir = fresh_dir("suite");
    const CostSuiteReport report = run_cost_suite(dir, true);
    CHECK(report.all_pass);
    CHECK(std::filesystem::exists(dir / "cost_suite.csv"));
    bool saw_catalog = false, saw_jensen = false, saw_twist = false;
    for (const auto& row : report.rows) {
        saw_catalog = saw_catalog || row.metric == "closed_vs_numerical_max_abs_err";
        saw_jensen = saw_jensen || row.metric == "jensen_max_violation";
        saw_twist = saw_twist || row.metric == "twisted_geodesic_vs_conjugate_err";
    }
    CHECK(saw_catalog);
    CHECK(saw_jensen);
    CHECK(saw_twist);
}
