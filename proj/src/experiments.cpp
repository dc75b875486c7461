#include "eot/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "eot/paths.hpp"

namespace eot {

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (x == kInf) return "inf";
    if (x == -kInf) return "-inf";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace {

std::string format_time_label(double t) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", t);
    return buf;
}

double parse_double_token(const std::string& tok) {
    if (tok == "nan") return kNaN;
    if (tok == "inf") return kInf;
    if (tok == "-inf") return -kInf;
    return std::strtod(tok.c_str(), nullptr);
}

std::optional<double> parse_optional_token(const std::string& tok) {
    if (tok == "na") return std::nullopt;
    return parse_double_token(tok);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

std::string sanitize_error(std::string msg) {
    for (char& ch : msg) {
        if (ch == ',' || ch == '\n' || ch == '\r') ch = ';';
    }
    return msg;
}

DiscreteMeasure measure_from_spec(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    if (j.is_object() && j.contains("file")) {
        const auto path = base_dir / j.at("file").get<std::string>();
        return DiscreteMeasure::from_json(nlohmann::json::parse(read_text_file(path)));
    }
    return DiscreteMeasure::from_json(j);
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j,
                                             const std::filesystem::path& base_dir) {
    try {
        const nlohmann::json cost_spec = j.at("cost");
        ExperimentConfig cfg{
            measure_from_spec(j.at("mu0"), base_dir),
            measure_from_spec(j.at("mu1"), base_dir),
            cost_spec,
            cost_from_spec(cost_spec, base_dir),
            j.at("schedule").get<std::vector<int>>(),
            std::nullopt,
        };
        if (cfg.schedule.empty()) throw config_error("config: schedule must be nonempty");
        for (std::size_t s = 1; s < cfg.schedule.size(); ++s) {
            if (cfg.schedule[s] <= cfg.schedule[s - 1]) {
                throw config_error("config: schedule must be strictly increasing");
            }
        }
        if (j.contains("reference") && !j.at("reference").is_string()) {
            cfg.reference = measure_from_spec(j.at("reference"), base_dir);
        } else if (j.contains("reference") && j.at("reference").get<std::string>() != "uniform") {
            throw config_error("config: reference must be \"uniform\", a measure, or a file ref");
        }
        if (j.contains("tol")) cfg.tol = j.at("tol").get<double>();
        if (j.contains("max_iter")) cfg.max_iter = j.at("max_iter").get<int>();
        if (j.contains("out_dir")) cfg.out_dir = base_dir / j.at("out_dir").get<std::string>();
        if (j.contains("deterministic")) cfg.deterministic = j.at("deterministic").get<bool>();
        if (j.contains("times")) cfg.times = j.at("times").get<std::vector<double>>();
        for (double t : cfg.times) {
            if (!(t >= 0.0 && t <= 1.0)) throw config_error("config: times must lie in [0, 1]");
        }
        if (j.contains("grid_points")) cfg.grid_points = j.at("grid_points").get<std::size_t>();
        if (j.contains("oracle")) cfg.with_oracle = j.at("oracle").get<bool>();
        if (j.contains("perturb_seed")) cfg.perturb_seed = j.at("perturb_seed").get<std::uint64_t>();
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw config_error(std::string("config: ") + e.what());
    }
}

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw config_error(std::string("config: ") + e.what());
    }
    return from_json(j, path.parent_path());
}

ExperimentConfig ExperimentConfig::canonical() {
    nlohmann::json j = {
        {"mu0", {{"dim", 1}, {"points", {{0.0}, {1.0}}}, {"weights", {0.5, 0.5}}}},
        {"mu1", {{"dim", 1}, {"points", {{2.0}, {3.0}}}, {"weights", {0.5, 0.5}}}},
        {"cost", {{"kind", "cramer"}, {"law", "normal"}}},
        {"schedule", {4, 16, 64, 256, 1024, 4096}},
    };
    return from_json(j, ".");
}

DiscreteMeasure ExperimentConfig::effective_reference() const {
    if (reference) return *reference;
    return DiscreteMeasure::uniform(mu1.points());
}

Matrix ExperimentConfig::cost_matrix_on_supports() const {
    const DiscreteMeasure ref = effective_reference();
    return cost_matrix(cost, mu0.points(), ref.points());
}

std::string ConvergenceTable::to_csv() const {
    std::string out = "k,value,gap,tv";
    for (double t : times) out += ",w1_t" + format_time_label(t);
    out += ",iters,wall_ms,error\n";
    for (const auto& row : rows) {
        out += std::to_string(row.k);
        out += "," + (row.error.empty() ? format_double(row.value) : std::string("na"));
        out += "," + (row.gap ? format_double(*row.gap) : std::string("na"));
        out += "," + (row.tv ? format_double(*row.tv) : std::string("na"));
        for (std::size_t c = 0; c < times.size(); ++c) {
            out += "," + (c < row.w1.size() ? format_double(row.w1[c]) : std::string("na"));
        }
        out += "," + std::to_string(row.iterations);
        out += "," + format_double(row.wall_ms);
        out += "," + sanitize_error(row.error);
        out += "\n";
    }
    return out;
}

ConvergenceTable ConvergenceTable::from_csv(const std::string& text) {
    std::stringstream ss(text);
    std::string line;
    if (!std::getline(ss, line)) throw std::runtime_error("table csv: empty");
    const auto header = split_csv_line(line);
    if (header.size() < 7 || header[0] != "k") throw std::runtime_error("table csv: bad header");

    ConvergenceTable table;
    for (std::size_t c = 4; c + 3 < header.size(); ++c) {
        if (header[c].rfind("w1_t", 0) != 0) throw std::runtime_error("table csv: bad w1 column");
        table.times.push_back(parse_double_token(header[c].substr(4)));
    }
    while (std::getline(ss, line)) {
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size()) throw std::runtime_error("table csv: ragged row");
        ConvergenceRow row;
        row.k = int(std::strtol(cells[0].c_str(), nullptr, 10));
        if (auto v = parse_optional_token(cells[1])) row.value = *v;
        row.gap = parse_optional_token(cells[2]);
        row.tv = parse_optional_token(cells[3]);
        for (std::size_t c = 0; c < table.times.size(); ++c) {
            if (auto v = parse_optional_token(cells[4 + c])) row.w1.push_back(*v);
        }
        row.iterations = int(std::strtol(cells[cells.size() - 3].c_str(), nullptr, 10));
        row.wall_ms = parse_double_token(cells[cells.size() - 2]);
        row.error = cells.back();
        table.rows.push_back(std::move(row));
    }
    return table;
}

namespace {

ConvergenceRow row_from_anneal(const AnnealRow& a, bool deterministic) {
    ConvergenceRow row;
    row.k = a.k;
    row.value = a.value;
    row.gap = a.gap;
    row.tv = a.tv;
    row.iterations = a.iterations;
    row.wall_ms = deterministic ? 0.0 : a.wall_ms;
    row.error = a.error;
    if (a.error.empty() && !a.converged) row.error = "unconverged";
    return row;
}

void set_trend_flag(ConvergenceTable& table) {
    std::vector<double> tvs;
    for (const auto& row : table.rows) {
        if (row.tv) tvs.push_back(*row.tv);
    }
    if (tvs.size() >= 2) table.tv_decreasing = tvs.back() <= tvs.front();
}

void emit(const ExperimentConfig& cfg, const std::string& name, const std::string& text) {
    std::filesystem::create_directories(cfg.out_dir);
    write_text_file(cfg.out_dir / name, text);
}

}  // namespace

Matrix perturbation_noise(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Matrix noise(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) noise(i, j) = unif(rng);
    }
    return noise;
}

ConvergenceTable run_value_convergence(const ExperimentConfig& cfg) {
    const DiscreteMeasure ref = cfg.effective_reference();
    const Matrix cmat = cfg.cost_matrix_on_supports();
    const AnnealReport report =
        anneal(cfg.mu0, cfg.mu1, cmat, ref, cfg.schedule, cfg.tol, cfg.max_iter, cfg.with_oracle);

    ConvergenceTable table;
    table.deterministic = cfg.deterministic;
    for (const auto& row : report.rows) table.rows.push_back(row_from_anneal(row, cfg.deterministic));
    set_trend_flag(table);
    emit(cfg, "value_convergence.csv", table.to_csv());
    return table;
}

ConvergenceTable run_plan_convergence(const ExperimentConfig& cfg) {
    const DiscreteMeasure ref = cfg.effective_reference();
    Matrix cmat = cfg.cost_matrix_on_supports();
    // Seeded tie-breaking perturbation; forbidden cells stay forbidden.
    const Matrix noise = perturbation_noise(cmat.rows(), cmat.cols(), cfg.perturb_seed);
    for (std::size_t i = 0; i < cmat.rows(); ++i) {
        for (std::size_t j = 0; j < cmat.cols(); ++j) {
            if (cmat(i, j) != kInf) cmat(i, j) += noise(i, j) * 1e-7;
        }
    }
    const AnnealReport report =
        anneal(cfg.mu0, cfg.mu1, cmat, ref, cfg.schedule, cfg.tol, cfg.max_iter, true);

    ConvergenceTable table;
    table.deterministic = cfg.deterministic;
    for (const auto& row : report.rows) table.rows.push_back(row_from_anneal(row, cfg.deterministic));
    set_trend_flag(table);
    emit(cfg, "plan_convergence.csv", table.to_csv());
    return table;
}

ConvergenceTable run_interpolation(const ExperimentConfig& cfg) {
    if (cfg.mu0.dim() != 1) throw config_error("interpolation: requires dimension 1");
    const bool quadratic = cfg.cost_spec.value("kind", "") == "cramer" &&
                           cfg.cost_spec.value("law", "") == "normal";
    if (!quadratic) {
        throw config_error("interpolation: requires the half-quadratic cost (cramer/normal)");
    }

    const DiscreteMeasure ref = cfg.effective_reference();
    const Matrix cmat = cfg.cost_matrix_on_supports();
    const AnnealReport report =
        anneal(cfg.mu0, cfg.mu1, cmat, ref, cfg.schedule, cfg.tol, cfg.max_iter, true);

    // Exact plan for the displacement interpolation.
    const OracleResult oracle = lp_solve(cfg.mu0, report.mu1_moved,
                                         cost_matrix(cfg.cost, cfg.mu0.points(),
                                                     std::span<const Point>(report.mu1_moved.points())));
    if (!oracle.plan) throw config_error("interpolation: instance admits no finite-cost plan");

    ConvergenceTable table;
    table.deterministic = cfg.deterministic;
    table.times = cfg.times;
    std::filesystem::create_directories(cfg.out_dir);
    for (const auto& arow : report.rows) {
        ConvergenceRow row = row_from_anneal(arow, cfg.deterministic);
        if (arow.coupling) {
            for (double t : cfg.times) {
                FlowResult flow = [&] {
                    if (t == 0.0 || t == 1.0) {
                        return mixture_flow(*arow.coupling, arow.k, t, {});
                    }
                    const auto grid = default_flow_grid(*arow.coupling, arow.k, cfg.grid_points);
                    return mixture_flow(*arow.coupling, arow.k, t, grid);
                }();
                const DiscreteMeasure target = displacement_interpolation(*oracle.plan, t);
                row.w1.push_back(wasserstein1_1d(flow.measure, target));

                std::string csv = "t,grid_point,density_weight\n";
                for (std::size_t l = 0; l < flow.measure.size(); ++l) {
                    csv += format_double(t) + "," + format_double(flow.measure.points()[l][0]) +
                           "," + format_double(flow.measure.weights()[l]) + "\n";
                }
                write_text_file(cfg.out_dir / ("flow_k" + std::to_string(arow.k) + "_t" +
                                               format_time_label(t) + ".csv"),
                                csv);
            }
        }
        table.rows.push_back(std::move(row));
    }
    set_trend_flag(table);
    emit(cfg, "interpolation.csv", table.to_csv());
    return table;
}

namespace {

struct GridSpec {
    SourceLaw law;
    double lo, hi;
};

void catalog_agreement_rows(CostSuiteReport& report) {
    const GridSpec grids[] = {
        {SourceLaw::standard_normal(1), -5.0, 5.0},
        {SourceLaw::rademacher(), -0.99, 0.99},
        {SourceLaw::exponential1(), 0.05, 8.0},
        {SourceLaw::poisson1(), 0.05, 8.0},
    };
    for (const auto& g : grids) {
        double max_err = 0.0;
        const int n = 101;
        for (int i = 0; i < n; ++i) {
            const double v = g.lo + (g.hi - g.lo) * double(i) / double(n - 1);
            const double vec[1] = {v};
            const double closed = cramer_closed(g.law, vec);
            const double numeric = cramer_numerical(g.law, vec);
            max_err = std::max(max_err, std::abs(closed - numeric));
        }
        report.rows.push_back(
            {g.law.name(), "closed_vs_numerical_max_abs_err", max_err, 1e-6, max_err <= 1e-6});
    }
}

PiecewiseLinearPath random_path(std::mt19937_64& rng, double v_lo, double v_hi, std::size_t dim) {
    std::uniform_int_distribution<int> nseg(1, 6);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const int segments = nseg(rng);
    std::vector<double> times{0.0};
    for (int s = 1; s < segments; ++s) times.push_back(unif(rng));
    times.push_back(1.0);
    std::sort(times.begin(), times.end());
    // collapse coincident interior knots
    times.erase(std::unique(times.begin(), times.end()), times.end());
    if (times.size() < 2) times = {0.0, 1.0};

    std::uniform_real_distribution<double> vel(v_lo, v_hi);
    std::uniform_real_distribution<double> start(-2.0, 2.0);
    Point p0{std::vector<double>(dim)};
    for (std::size_t d = 0; d < dim; ++d) p0.coords[d] = start(rng);
    std::vector<Point> points{p0};
    for (std::size_t s = 0; s + 1 < times.size(); ++s) {
        const double dt = times[s + 1] - times[s];
        Point next = points.back();
        for (std::size_t d = 0; d < dim; ++d) next.coords[d] += dt * vel(rng);
        points.push_back(std::move(next));
    }
    return PiecewiseLinearPath(std::move(times), std::move(points));
}

struct JensenCase {
    std::string name;
    ActionFunctional af;
    double v_lo, v_hi;
    std::size_t dim;
};

void jensen_rows(CostSuiteReport& report, std::uint64_t seed) {
    std::vector<JensenCase> cases;
    cases.push_back({"kinetic", ActionFunctional::kinetic(), -3.0, 3.0, 2});
    cases.push_back(
        {"mogulskii_normal",
         ActionFunctional::mogulskii(CramerTransform(SourceLaw::standard_normal(1))), -3.0, 3.0, 1});
    cases.push_back({"mogulskii_rademacher",
                     ActionFunctional::mogulskii(CramerTransform(SourceLaw::rademacher())), -0.98,
                     0.98, 1});
    cases.push_back({"mogulskii_exponential1",
                     ActionFunctional::mogulskii(CramerTransform(SourceLaw::exponential1())), 0.05,
                     4.0, 1});
    cases.push_back({"mogulskii_poisson1",
                     ActionFunctional::mogulskii(CramerTransform(SourceLaw::poisson1())), 0.05, 4.0,
                     1});
    for (double p : {1.5, 2.0, 3.0}) {
        cases.push_back({"twisted_p" + format_time_label(p),
                         ActionFunctional::twisted_walk(
                             CramerTransform(SourceLaw::standard_normal(1)), Twist::power(p)),
                         -3.0, 3.0, 2});
    }

    std::mt19937_64 rng(seed);
    for (const auto& c : cases) {
        double worst_violation = 0.0;  // static_cost - action, positive is bad
        double worst_geodesic_gap = 0.0;
        double worst_twist_gap = 0.0;
        for (int trial = 0; trial < 100; ++trial) {
            const auto path = random_path(rng, c.v_lo, c.v_hi, c.dim);
            const double a = action(c.af, path);
            const double sc = static_cost(c.af, path.start(), path.end());
            if (a != kInf || sc != kInf) {
                worst_violation = std::max(worst_violation, sc - a);
            }
            const GeodesicResult geo = geodesic(c.af, path.start(), path.end());
            if (geo.cost != kInf) {
                worst_geodesic_gap =
                    std::max(worst_geodesic_gap, std::abs(action(c.af, geo.path) - geo.cost));
            }
            if (c.af.kind() == ActionKind::twisted_walk && geo.cost != kInf) {
                const auto w = c.af.twist().inverse(path.end() - path.start());
                const double direct = c.af.transform()(*w);
                worst_twist_gap = std::max(worst_twist_gap, std::abs(geo.cost - direct));
            }
        }
        report.rows.push_back(
            {c.name, "jensen_max_violation", worst_violation, 1e-9, worst_violation <= 1e-9});
        report.rows.push_back({c.name, "geodesic_action_equality_err", worst_geodesic_gap, 1e-9,
                               worst_geodesic_gap <= 1e-9});
        if (c.af.kind() == ActionKind::twisted_walk) {
            report.rows.push_back({c.name, "twisted_geodesic_vs_conjugate_err", worst_twist_gap,
                                   1e-6, worst_twist_gap <= 1e-6});
        }
    }
}

void ratio_and_domain_rows(CostSuiteReport& report, std::uint64_t seed) {
    // |v|^p twist with p = 2 doubles the kinetic |v|^2/2.
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-3.0, 3.0);
    const ActionFunctional kinetic = ActionFunctional::kinetic();
    const ActionFunctional twist2 = ActionFunctional::twisted_walk(
        CramerTransform(SourceLaw::standard_normal(1)), Twist::power(2.0));
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        Point x{unif(rng), unif(rng)};
        Point y{unif(rng), unif(rng)};
        if (distance(x, y) < 1e-3) continue;
        const double ratio = static_cost(twist2, x, y) / static_cost(kinetic, x, y);
        worst = std::max(worst, std::abs(ratio - 2.0));
    }
    report.rows.push_back({"power2_vs_kinetic", "ratio_minus_2", worst, 1e-12, worst <= 1e-12});

    const SourceLaw rad = SourceLaw::rademacher();
    const CramerTransform ct(rad);
    const ActionFunctional mog = ActionFunctional::mogulskii(ct);
    const double out[1] = {3.0};
    const bool consistent = ct(std::span<const double>(out)) == kInf &&
                            static_cost(mog, Point{0.0}, Point{3.0}) == kInf &&
                            cramer_numerical(rad, out) == kInf;
    report.rows.push_back({"rademacher_outside_domain", "all_routes_infinite",
                           consistent ? 0.0 : 1.0, 0.5, consistent});
}

}  // namespace

CostSuiteReport run_cost_suite(const std::optional<std::filesystem::path>& out_dir,
                               bool /*deterministic*/) {
    CostSuiteReport report;
    catalog_agreement_rows(report);
    jensen_rows(report, 0x5eedULL);
    ratio_and_domain_rows(report, 0x5eed2ULL);
    for (const auto& row : report.rows) report.all_pass = report.all_pass && row.pass;
    if (out_dir) {
        std::filesystem::create_directories(*out_dir);
        write_text_file(*out_dir / "cost_suite.csv", report.to_csv());
    }
    return report;
}

std::string CostSuiteReport::to_csv() const {
    std::string out = "name,metric,observed,bound,pass\n";
    for (const auto& row : rows) {
        out += row.name + "," + row.metric + "," + format_double(row.observed) + "," +
               format_double(row.bound) + "," + (row.pass ? "1" : "0") + "\n";
    }
    return out;
}

}  // namespace eot
