#include "eot/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

namespace eot {

namespace {

// Cost with a symbolic big-M part: value = m*M + c with M larger than any
// finite quantity. Forbidden cells carry m = 1.
struct BigM {
    double m = 0.0;
    double c = 0.0;

    BigM operator+(const BigM& o) const { return {m + o.m, c + o.c}; }
    BigM operator-(const BigM& o) const { return {m - o.m, c - o.c}; }
};

bool bigm_less(const BigM& a, const BigM& b) {
    if (a.m != b.m) return a.m < b.m;
    return a.c < b.c;
}

// Negative beyond rounding noise.
bool bigm_negative(const BigM& r) {
    if (r.m != 0.0) return r.m < 0.0;
    return r.c < -1e-11;
}

// Flow with a symbolic perturbation part: value = base + coef * eps, eps an
// infinitesimal. The Charnes scheme keeps every basic flow strictly positive
// in this arithmetic, so the ratio test never ties.
struct EpsVal {
    double base = 0.0;
    double coef = 0.0;

    EpsVal operator-(const EpsVal& o) const { return {base - o.base, coef - o.coef}; }
    EpsVal operator+(const EpsVal& o) const { return {base + o.base, coef + o.coef}; }
};

bool eps_less(const EpsVal& a, const EpsVal& b) {
    const double scale = std::max({1.0, std::abs(a.base), std::abs(b.base)});
    if (std::abs(a.base - b.base) > 1e-12 * scale) return a.base < b.base;
    return a.coef < b.coef;
}

struct Simplex {
    std::size_t n, m;
    const Matrix* cost;
    std::vector<BigM> cell_cost;        // n*m
    std::vector<int> basis_pos;         // n*m -> index into basic arrays, -1 if nonbasic
    std::vector<std::size_t> basic_i, basic_j;
    std::vector<EpsVal> basic_flow;
    std::vector<std::vector<std::size_t>> adj;  // node -> basic cell indices; nodes: i, n + j

    std::size_t cell(std::size_t i, std::size_t j) const { return i * m + j; }

    void add_basic(std::size_t i, std::size_t j, EpsVal f) {
        basis_pos[cell(i, j)] = int(basic_i.size());
        basic_i.push_back(i);
        basic_j.push_back(j);
        basic_flow.push_back(f);
        adj[i].push_back(basic_i.size() - 1);
        adj[n + j].push_back(basic_i.size() - 1);
    }

    void rebuild_adj() {
        for (auto& a : adj) a.clear();
        for (std::size_t b = 0; b < basic_i.size(); ++b) {
            adj[basic_i[b]].push_back(b);
            adj[n + basic_j[b]].push_back(b);
        }
    }
};

// Duals from the basis tree, rooted at supply node 0 with u_0 = 0.
void compute_duals(const Simplex& s, std::vector<BigM>& u, std::vector<BigM>& v) {
    u.assign(s.n, BigM{});
    v.assign(s.m, BigM{});
    std::vector<char> done(s.n + s.m, 0);
    std::deque<std::size_t> queue;
    queue.push_back(0);
    done[0] = 1;
    while (!queue.empty()) {
        const std::size_t node = queue.front();
        queue.pop_front();
        for (std::size_t b : s.adj[node]) {
            const std::size_t i = s.basic_i[b], j = s.basic_j[b];
            const std::size_t other = node < s.n ? s.n + j : i;
            if (done[other]) continue;
            const BigM c = s.cell_cost[s.cell(i, j)];
            if (node < s.n) {
                v[j] = c - u[i];
            } else {
                u[i] = c - v[j];
            }
            done[other] = 1;
            queue.push_back(other);
        }
    }
    for (char d : done) {
        if (!d) throw std::logic_error("lp_solve: basis is not a spanning tree");
    }
}

// Unique path between supply p and demand q through the basis tree.
std::vector<std::size_t> tree_path(const Simplex& s, std::size_t p, std::size_t q) {
    const std::size_t n_nodes = s.n + s.m;
    std::vector<int> parent_arc(n_nodes, -1);
    std::vector<int> parent_node(n_nodes, -1);
    std::vector<char> seen(n_nodes, 0);
    std::deque<std::size_t> queue;
    queue.push_back(p);
    seen[p] = 1;
    const std::size_t goal = s.n + q;
    while (!queue.empty()) {
        const std::size_t node = queue.front();
        queue.pop_front();
        if (node == goal) break;
        for (std::size_t b : s.adj[node]) {
            const std::size_t other = node < s.n ? s.n + s.basic_j[b] : s.basic_i[b];
            if (seen[other]) continue;
            seen[other] = 1;
            parent_arc[other] = int(b);
            parent_node[other] = int(node);
            queue.push_back(other);
        }
    }
    if (!seen[goal]) throw std::logic_error("lp_solve: disconnected basis");
    std::vector<std::size_t> arcs;
    for (std::size_t node = goal; node != p; node = std::size_t(parent_node[node])) {
        arcs.push_back(std::size_t(parent_arc[node]));
    }
    std::reverse(arcs.begin(), arcs.end());
    return arcs;
}

// Flows for a given basis with unperturbed masses, by leaf stripping. Exact
// up to accumulation rounding; used to strip the Charnes perturbation.
std::vector<double> deperturbed_flows(const Simplex& s, const std::vector<double>& a,
                                      const std::vector<double>& b) {
    const std::size_t n_nodes = s.n + s.m;
    std::vector<double> residual(n_nodes);
    for (std::size_t i = 0; i < s.n; ++i) residual[i] = a[i];
    for (std::size_t j = 0; j < s.m; ++j) residual[s.n + j] = b[j];

    std::vector<std::vector<std::size_t>> adj = s.adj;
    std::vector<char> arc_done(s.basic_i.size(), 0);
    std::vector<std::size_t> degree(n_nodes);
    for (std::size_t node = 0; node < n_nodes; ++node) degree[node] = adj[node].size();

    std::vector<double> flow(s.basic_i.size(), 0.0);
    std::deque<std::size_t> leaves;
    for (std::size_t node = 0; node < n_nodes; ++node) {
        if (degree[node] == 1) leaves.push_back(node);
    }
    std::size_t processed = 0;
    while (!leaves.empty()) {
        const std::size_t node = leaves.front();
        leaves.pop_front();
        std::size_t arc = SIZE_MAX;
        for (std::size_t cand : adj[node]) {
            if (!arc_done[cand]) {
                arc = cand;
                break;
            }
        }
        if (arc == SIZE_MAX) continue;  // last node of the tree
        flow[arc] = residual[node];
        arc_done[arc] = 1;
        ++processed;
        const std::size_t other =
            node < s.n ? s.n + s.basic_j[arc] : s.basic_i[arc];
        residual[other] -= residual[node];
        residual[node] = 0.0;
        if (--degree[other] == 1) leaves.push_back(other);
        degree[node] = 0;
    }
    if (processed != s.basic_i.size()) throw std::logic_error("lp_solve: flow recovery failed");
    return flow;
}

void check_inputs(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1, const Matrix& cost) {
    if (cost.rows() != mu0.size() || cost.cols() != mu1.size()) {
        throw std::invalid_argument("lp_solve: cost matrix shape mismatch");
    }
    StableSum sa, sb;
    for (double x : mu0.weights()) sa.add(x);
    for (double x : mu1.weights()) sb.add(x);
    if (std::abs(sa.total() - sb.total()) > 1e-12) {
        throw std::invalid_argument("lp_solve: total mass mismatch");
    }
}

}  // namespace

namespace {

// Zero-weight atoms would defeat the Charnes nondegeneracy argument; solve
// the positive-mass core and embed the plan back afterwards.
OracleResult lp_solve_positive(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1,
                               const Matrix& cost);

}  // namespace

OracleResult lp_solve(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1, const Matrix& cost) {
    check_inputs(mu0, mu1, cost);
    std::vector<std::size_t> rows, cols;
    for (std::size_t i = 0; i < mu0.size(); ++i) {
        if (mu0.weights()[i] > 0.0) rows.push_back(i);
    }
    for (std::size_t j = 0; j < mu1.size(); ++j) {
        if (mu1.weights()[j] > 0.0) cols.push_back(j);
    }
    if (rows.size() == mu0.size() && cols.size() == mu1.size()) {
        return lp_solve_positive(mu0, mu1, cost);
    }

    std::vector<Point> sub_src, sub_tgt;
    std::vector<double> wa, wb;
    for (std::size_t i : rows) {
        sub_src.push_back(mu0.points()[i]);
        wa.push_back(mu0.weights()[i]);
    }
    for (std::size_t j : cols) {
        sub_tgt.push_back(mu1.points()[j]);
        wb.push_back(mu1.weights()[j]);
    }
    Matrix sub_cost(rows.size(), cols.size());
    for (std::size_t a = 0; a < rows.size(); ++a) {
        for (std::size_t b = 0; b < cols.size(); ++b) sub_cost(a, b) = cost(rows[a], cols[b]);
    }
    OracleResult core = lp_solve_positive(DiscreteMeasure(std::move(sub_src), std::move(wa)),
                                          DiscreteMeasure(std::move(sub_tgt), std::move(wb)),
                                          sub_cost);
    if (!core.plan) return core;

    std::vector<double> w(mu0.size() * mu1.size(), 0.0);
    for (std::size_t a = 0; a < rows.size(); ++a) {
        for (std::size_t b = 0; b < cols.size(); ++b) {
            w[rows[a] * mu1.size() + cols[b]] = core.plan->weight(a, b);
        }
    }
    OracleResult out;
    out.plan = Coupling(mu0.points(), mu1.points(), std::move(w));
    out.value = core.value;
    // uniqueness certificates and duals refer to the core cells only
    out.unique = false;
    return out;
}

namespace {

OracleResult lp_solve_positive(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1,
                               const Matrix& cost) {
    const std::size_t n = mu0.size(), m = mu1.size();

    Simplex s;
    s.n = n;
    s.m = m;
    s.cost = &cost;
    s.cell_cost.resize(n * m);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const double c = cost(i, j);
            s.cell_cost[s.cell(i, j)] = c == kInf ? BigM{1.0, 0.0} : BigM{0.0, c};
        }
    }
    s.basis_pos.assign(n * m, -1);
    s.adj.assign(n + m, {});

    // Charnes perturbation: each demand gains eps, the last supply gains m*eps.
    std::vector<EpsVal> supply(n), demand(m);
    for (std::size_t i = 0; i < n; ++i) supply[i] = {mu0.weights()[i], 0.0};
    supply[n - 1].coef += double(m);
    for (std::size_t j = 0; j < m; ++j) demand[j] = {mu1.weights()[j], 1.0};

    // Northwest-corner start.
    {
        std::size_t i = 0, j = 0;
        EpsVal ra = supply[0], rb = demand[0];
        while (true) {
            const bool a_smaller = eps_less(ra, rb);
            const EpsVal f = a_smaller ? ra : rb;
            s.add_basic(i, j, f);
            if (i == n - 1 && j == m - 1) break;
            if (a_smaller) {
                rb = rb - f;
                ra = {0.0, 0.0};
                if (i + 1 < n) {
                    ++i;
                    ra = supply[i];
                } else {
                    ++j;
                    rb = demand[j];
                }
            } else {
                ra = ra - f;
                rb = {0.0, 0.0};
                if (j + 1 < m) {
                    ++j;
                    rb = demand[j];
                } else {
                    ++i;
                    ra = supply[i];
                }
            }
        }
    }

    const std::size_t pivot_limit = n * m * m + 16;
    std::vector<BigM> u, v;
    std::size_t pivots = 0;
    while (true) {
        compute_duals(s, u, v);

        // Dantzig rule: most negative reduced cost enters.
        BigM best{0.0, 0.0};
        std::size_t ei = SIZE_MAX, ej = SIZE_MAX;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                if (s.basis_pos[s.cell(i, j)] >= 0) continue;
                const BigM r = s.cell_cost[s.cell(i, j)] - u[i] - v[j];
                if (bigm_negative(r) && bigm_less(r, best)) {
                    best = r;
                    ei = i;
                    ej = j;
                }
            }
        }
        if (ei == SIZE_MAX) break;  // optimal

        if (++pivots > pivot_limit) {
            throw std::runtime_error("lp_solve: pivot guard tripped (degenerate cycling)");
        }

        // Alternate +/- around the unique cycle closed by the entering cell.
        const auto arcs = tree_path(s, ei, ej);
        // Walk assigns each path arc a sign: arcs leaving a supply node get
        // -theta, arcs entering a supply node get +theta.
        std::vector<int> sign(arcs.size());
        {
            std::size_t node = ei;
            for (std::size_t t = 0; t < arcs.size(); ++t) {
                const std::size_t b = arcs[t];
                if (node < n) {
                    sign[t] = -1;  // supply -> demand, reduced by the new flow
                    node = n + s.basic_j[b];
                } else {
                    sign[t] = +1;
                    node = s.basic_i[b];
                }
            }
        }
        // Leaving arc: minimal flow among the -theta arcs.
        std::size_t leave_t = SIZE_MAX;
        for (std::size_t t = 0; t < arcs.size(); ++t) {
            if (sign[t] < 0 &&
                (leave_t == SIZE_MAX || eps_less(s.basic_flow[arcs[t]], s.basic_flow[arcs[leave_t]]))) {
                leave_t = t;
            }
        }
        if (leave_t == SIZE_MAX) throw std::logic_error("lp_solve: unbounded pivot");
        const EpsVal theta = s.basic_flow[arcs[leave_t]];
        for (std::size_t t = 0; t < arcs.size(); ++t) {
            s.basic_flow[arcs[t]] =
                sign[t] > 0 ? s.basic_flow[arcs[t]] + theta : s.basic_flow[arcs[t]] - theta;
        }

        // Swap leaving for entering in the basis.
        const std::size_t lb = arcs[leave_t];
        s.basis_pos[s.cell(s.basic_i[lb], s.basic_j[lb])] = -1;
        s.basic_i[lb] = ei;
        s.basic_j[lb] = ej;
        s.basic_flow[lb] = theta;
        s.basis_pos[s.cell(ei, ej)] = int(lb);
        s.rebuild_adj();
    }

    // Strip the perturbation: recompute flows on the final basis from the
    // exact masses.
    const std::vector<double> flows = deperturbed_flows(s, mu0.weights(), mu1.weights());

    // A positive flow on a forbidden cell means no finite-cost plan exists.
    StableSum total_cost;
    std::vector<double> plan_w(n * m, 0.0);
    bool feasible = true;
    for (std::size_t b = 0; b < s.basic_i.size(); ++b) {
        const double f = std::max(0.0, flows[b]);
        const std::size_t i = s.basic_i[b], j = s.basic_j[b];
        plan_w[i * m + j] = f;
        if (f > 0.0) {
            if (cost(i, j) == kInf) {
                feasible = false;
            } else {
                total_cost.add(f * cost(i, j));
            }
        }
    }
    if (!feasible) {
        return {std::nullopt, kInf, false, std::nullopt, std::nullopt};
    }

    OracleResult result;
    result.plan = Coupling(mu0.points(), mu1.points(), std::move(plan_w));
    result.value = total_cost.total();

    // Uniqueness certificate and exported duals.
    bool unique = true;
    bool duals_finite = true;
    for (std::size_t i = 0; i < n && duals_finite; ++i) duals_finite = u[i].m == 0.0;
    for (std::size_t j = 0; j < m && duals_finite; ++j) duals_finite = v[j].m == 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            if (s.basis_pos[s.cell(i, j)] >= 0) continue;
            const BigM r = s.cell_cost[s.cell(i, j)] - u[i] - v[j];
            const bool positive = r.m > 0.0 || (r.m == 0.0 && r.c > 1e-10);
            if (!positive) unique = false;
        }
    }
    result.unique = unique;
    if (duals_finite) {
        std::vector<double> du(n), dv(m);
        for (std::size_t i = 0; i < n; ++i) du[i] = u[i].c;
        for (std::size_t j = 0; j < m; ++j) dv[j] = v[j].c;
        result.dual_u = std::move(du);
        result.dual_v = std::move(dv);
    }
    return result;
}

}  // namespace

OracleResult monotone_1d(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1,
                         const std::function<double(double)>& h) {
    if (mu0.dim() != 1 || mu1.dim() != 1) {
        throw std::invalid_argument("monotone_1d: requires dimension 1");
    }
    const std::size_t n = mu0.size(), m = mu1.size();

    std::vector<std::size_t> si(n), sj(m);
    for (std::size_t i = 0; i < n; ++i) si[i] = i;
    for (std::size_t j = 0; j < m; ++j) sj[j] = j;
    std::sort(si.begin(), si.end(),
              [&](std::size_t a, std::size_t b) { return mu0.points()[a][0] < mu0.points()[b][0]; });
    std::sort(sj.begin(), sj.end(),
              [&](std::size_t a, std::size_t b) { return mu1.points()[a][0] < mu1.points()[b][0]; });

    std::vector<double> plan_w(n * m, 0.0);
    StableSum value;
    std::size_t a = 0, b = 0;
    double ra = mu0.weights()[si[0]], rb = mu1.weights()[sj[0]];
    while (a < n && b < m) {
        const double f = std::min(ra, rb);
        if (f > 0.0) {
            plan_w[si[a] * m + sj[b]] += f;
            value.add(f * h(mu1.points()[sj[b]][0] - mu0.points()[si[a]][0]));
        }
        ra -= f;
        rb -= f;
        if (ra <= rb && a + 1 <= n) {
            if (++a < n) ra = mu0.weights()[si[a]];
        } else {
            if (++b < m) rb = mu1.weights()[sj[b]];
        }
    }

    OracleResult result;
    result.plan = Coupling(mu0.points(), mu1.points(), std::move(plan_w));
    result.value = value.total();
    result.unique = (n == 1 || m == 1);
    return result;
}

double tc_value(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1, const Matrix& cost) {
    return lp_solve(mu0, mu1, cost).value;
}

}  // namespace eot
