// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "spn/amr.hpp"
#include "spn/bench_io.hpp"
#include "spn/ddm.hpp"
#include "spn/estimators.hpp"
#include "spn/mixed_fem.hpp"
#include "spn/spn_coefficients.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

using namespace spn;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const char* name, const std::function<Outcome()>& check) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failures;
    std::printf("%s %2d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
    std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
    char buf[96];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

// alpha_m = (4m^2 - 1) / (m alpha_{m-1}) in exact rationals.
struct Fraction {
    std::int64_t num = 0;
    std::int64_t den = 1;
    Fraction(std::int64_t n = 0, std::int64_t d = 1) : num(n), den(d) {
        const std::int64_t g = std::gcd(num, den);
        num /= g;
        den /= g;
    }
    Fraction operator*(const Fraction& o) const { return {num * o.num, den * o.den}; }
    Fraction operator/(const Fraction& o) const { return {num * o.den, den * o.num}; }
    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

Outcome angular_constants() {
    double worst = 0.0;
    for (int order = 1; order <= 9; order += 2) {
        const AngularConstants ac = compute_angular_constants(order);
        Fraction alpha(1);
        for (int m = 0; m <= order; ++m) {
            if (m > 0) alpha = Fraction(4 * m * m - 1, m) / alpha;
            const double t = (alpha * alpha / Fraction(2 * m + 1)).value();
            worst = std::max(worst, std::abs(ac.t[m] - t) / t);
            worst = std::max(worst, std::abs(ac.alpha[m] - alpha.value()) / alpha.value());
        }
    }
    const AngularConstants ac = compute_angular_constants(3);
    const double known = std::max({std::abs(ac.t[0] - 1.0), std::abs(ac.t[1] - 3.0), std::abs(ac.t[2] - 1.25),
                                   std::abs(ac.t[3] - 28.0 / 9.0)});
    return {worst <= 1e-14 && known <= 1e-14,
            "max rel. deviation from rational recurrence " + fmt("%.1e", worst) + ", t0..t3 deviation " + fmt("%.1e", known)};
}

// int_0^1 x P_a P_b by exact monomial integration.
double moment_integral(int a, int b) {
    auto legendre = [](int n) {
        std::vector<double> p0{1.0}, p1{0.0, 1.0};
        if (n == 0) return p0;
        for (int k = 1; k < n; ++k) {
            std::vector<double> p2(k + 2, 0.0);
            for (int j = 0; j <= k; ++j) p2[j + 1] += (2.0 * k + 1.0) * p1[j] / (k + 1.0);
            for (int j = 0; j < k; ++j) p2[j] -= k * p0[j] / (k + 1.0);
            p0 = p1;
            p1 = p2;
        }
        return p1;
    };
    const auto pa = legendre(a);
    const auto pb = legendre(b);
    double s = 0.0;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        for (std::size_t j = 0; j < pb.size(); ++j) s += pa[i] * pb[j] / static_cast<double>(i + j + 2);
    }
    return s;
}

Outcome robin_matrices() {
    const RobinMatrices r1 = assemble_robin_matrices(compute_angular_constants(1), 1);
    const RobinMatrices r3 = assemble_robin_matrices(compute_angular_constants(3), 1);
    const AngularConstants ac = compute_angular_constants(3);
    Eigen::Matrix2d expected;
    expected << 0.5, 0.3125, 0.3125, 0.78125;
    double oracle = 0.0;
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            const double e = ac.alpha[2 * i] * ac.alpha[2 * j] * moment_integral(2 * i, 2 * j);
            oracle = std::max(oracle, std::abs(e - expected(i, j)));
        }
    }
    const double dev = (r3.gamma_hat - expected).cwiseAbs().maxCoeff();
    return {r1.gamma_hat(0, 0) == 0.5 && dev <= 1e-12 && oracle <= 1e-12,
            "nhat=1 " + fmt("%.17g", r1.gamma_hat(0, 0)) + ", nhat=2 max deviation " + fmt("%.1e", dev)};
}

// Unit square or cube, Robin on every face.
TensorGrid unit_grid(int dim, int n) {
    GridSpec spec;
    spec.dim = dim;
    spec.domain.dim = dim;
    spec.cells = {n, n, dim == 3 ? n : 1};
    for (int a = 0; a < dim; ++a) {
        for (int s = 0; s < 2; ++s) spec.boundary.push_back(face_region(spec.domain, a, s, BoundaryKind::Robin));
    }
    return build_grid(spec);
}

std::vector<SpnMatrixBundle> constant_bundles(int groups, int order) {
    MaterialCrossSections xs;
    xs.sigma_t = Eigen::VectorXd::Ones(groups);
    xs.sigma_s.assign(2, Eigen::MatrixXd::Zero(groups, groups));
    for (int g = 0; g < groups; ++g) {
        xs.sigma_s[0](g, g) = 0.5;
        xs.sigma_s[1](g, g) = 0.1;
        if (g + 1 < groups) xs.sigma_s[0](g, g + 1) = 0.1;
    }
    return {build_bundle(xs, compute_angular_constants(order))};
}

Outcome coercivity() {
    int violations = 0;
    int trials = 0;
    double worst = std::numeric_limits<double>::infinity();
    for (int dim : {2, 3}) {
        for (int order : {1, 3}) {
            const TensorGrid g = unit_grid(dim, dim == 2 ? 4 : 3);
            const CoercivityReport r = t_coercivity_check(g, constant_bundles(2, order), 100, 1234 + order * dim);
            violations += r.violations;
            trials += r.trials;
            worst = std::min(worst, r.min_ratio / r.alpha);
        }
    }
    return {violations == 0 && trials == 400,
            std::to_string(violations) + " violations in " + std::to_string(trials) +
                " trials, min c(z,Tz)/(alpha |z|^2) = " + fmt("%.3f", worst)};
}

Outcome mms_convergence() {
    std::vector<double> ephi, eflux;
    double residual = 0.0;
    for (int n : {8, 16, 32}) {
        const MmsProblem p = mms_problem(2, 2, 1, n);
        double res = 0.0;
        const MixedField f = solve_mono(p.grid, p.bundles, p.source(p.grid), &res);
        residual = std::max(residual, res);
        ephi.push_back(l2_error_phi(p.grid, f, p.phi));
        eflux.push_back(l2_error_flux(p.grid, f, p.flux));
    }
    double rate = std::numeric_limits<double>::infinity();
    std::string d = "orders phi";
    for (std::size_t i = 1; i < ephi.size(); ++i) {
        const double r = std::log2(ephi[i - 1] / ephi[i]);
        rate = std::min(rate, r);
        d += fmt(" %.3f", r);
    }
    d += ", p";
    for (std::size_t i = 1; i < eflux.size(); ++i) {
        const double r = std::log2(eflux[i - 1] / eflux[i]);
        rate = std::min(rate, r);
        d += fmt(" %.3f", r);
    }
    d += ", max residual " + fmt("%.1e", residual);
    return {rate >= 0.9 && residual <= 1e-10, d};
}

struct Solved {
    MmsProblem problem;
    SourceField source;
    MixedField field;
    NodalFluxField recon;
    EstimatorField est;
};

Solved solve_mms(int n) {
    Solved s{mms_problem(2, 2, 1, n), {}, {}, {}, {}};
    s.source = s.problem.source(s.problem.grid);
    s.field = solve_mono(s.problem.grid, s.problem.bundles, s.source);
    s.recon = average_reconstruct(s.problem.grid, s.problem.bundles, s.field);
    s.est = compute_estimators(s.problem.grid, s.problem.bundles, s.source, s.field, s.recon);
    return s;
}

constexpr int kDualLevels = 2;

Outcome reliability() {
    const Solved s = solve_mms(8);
    int violations = 0;
    double worst = 0.0;
    for (int K = 0; K < s.problem.grid.num_cells(); ++K) {
        const double dual = approximate_local_dual_norm(s.problem.grid, s.problem.bundles, s.source, s.field, s.recon, K,
                                                        kDualLevels);
        const double bound = reliability_bound(s.problem.grid, s.est, K);
        if (dual > bound + 1e-10) ++violations;
        worst = std::max(worst, dual / bound);
    }
    return {violations == 0, std::to_string(violations) + " violations on " +
                                 std::to_string(s.problem.grid.num_cells()) + " cells, max dual/bound " +
                                 fmt("%.3f", worst)};
}

Outcome efficiency() {
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    int cells = 0;
    std::string d;
    for (int n : {8, 16, 32}) {
        const Solved s = solve_mms(n);
        double llo = std::numeric_limits<double>::infinity();
        double lhi = 0.0;
        for (int K = 0; K < s.problem.grid.num_cells(); ++K) {
            const double dual = approximate_local_dual_norm(s.problem.grid, s.problem.bundles, s.source, s.field,
                                                            s.recon, K, kDualLevels);
            if (!(dual > 1e-12)) continue;
            const double r = s.est.eta_K(K) / dual;
            llo = std::min(llo, r);
            lhi = std::max(lhi, r);
            ++cells;
        }
        lo = std::min(lo, llo);
        hi = std::max(hi, lhi);
        d += "n=" + std::to_string(n) + " [" + fmt("%.2f", llo) + ", " + fmt("%.2f", lhi) + "] ";
    }
    const double spread = hi / lo;
    return {spread <= 10.0, "eta_K/dual ratios " + d + "over " + std::to_string(cells) + " cells, spread " +
                                fmt("%.2f", spread) + " (limit 10)"};
}

Box box2(double x0, double y0, double x1, double y1) {
    Box b;
    b.dim = 2;
    b.lo = {x0, y0, 0.0};
    b.hi = {x1, y1, 1.0};
    return b;
}

SourceField smooth_source(const TensorGrid& g, int ncomp) {
    SourceField s = SourceField::Zero(g.num_cells(), ncomp);
    for (int K = 0; K < g.num_cells(); ++K) {
        const Point c = g.cell_center(K);
        s(K, 0) = 1.0 + c[0] + 2.0 * c[1] * c[1];
    }
    return s;
}

Outcome ddm_equivalence() {
    const auto bundles = constant_bundles(2, 3);
    const int nc = bundles.front().components();
    const TensorGrid g = unit_grid(2, 8);
    const MixedField mono = solve_mono(g, bundles, smooth_source(g, nc));

    auto solve = [&](const SubdomainLayout& l) {
        std::vector<SourceField> src;
        for (const auto& sg : l.grids) src.push_back(smooth_source(sg, nc));
        const DdmSystem sys = assemble_ddm(l, bundles, src);
        MultiDomainSolution sol = solve_ddm(sys, l);
        const double jump = check_jump_free(l, sys.space, sol) / interface_flux_scale(l, sys.space, sol);
        return std::make_pair(std::move(sol), jump);
    };

    const SubdomainLayout matching = make_layout(g, {box2(0, 0, 0.5, 1), box2(0.5, 0, 1, 1)});
    const auto [sol, jump_m] = solve(matching);
    double diff2 = 0.0;
    for (std::size_t s = 0; s < matching.grids.size(); ++s) {
        const TensorGrid& sg = matching.grids[s];
        for (int K = 0; K < sg.num_cells(); ++K) {
            const Point c = sg.cell_center(K);
            const int G = g.cell_id({g.locate(0, c[0]), g.locate(1, c[1]), 0});
            diff2 += sg.cell_volume(K) * (sol.fields[s].phi.row(K) - mono.phi.row(G)).squaredNorm();
        }
    }
    const double rel = std::sqrt(diff2) / phi_l2_norm(g, mono);

    SubdomainLayout nonmatching = matching;
    nonmatching.grids[1] = refine_slabs(nonmatching.grids[1], {std::vector<int>{0, 2}, {1, 2, 5}, {}});
    const double jump_n = solve(nonmatching).second;
    return {rel <= 1e-8 && jump_m <= 1e-9 && jump_n <= 1e-9,
            "|phi_ddm - phi_mono|/|phi_mono| " + fmt("%.1e", rel) + ", relative jump matching " + fmt("%.1e", jump_m) +
                ", nonmatching " + fmt("%.1e", jump_n)};
}

Outcome interface_constants() {
    const TensorGrid g = unit_grid(2, 4);
    const SubdomainLayout l = make_layout(g, {box2(0, 0, 0.5, 1), box2(0.5, 0, 1, 1)});
    const InterfaceConstants m = check_interface_assumption(build_multiplier_space(l, 1));

    SubdomainLayout n = l;
    n.grids[0] = TensorGrid(2, {std::vector<double>{0, 0.5}, {0, 0.5, 1}, {}}, std::vector<int>(2, 0),
                            l.grids[0].boundary_regions());
    n.grids[1] = TensorGrid(2, {std::vector<double>{0.5, 1}, {0, 1.0 / 3.0, 2.0 / 3.0, 1}, {}}, std::vector<int>(3, 0),
                            l.grids[1].boundary_regions());
    const InterfaceConstants nm = check_interface_assumption(overlay_traces(n, 0));
    const bool ok = std::abs(m.beta - 1.0) <= 1e-10 && std::abs(m.gamma - 2.0) <= 1e-10 && nm.beta > 0.0 &&
                    nm.gamma > 0.0;
    return {ok, "matching beta " + fmt("%.12f", m.beta) + " gamma " + fmt("%.12f", m.gamma) + "; 2-vs-3 beta " +
                    fmt("%.4f", nm.beta) + " gamma " + fmt("%.4f", nm.gamma)};
}

struct Trajectory {
    std::vector<AmrIterationRecord> records;
    bool converged = false;
    std::string csv;
};

Trajectory run_preset(TakedaVariant v, int dim, int max_iterations = 0) {
    ProblemConfig c = takeda_preset(v, dim);
    if (max_iterations > 0) c.amr.max_iterations = max_iterations;
    const BuiltProblem b = build_problem(c);
    Trajectory t;
    if (c.mode == "mono") {
        const MonoAmrResult r = run_amr_mono(b.problem, c.amr);
        t.records = r.records;
        t.converged = r.converged;
        t.csv = format_csv(r.records);
    } else {
        const SubdomainLayout l = build_layout(b);
        const DdmAmrResult r = run_amr_ddm(l, b.problem.bundles, b.problem.source, c.amr);
        t.records = r.records;
        t.converged = r.converged;
        t.csv = format_csv(r.records, l.grids.size());
    }
    return t;
}

struct TrajectoryCheck {
    bool start = false, growth = true, decrease = true, robin = true, terminates = false;
    std::string cells, etas;
};

TrajectoryCheck check_trajectory(const Trajectory& t, long start_cells) {
    TrajectoryCheck c;
    c.start = !t.records.empty() && t.records.front().cells == start_cells;
    for (std::size_t i = 0; i < t.records.size(); ++i) {
        const auto& r = t.records[i];
        if (i > 0) {
            c.growth = c.growth && r.cells > t.records[i - 1].cells;
            c.decrease = c.decrease && r.max_eta < t.records[i - 1].max_eta;
            c.cells += " ";
            c.etas += " ";
        }
        c.robin = c.robin && r.max_bc_ratio < 1.0;
        c.cells += std::to_string(r.cells);
        c.etas += fmt("%.3g", r.max_eta);
    }
    c.terminates = t.converged && t.records.size() <= 6;
    return c;
}

std::string flags(const TrajectoryCheck& c) {
    auto yn = [](bool b) { return b ? "yes" : "NO"; };
    return std::string("start ") + yn(c.start) + ", growth " + yn(c.growth) + ", eta decreasing " + yn(c.decrease) +
           ", robin ratio < 1 " + yn(c.robin) + ", terminates in <= 6 " + yn(c.terminates);
}

Trajectory mono1_2d;
Trajectory ddm2_2d;

Outcome benchmark_trajectory() {
    // Full geometry: at most 6 solves are allowed, so the run is capped there.
    const Trajectory t3 = run_preset(TakedaVariant::Mono1, 3, 6);
    const TrajectoryCheck c3 = check_trajectory(t3, 125);
    mono1_2d = run_preset(TakedaVariant::Mono1, 2);
    const TrajectoryCheck c2 = check_trajectory(mono1_2d, 25);
    std::printf("     3D MONO-1 cells: %s (target 125 343 1000 2940 9660, not gating)\n", c3.cells.c_str());
    std::printf("     3D MONO-1 max eta: %s\n", c3.etas.c_str());
    std::printf("     2D MONO-1 cells: %s\n", c2.cells.c_str());
    std::printf("     2D MONO-1 max eta: %s\n", c2.etas.c_str());
    const bool ok3 = c3.start && c3.growth && c3.decrease && c3.robin && c3.terminates;
    const bool ok2 = c2.start && c2.growth && c2.decrease && c2.robin && c2.terminates;
    return {ok3 && ok2, "3D: " + flags(c3) + "; 2D: " + flags(c2)};
}

Outcome ddm_advantage() {
    ddm2_2d = run_preset(TakedaVariant::Ddm2, 2);
    if (mono1_2d.records.empty()) mono1_2d = run_preset(TakedaVariant::Mono1, 2);
    const long ddm_cells = ddm2_2d.records.back().cells;
    const long mono_cells = mono1_2d.records.back().cells;
    const bool ok = ddm2_2d.converged && mono1_2d.converged && 2 * ddm_cells <= mono_cells;
    return {ok, std::string("DDM-2 ") + (ddm2_2d.converged ? "terminated" : "did not terminate") + " with " +
                    std::to_string(ddm_cells) + " cells, MONO-1 " +
                    (mono1_2d.converged ? "terminated" : "did not terminate") + " with " + std::to_string(mono_cells) +
                    " cells"};
}

Outcome determinism() {
    const Trajectory m = run_preset(TakedaVariant::Mono1, 2);
    const Trajectory d = run_preset(TakedaVariant::Ddm2, 2);
    const bool ok = !m.csv.empty() && m.csv == mono1_2d.csv && d.csv == ddm2_2d.csv;
    return {ok, std::string("2D MONO-1 CSV ") + (m.csv == mono1_2d.csv ? "identical" : "differs") + ", 2D DDM-2 CSV " +
                    (d.csv == ddm2_2d.csv ? "identical" : "differs")};
}

}  // namespace

int main() {
    report(1, "angular constants", angular_constants);
    report(2, "Robin matrices", robin_matrices);
    report(3, "T-coercivity probe", coercivity);
    report(4, "MMS convergence", mms_convergence);
    report(5, "reliability", reliability);
    report(6, "efficiency spread", efficiency);
    report(7, "DDM equivalence", ddm_equivalence);
    report(8, "interface constants", interface_constants);
    report(9, "benchmark trajectory", benchmark_trajectory);
    report(10, "DDM advantage", ddm_advantage);
    report(11, "determinism", determinism);
    std::printf("%d of 11 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
