// Command-line driver: run AMR loops, single solves, config checks and benchmark presets.

#include "spn/amr.hpp"
#include "spn/bench_io.hpp"
#include "spn/ddm.hpp"
#include "spn/errors.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

namespace {

using namespace spn;

struct Overrides {
    std::string config;
    std::string mode;
    std::vector<double> theta;
    std::optional<double> eps_rel;
    std::optional<int> max_iter;
    std::string out;
    bool vtk = false;
    int reference = 0;  // uniform refinements of the initial grid for the reference solution
};

ProblemConfig load_with_overrides(const Overrides& o) {
    ProblemConfig c = load_config(o.config);
    if (!o.mode.empty()) c.mode = o.mode;
    if (!o.theta.empty()) {
        c.amr.theta = o.theta;
        if (c.mode == "ddm" && o.theta.size() == c.subdomains.size()) {
            for (std::size_t s = 0; s < c.subdomains.size(); ++s) c.subdomains[s].theta = o.theta[s];
        }
    }
    if (o.eps_rel) c.amr.eps_rel = *o.eps_rel;
    if (o.max_iter) c.amr.max_iterations = *o.max_iter;
    if (!o.out.empty()) c.output_dir = o.out;
    if (c.mode == "ddm" && c.amr.theta.size() != c.subdomains.size() && c.amr.theta.size() != 1) {
        c.amr.theta.clear();
        for (const auto& s : c.subdomains) c.amr.theta.push_back(s.theta);
    }
    validate(c.amr);
    return c;
}

void print_record(const AmrIterationRecord& r) {
    std::printf("iter %2d  cells %7ld  max_eta %.4e  eps %.4e  bc/eta %.3f", r.iteration, r.cells, r.max_eta, r.eps_amr,
                r.max_bc_ratio);
    if (r.rel_error) std::printf("  rel_err %.4e", *r.rel_error);
    std::printf("\n");
}

int cmd_run(const Overrides& o) {
    const ProblemConfig c = load_with_overrides(o);
    const BuiltProblem built = build_problem(c);
    std::filesystem::create_directories(c.output_dir);
    const std::string stem = c.output_dir + "/" + (c.name.empty() ? std::string("run") : c.name);

    std::optional<TensorGrid> ref_grid;
    MixedField ref_field;
    if (o.reference > 0) {
        ref_grid = built.problem.grid;
        for (int i = 0; i < o.reference; ++i) ref_grid = refine_uniform(*ref_grid);
        ref_field = solve_mono(*ref_grid, built.problem.bundles, built.problem.source(*ref_grid));
    }

    if (c.mode == "mono") {
        MonoObserver obs;
        obs.on_iteration = [&](const AmrIterationRecord& r, const TensorGrid& g, const MixedField& f,
                               const NodalFluxField& recon, const EstimatorField& est) {
            print_record(r);
            if (o.vtk) {
                export_vtk(g, f, &recon, {{"eta_K", est.eta_K}}, stem + "_" + std::to_string(r.iteration) + ".vtk");
            }
        };
        if (ref_grid) {
            obs.relative_error = [&](const TensorGrid& g, const MixedField& f) {
                return relative_s_error(g, f, *ref_grid, ref_field, built.problem.bundles);
            };
        }
        const MonoAmrResult res = run_amr_mono(built.problem, c.amr, obs);
        export_csv(res.records, stem + ".csv");
        std::printf("%s after %zu solves; wrote %s.csv\n", res.converged ? "converged" : "stopped", res.records.size(),
                    stem.c_str());
        return 0;
    }

    const SubdomainLayout layout = build_layout(built);
    DdmObserver obs;
    obs.on_iteration = [&](const AmrIterationRecord& r, const SubdomainLayout& l, const MultiDomainSolution& sol,
                           const MultiDomainNodalField& recon, const std::vector<EstimatorField>& ests) {
        print_record(r);
        if (!o.vtk) return;
        for (std::size_t s = 0; s < l.grids.size(); ++s) {
            export_vtk(l.grids[s], sol.fields[s], &recon.per_subdomain[s], {{"eta_K", ests[s].eta_K}},
                       stem + "_" + std::to_string(r.iteration) + "_sub" + std::to_string(s + 1) + ".vtk");
        }
    };
    if (ref_grid) {
        obs.relative_error = [&](const SubdomainLayout& l, const MultiDomainSolution& sol) {
            double err2 = 0.0;
            double ref2 = 0.0;
            for (std::size_t s = 0; s < l.grids.size(); ++s) {
                const SErrorParts p = s_error_parts(l.grids[s], sol.fields[s], *ref_grid, ref_field, built.problem.bundles);
                err2 += p.error2;
                ref2 += p.reference2;
            }
            return ref2 > 0.0 ? std::sqrt(err2 / ref2) : 0.0;
        };
    }
    const DdmAmrResult res = run_amr_ddm(layout, built.problem.bundles, built.problem.source, c.amr, obs);
    export_csv(res.records, stem + ".csv", layout.grids.size());
    std::printf("%s after %zu solves; wrote %s.csv\n", res.converged ? "converged" : "stopped", res.records.size(),
                stem.c_str());
    return 0;
}

int cmd_solve(const Overrides& o) {
    const ProblemConfig c = load_with_overrides(o);
    const BuiltProblem built = build_problem(c);
    const SourceField src = built.problem.source(built.problem.grid);
    double residual = 0.0;
    const MixedField f = solve_mono(built.problem.grid, built.problem.bundles, src, &residual);
    const NodalFluxField recon = average_reconstruct(built.problem.grid, built.problem.bundles, f);
    const EstimatorField est = compute_estimators(built.problem.grid, built.problem.bundles, src, f, recon);
    std::printf("cells %d  residual %.3e  |phi|_0 %.6e  |(p,phi)|_S %.6e  eta %.6e\n", built.problem.grid.num_cells(),
                residual, phi_l2_norm(built.problem.grid, f), s_norm(built.problem.grid, built.problem.bundles, f),
                est.total());
    if (o.vtk) {
        std::filesystem::create_directories(c.output_dir);
        const std::string path = c.output_dir + "/" + (c.name.empty() ? std::string("solve") : c.name) + ".vtk";
        export_vtk(built.problem.grid, f, &recon, {{"eta_K", est.eta_K}}, path);
        std::printf("wrote %s\n", path.c_str());
    }
    return 0;
}

// Manufactured-solution convergence and the coercivity probe on constant coefficients.
bool verify_discretization() {
    bool ok = true;
    for (int order : {1, 3}) {
        double prev_phi = 0.0;
        double prev_flux = 0.0;
        for (int n : {8, 16, 32}) {
            const MmsProblem p = mms_problem(2, 2, order, n);
            double residual = 0.0;
            const MixedField f = solve_mono(p.grid, p.bundles, p.source(p.grid), &residual);
            const double ephi = l2_error_phi(p.grid, f, p.phi);
            const double eflux = l2_error_flux(p.grid, f, p.flux);
            std::printf("mms SP%d n %2d  err_phi %.3e", order, n, ephi);
            if (prev_phi > 0.0) std::printf(" (order %.2f)", std::log2(prev_phi / ephi));
            std::printf("  err_p %.3e", eflux);
            if (prev_flux > 0.0) std::printf(" (order %.2f)", std::log2(prev_flux / eflux));
            std::printf("  residual %.1e\n", residual);
            if (prev_phi > 0.0) ok = ok && std::log2(prev_phi / ephi) >= 0.9 && std::log2(prev_flux / eflux) >= 0.9;
            ok = ok && residual <= 1e-10;
            prev_phi = ephi;
            prev_flux = eflux;
        }
        const MmsProblem p = mms_problem(2, 2, order, 4);
        const CoercivityReport r = t_coercivity_check(p.grid, p.bundles, 100, 1);
        std::printf("coercivity SP%d: %d violations in %d trials (alpha %.3e)\n", order, r.violations, r.trials, r.alpha);
        ok = ok && r.violations == 0;
    }
    return ok;
}

int cmd_verify(const Overrides& o) {
    bool ok = verify_discretization();
    if (o.config.empty()) {
        std::printf("%s\n", ok ? "verification ok" : "verification FAILED");
        return ok ? 0 : 1;
    }
    const ProblemConfig c = load_with_overrides(o);
    const BuiltProblem built = build_problem(c);
    for (std::size_t m = 0; m < built.problem.bundles.size(); ++m) {
        const AssumptionReport r = validate_coefficient_assumptions(built.problem.bundles[m]);
        std::printf("%-12s alpha %.4e  removal %s  coupling %s  positivity %s\n", built.material_names[m].c_str(), r.alpha,
                    r.removal_positive ? "ok" : "FAIL", r.coupling_bounded ? "ok" : "FAIL",
                    r.positivity ? "ok" : "FAIL");
        ok = ok && r.ok();
    }
    std::printf("grid: %d cells, %d facets\n", built.problem.grid.num_cells(), built.problem.grid.num_facets());
    if (c.mode == "ddm") {
        const SubdomainLayout layout = build_layout(built);
        const MultiplierSpace space = build_multiplier_space(layout, built.problem.bundles.front().components());
        const InterfaceConstants ic = check_interface_assumption(space);
        std::printf("subdomains %zu  interfaces %zu  beta %.4f  gamma %.4f\n", layout.grids.size(),
                    layout.interfaces.size(), ic.beta, ic.gamma);
        ok = ok && ic.beta > 0.0 && ic.gamma > 0.0;
    }
    std::printf("%s\n", ok ? "verification ok" : "verification FAILED");
    return ok ? 0 : 1;
}

int cmd_preset(const std::string& name, int dim, const std::string& out) {
    static const std::map<std::string, TakedaVariant> variants{{"MONO-1", TakedaVariant::Mono1},
                                                               {"MONO-2", TakedaVariant::Mono2},
                                                               {"DDM-1", TakedaVariant::Ddm1},
                                                               {"DDM-2", TakedaVariant::Ddm2}};
    const auto it = variants.find(name);
    if (it == variants.end()) throw std::invalid_argument("unknown preset " + name);
    const std::string text = emit_config(takeda_preset(it->second, dim));
    if (out.empty()) {
        std::cout << text;
    } else {
        std::ofstream(out) << text;
    }
    return 0;
}

void add_common(CLI::App* cmd, Overrides& o, bool config_required = true) {
    auto* config = cmd->add_option("--config,-c", o.config, "problem configuration (JSON)")->check(CLI::ExistingFile);
    if (config_required) config->required();
    cmd->add_option("--mode", o.mode, "override mode")->check(CLI::IsMember({"mono", "ddm"}));
    cmd->add_option("--theta", o.theta, "override marking parameter(s)");
    cmd->add_option("--eps-rel", o.eps_rel, "override relative tolerance");
    cmd->add_option("--max-iter", o.max_iter, "override maximum number of solves");
    cmd->add_option("--out", o.out, "override output directory");
    cmd->add_flag("--vtk", o.vtk, "write VTK files");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mixed SPN solver with a posteriori estimators and adaptive refinement"};
    app.require_subcommand(1);
    Overrides run_o, solve_o, verify_o;
    std::string preset_name;
    std::string preset_out;
    int preset_dim = 3;

    auto* run = app.add_subcommand("run", "adaptive loop; writes a CSV history");
    add_common(run, run_o);
    run->add_option("--reference", run_o.reference, "uniform refinements for a reference solution (0: none)");
    auto* solve = app.add_subcommand("solve", "single solve on the initial grid");
    add_common(solve, solve_o);
    auto* verify = app.add_subcommand("verify", "MMS and coercivity checks; with --config also its assumptions");
    add_common(verify, verify_o, false);
    auto* preset = app.add_subcommand("preset", "print a benchmark configuration");
    preset->add_option("name", preset_name, "MONO-1, MONO-2, DDM-1 or DDM-2")->required();
    preset->add_option("--dim", preset_dim, "3 (full) or 2 (reduced analogue)")->check(CLI::IsMember({2, 3}));
    preset->add_option("--out,-o", preset_out, "output file (default stdout)");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*run) return cmd_run(run_o);
        if (*solve) return cmd_solve(solve_o);
        if (*verify) return cmd_verify(verify_o);
        if (*preset) return cmd_preset(preset_name, preset_dim, preset_out);
    } catch (const ConfigError& e) {
        std::cerr << "invalid configuration:\n";
        for (const auto& i : e.issues()) std::cerr << "  " << i << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
