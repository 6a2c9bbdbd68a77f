#include "spn/amr.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace spn {

void validate(const AmrConfig& config) {
    if (config.theta.empty()) throw std::invalid_argument("theta must be given");
    for (double t : config.theta) {
        if (!(t > 0.0 && t <= 1.0)) throw std::invalid_argument("theta must lie in (0, 1]");
    }
    if (!(config.eps_rel > 0.0)) throw std::invalid_argument("eps_rel must be positive");
    if (config.max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
}

std::vector<double> slab_aggregates(const TensorGrid& grid, const Eigen::VectorXd& eta_K, int axis) {
    std::vector<double> agg(grid.intervals(axis), 0.0);
    for (int K = 0; K < grid.num_cells(); ++K) agg[grid.cell_index(K)[axis]] += eta_K(K) * eta_K(K);
    return agg;
}

MarkedSlabs mark_direction(const TensorGrid& grid, const Eigen::VectorXd& eta_K, double theta) {
    MarkedSlabs marked;
    for (int a = 0; a < grid.dim(); ++a) {
        const std::vector<double> agg = slab_aggregates(grid, eta_K, a);
        std::vector<int> order(agg.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return agg[x] > agg[y]; });
        // Total summed in the same order as the greedy prefix sums, so theta = 1 stops exactly.
        double total = 0.0;
        for (int i : order) total += agg[i];
        if (!(total > 0.0)) continue;
        const double target = theta * std::sqrt(total);
        double sum = 0.0;
        for (int i : order) {
            if (std::sqrt(sum) >= target) break;
            sum += agg[i];
            marked[a].push_back(i);
        }
        std::sort(marked[a].begin(), marked[a].end());
    }
    return marked;
}

void accumulate_record(const TensorGrid& grid, const EstimatorField& est, AmrIterationRecord& r) {
    r.cells += grid.num_cells();
    if (est.eta_K.size() > 0) r.max_eta = std::max(r.max_eta, est.eta_K.maxCoeff());
    for (int f = 0; f < grid.num_facets(); ++f) {
        if (grid.facet_kind(f) != BoundaryKind::Robin) continue;
        const int K = grid.facet(f).owner();
        r.max_eta_boundary = std::max(r.max_eta_boundary, est.eta_K(K));
        r.max_eta_bc = std::max(r.max_eta_bc, est.eta_bc(f));
        if (est.eta_K(K) > 0.0) r.max_bc_ratio = std::max(r.max_bc_ratio, est.eta_bc(f) / est.eta_K(K));
    }
}

MonoAmrResult run_amr_mono(const AmrProblem& problem, const AmrConfig& config, const MonoObserver& observer) {
    validate(config);
    MonoAmrResult res;
    res.grid = problem.grid;
    for (int it = 0; it < config.max_iterations; ++it) {
        const SourceField source = problem.source(res.grid);
        res.field = solve_mono(res.grid, problem.bundles, source);
        const NodalFluxField recon = average_reconstruct(res.grid, problem.bundles, res.field);
        const EstimatorField est = compute_estimators(res.grid, problem.bundles, source, res.field, recon);

        AmrIterationRecord rec;
        rec.iteration = it;
        accumulate_record(res.grid, est, rec);
        rec.phi_norm = phi_l2_norm(res.grid, res.field);
        rec.eps_amr = config.eps_rel * rec.phi_norm;
        if (observer.relative_error) rec.rel_error = observer.relative_error(res.grid, res.field);
        res.records.push_back(rec);
        if (observer.on_iteration) observer.on_iteration(rec, res.grid, res.field, recon, est);

        if (rec.max_eta <= rec.eps_amr) {
            res.converged = true;
            break;
        }
        if (it + 1 == config.max_iterations) break;
        const MarkedSlabs marks = mark_direction(res.grid, est.eta_K, config.theta.front());
        res.marks.push_back(marks);
        res.grid = refine_slabs(res.grid, marks);
    }
    return res;
}

DdmAmrResult run_amr_ddm(const SubdomainLayout& layout, const std::vector<SpnMatrixBundle>& bundles,
                         const SourceFunction& source, const AmrConfig& config, const DdmObserver& observer) {
    validate(config);
    const std::size_t nsub = layout.grids.size();
    if (config.theta.size() != 1 && config.theta.size() != nsub) {
        throw std::invalid_argument("need one theta or one per subdomain");
    }
    auto theta_of = [&](std::size_t s) { return config.theta.size() == 1 ? config.theta.front() : config.theta[s]; };

    DdmAmrResult res;
    res.layout = layout;
    for (int it = 0; it < config.max_iterations; ++it) {
        std::vector<SourceField> sources;
        for (const auto& g : res.layout.grids) sources.push_back(source(g));
        const DdmSystem sys = assemble_ddm(res.layout, bundles, sources);
        res.solution = solve_ddm(sys, res.layout);
        const MultiDomainNodalField recon = average_reconstruct_multidomain(res.layout, bundles, res.solution.fields);

        AmrIterationRecord rec;
        rec.iteration = it;
        std::vector<EstimatorField> ests;
        std::vector<double> local_max(nsub, 0.0);
        double phi2 = 0.0;
        for (std::size_t s = 0; s < nsub; ++s) {
            const TensorGrid& g = res.layout.grids[s];
            // Neighbours inside the own subdomain grid are exactly N*(K).
            ests.push_back(compute_estimators(g, bundles, sources[s], res.solution.fields[s], recon.per_subdomain[s]));
            accumulate_record(g, ests.back(), rec);
            local_max[s] = ests.back().eta_K.maxCoeff();
            const double n = phi_l2_norm(g, res.solution.fields[s]);
            phi2 += n * n;
        }
        rec.phi_norm = std::sqrt(phi2);
        rec.eps_amr = config.eps_rel * rec.phi_norm;
        bool all_converged = true;
        std::vector<bool> refine(nsub, false);
        for (std::size_t s = 0; s < nsub; ++s) {
            if (local_max[s] > rec.eps_amr) {
                rec.subdomain_max.emplace_back(local_max[s]);
                refine[s] = true;
                all_converged = false;
            } else {
                rec.subdomain_max.emplace_back(std::nullopt);
            }
        }
        if (observer.relative_error) rec.rel_error = observer.relative_error(res.layout, res.solution);
        res.records.push_back(rec);
        if (observer.on_iteration) observer.on_iteration(rec, res.layout, res.solution, recon, ests);

        if (all_converged) {
            res.converged = true;
            break;
        }
        if (it + 1 == config.max_iterations) break;
        for (std::size_t s = 0; s < nsub; ++s) {
            if (!refine[s]) continue;
            const MarkedSlabs marks = mark_direction(res.layout.grids[s], ests[s].eta_K, theta_of(s));
            res.layout.grids[s] = refine_slabs(res.layout.grids[s], marks);
        }
        res.refined.push_back(refine);
    }
    return res;
}

}  // namespace spn
