#pragma once

#include "spn/cartesian_mesh.hpp"
#include "spn/ddm.hpp"
#include "spn/estimators.hpp"
#include "spn/mixed_fem.hpp"
#include "spn/reconstruction.hpp"
#include "spn/spn_coefficients.hpp"

#include <array>
#include <functional>
#include <optional>
#include <vector>

namespace spn {

struct AmrConfig {
    std::vector<double> theta{0.5};  // one value (mono) or one per subdomain
    double eps_rel = 4e-3;
    int max_iterations = 10;  // maximum number of solves
};

/// Throws std::invalid_argument when theta is outside (0, 1] or eps_rel <= 0.
void validate(const AmrConfig& config);

struct AmrIterationRecord {
    int iteration = 0;
    long cells = 0;
    double max_eta = 0.0;            // max_K eta_K
    double max_eta_boundary = 0.0;   // max eta_K over cells owning a Robin facet
    double max_eta_bc = 0.0;         // max_F eta_bc,F
    double max_bc_ratio = 0.0;       // max_F eta_bc,F / eta_K_F
    double phi_norm = 0.0;           // |phi_h|_0
    double eps_amr = 0.0;            // eps_rel |phi_h|_0
    std::optional<double> rel_error;                 // relative S-norm error, when a reference is given
    std::vector<std::optional<double>> subdomain_max;  // ddm only; empty optional = converged
};

using MarkedSlabs = std::array<std::vector<int>, 3>;

/// Per axis: slab aggregates eta(slab)^2 = sum of eta_K^2 over the slab; the smallest set (greedy in
/// descending order, ties to the lower index) with root-sum-square >= theta * eta(T_h).
MarkedSlabs mark_direction(const TensorGrid& grid, const Eigen::VectorXd& eta_K, double theta);

/// Slab aggregates eta(slab)^2 along one axis.
std::vector<double> slab_aggregates(const TensorGrid& grid, const Eigen::VectorXd& eta_K, int axis);

using SourceFunction = std::function<SourceField(const TensorGrid&)>;

struct AmrProblem {
    TensorGrid grid;
    std::vector<SpnMatrixBundle> bundles;
    SourceFunction source;
};

struct MonoObserver {
    std::function<void(const AmrIterationRecord&, const TensorGrid&, const MixedField&, const NodalFluxField&,
                       const EstimatorField&)>
        on_iteration;
    std::function<double(const TensorGrid&, const MixedField&)> relative_error;
};

struct MonoAmrResult {
    TensorGrid grid;
    MixedField field;
    std::vector<AmrIterationRecord> records;
    std::vector<MarkedSlabs> marks;  // one per refinement
    bool converged = false;
};

MonoAmrResult run_amr_mono(const AmrProblem& problem, const AmrConfig& config, const MonoObserver& observer = {});

struct DdmObserver {
    std::function<void(const AmrIterationRecord&, const SubdomainLayout&, const MultiDomainSolution&,
                       const MultiDomainNodalField&, const std::vector<EstimatorField>&)>
        on_iteration;
    std::function<double(const SubdomainLayout&, const MultiDomainSolution&)> relative_error;
};

struct DdmAmrResult {
    SubdomainLayout layout;
    MultiDomainSolution solution;
    std::vector<AmrIterationRecord> records;
    std::vector<std::vector<bool>> refined;  // per iteration, per subdomain
    bool converged = false;
};

/// Per-subdomain marking with theta[s]; subdomains whose local max eta_K <= eps_AMR are left alone.
DdmAmrResult run_amr_ddm(const SubdomainLayout& layout, const std::vector<SpnMatrixBundle>& bundles,
                         const SourceFunction& source, const AmrConfig& config, const DdmObserver& observer = {});

/// Record fields derived from one grid's estimators (cells, maxima and Robin ratio).
void accumulate_record(const TensorGrid& grid, const EstimatorField& est, AmrIterationRecord& record);

}  // namespace spn
