#pragma once

#include "spn/cartesian_mesh.hpp"
#include "spn/spn_coefficients.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <vector>

namespace spn {

/// Per-cell source, rows = cells, columns = components (g * nhat + i).
using SourceField = Eigen::MatrixXd;

/// Unknown numbering. Flux dofs come first (active facet major, component minor), then the
/// scalar dofs (cell major, component minor). Neumann facets are eliminated.
struct DofLayout {
    int ncomp = 1;
    int num_cells = 0;
    std::vector<int> facet_slot;  // facet -> active index, -1 when eliminated
    int active_facets = 0;

    int flux_dof(int facet, int comp) const { return facet_slot[facet] * ncomp + comp; }
    int phi_dof(int cell, int comp) const { return active_facets * ncomp + cell * ncomp + comp; }
    int num_flux_dofs() const { return active_facets * ncomp; }
    int size() const { return (active_facets + num_cells) * ncomp; }
};

DofLayout make_dof_layout(const TensorGrid& grid, int ncomp);

/// Discrete solution. `flux(f, c)` is the normal trace on facet f along +e_axis.
struct MixedField {
    Eigen::MatrixXd flux;  // num_facets x ncomp
    Eigen::MatrixXd phi;   // num_cells x ncomp

    int components() const { return static_cast<int>(phi.cols()); }
};

MixedField zero_field(const TensorGrid& grid, int ncomp);

struct AssembledSystem {
    Eigen::SparseMatrix<double> matrix;
    Eigen::VectorXd rhs;
    DofLayout layout;
};

/// Closed-form RT0/Q0 element matrices on a box cell.
struct LocalRtn0 {
    std::array<Eigen::Matrix2d, 3> mass;  // per axis, (low, high) facet basis functions
    std::array<double, 3> area{};         // facet area per axis
    double volume = 0.0;
    /// Integral over the cell of div of the (low, high) basis on `axis` = (-area, +area).
};

LocalRtn0 local_rtn0_matrices(int dim, const std::array<double, 3>& extents);

/// Assembly of the mixed bilinear form plus (S_f, psi). Interface facets are free and carry no
/// boundary term. Throws std::out_of_range for a material without bundle.
AssembledSystem assemble_mono(const TensorGrid& grid, const std::vector<SpnMatrixBundle>& bundles,
                              const SourceField& source);

/// Appends the triplets of assemble_mono shifted by `offset` (used by the multi-domain assembly).
void append_mono_triplets(const TensorGrid& grid, const std::vector<SpnMatrixBundle>& bundles, const DofLayout& layout,
                          int offset, std::vector<Eigen::Triplet<double>>& triplets);
void append_mono_rhs(const TensorGrid& grid, const SourceField& source, const DofLayout& layout, int offset,
                     Eigen::VectorXd& rhs);

struct LinearSolve {
    Eigen::VectorXd x;
    double residual = 0.0;  // |Ax - b| / |b| (absolute when b = 0)
};

/// Sparse LU with COLAMD ordering and up to three steps of iterative refinement. Throws
/// SingularSystemError when factorization fails or the residual stays above 1e-10.
LinearSolve solve_sparse(const Eigen::SparseMatrix<double>& a, const Eigen::VectorXd& b);

MixedField unpack_field(const TensorGrid& grid, const DofLayout& layout, const Eigen::VectorXd& x, int offset = 0);
Eigen::VectorXd pack_field(const DofLayout& layout, const MixedField& field);

MixedField solve_system(const AssembledSystem& sys, const TensorGrid& grid, double* residual = nullptr);

/// Convenience: assemble and solve.
MixedField solve_mono(const TensorGrid& grid, const std::vector<SpnMatrixBundle>& bundles, const SourceField& source,
                      double* residual = nullptr);

/// Flux value p(x) (dim x ncomp) at reference coordinates xi in [0,1]^d of `cell`.
Eigen::MatrixXd evaluate_flux(const TensorGrid& grid, const MixedField& field, int cell, const Point& xi);

/// Constant divergence of p on `cell` (ncomp).
Eigen::VectorXd cell_divergence(const TensorGrid& grid, const MixedField& field, int cell);

/// L2 norm of phi_h over all components.
double phi_l2_norm(const TensorGrid& grid, const MixedField& field);

/// Squared S-norm: (do p,p) + (de phi,phi) + sum_K do_max h_K^2 |div p|^2 + sum_Robin do_max h_perp
/// |Gamma_tilde^{1/2} p.n|^2.
double s_norm_squared(const TensorGrid& grid, const std::vector<SpnMatrixBundle>& bundles, const MixedField& field);
double s_norm(const TensorGrid& grid, const std::vector<SpnMatrixBundle>& bundles, const MixedField& field);

/// Squared X-norm: |p|^2 + |div p|^2 + |p.n|^2 on Robin facets + |phi|^2.
double x_norm_squared(const TensorGrid& grid, const MixedField& field);

/// The T map of the coercivity argument: (q, psi) = (-p, (phi + Te^{-T} H^T div p) / 2).
MixedField t_map(const TensorGrid& grid, const std::vector<SpnMatrixBundle>& bundles, const MixedField& field);

struct CoercivityReport {
    int trials = 0;
    int violations = 0;
    double alpha = 0.0;
    double min_ratio = 0.0;  // min over nonzero trials of c(z, Tz) / |z|_X^2
};

/// Evaluates c(z, Tz) >= alpha |z|_X^2 for random discrete z. `form` provides the bilinear form
/// (assembled with `form_bundles`), the T map uses `map_bundles`.
CoercivityReport t_coercivity_check(const TensorGrid& grid, const std::vector<SpnMatrixBundle>& form_bundles,
                                    const std::vector<SpnMatrixBundle>& map_bundles, double alpha, int trials,
                                    std::uint64_t seed);

/// Same with the form, map and alpha all taken from `bundles`.
CoercivityReport t_coercivity_check(const TensorGrid& grid, const std::vector<SpnMatrixBundle>& bundles, int trials,
                                    std::uint64_t seed);

/// Fills a field with uniform random values in [-1, 1] (eliminated facets stay 0).
MixedField random_field(const TensorGrid& grid, int ncomp, std::uint64_t seed);

}  // namespace spn
