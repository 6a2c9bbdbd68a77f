#pragma once

#include "spn/cartesian_mesh.hpp"
#include "spn/mixed_fem.hpp"
#include "spn/reconstruction.hpp"
#include "spn/spn_coefficients.hpp"

#include <Eigen/Dense>

#include <vector>

namespace spn {

enum class IndicatorMode { Mono, Ddm };

struct EstimatorField {
    Eigen::VectorXd eta_r;   // per cell
    Eigen::VectorXd eta_f;   // per cell
    Eigen::VectorXd eta_bc;  // per facet, zero off the Robin boundary
    Eigen::VectorXd eta_K;   // aggregated local indicator per cell

    /// (sum_K eta_K^2)^{1/2}
    double total() const { return eta_K.norm(); }
};

/// |de^{-1/2}(S_f - H^T div p_h - Te phi~)|_K. Throws AssumptionViolation if de has a zero entry.
Eigen::VectorXd residual_estimator(const TensorGrid& grid, const std::vector<SpnMatrixBundle>& bundles,
                                   const SourceField& source, const MixedField& field, const NodalFluxField& recon);

/// Residual estimator with the weight replaced by the identity on cells where de is not positive.
Eigen::VectorXd delta_star_residual(const TensorGrid& grid, const std::vector<SpnMatrixBundle>& bundles,
                                    const SourceField& source, const MixedField& field, const NodalFluxField& recon);

/// |do^{-1/2}(To p_h + H grad phi~)|_K.
Eigen::VectorXd flux_estimator(const TensorGrid& grid, const std::vector<SpnMatrixBundle>& bundles,
                               const MixedField& field, const NodalFluxField& recon);

/// (do_max h_perp)^{-1/2} |Gamma_tilde^{-1/2}(H phi~ - Gamma_tilde p.n)|_F per facet (0 off Robin).
Eigen::VectorXd robin_bc_estimator(const TensorGrid& grid, const std::vector<SpnMatrixBundle>& bundles,
                                   const MixedField& field, const NodalFluxField& recon);

/// eta_K^2 = eta_r^2 + sum over neighbours of eta_f^2 + sum over Robin facets of K of eta_bc^2. In
/// Ddm mode only neighbours whose centre lies in the subdomain box of K count; `subdomains` is
/// required then (std::invalid_argument otherwise).
Eigen::VectorXd local_indicator(const TensorGrid& grid, const Eigen::VectorXd& eta_r, const Eigen::VectorXd& eta_f,
                                const Eigen::VectorXd& eta_bc, IndicatorMode mode,
                                const std::vector<Box>* subdomains = nullptr);

/// All estimators plus the mono-mode local indicator.
EstimatorField compute_estimators(const TensorGrid& grid, const std::vector<SpnMatrixBundle>& bundles,
                                  const SourceField& source, const MixedField& field, const NodalFluxField& recon);

/// Right-hand side of the local reliability bound for `cell`:
/// (eta_r,K^2 + sum_{N(K)} eta_f^2 + sum_{Robin F of K} eta_bc^2)^{1/2}.
double reliability_bound(const TensorGrid& grid, const EstimatorField& est, int cell);

/// Lower bound of the local dual norm of the error at `cell`: supremum of the residual functional over
/// a discrete test space with |xi|_S <= 1 (psi on K, q on the patch N(K), both on a 2^levels tensor
/// refinement). q.n vanishes on the patch boundary, on Neumann and interface facets and on Robin
/// facets not belonging to K.
double approximate_local_dual_norm(const TensorGrid& grid, const std::vector<SpnMatrixBundle>& bundles,
                                   const SourceField& source, const MixedField& field, const NodalFluxField& recon,
                                   int cell, int levels);

}  // namespace spn
