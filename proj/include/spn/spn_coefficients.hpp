#pragma once

#include <Eigen/Dense>

#include <vector>

namespace spn {

/// Angular constants of the SP_N model of odd order N.
struct AngularConstants {
    int order = 1;
    int nhat = 1;
    std::vector<double> alpha;  // alpha_0 .. alpha_N
    std::vector<double> t;      // t_m = alpha_m^2 / (2m+1)
};

AngularConstants compute_angular_constants(int order);

/// Cross sections of one material, in cm^-1.
/// `sigma_s[m](from, to)` is the m-th Legendre moment of the scattering from group `from` to
/// group `to`. Moments beyond `sigma_s.size()` are zero.
struct MaterialCrossSections {
    Eigen::VectorXd sigma_t;
    std::vector<Eigen::MatrixXd> sigma_s;

    int groups() const { return static_cast<int>(sigma_t.size()); }
    double scatter(int moment, int from, int to) const;
    double removal(int moment, int group) const { return sigma_t(group) - scatter(moment, group, group); }
};

struct CrossSectionSet {
    int groups = 0;
    std::vector<MaterialCrossSections> materials;  // indexed by material id
};

/// Extreme eigen/singular value bounds. Quadratic-form bounds use the symmetric part; the H^T
/// bounds are inf/sup of |H^T X|^2 / |X|^2.
struct CoefficientBounds {
    double to_min = 0.0;
    double te_min = 0.0;
    double te_inv_min = 0.0;
    double to_inv_min = 0.0;
    double gamma_tilde_min = 0.0;
    double gamma_tilde_max = 0.0;
    double ht_min = 0.0;
    double ht_max = 0.0;
};

/// All coefficient matrices of one material. Components are ordered group-major:
/// index = g * nhat + i.
struct SpnMatrixBundle {
    int groups = 1;
    int nhat = 1;
    Eigen::MatrixXd H;
    Eigen::MatrixXd Te, To;
    Eigen::MatrixXd Te_inv, To_inv;
    Eigen::MatrixXd Gamma_e, Gamma_e_inv;
    Eigen::MatrixXd Gamma_tilde;
    Eigen::MatrixXd D;  // H^T To^{-1} H
    CoefficientBounds bounds;

    int components() const { return groups * nhat; }
};

/// The nhat x nhat upper bidiagonal block.
Eigen::MatrixXd h_hat(int nhat);

/// Fills H, Te, To and their inverses. Throws AssumptionViolation if Te or To is singular.
SpnMatrixBundle assemble_parity_matrices(const MaterialCrossSections& xs, const AngularConstants& ac);

struct RobinMatrices {
    Eigen::MatrixXd gamma_hat;    // nhat x nhat
    Eigen::MatrixXd gamma_e;      // block diagonal over groups
    Eigen::MatrixXd gamma_tilde;  // H Gamma_e^{-1} H^T
};

RobinMatrices assemble_robin_matrices(const AngularConstants& ac, int groups);

/// Complete bundle: parity, Robin matrices, D and bounds.
SpnMatrixBundle build_bundle(const MaterialCrossSections& xs, const AngularConstants& ac);
std::vector<SpnMatrixBundle> build_bundles(const CrossSectionSet& xs, const AngularConstants& ac);

CoefficientBounds compute_bounds(const SpnMatrixBundle& bundle);

struct AssumptionReport {
    bool removal_positive = false;  // (i)
    bool coupling_bounded = false;  // (ii)
    bool positivity = false;        // (iii): sym(To^{-1}) and sym(Te) positive definite
    double epsilon_required = 0.0;
    CoefficientBounds bounds;
    double alpha = 0.0;

    bool ok() const { return removal_positive && coupling_bounded && positivity && alpha > 0.0; }
};

AssumptionReport validate_coefficient_assumptions(const SpnMatrixBundle& bundle);

/// min{(To)_*, 1/2 (H^T)_* (Te^{-1})_*, (Gamma_tilde)_*, 1/2 (Te)_*}.
double coercivity_constant(const CoefficientBounds& b);

struct DiffusionView {
    Eigen::MatrixXd diffusion;  // To^{-1}
    double gamma_e = 0.5;
    double gamma_tilde = 2.0;
};

DiffusionView diffusion_reduction(const SpnMatrixBundle& bundle);

}  // namespace spn
