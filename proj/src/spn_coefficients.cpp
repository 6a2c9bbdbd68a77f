#include "spn/spn_coefficients.hpp"

#include "spn/errors.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>

namespace spn {

AngularConstants compute_angular_constants(int order) {
    if (order < 1 || order % 2 == 0) {
        throw InvalidOrderError("SPN order must be odd and >= 1, got " + std::to_string(order));
    }
    AngularConstants ac;
    ac.order = order;
    ac.nhat = (order + 1) / 2;
    ac.alpha.resize(order + 1);
    ac.t.resize(order + 1);
    ac.alpha[0] = 1.0;
    for (int m = 0; m < order; ++m) {
        const double k = m + 1.0;
        ac.alpha[m + 1] = (4.0 * k * k - 1.0) / (k * ac.alpha[m]);
    }
    for (int m = 0; m <= order; ++m) ac.t[m] = ac.alpha[m] * ac.alpha[m] / (2.0 * m + 1.0);
    return ac;
}

double MaterialCrossSections::scatter(int moment, int from, int to) const {
    if (moment >= static_cast<int>(sigma_s.size())) return 0.0;
    return sigma_s[moment](from, to);
}

Eigen::MatrixXd h_hat(int nhat) {
    Eigen::MatrixXd h = Eigen::MatrixXd::Identity(nhat, nhat);
    for (int i = 0; i + 1 < nhat; ++i) h(i, i + 1) = 1.0;
    return h;
}

namespace {

Eigen::MatrixXd block_diagonal(const Eigen::MatrixXd& block, int copies) {
    const auto n = block.rows();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n * copies, n * copies);
    for (int g = 0; g < copies; ++g) out.block(g * n, g * n, n, n) = block;
    return out;
}

Eigen::MatrixXd checked_inverse(const Eigen::MatrixXd& m, const char* name) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
    if (!lu.isInvertible()) throw AssumptionViolation(std::string(name) + " is singular");
    return lu.inverse();
}

Eigen::MatrixXd parity_matrix(const MaterialCrossSections& xs, const AngularConstants& ac, int parity) {
    const int G = xs.groups();
    const int nhat = ac.nhat;
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(G * nhat, G * nhat);
    for (int g = 0; g < G; ++g) {
        for (int gp = 0; gp < G; ++gp) {
            for (int i = 0; i < nhat; ++i) {
                const int m = 2 * i + parity;
                const double value = g == gp ? ac.t[m] * xs.removal(m, g) : -ac.t[m] * xs.scatter(m, gp, g);
                T(g * nhat + i, gp * nhat + i) = value;
            }
        }
    }
    return T;
}

double min_sym_eigenvalue(const Eigen::MatrixXd& m) {
    const Eigen::MatrixXd s = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

double max_sym_eigenvalue(const Eigen::MatrixXd& m) {
    const Eigen::MatrixXd s = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

// 2^n P_n(x) = sum_k (-1)^k C(n,k) C(2n-2k,n) x^(n-2k); integer coefficients by power.
std::vector<std::int64_t> scaled_legendre(int n) {
    auto binom = [](int a, int b) {
        std::int64_t c = 1;
        for (int k = 1; k <= b; ++k) c = c * (a - b + k) / k;
        return c;
    };
    std::vector<std::int64_t> c(n + 1, 0);
    for (int k = 0; 2 * k <= n; ++k) c[n - 2 * k] = (k % 2 ? -1 : 1) * binom(n, k) * binom(2 * n - 2 * k, n);
    return c;
}

// int_0^1 x P_a(x) P_b(x) dx, summed exactly over a common denominator and rounded once.
double half_range_moment(int a, int b) {
    const auto pa = scaled_legendre(a);
    const auto pb = scaled_legendre(b);
    __int128 lcm = 1;
    for (int d = 2; d <= a + b + 2; ++d) lcm = lcm / std::gcd(static_cast<std::int64_t>(lcm), std::int64_t{d}) * d;
    __int128 num = 0;
    for (int i = 0; i <= a; ++i) {
        for (int j = 0; j <= b; ++j) num += static_cast<__int128>(pa[i]) * pb[j] * (lcm / (i + j + 2));
    }
    const long double den = static_cast<long double>(lcm) * std::ldexp(1.0L, a + b);
    return static_cast<double>(static_cast<long double>(num) / den);
}

}  // namespace

SpnMatrixBundle assemble_parity_matrices(const MaterialCrossSections& xs, const AngularConstants& ac) {
    SpnMatrixBundle b;
    b.groups = xs.groups();
    b.nhat = ac.nhat;
    b.H = block_diagonal(h_hat(ac.nhat), b.groups);
    b.Te = parity_matrix(xs, ac, 0);
    b.To = parity_matrix(xs, ac, 1);
    b.Te_inv = checked_inverse(b.Te, "Te");
    b.To_inv = checked_inverse(b.To, "To");
    return b;
}

RobinMatrices assemble_robin_matrices(const AngularConstants& ac, int groups) {
    const int nhat = ac.nhat;
    RobinMatrices r;
    r.gamma_hat = Eigen::MatrixXd::Zero(nhat, nhat);
    for (int i = 0; i < nhat; ++i) {
        for (int j = 0; j < nhat; ++j) {
            r.gamma_hat(i, j) = ac.alpha[2 * i] * ac.alpha[2 * j] * half_range_moment(2 * i, 2 * j);
        }
    }
    r.gamma_e = block_diagonal(r.gamma_hat, groups);
    const Eigen::MatrixXd H = block_diagonal(h_hat(nhat), groups);
    r.gamma_tilde = H * r.gamma_e.inverse() * H.transpose();
    r.gamma_tilde = 0.5 * (r.gamma_tilde + r.gamma_tilde.transpose());
    return r;
}

CoefficientBounds compute_bounds(const SpnMatrixBundle& b) {
    CoefficientBounds c;
    c.to_min = min_sym_eigenvalue(b.To);
    c.te_min = min_sym_eigenvalue(b.Te);
    c.te_inv_min = min_sym_eigenvalue(b.Te_inv);
    c.to_inv_min = min_sym_eigenvalue(b.To_inv);
    c.gamma_tilde_min = min_sym_eigenvalue(b.Gamma_tilde);
    c.gamma_tilde_max = max_sym_eigenvalue(b.Gamma_tilde);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(b.H);
    const auto& s = svd.singularValues();
    c.ht_min = s.minCoeff() * s.minCoeff();
    c.ht_max = s.maxCoeff() * s.maxCoeff();
    return c;
}

SpnMatrixBundle build_bundle(const MaterialCrossSections& xs, const AngularConstants& ac) {
    SpnMatrixBundle b = assemble_parity_matrices(xs, ac);
    const RobinMatrices r = assemble_robin_matrices(ac, b.groups);
    b.Gamma_e = r.gamma_e;
    b.Gamma_e_inv = r.gamma_e.inverse();
    b.Gamma_tilde = r.gamma_tilde;
    b.D = b.H.transpose() * b.To_inv * b.H;
    b.bounds = compute_bounds(b);
    return b;
}

std::vector<SpnMatrixBundle> build_bundles(const CrossSectionSet& xs, const AngularConstants& ac) {
    std::vector<SpnMatrixBundle> out;
    out.reserve(xs.materials.size());
    for (const auto& m : xs.materials) out.push_back(build_bundle(m, ac));
    return out;
}

double coercivity_constant(const CoefficientBounds& b) {
    return std::min({b.to_min, 0.5 * b.ht_min * b.te_inv_min, b.gamma_tilde_min, 0.5 * b.te_min});
}

AssumptionReport validate_coefficient_assumptions(const SpnMatrixBundle& b) {
    AssumptionReport r;
    const int G = b.groups;
    const int nhat = b.nhat;
    r.removal_positive = true;
    double eps = 0.0;
    for (const Eigen::MatrixXd* T : {&b.Te, &b.To}) {
        for (int g = 0; g < G; ++g) {
            for (int i = 0; i < nhat; ++i) {
                const double diag = (*T)(g * nhat + i, g * nhat + i);
                if (!(diag > 0.0)) {
                    r.removal_positive = false;
                    continue;
                }
                for (int gp = 0; gp < G; ++gp) {
                    if (gp == g) continue;
                    // Entry (g', g) carries the scattering g -> g'.
                    eps = std::max(eps, std::abs((*T)(gp * nhat + i, g * nhat + i)) / diag);
                }
            }
        }
    }
    r.epsilon_required = eps;
    r.coupling_bounded = r.removal_positive && (G == 1 || eps < 1.0 / (G - 1));
    r.bounds = compute_bounds(b);
    r.positivity = r.bounds.to_inv_min > 0.0 && r.bounds.te_min > 0.0;
    r.alpha = coercivity_constant(r.bounds);
    return r;
}

DiffusionView diffusion_reduction(const SpnMatrixBundle& b) {
    if (b.nhat != 1) {
        throw NotDiffusionModelError("diffusion reduction needs nhat = 1, got " + std::to_string(b.nhat));
    }
    DiffusionView v;
    v.diffusion = b.To_inv;
    v.gamma_e = b.Gamma_e(0, 0);
    v.gamma_tilde = b.Gamma_tilde(0, 0);
    return v;
}

}  // namespace spn
