#include "spn/errors.hpp"
#include "spn/spn_coefficients.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cstdint>
#include <numeric>

using namespace spn;

namespace {

// Exact rational arithmetic for the angular recurrence.
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

// Coefficients of P_n in the monomial basis, from (n+1) P_{n+1} = (2n+1) x P_n - n P_{n-1}.
std::vector<double> legendre_coefficients(int n) {
    std::vector<double> p0{1.0};
    if (n == 0) return p0;
    std::vector<double> p1{0.0, 1.0};
    for (int k = 1; k < n; ++k) {
        std::vector<double> p2(k + 2, 0.0);
        for (int j = 0; j <= k; ++j) p2[j + 1] += (2.0 * k + 1.0) * p1[j] / (k + 1.0);
        for (int j = 0; j < k; ++j) p2[j] -= k * p0[j] / (k + 1.0);
        p0 = p1;
        p1 = p2;
    }
    return p1;
}

// int_0^1 x P_a(x) P_b(x) dx by exact monomial integration.
double moment_integral(int a, int b) {
    const auto pa = legendre_coefficients(a);
    const auto pb = legendre_coefficients(b);
    double s = 0.0;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        for (std::size_t j = 0; j < pb.size(); ++j) s += pa[i] * pb[j] / static_cast<double>(i + j + 2);
    }
    return s;
}

}  // namespace

TEST(AngularConstants, MatchRationalRecurrence) {
    for (int order = 1; order <= 9; order += 2) {
        const AngularConstants ac = compute_angular_constants(order);
        ASSERT_EQ(ac.nhat, (order + 1) / 2);
        Fraction alpha(1);
        for (int m = 0; m <= order; ++m) {
            if (m > 0) alpha = Fraction(4 * m * m - 1, m) / alpha;
            const Fraction t = alpha * alpha / Fraction(2 * m + 1);
            EXPECT_NEAR(ac.alpha[m], alpha.value(), 1e-14 * alpha.value()) << "m=" << m;
            EXPECT_NEAR(ac.t[m], t.value(), 1e-14 * t.value()) << "m=" << m;
        }
    }
}

TEST(AngularConstants, KnownValues) {
    const AngularConstants ac = compute_angular_constants(3);
    EXPECT_DOUBLE_EQ(ac.t[0], 1.0);
    EXPECT_DOUBLE_EQ(ac.t[1], 3.0);
    EXPECT_DOUBLE_EQ(ac.t[2], 1.25);
    EXPECT_NEAR(ac.t[3], 28.0 / 9.0, 1e-15);
}

TEST(AngularConstants, RejectsInvalidOrder) {
    EXPECT_THROW(compute_angular_constants(0), InvalidOrderError);
    EXPECT_THROW(compute_angular_constants(2), InvalidOrderError);
    EXPECT_THROW(compute_angular_constants(-1), InvalidOrderError);
}

TEST(RobinMatrices, ScalarCaseIsOneHalf) {
    const RobinMatrices r = assemble_robin_matrices(compute_angular_constants(1), 1);
    EXPECT_EQ(r.gamma_hat(0, 0), 0.5);
    EXPECT_NEAR(r.gamma_tilde(0, 0), 2.0, 1e-15);
}

TEST(RobinMatrices, TwoMomentCase) {
    const RobinMatrices r = assemble_robin_matrices(compute_angular_constants(3), 1);
    Eigen::Matrix2d expected;
    expected << 0.5, 0.3125, 0.3125, 0.78125;
    EXPECT_LT((r.gamma_hat - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(RobinMatrices, MatchExactIntegralsUpToN9) {
    for (int order = 1; order <= 9; order += 2) {
        const AngularConstants ac = compute_angular_constants(order);
        const RobinMatrices r = assemble_robin_matrices(ac, 2);
        for (int i = 0; i < ac.nhat; ++i) {
            for (int j = 0; j < ac.nhat; ++j) {
                const double exact = ac.alpha[2 * i] * ac.alpha[2 * j] * moment_integral(2 * i, 2 * j);
                EXPECT_NEAR(r.gamma_hat(i, j), exact, 1e-11 * std::max(1.0, std::abs(exact)));
            }
        }
        // Block diagonal over groups, Gamma_tilde symmetric positive definite.
        EXPECT_LT((r.gamma_e.block(ac.nhat, ac.nhat, ac.nhat, ac.nhat) - r.gamma_hat).norm(), 1e-15);
        EXPECT_LT((r.gamma_tilde - r.gamma_tilde.transpose()).norm(), 1e-12);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r.gamma_tilde);
        EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
    }
}

TEST(ParityMatrices, EntriesFollowMomentParity) {
    const MaterialCrossSections xs = spn::testing::simple_xs(2, 0.5, 0.2, 0.1);
    const AngularConstants ac = compute_angular_constants(3);
    const SpnMatrixBundle b = build_bundle(xs, ac);
    ASSERT_EQ(b.components(), 4);
    for (int g = 0; g < 2; ++g) {
        for (int gp = 0; gp < 2; ++gp) {
            for (int i = 0; i < 2; ++i) {
                for (int j = 0; j < 2; ++j) {
                    const int r = g * 2 + i;
                    const int c = gp * 2 + j;
                    double te = 0.0;
                    double to = 0.0;
                    if (i == j) {
                        const int me = 2 * i;
                        const int mo = 2 * i + 1;
                        const double s_e = me < 2 ? xs.sigma_s[me](gp, g) : 0.0;
                        const double s_o = mo < 2 ? xs.sigma_s[mo](gp, g) : 0.0;
                        te = ac.t[me] * ((g == gp ? 1.0 : 0.0) - s_e);
                        to = ac.t[mo] * ((g == gp ? 1.0 : 0.0) - s_o);
                    }
                    EXPECT_NEAR(b.Te(r, c), te, 1e-15);
                    EXPECT_NEAR(b.To(r, c), to, 1e-15);
                }
            }
        }
    }
    // H: identity plus the superdiagonal inside each group block.
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(4, 4);
    h << 1, 1, 0, 0, 0, 1, 0, 0, 0, 0, 1, 1, 0, 0, 0, 1;
    EXPECT_EQ(b.H, h);
    EXPECT_LT((b.Te * b.Te_inv - Eigen::MatrixXd::Identity(4, 4)).norm(), 1e-13);
    EXPECT_LT((b.D - b.H.transpose() * b.To_inv * b.H).norm(), 1e-13);
    EXPECT_LT((b.Gamma_tilde - b.H * b.Gamma_e.inverse() * b.H.transpose()).norm(), 1e-12);
}

TEST(ParityMatrices, SingularTeThrows) {
    MaterialCrossSections xs;
    xs.sigma_t = Eigen::VectorXd::Ones(1);
    xs.sigma_s = {Eigen::MatrixXd::Ones(1, 1)};
    EXPECT_THROW(build_bundle(xs, compute_angular_constants(1)), AssumptionViolation);
}

TEST(Bounds, MatchDenseEigenvalues) {
    const SpnMatrixBundle b = build_bundle(spn::testing::simple_xs(3, 0.4, 0.1, 0.05), compute_angular_constants(5));
    auto min_eig = [](const Eigen::MatrixXd& m) {
        return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(0.5 * (m + m.transpose())).eigenvalues().minCoeff();
    };
    EXPECT_NEAR(b.bounds.to_min, min_eig(b.To), 1e-12);
    EXPECT_NEAR(b.bounds.te_min, min_eig(b.Te), 1e-12);
    EXPECT_NEAR(b.bounds.te_inv_min, min_eig(b.Te_inv), 1e-12);
    // H^T bound from the Gram matrix.
    EXPECT_NEAR(b.bounds.ht_min, min_eig(b.H * b.H.transpose()), 1e-12);
    EXPECT_NEAR(coercivity_constant(b.bounds),
                std::min({b.bounds.to_min, 0.5 * b.bounds.ht_min * b.bounds.te_inv_min, b.bounds.gamma_tilde_min,
                          0.5 * b.bounds.te_min}),
                0.0);
}

TEST(Assumptions, BenchmarkLikeMaterialPasses) {
    const AssumptionReport r = validate_coefficient_assumptions(spn::testing::simple_bundles(2, 3).front());
    EXPECT_TRUE(r.ok());
    EXPECT_GT(r.alpha, 0.0);
}

TEST(Assumptions, NegativeRemovalFails) {
    MaterialCrossSections xs = spn::testing::simple_xs(1, 1.2, 0.0, 0.0);
    const AssumptionReport r = validate_coefficient_assumptions(build_bundle(xs, compute_angular_constants(1)));
    EXPECT_FALSE(r.removal_positive);
    EXPECT_FALSE(r.ok());
}

TEST(Assumptions, StrongGroupCouplingFails) {
    MaterialCrossSections xs = spn::testing::simple_xs(2, 0.5, 0.0, 0.6);
    const AssumptionReport r = validate_coefficient_assumptions(build_bundle(xs, compute_angular_constants(1)));
    EXPECT_TRUE(r.removal_positive);
    EXPECT_FALSE(r.coupling_bounded);
    EXPECT_GT(r.epsilon_required, 1.0);
}

TEST(DiffusionReduction, ScalarSp1) {
    MaterialCrossSections xs;
    xs.sigma_t = Eigen::VectorXd::Constant(1, 1.0);
    // To = t_1 (sigma_t - s1) = 3 (1 - s1) = 1/2 for s1 = 5/6, so D = 2.
    xs.sigma_s = {Eigen::MatrixXd::Constant(1, 1, 0.2), Eigen::MatrixXd::Constant(1, 1, 5.0 / 6.0)};
    const DiffusionView v = diffusion_reduction(build_bundle(xs, compute_angular_constants(1)));
    EXPECT_NEAR(v.diffusion(0, 0), 2.0, 1e-12);
    EXPECT_EQ(v.gamma_e, 0.5);
    EXPECT_NEAR(v.gamma_tilde, 2.0, 1e-15);
}

TEST(DiffusionReduction, RejectsHigherOrder) {
    EXPECT_THROW(diffusion_reduction(spn::testing::simple_bundles(1, 3).front()), NotDiffusionModelError);
}
