#include "spn/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace spn {

double legendre(int n, double x) {
    if (n == 0) return 1.0;
    double p_prev = 1.0;
    double p = x;
    for (int k = 1; k < n; ++k) {
        const double next = ((2.0 * k + 1.0) * x * p - k * p_prev) / (k + 1.0);
        p_prev = p;
        p = next;
    }
    return p;
}

QuadratureRule gauss_legendre_unit(int n) {
    if (n < 1) throw std::invalid_argument("gauss_legendre_unit: n must be >= 1");
    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        // Newton on P_n from the Chebyshev-like initial guess.
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            const double p = legendre(n, x);
            const double p1 = legendre(n - 1, x);
            dp = n * (x * p - p1) / (x * x - 1.0);
            const double dx = p / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        const double p1 = legendre(n - 1, x);
        dp = n * (x * legendre(n, x) - p1) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        // Ascending order on [0, 1].
        rule.nodes[n - 1 - i] = 0.5 * (x + 1.0);
        rule.weights[n - 1 - i] = 0.5 * w;
    }
    return rule;
}

}  // namespace spn
