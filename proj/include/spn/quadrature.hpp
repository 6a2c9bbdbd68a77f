#pragma once

#include <vector>

namespace spn {

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// n-point Gauss-Legendre rule mapped to [0, 1]. Exact for polynomials of degree 2n-1.
QuadratureRule gauss_legendre_unit(int n);

/// Legendre polynomial P_n(x) by the three-term recurrence.
double legendre(int n, double x);

}  // namespace spn
