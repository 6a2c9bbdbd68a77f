#pragma once

#include "spn/cartesian_mesh.hpp"
#include "spn/mixed_fem.hpp"
#include "spn/spn_coefficients.hpp"

#include <Eigen/Dense>

#include <vector>

namespace spn {

/// Continuous d-linear field given by vertex values of one grid.
struct NodalFluxField {
    Eigen::MatrixXd values;  // num_vertices x ncomp

    int components() const { return static_cast<int>(values.cols()); }
    /// Value at reference coordinates xi in [0,1]^d of `cell`.
    Eigen::VectorXd evaluate(const TensorGrid& grid, int cell, const Point& xi) const;
    /// Physical gradient (dim x ncomp) at reference coordinates xi of `cell`.
    Eigen::MatrixXd gradient(const TensorGrid& grid, int cell, const Point& xi) const;
};

NodalFluxField average_reconstruct(const TensorGrid& grid, const std::vector<SpnMatrixBundle>& bundles,
                                   const MixedField& field);

/// Reconstruction over the union of the subdomain vertex sets. `per_subdomain[s]` holds the values at
/// the vertices of grid s; `vertices`/`values` list the distinct global vertices.
struct MultiDomainNodalField {
    std::vector<Point> vertices;
    Eigen::MatrixXd values;
    std::vector<NodalFluxField> per_subdomain;
};

MultiDomainNodalField average_reconstruct_multidomain(const SubdomainLayout& layout,
                                                      const std::vector<SpnMatrixBundle>& bundles,
                                                      const std::vector<MixedField>& fields);

}  // namespace spn
