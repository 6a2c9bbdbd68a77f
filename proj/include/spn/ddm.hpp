#pragma once

#include "spn/cartesian_mesh.hpp"
#include "spn/mixed_fem.hpp"
#include "spn/spn_coefficients.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <vector>

namespace spn {

/// Piecewise constants on the interface overlays, one value per patch and component.
struct MultiplierSpace {
    int ncomp = 1;
    std::vector<InterfaceMesh> meshes;
    std::vector<int> offsets;  // first patch index of each interface

    int num_patches() const;
    int size() const { return num_patches() * ncomp; }
};

MultiplierSpace build_multiplier_space(const SubdomainLayout& layout, int ncomp);

/// Pi: parent-facet values of one side -> patch values (L2 projection onto the overlay constants).
Eigen::VectorXd project_trace_to_multiplier(const InterfaceMesh& mesh, int side, const Eigen::VectorXd& trace);

/// pi: patch values -> area-weighted mean per parent facet of one side.
Eigen::VectorXd project_multiplier_to_trace(const InterfaceMesh& mesh, int side, const Eigen::VectorXd& multiplier);

/// Per patch p_a.n_a + p_b.n_b from outward normal traces given per parent facet.
Eigen::VectorXd discrete_jump(const InterfaceMesh& mesh, const Eigen::VectorXd& outward_a,
                              const Eigen::VectorXd& outward_b);

struct DdmSystem {
    Eigen::SparseMatrix<double> matrix;
    Eigen::VectorXd rhs;
    std::vector<DofLayout> layouts;
    std::vector<int> offsets;  // start of each subdomain block
    int multiplier_offset = 0;
    MultiplierSpace space;
};

/// Block system over (p_s, phi_s) per subdomain and the interface multipliers.
DdmSystem assemble_ddm(const SubdomainLayout& layout, const std::vector<SpnMatrixBundle>& bundles,
                       const std::vector<SourceField>& sources);

struct MultiDomainSolution {
    std::vector<MixedField> fields;
    std::vector<Eigen::MatrixXd> multipliers;  // per interface: patches x ncomp
    double residual = 0.0;
};

MultiDomainSolution solve_ddm(const DdmSystem& system, const SubdomainLayout& layout);

/// max over interfaces, patches and components of |[p.n]|.
double check_jump_free(const SubdomainLayout& layout, const MultiplierSpace& space, const MultiDomainSolution& sol);

/// Largest |p.n| over the interface facets, used to make the jump relative.
double interface_flux_scale(const SubdomainLayout& layout, const MultiplierSpace& space,
                            const MultiDomainSolution& sol);

struct InterfaceConstants {
    double beta = 0.0;
    double gamma = 0.0;
};

/// Generalized Rayleigh quotients of one interface (kernel of the denominator removed for beta).
InterfaceConstants check_interface_assumption(const InterfaceMesh& mesh);

/// Minimum over all interfaces of the space.
InterfaceConstants check_interface_assumption(const MultiplierSpace& space);

}  // namespace spn
