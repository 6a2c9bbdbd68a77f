#include "spn/ddm.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>

namespace spn {

int MultiplierSpace::num_patches() const {
    int n = 0;
    for (const auto& m : meshes) n += static_cast<int>(m.patches.size());
    return n;
}

MultiplierSpace build_multiplier_space(const SubdomainLayout& layout, int ncomp) {
    MultiplierSpace space;
    space.ncomp = ncomp;
    int offset = 0;
    for (int i = 0; i < static_cast<int>(layout.interfaces.size()); ++i) {
        space.meshes.push_back(overlay_traces(layout, i));
        space.offsets.push_back(offset);
        offset += static_cast<int>(space.meshes.back().patches.size());
    }
    return space;
}

Eigen::VectorXd project_trace_to_multiplier(const InterfaceMesh& mesh, int side, const Eigen::VectorXd& trace) {
    // Each patch lies inside a single parent facet, so the projection is the injection.
    Eigen::VectorXd m(static_cast<Eigen::Index>(mesh.patches.size()));
    for (std::size_t k = 0; k < mesh.patches.size(); ++k) {
        m(static_cast<Eigen::Index>(k)) = trace(mesh.patches[k].parent[side]);
    }
    return m;
}

Eigen::VectorXd project_multiplier_to_trace(const InterfaceMesh& mesh, int side, const Eigen::VectorXd& multiplier) {
    const auto n = static_cast<Eigen::Index>(mesh.parents[side].size());
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd area = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k < mesh.patches.size(); ++k) {
        const OverlayPatch& p = mesh.patches[k];
        sum(p.parent[side]) += p.area * multiplier(static_cast<Eigen::Index>(k));
        area(p.parent[side]) += p.area;
    }
    return sum.cwiseQuotient(area);
}

Eigen::VectorXd discrete_jump(const InterfaceMesh& mesh, const Eigen::VectorXd& outward_a,
                              const Eigen::VectorXd& outward_b) {
    return project_trace_to_multiplier(mesh, 0, outward_a) + project_trace_to_multiplier(mesh, 1, outward_b);
}

DdmSystem assemble_ddm(const SubdomainLayout& layout, const std::vector<SpnMatrixBundle>& bundles,
                       const std::vector<SourceField>& sources) {
    const int nc = bundles.front().components();
    DdmSystem sys;
    sys.space = build_multiplier_space(layout, nc);
    int offset = 0;
    for (const auto& g : layout.grids) {
        sys.layouts.push_back(make_dof_layout(g, nc));
        sys.offsets.push_back(offset);
        offset += sys.layouts.back().size();
    }
    sys.multiplier_offset = offset;
    const int n = offset + sys.space.size();

    std::vector<Eigen::Triplet<double>> t;
    sys.rhs = Eigen::VectorXd::Zero(n);
    for (std::size_t s = 0; s < layout.grids.size(); ++s) {
        append_mono_triplets(layout.grids[s], bundles, sys.layouts[s], sys.offsets[s], t);
        append_mono_rhs(layout.grids[s], sources.at(s), sys.layouts[s], sys.offsets[s], sys.rhs);
    }
    for (std::size_t i = 0; i < sys.space.meshes.size(); ++i) {
        const InterfaceMesh& mesh = sys.space.meshes[i];
        for (std::size_t k = 0; k < mesh.patches.size(); ++k) {
            const OverlayPatch& p = mesh.patches[k];
            for (int side = 0; side < 2; ++side) {
                const int sd = mesh.subdomain[side];
                const int facet = mesh.parents[side][p.parent[side]];
                const double v = p.area * mesh.outward_sign[side];
                for (int c = 0; c < nc; ++c) {
                    const int m = sys.multiplier_offset + (sys.space.offsets[i] + static_cast<int>(k)) * nc + c;
                    const int q = sys.offsets[sd] + sys.layouts[sd].flux_dof(facet, c);
                    t.emplace_back(m, q, v);   // + int [p.n] m
                    t.emplace_back(q, m, -v);  // - int [q.n] l
                }
            }
        }
    }
    sys.matrix.resize(n, n);
    sys.matrix.setFromTriplets(t.begin(), t.end());
    return sys;
}

MultiDomainSolution solve_ddm(const DdmSystem& system, const SubdomainLayout& layout) {
    const LinearSolve s = solve_sparse(system.matrix, system.rhs);
    MultiDomainSolution sol;
    sol.residual = s.residual;
    for (std::size_t i = 0; i < layout.grids.size(); ++i) {
        sol.fields.push_back(unpack_field(layout.grids[i], system.layouts[i], s.x, system.offsets[i]));
    }
    const int nc = system.space.ncomp;
    for (std::size_t i = 0; i < system.space.meshes.size(); ++i) {
        const auto np = static_cast<Eigen::Index>(system.space.meshes[i].patches.size());
        Eigen::MatrixXd m(np, nc);
        for (Eigen::Index k = 0; k < np; ++k) {
            for (int c = 0; c < nc; ++c) m(k, c) = s.x(system.multiplier_offset + (system.space.offsets[i] + k) * nc + c);
        }
        sol.multipliers.push_back(std::move(m));
    }
    return sol;
}

namespace {

Eigen::VectorXd outward_trace(const InterfaceMesh& mesh, int side, const MixedField& field, int comp) {
    Eigen::VectorXd t(static_cast<Eigen::Index>(mesh.parents[side].size()));
    for (std::size_t j = 0; j < mesh.parents[side].size(); ++j) {
        t(static_cast<Eigen::Index>(j)) = mesh.outward_sign[side] * field.flux(mesh.parents[side][j], comp);
    }
    return t;
}

}  // namespace

double check_jump_free(const SubdomainLayout& /*layout*/, const MultiplierSpace& space,
                       const MultiDomainSolution& sol) {
    double worst = 0.0;
    for (const auto& mesh : space.meshes) {
        for (int c = 0; c < space.ncomp; ++c) {
            const Eigen::VectorXd a = outward_trace(mesh, 0, sol.fields[mesh.subdomain[0]], c);
            const Eigen::VectorXd b = outward_trace(mesh, 1, sol.fields[mesh.subdomain[1]], c);
            for (std::size_t k = 0; k < mesh.patches.size(); ++k) {
                const OverlayPatch& p = mesh.patches[k];
                worst = std::max(worst, std::abs(a(p.parent[0]) + b(p.parent[1])));
            }
        }
    }
    return worst;
}

double interface_flux_scale(const SubdomainLayout& /*layout*/, const MultiplierSpace& space,
                            const MultiDomainSolution& sol) {
    double scale = 0.0;
    for (const auto& mesh : space.meshes) {
        for (int side = 0; side < 2; ++side) {
            for (int f : mesh.parents[side]) {
                scale = std::max(scale, sol.fields[mesh.subdomain[side]].flux.row(f).lpNorm<Eigen::Infinity>());
            }
        }
    }
    return scale;
}

namespace {

double min_generalized_eigenvalue(const Eigen::MatrixXd& num, const Eigen::MatrixXd& den) {
    // Restrict to the range of the (symmetric positive semidefinite) denominator.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(den);
    const double top = es.eigenvalues().maxCoeff();
    std::vector<int> keep;
    for (int i = 0; i < es.eigenvalues().size(); ++i) {
        if (es.eigenvalues()(i) > 1e-12 * top) keep.push_back(i);
    }
    Eigen::MatrixXd Q(den.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j) Q.col(static_cast<Eigen::Index>(j)) = es.eigenvectors().col(keep[j]);
    const Eigen::MatrixXd n_sym = 0.5 * (num + num.transpose());
    const Eigen::MatrixXd nr = Q.transpose() * n_sym * Q;
    Eigen::MatrixXd dr = Q.transpose() * den * Q;
    dr = 0.5 * (dr + dr.transpose());
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(nr, dr);
    return ges.eigenvalues().minCoeff();
}

}  // namespace

InterfaceConstants check_interface_assumption(const InterfaceMesh& mesh) {
    const auto np = static_cast<Eigen::Index>(mesh.patches.size());
    const auto na = static_cast<Eigen::Index>(mesh.parents[0].size());
    const auto nb = static_cast<Eigen::Index>(mesh.parents[1].size());
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(np, np);
    for (Eigen::Index k = 0; k < np; ++k) W(k, k) = mesh.patches[static_cast<std::size_t>(k)].area;

    // True jump and discrete jump as maps from the outward traces (side a, side b) to patches.
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(np, na + nb);
    Eigen::MatrixXd Jh = Eigen::MatrixXd::Zero(np, na + nb);
    for (Eigen::Index k = 0; k < np; ++k) {
        const OverlayPatch& p = mesh.patches[static_cast<std::size_t>(k)];
        J(k, p.parent[0]) = 1.0;
        J(k, na + p.parent[1]) = 1.0;
    }
    for (Eigen::Index j = 0; j < na; ++j) {
        Jh.col(j) = project_trace_to_multiplier(mesh, 0, Eigen::VectorXd::Unit(na, j));
    }
    for (Eigen::Index j = 0; j < nb; ++j) {
        Jh.col(na + j) = project_trace_to_multiplier(mesh, 1, Eigen::VectorXd::Unit(nb, j));
    }
    InterfaceConstants out;
    out.beta = min_generalized_eigenvalue(Jh.transpose() * W * J, J.transpose() * W * J);

    Eigen::MatrixXd num = Eigen::MatrixXd::Zero(np, np);
    for (int side = 0; side < 2; ++side) {
        const auto nf = static_cast<Eigen::Index>(mesh.parents[side].size());
        Eigen::MatrixXd Pm(nf, np);
        for (Eigen::Index k = 0; k < np; ++k) Pm.col(k) = project_multiplier_to_trace(mesh, side, Eigen::VectorXd::Unit(np, k));
        Eigen::VectorXd area(nf);
        for (Eigen::Index f = 0; f < nf; ++f) area(f) = mesh.parent_area[side][static_cast<std::size_t>(f)];
        num += Pm.transpose() * area.asDiagonal() * Pm;
    }
    out.gamma = min_generalized_eigenvalue(num, W);
    return out;
}

InterfaceConstants check_interface_assumption(const MultiplierSpace& space) {
    InterfaceConstants out{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    for (const auto& m : space.meshes) {
        const InterfaceConstants c = check_interface_assumption(m);
        out.beta = std::min(out.beta, c.beta);
        out.gamma = std::min(out.gamma, c.gamma);
    }
    return out;
}

}  // namespace spn
