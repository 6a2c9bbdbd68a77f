#include "spn/mixed_fem.hpp"

#include "spn/errors.hpp"

#include <Eigen/SparseLU>

#include <cmath>
#include <random>
#include <string>

namespace spn {

DofLayout make_dof_layout(const TensorGrid& grid, int ncomp) {
    DofLayout layout;
    layout.ncomp = ncomp;
    layout.num_cells = grid.num_cells();
    layout.facet_slot.assign(grid.num_facets(), -1);
    int next = 0;
    for (int f = 0; f < grid.num_facets(); ++f) {
        if (grid.facet_kind(f) != BoundaryKind::Neumann) layout.facet_slot[f] = next++;
    }
    layout.active_facets = next;
    return layout;
}

MixedField zero_field(const TensorGrid& grid, int ncomp) {
    MixedField f;
    f.flux = Eigen::MatrixXd::Zero(grid.num_facets(), ncomp);
    f.phi = Eigen::MatrixXd::Zero(grid.num_cells(), ncomp);
    return f;
}

LocalRtn0 local_rtn0_matrices(int dim, const std::array<double, 3>& extents) {
    LocalRtn0 l;
    l.volume = 1.0;
    for (int a = 0; a < dim; ++a) l.volume *= extents[a];
    for (int a = 0; a < 3; ++a) {
        if (a >= dim) {
            l.mass[a].setZero();
            l.area[a] = 0.0;
            continue;
        }
        l.mass[a] << 1.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0;
        l.mass[a] *= l.volume;
        l.area[a] = l.volume / extents[a];
    }
    return l;
}

namespace {

std::array<double, 3> cell_extents(const TensorGrid& grid, int cell) {
    std::array<double, 3> h{1.0, 1.0, 1.0};
    for (int a = 0; a < grid.dim(); ++a) h[a] = grid.extent(cell, a);
    return h;
}

const SpnMatrixBundle& bundle_of(const std::vector<SpnMatrixBundle>& bundles, int material) {
    if (material < 0 || material >= static_cast<int>(bundles.size())) {
        throw std::out_of_range("no coefficient bundle for material id " + std::to_string(material));
    }
    return bundles[material];
}

}  // namespace

void append_mono_triplets(const TensorGrid& grid, const std::vector<SpnMatrixBundle>& bundles, const DofLayout& layout,
                          int offset, std::vector<Eigen::Triplet<double>>& t) {
    const int nc = layout.ncomp;
    const int dim = grid.dim();
    for (int K = 0; K < grid.num_cells(); ++K) {
        const SpnMatrixBundle& B = bundle_of(bundles, grid.material(K));
        const LocalRtn0 loc = local_rtn0_matrices(dim, cell_extents(grid, K));
        for (int a = 0; a < dim; ++a) {
            const std::array<int, 2> f{grid.cell_facet(K, a, 0), grid.cell_facet(K, a, 1)};
            const std::array<double, 2> div{-loc.area[a], loc.area[a]};
            for (int r = 0; r < 2; ++r) {
                if (layout.facet_slot[f[r]] < 0) continue;
                for (int s = 0; s < 2; ++s) {
                    if (layout.facet_slot[f[s]] < 0) continue;
                    for (int c = 0; c < nc; ++c) {
                        for (int cp = 0; cp < nc; ++cp) {
                            const double v = -B.To(c, cp) * loc.mass[a](r, s);
                            if (v != 0.0) t.emplace_back(offset + layout.flux_dof(f[r], c), offset + layout.flux_dof(f[s], cp), v);
                        }
                    }
                }
                for (int c = 0; c < nc; ++c) {
                    for (int cp = 0; cp < nc; ++cp) {
                        const double v = B.H(cp, c) * div[r];
                        if (v == 0.0) continue;
                        // (phi, H^T div q): row q_(f, c'), column phi_(K, c).
                        t.emplace_back(offset + layout.flux_dof(f[r], cp), offset + layout.phi_dof(K, c), v);
                        // (H^T div p, psi): row psi_(K, c), column p_(f, c').
                        t.emplace_back(offset + layout.phi_dof(K, c), offset + layout.flux_dof(f[r], cp), v);
                    }
                }
            }
        }
        for (int c = 0; c < nc; ++c) {
            for (int cp = 0; cp < nc; ++cp) {
                const double v = B.Te(c, cp) * loc.volume;
                if (v != 0.0) t.emplace_back(offset + layout.phi_dof(K, c), offset + layout.phi_dof(K, cp), v);
            }
        }
    }
    for (int f = 0; f < grid.num_facets(); ++f) {
        if (grid.facet_kind(f) != BoundaryKind::Robin) continue;
        const FacetRef F = grid.facet(f);
        const SpnMatrixBundle& B = bundle_of(bundles, grid.material(F.owner()));
        for (int c = 0; c < nc; ++c) {
            for (int cp = 0; cp < nc; ++cp) {
                const double v = -B.Gamma_tilde(c, cp) * F.area;
                if (v != 0.0) t.emplace_back(offset + layout.flux_dof(f, c), offset + layout.flux_dof(f, cp), v);
            }
        }
    }
}

void append_mono_rhs(const TensorGrid& grid, const SourceField& source, const DofLayout& layout, int offset,
                     Eigen::VectorXd& rhs) {
    if (source.rows() != grid.num_cells() || source.cols() != layout.ncomp) {
        throw std::invalid_argument("source field has the wrong shape");
    }
    for (int K = 0; K < grid.num_cells(); ++K) {
        const double vol = grid.cell_volume(K);
        for (int c = 0; c < layout.ncomp; ++c) rhs(offset + layout.phi_dof(K, c)) += source(K, c) * vol;
    }
}

AssembledSystem assemble_mono(const TensorGrid& grid, const std::vector<SpnMatrixBundle>& bundles,
                              const SourceField& source) {
    const int nc = bundles.empty() ? 1 : bundles.front().components();
    AssembledSystem sys;
    sys.layout = make_dof_layout(grid, nc);
    std::vector<Eigen::Triplet<double>> t;
    append_mono_triplets(grid, bundles, sys.layout, 0, t);
    sys.matrix.resize(sys.layout.size(), sys.layout.size());
    sys.matrix.setFromTriplets(t.begin(), t.end());
    sys.rhs = Eigen::VectorXd::Zero(sys.layout.size());
    append_mono_rhs(grid, source, sys.layout, 0, sys.rhs);
    return sys;
}

LinearSolve solve_sparse(const Eigen::SparseMatrix<double>& a, const Eigen::VectorXd& b) {
    LinearSolve out;
    const double bnorm = b.norm();
    if (bnorm == 0.0) {
        out.x = Eigen::VectorXd::Zero(a.cols());
        return out;
    }
    Eigen::SparseMatrix<double> m = a;
    m.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(m);
    if (lu.info() != Eigen::Success) throw SingularSystemError("sparse LU factorization failed: " + lu.lastErrorMessage());
    out.x = lu.solve(b);
    if (lu.info() != Eigen::Success || !out.x.allFinite()) throw SingularSystemError("sparse LU solve failed");
    Eigen::VectorXd r = b - m * out.x;
    out.residual = r.norm() / bnorm;
    for (int step = 0; step < 3 && out.residual > 1e-14; ++step) {
        out.x += lu.solve(r);
        r = b - m * out.x;
        out.residual = r.norm() / bnorm;
    }
    if (!(out.residual <= 1e-10)) {
        throw SingularSystemError("relative residual " + std::to_string(out.residual) + " above 1e-10");
    }
    return out;
}

MixedField unpack_field(const TensorGrid& grid, const DofLayout& layout, const Eigen::VectorXd& x, int offset) {
    MixedField f = zero_field(grid, layout.ncomp);
    for (int F = 0; F < grid.num_facets(); ++F) {
        if (layout.facet_slot[F] < 0) continue;
        for (int c = 0; c < layout.ncomp; ++c) f.flux(F, c) = x(offset + layout.flux_dof(F, c));
    }
    for (int K = 0; K < grid.num_cells(); ++K) {
        for (int c = 0; c < layout.ncomp; ++c) f.phi(K, c) = x(offset + layout.phi_dof(K, c));
    }
    return f;
}

Eigen::VectorXd pack_field(const DofLayout& layout, const MixedField& field) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(layout.size());
    for (int F = 0; F < static_cast<int>(layout.facet_slot.size()); ++F) {
        if (layout.facet_slot[F] < 0) continue;
        for (int c = 0; c < layout.ncomp; ++c) x(layout.flux_dof(F, c)) = field.flux(F, c);
    }
    for (int K = 0; K < layout.num_cells; ++K) {
        for (int c = 0; c < layout.ncomp; ++c) x(layout.phi_dof(K, c)) = field.phi(K, c);
    }
    return x;
}

MixedField solve_system(const AssembledSystem& sys, const TensorGrid& grid, double* residual) {
    const LinearSolve s = solve_sparse(sys.matrix, sys.rhs);
    if (residual) *residual = s.residual;
    return unpack_field(grid, sys.layout, s.x);
}

MixedField solve_mono(const TensorGrid& grid, const std::vector<SpnMatrixBundle>& bundles, const SourceField& source,
                      double* residual) {
    return solve_system(assemble_mono(grid, bundles, source), grid, residual);
}

Eigen::MatrixXd evaluate_flux(const TensorGrid& grid, const MixedField& field, int cell, const Point& xi) {
    const int dim = grid.dim();
    Eigen::MatrixXd p(dim, field.components());
    for (int a = 0; a < dim; ++a) {
        const int fl = grid.cell_facet(cell, a, 0);
        const int fh = grid.cell_facet(cell, a, 1);
        p.row(a) = (1.0 - xi[a]) * field.flux.row(fl) + xi[a] * field.flux.row(fh);
    }
    return p;
}

Eigen::VectorXd cell_divergence(const TensorGrid& grid, const MixedField& field, int cell) {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(field.components());
    for (int a = 0; a < grid.dim(); ++a) {
        const int fl = grid.cell_facet(cell, a, 0);
        const int fh = grid.cell_facet(cell, a, 1);
        d += (field.flux.row(fh) - field.flux.row(fl)).transpose() / grid.extent(cell, a);
    }
    return d;
}

double phi_l2_norm(const TensorGrid& grid, const MixedField& field) {
    double s = 0.0;
    for (int K = 0; K < grid.num_cells(); ++K) s += grid.cell_volume(K) * field.phi.row(K).squaredNorm();
    return std::sqrt(s);
}

namespace {

// Integral over the cell of the product of two RT0 fields, component-wise weight w.
double rt_mass(const TensorGrid& grid, const MixedField& field, int K, const Eigen::VectorXd& w) {
    const double vol = grid.cell_volume(K);
    double s = 0.0;
    for (int a = 0; a < grid.dim(); ++a) {
        const auto lo = field.flux.row(grid.cell_facet(K, a, 0));
        const auto hi = field.flux.row(grid.cell_facet(K, a, 1));
        for (int c = 0; c < field.components(); ++c) {
            const double x = lo(c);
            const double y = hi(c);
            s += w(c) * vol * (x * x + x * y + y * y) / 3.0;
        }
    }
    return s;
}

}  // namespace

double s_norm_squared(const TensorGrid& grid, const std::vector<SpnMatrixBundle>& bundles, const MixedField& field) {
    double s = 0.0;
    for (int K = 0; K < grid.num_cells(); ++K) {
        const SpnMatrixBundle& B = bundle_of(bundles, grid.material(K));
        const Eigen::VectorXd d_o = B.To.diagonal();
        const Eigen::VectorXd d_e = B.Te.diagonal();
        const double vol = grid.cell_volume(K);
        const double hk = grid.cell_diameter(K);
        s += rt_mass(grid, field, K, d_o);
        s += vol * (d_e.array() * field.phi.row(K).transpose().array().square()).sum();
        s += d_o.maxCoeff() * hk * hk * vol * cell_divergence(grid, field, K).squaredNorm();
    }
    for (int f = 0; f < grid.num_facets(); ++f) {
        if (grid.facet_kind(f) != BoundaryKind::Robin) continue;
        const FacetRef F = grid.facet(f);
        const SpnMatrixBundle& B = bundle_of(bundles, grid.material(F.owner()));
        const Eigen::VectorXd pn = field.flux.row(f).transpose();
        s += B.To.diagonal().maxCoeff() * F.h_perp * F.area * pn.dot(B.Gamma_tilde * pn);
    }
    return s;
}

double s_norm(const TensorGrid& grid, const std::vector<SpnMatrixBundle>& bundles, const MixedField& field) {
    return std::sqrt(s_norm_squared(grid, bundles, field));
}

double x_norm_squared(const TensorGrid& grid, const MixedField& field) {
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(field.components());
    double s = 0.0;
    for (int K = 0; K < grid.num_cells(); ++K) {
        const double vol = grid.cell_volume(K);
        s += rt_mass(grid, field, K, ones);
        s += vol * cell_divergence(grid, field, K).squaredNorm();
        s += vol * field.phi.row(K).squaredNorm();
    }
    for (int f = 0; f < grid.num_facets(); ++f) {
        if (grid.facet_kind(f) != BoundaryKind::Robin) continue;
        s += grid.facet(f).area * field.flux.row(f).squaredNorm();
    }
    return s;
}

MixedField t_map(const TensorGrid& grid, const std::vector<SpnMatrixBundle>& bundles, const MixedField& field) {
    MixedField out;
    out.flux = -field.flux;
    out.phi.resize(field.phi.rows(), field.phi.cols());
    for (int K = 0; K < grid.num_cells(); ++K) {
        const SpnMatrixBundle& B = bundle_of(bundles, grid.material(K));
        const Eigen::VectorXd div = cell_divergence(grid, field, K);
        const Eigen::VectorXd corr = B.Te_inv.transpose() * (B.H.transpose() * div);
        out.phi.row(K) = 0.5 * (field.phi.row(K).transpose() + corr).transpose();
    }
    return out;
}

MixedField random_field(const TensorGrid& grid, int ncomp, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    MixedField f = zero_field(grid, ncomp);
    for (int F = 0; F < grid.num_facets(); ++F) {
        if (grid.facet_kind(F) == BoundaryKind::Neumann) continue;
        for (int c = 0; c < ncomp; ++c) f.flux(F, c) = u(rng);
    }
    for (int K = 0; K < grid.num_cells(); ++K) {
        for (int c = 0; c < ncomp; ++c) f.phi(K, c) = u(rng);
    }
    return f;
}

CoercivityReport t_coercivity_check(const TensorGrid& grid, const std::vector<SpnMatrixBundle>& form_bundles,
                                    const std::vector<SpnMatrixBundle>& map_bundles, double alpha, int trials,
                                    std::uint64_t seed) {
    const int nc = form_bundles.front().components();
    const SourceField zero = SourceField::Zero(grid.num_cells(), nc);
    const AssembledSystem sys = assemble_mono(grid, form_bundles, zero);
    CoercivityReport rep;
    rep.alpha = alpha;
    rep.min_ratio = std::numeric_limits<double>::infinity();
    for (int k = 0; k < trials; ++k) {
        const MixedField z = random_field(grid, nc, seed + static_cast<std::uint64_t>(k));
        const MixedField tz = t_map(grid, map_bundles, z);
        const Eigen::VectorXd u = pack_field(sys.layout, z);
        const Eigen::VectorXd w = pack_field(sys.layout, tz);
        const double c = w.dot(sys.matrix * u);
        const double xn = x_norm_squared(grid, z);
        ++rep.trials;
        if (xn > 0.0) rep.min_ratio = std::min(rep.min_ratio, c / xn);
        // Relative slack for rounding in the quadratic forms.
        if (c < alpha * xn - 1e-12 * std::max(1.0, std::abs(c))) ++rep.violations;
    }
    return rep;
}

CoercivityReport t_coercivity_check(const TensorGrid& grid, const std::vector<SpnMatrixBundle>& bundles, int trials,
                                    std::uint64_t seed) {
    double alpha = std::numeric_limits<double>::infinity();
    for (const auto& b : bundles) alpha = std::min(alpha, validate_coefficient_assumptions(b).alpha);
    return t_coercivity_check(grid, bundles, bundles, alpha, trials, seed);
}

}  // namespace spn
