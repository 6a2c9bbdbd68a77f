#include "spn/estimators.hpp"

#include "spn/errors.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <string>

namespace spn {

namespace {

constexpr double kGaussOffset = 0.28867513459481287;  // 1 / (2 sqrt 3)

// Tensor 2-point Gauss rule on [0,1]^d.
struct CellRule {
    std::vector<Point> xi;
    std::vector<double> w;
};

CellRule cell_rule(int dim, int skip_axis = -1, double fixed = 0.0) {
    CellRule r;
    const std::array<double, 2> g{0.5 - kGaussOffset, 0.5 + kGaussOffset};
    const int n = 1 << dim;
    for (int bits = 0; bits < n; ++bits) {
        bool duplicate = false;
        Point x{0.5, 0.5, 0.5};
        double w = 1.0;
        for (int a = 0; a < dim; ++a) {
            const int b = (bits >> a) & 1;
            if (a == skip_axis) {
                if (b) duplicate = true;
                x[a] = fixed;
                continue;
            }
            x[a] = g[b];
            w *= 0.5;
        }
        if (duplicate) continue;
        r.xi.push_back(x);
        r.w.push_back(w);
    }
    return r;
}

Eigen::VectorXd residual_impl(const TensorGrid& grid, const std::vector<SpnMatrixBundle>& bundles,
                              const SourceField& source, const MixedField& field, const NodalFluxField& recon,
                              bool star) {
    const CellRule rule = cell_rule(grid.dim());
    Eigen::VectorXd eta(grid.num_cells());
    for (int K = 0; K < grid.num_cells(); ++K) {
        const SpnMatrixBundle& B = bundles.at(grid.material(K));
        Eigen::VectorXd weight = B.Te.diagonal();
        if ((weight.array() <= 0.0).any()) {
            if (!star) {
                throw AssumptionViolation("residual estimator: de vanishes on cell " + std::to_string(K));
            }
            weight.setOnes();
        }
        const Eigen::VectorXd base = source.row(K).transpose() - B.H.transpose() * cell_divergence(grid, field, K);
        const double vol = grid.cell_volume(K);
        double s = 0.0;
        for (std::size_t q = 0; q < rule.xi.size(); ++q) {
            const Eigen::VectorXd r = base - B.Te * recon.evaluate(grid, K, rule.xi[q]);
            s += rule.w[q] * vol * (r.array().square() / weight.array()).sum();
        }
        eta(K) = std::sqrt(s);
    }
    return eta;
}

}  // namespace

Eigen::VectorXd residual_estimator(const TensorGrid& grid, const std::vector<SpnMatrixBundle>& bundles,
                                   const SourceField& source, const MixedField& field, const NodalFluxField& recon) {
    return residual_impl(grid, bundles, source, field, recon, false);
}

Eigen::VectorXd delta_star_residual(const TensorGrid& grid, const std::vector<SpnMatrixBundle>& bundles,
                                    const SourceField& source, const MixedField& field, const NodalFluxField& recon) {
    return residual_impl(grid, bundles, source, field, recon, true);
}

Eigen::VectorXd flux_estimator(const TensorGrid& grid, const std::vector<SpnMatrixBundle>& bundles,
                               const MixedField& field, const NodalFluxField& recon) {
    const CellRule rule = cell_rule(grid.dim());
    Eigen::VectorXd eta(grid.num_cells());
    for (int K = 0; K < grid.num_cells(); ++K) {
        const SpnMatrixBundle& B = bundles.at(grid.material(K));
        const Eigen::ArrayXd inv_d = B.To.diagonal().array().inverse();
        const double vol = grid.cell_volume(K);
        double s = 0.0;
        for (std::size_t q = 0; q < rule.xi.size(); ++q) {
            const Eigen::MatrixXd p = evaluate_flux(grid, field, K, rule.xi[q]);
            const Eigen::MatrixXd g = recon.gradient(grid, K, rule.xi[q]);
            for (int a = 0; a < grid.dim(); ++a) {
                const Eigen::VectorXd v = B.To * p.row(a).transpose() + B.H * g.row(a).transpose();
                s += rule.w[q] * vol * (v.array().square() * inv_d).sum();
            }
        }
        eta(K) = std::sqrt(s);
    }
    return eta;
}

Eigen::VectorXd robin_bc_estimator(const TensorGrid& grid, const std::vector<SpnMatrixBundle>& bundles,
                                   const MixedField& field, const NodalFluxField& recon) {
    Eigen::VectorXd eta = Eigen::VectorXd::Zero(grid.num_facets());
    for (int f = 0; f < grid.num_facets(); ++f) {
        if (grid.facet_kind(f) != BoundaryKind::Robin) continue;
        const FacetRef F = grid.facet(f);
        const int K = F.owner();
        const SpnMatrixBundle& B = bundles.at(grid.material(K));
        const int side = F.cells[0] == K ? 1 : 0;
        const double sign = side == 1 ? 1.0 : -1.0;
        const Eigen::VectorXd pn = sign * field.flux.row(f).transpose();
        const Eigen::MatrixXd gt_inv = B.Gamma_tilde.inverse();
        const CellRule rule = cell_rule(grid.dim(), F.axis, static_cast<double>(side));
        double s = 0.0;
        for (std::size_t q = 0; q < rule.xi.size(); ++q) {
            const Eigen::VectorXd e = B.H * recon.evaluate(grid, K, rule.xi[q]) - B.Gamma_tilde * pn;
            s += rule.w[q] * F.area * e.dot(gt_inv * e);
        }
        eta(f) = std::sqrt(s / (B.To.diagonal().maxCoeff() * F.h_perp));
    }
    return eta;
}

Eigen::VectorXd local_indicator(const TensorGrid& grid, const Eigen::VectorXd& eta_r, const Eigen::VectorXd& eta_f,
                                const Eigen::VectorXd& eta_bc, IndicatorMode mode,
                                const std::vector<Box>* subdomains) {
    if (mode == IndicatorMode::Ddm && subdomains == nullptr) {
        throw std::invalid_argument("local_indicator: ddm mode needs the subdomain layout");
    }
    auto subdomain_of = [&](int cell) {
        const Point c = grid.cell_center(cell);
        for (std::size_t s = 0; s < subdomains->size(); ++s) {
            if ((*subdomains)[s].contains(c)) return static_cast<int>(s);
        }
        return -1;
    };
    Eigen::VectorXd eta(grid.num_cells());
    for (int K = 0; K < grid.num_cells(); ++K) {
        double s = eta_r(K) * eta_r(K);
        const int home = mode == IndicatorMode::Ddm ? subdomain_of(K) : -1;
        for (int n : grid.neighbors(K)) {
            if (mode == IndicatorMode::Ddm && subdomain_of(n) != home) continue;
            s += eta_f(n) * eta_f(n);
        }
        for (int a = 0; a < grid.dim(); ++a) {
            for (int side = 0; side < 2; ++side) {
                const int f = grid.cell_facet(K, a, side);
                if (grid.facet_kind(f) == BoundaryKind::Robin) s += eta_bc(f) * eta_bc(f);
            }
        }
        eta(K) = std::sqrt(s);
    }
    return eta;
}

EstimatorField compute_estimators(const TensorGrid& grid, const std::vector<SpnMatrixBundle>& bundles,
                                  const SourceField& source, const MixedField& field, const NodalFluxField& recon) {
    EstimatorField e;
    e.eta_r = delta_star_residual(grid, bundles, source, field, recon);
    e.eta_f = flux_estimator(grid, bundles, field, recon);
    e.eta_bc = robin_bc_estimator(grid, bundles, field, recon);
    e.eta_K = local_indicator(grid, e.eta_r, e.eta_f, e.eta_bc, IndicatorMode::Mono);
    return e;
}

double reliability_bound(const TensorGrid& grid, const EstimatorField& est, int cell) {
    double s = est.eta_r(cell) * est.eta_r(cell);
    for (int n : grid.neighbors(cell)) s += est.eta_f(n) * est.eta_f(n);
    for (int a = 0; a < grid.dim(); ++a) {
        for (int side = 0; side < 2; ++side) {
            const int f = grid.cell_facet(cell, a, side);
            if (grid.facet_kind(f) == BoundaryKind::Robin) s += est.eta_bc(f) * est.eta_bc(f);
        }
    }
    return std::sqrt(s);
}

namespace {

// Local tensor grid of 3 x 3 (x 3) blocks centred on the cell, each block split into r parts.
struct PatchGrid {
    int dim = 2;
    int r = 1;
    int n = 3;  // sub-intervals per axis = 3r
    std::array<std::vector<double>, 3> ticks;
    std::array<std::array<int, 3>, 3> neighbor{};  // [axis][block] -> cell id or -1
    int center = -1;

    // Parent cell of a sub-cell, or -1 outside the patch.
    int parent(const Index3& s) const {
        int off_axis = -1;
        for (int a = 0; a < dim; ++a) {
            const int b = s[a] / r;
            if (b != 1) {
                if (off_axis >= 0) return -1;
                off_axis = a;
            }
        }
        if (off_axis < 0) return center;
        return neighbor[off_axis][s[off_axis] / r];
    }
};

}  // namespace

double approximate_local_dual_norm(const TensorGrid& grid, const std::vector<SpnMatrixBundle>& bundles,
                                   const SourceField& source, const MixedField& field, const NodalFluxField& recon,
                                   int cell, int levels) {
    const int dim = grid.dim();
    const int nc = field.components();
    PatchGrid P;
    P.dim = dim;
    P.r = 1 << levels;
    P.n = 3 * P.r;
    P.center = cell;
    const Index3 kidx = grid.cell_index(cell);
    for (int a = 0; a < 3; ++a) {
        if (a >= dim) {
            P.ticks[a] = {0.0, 1.0};
            continue;
        }
        const auto& t = grid.ticks(a);
        const int i = kidx[a];
        const double h = t[i + 1] - t[i];
        const double lo = i > 0 ? t[i - 1] : t[i] - h;
        const double hi = i + 2 < static_cast<int>(t.size()) ? t[i + 2] : t[i + 1] + h;
        const std::array<double, 4> edges{lo, t[i], t[i + 1], hi};
        for (int b = 0; b < 3; ++b) {
            for (int k = 0; k < P.r; ++k) P.ticks[a].push_back(edges[b] + (edges[b + 1] - edges[b]) * k / P.r);
        }
        P.ticks[a].push_back(hi);
        P.neighbor[a][1] = cell;
        for (int b : {0, 2}) {
            Index3 j = kidx;
            j[a] += b - 1;
            P.neighbor[a][b] = (j[a] >= 0 && j[a] < grid.intervals(a)) ? grid.cell_id(j) : -1;
        }
    }
    const Index3 ext{P.n, dim > 1 ? P.n : 1, dim > 2 ? P.n : 1};
    auto sub_extent = [&](const Index3& s, int a) { return P.ticks[a][s[a] + 1] - P.ticks[a][s[a]]; };

    // Flux dofs: one per free sub-facet.
    std::array<std::vector<int>, 3> facet_dof;
    int nq = 0;
    for (int a = 0; a < dim; ++a) {
        Index3 fe = ext;
        fe[a] += 1;
        facet_dof[a].assign(static_cast<std::size_t>(fe[0]) * fe[1] * fe[2], -1);
        for (int k = 0; k < fe[2]; ++k) {
            for (int j = 0; j < fe[1]; ++j) {
                for (int i = 0; i < fe[0]; ++i) {
                    const Index3 s{i, j, k};
                    Index3 lo = s;
                    lo[a] -= 1;
                    const int pl = lo[a] >= 0 ? P.parent(lo) : -1;
                    const int ph = s[a] < ext[a] ? P.parent(s) : -1;
                    bool free = false;
                    if (pl >= 0 && ph >= 0) {
                        free = true;
                    } else if (pl >= 0 || ph >= 0) {
                        // On the patch boundary: only exterior facets of the grid may carry q.n.
                        const int owner = pl >= 0 ? pl : ph;
                        const bool at_parent_face = (s[a] % P.r) == 0;
                        if (at_parent_face) {
                            const int pf = grid.cell_facet(owner, a, pl >= 0 ? 1 : 0);
                            const BoundaryKind kind = grid.facet_kind(pf);
                            free = kind == BoundaryKind::Dirichlet || (kind == BoundaryKind::Robin && owner == cell);
                        }
                    }
                    if (free) facet_dof[a][i + fe[0] * (j + fe[1] * k)] = nq++;
                }
            }
        }
    }
    auto fdof = [&](int a, const Index3& s) {
        Index3 fe = ext;
        fe[a] += 1;
        return facet_dof[a][s[0] + fe[0] * (s[1] + fe[1] * s[2])];
    };

    // Scalar dofs: the sub-cells of K.
    std::vector<Index3> k_cells;
    for (int k = 0; k < ext[2]; ++k) {
        for (int j = 0; j < ext[1]; ++j) {
            for (int i = 0; i < ext[0]; ++i) {
                const Index3 s{i, j, k};
                bool inside = true;
                for (int a = 0; a < dim; ++a) inside = inside && s[a] / P.r == 1;
                if (inside) k_cells.push_back(s);
            }
        }
    }
    const int nscalar = static_cast<int>(k_cells.size());
    const int N = (nq + nscalar) * nc;
    auto qi = [&](int d, int c) { return d * nc + c; };
    auto pi = [&](int d, int c) { return (nq + d) * nc + c; };

    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(N, N);
    Eigen::VectorXd ell = Eigen::VectorXd::Zero(N);
    const CellRule rule = cell_rule(dim);

    for (int k = 0; k < ext[2]; ++k) {
        for (int j = 0; j < ext[1]; ++j) {
            for (int i = 0; i < ext[0]; ++i) {
                const Index3 s{i, j, k};
                const int parent = P.parent(s);
                if (parent < 0) continue;
                const SpnMatrixBundle& B = bundles.at(grid.material(parent));
                const Eigen::VectorXd d_o = B.To.diagonal();
                const double hk = grid.cell_diameter(parent);
                double vol = 1.0;
                for (int a = 0; a < dim; ++a) vol *= sub_extent(s, a);

                // Local facet dofs (axis, side) and divergence coefficients.
                std::vector<int> dofs;
                std::vector<double> divc;
                std::vector<std::pair<int, int>> where;
                for (int a = 0; a < dim; ++a) {
                    for (int side = 0; side < 2; ++side) {
                        Index3 f = s;
                        f[a] += side;
                        dofs.push_back(fdof(a, f));
                        divc.push_back((side ? 1.0 : -1.0) / sub_extent(s, a));
                        where.emplace_back(a, side);
                    }
                }
                const double m_diag = vol / 3.0;
                const double m_off = vol / 6.0;
                for (std::size_t x = 0; x < dofs.size(); ++x) {
                    if (dofs[x] < 0) continue;
                    for (std::size_t y = 0; y < dofs.size(); ++y) {
                        if (dofs[y] < 0) continue;
                        double mass = 0.0;
                        if (where[x].first == where[y].first) mass = where[x].second == where[y].second ? m_diag : m_off;
                        const double div = d_o.maxCoeff() * hk * hk * vol * divc[x] * divc[y];
                        for (int c = 0; c < nc; ++c) G(qi(dofs[x], c), qi(dofs[y], c)) += d_o(c) * mass + div;
                    }
                }

                // -(To p_h + H grad phi~, q) with p_h, phi~ from the parent cell.
                Point origin;
                for (int a = 0; a < dim; ++a) {
                    const double plo = grid.ticks(a)[grid.cell_index(parent)[a]];
                    origin[a] = (P.ticks[a][s[a]] - plo) / grid.extent(parent, a);
                }
                for (std::size_t q = 0; q < rule.xi.size(); ++q) {
                    Point xi = rule.xi[q];
                    Point xp = xi;
                    for (int a = 0; a < dim; ++a) xp[a] = origin[a] + xi[a] * sub_extent(s, a) / grid.extent(parent, a);
                    const Eigen::MatrixXd p = evaluate_flux(grid, field, parent, xp);
                    const Eigen::MatrixXd g = recon.gradient(grid, parent, xp);
                    for (std::size_t x = 0; x < dofs.size(); ++x) {
                        if (dofs[x] < 0) continue;
                        const int a = where[x].first;
                        const double basis = where[x].second ? xi[a] : 1.0 - xi[a];
                        const Eigen::VectorXd rf = B.To * p.row(a).transpose() + B.H * g.row(a).transpose();
                        for (int c = 0; c < nc; ++c) ell(qi(dofs[x], c)) -= rule.w[q] * vol * rf(c) * basis;
                    }
                    if (parent == cell) {
                        // Residual against psi on this sub-cell.
                        int d = 0;
                        while (k_cells[d] != s) ++d;
                        const Eigen::VectorXd rr = source.row(cell).transpose() -
                                                   B.H.transpose() * cell_divergence(grid, field, cell) -
                                                   B.Te * recon.evaluate(grid, cell, xp);
                        for (int c = 0; c < nc; ++c) ell(pi(d, c)) += rule.w[q] * vol * rr(c);
                    }
                }
                if (parent == cell) {
                    int d = 0;
                    while (k_cells[d] != s) ++d;
                    const Eigen::VectorXd d_e = B.Te.diagonal();
                    for (int c = 0; c < nc; ++c) G(pi(d, c), pi(d, c)) += d_e(c) * vol;

                    // Robin sub-facets of K: S-norm term and boundary residual.
                    for (int a = 0; a < dim; ++a) {
                        for (int side = 0; side < 2; ++side) {
                            Index3 f = s;
                            f[a] += side;
                            const int dof = fdof(a, f);
                            if (dof < 0) continue;
                            const int pf = grid.cell_facet(cell, a, side);
                            if (grid.facet_kind(pf) != BoundaryKind::Robin) continue;
                            if (f[a] != (side ? 2 * P.r : P.r)) continue;
                            const FacetRef F = grid.facet(pf);
                            double area = 1.0;
                            for (int b = 0; b < dim; ++b) {
                                if (b != a) area *= sub_extent(s, b);
                            }
                            const double w = B.To.diagonal().maxCoeff() * F.h_perp * area;
                            for (int c = 0; c < nc; ++c) {
                                for (int cp = 0; cp < nc; ++cp) G(qi(dof, c), qi(dof, cp)) += w * B.Gamma_tilde(c, cp);
                            }
                            const double sign = side ? 1.0 : -1.0;
                            const Eigen::VectorXd pn = sign * field.flux.row(pf).transpose();
                            const CellRule frule = cell_rule(dim, a, static_cast<double>(side));
                            for (std::size_t q = 0; q < frule.xi.size(); ++q) {
                                Point xp = frule.xi[q];
                                for (int b = 0; b < dim; ++b) {
                                    if (b != a) xp[b] = origin[b] + frule.xi[q][b] * sub_extent(s, b) / grid.extent(cell, b);
                                }
                                xp[a] = static_cast<double>(side);
                                const Eigen::VectorXd e = B.H * recon.evaluate(grid, cell, xp) - B.Gamma_tilde * pn;
                                for (int c = 0; c < nc; ++c) ell(qi(dof, c)) += frule.w[q] * area * sign * e(c);
                            }
                        }
                    }
                }
            }
        }
    }

    if (ell.lpNorm<Eigen::Infinity>() == 0.0) return 0.0;
    Eigen::LLT<Eigen::MatrixXd> llt(G);
    if (llt.info() != Eigen::Success) {
        Eigen::LDLT<Eigen::MatrixXd> ldlt(G);
        return std::sqrt(std::max(0.0, ell.dot(ldlt.solve(ell))));
    }
    return std::sqrt(std::max(0.0, ell.dot(llt.solve(ell))));
}

}  // namespace spn
