#include "spn/reconstruction.hpp"

#include <map>

namespace spn {

Eigen::VectorXd NodalFluxField::evaluate(const TensorGrid& grid, int cell, const Point& xi) const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(components());
    for (int bits = 0; bits < grid.corners(); ++bits) {
        double w = 1.0;
        for (int a = 0; a < grid.dim(); ++a) w *= ((bits >> a) & 1) ? xi[a] : 1.0 - xi[a];
        v += w * values.row(grid.cell_vertex(cell, bits)).transpose();
    }
    return v;
}

Eigen::MatrixXd NodalFluxField::gradient(const TensorGrid& grid, int cell, const Point& xi) const {
    const int dim = grid.dim();
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(dim, components());
    for (int bits = 0; bits < grid.corners(); ++bits) {
        const auto corner = values.row(grid.cell_vertex(cell, bits));
        for (int a = 0; a < dim; ++a) {
            double w = (((bits >> a) & 1) ? 1.0 : -1.0) / grid.extent(cell, a);
            for (int b = 0; b < dim; ++b) {
                if (b != a) w *= ((bits >> b) & 1) ? xi[b] : 1.0 - xi[b];
            }
            g.row(a) += w * corner;
        }
    }
    return g;
}

namespace {

bool is_domain_boundary(BoundaryKind k) {
    return k == BoundaryKind::Dirichlet || k == BoundaryKind::Neumann || k == BoundaryKind::Robin;
}

// Interval indices along `axis` whose closure contains x.
std::vector<int> containing_intervals(const TensorGrid& g, int axis, double x) {
    const auto& t = g.ticks(axis);
    const auto it = std::lower_bound(t.begin(), t.end(), x);
    std::vector<int> out;
    if (it != t.end() && *it == x) {
        const int k = static_cast<int>(it - t.begin());
        if (k - 1 >= 0) out.push_back(k - 1);
        if (k < g.intervals(axis)) out.push_back(k);
    } else {
        out.push_back(g.locate(axis, x));
    }
    return out;
}

}  // namespace

MultiDomainNodalField average_reconstruct_multidomain(const SubdomainLayout& layout,
                                                      const std::vector<SpnMatrixBundle>& bundles,
                                                      const std::vector<MixedField>& fields) {
    const int dim = layout.dim;
    const int nc = fields.front().components();
    MultiDomainNodalField out;

    std::map<Point, int> index;
    std::vector<std::vector<int>> local_to_global(layout.grids.size());
    for (std::size_t s = 0; s < layout.grids.size(); ++s) {
        const TensorGrid& g = layout.grids[s];
        local_to_global[s].resize(g.num_vertices());
        for (int v = 0; v < g.num_vertices(); ++v) {
            const Point p = g.vertex_coords(v);
            auto [it, inserted] = index.try_emplace(p, static_cast<int>(out.vertices.size()));
            if (inserted) out.vertices.push_back(p);
            local_to_global[s][v] = it->second;
        }
    }

    out.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(out.vertices.size()), nc);
    for (std::size_t v = 0; v < out.vertices.size(); ++v) {
        const Point& a = out.vertices[v];
        bool dirichlet = false;
        bool robin = false;
        Eigen::VectorXd sum_phi = Eigen::VectorXd::Zero(nc);
        Eigen::VectorXd sum_robin = Eigen::VectorXd::Zero(nc);
        int count = 0;
        for (std::size_t s = 0; s < layout.grids.size(); ++s) {
            if (!layout.boxes[s].contains(a)) continue;
            const TensorGrid& g = layout.grids[s];
            std::array<std::vector<int>, 3> ranges;
            for (int t = 0; t < 3; ++t) ranges[t] = t < dim ? containing_intervals(g, t, a[t]) : std::vector<int>{0};
            for (int k : ranges[2]) {
                for (int j : ranges[1]) {
                    for (int i : ranges[0]) {
                        const int K = g.cell_id({i, j, k});
                        const Box box = g.cell_box(K);
                        const SpnMatrixBundle& B = bundles.at(g.material(K));
                        Eigen::VectorXd robin_value = Eigen::VectorXd::Zero(nc);
                        int robin_facets = 0;
                        for (int t = 0; t < dim; ++t) {
                            for (int side = 0; side < 2; ++side) {
                                const double plane = side == 0 ? box.lo[t] : box.hi[t];
                                if (a[t] != plane) continue;
                                const int f = g.cell_facet(K, t, side);
                                const BoundaryKind kind = g.facet_kind(f);
                                if (!is_domain_boundary(kind)) continue;
                                if (kind == BoundaryKind::Dirichlet) dirichlet = true;
                                if (kind == BoundaryKind::Robin) {
                                    robin = true;
                                    const double sign = side == 0 ? -1.0 : 1.0;
                                    const Eigen::VectorXd pn = sign * fields[s].flux.row(f).transpose();
                                    robin_value += B.Gamma_e_inv * (B.H.transpose() * pn);
                                    ++robin_facets;
                                }
                            }
                        }
                        const Eigen::VectorXd phi = fields[s].phi.row(K).transpose();
                        sum_phi += phi;
                        sum_robin += robin_facets > 0 ? Eigen::VectorXd(robin_value / robin_facets) : phi;
                        ++count;
                    }
                }
            }
        }
        if (dirichlet || count == 0) continue;
        out.values.row(static_cast<Eigen::Index>(v)) = (robin ? sum_robin : sum_phi).transpose() / count;
    }

    for (std::size_t s = 0; s < layout.grids.size(); ++s) {
        NodalFluxField f;
        f.values.resize(layout.grids[s].num_vertices(), nc);
        for (int v = 0; v < layout.grids[s].num_vertices(); ++v) f.values.row(v) = out.values.row(local_to_global[s][v]);
        out.per_subdomain.push_back(std::move(f));
    }
    return out;
}

NodalFluxField average_reconstruct(const TensorGrid& grid, const std::vector<SpnMatrixBundle>& bundles,
                                   const MixedField& field) {
    SubdomainLayout single;
    single.dim = grid.dim();
    single.domain = grid.domain();
    single.boxes = {grid.domain()};
    single.grids = {grid};
    MultiDomainNodalField m = average_reconstruct_multidomain(single, bundles, {field});
    return std::move(m.per_subdomain.front());
}

}  // namespace spn
