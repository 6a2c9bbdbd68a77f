#include "spn/reconstruction.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace spn;
using spn::testing::simple_bundles;
using spn::testing::unit_grid;

namespace {

int vertex_at(const TensorGrid& g, int i, int j, int k = 0) { return g.vertex_id({i, j, k}); }

}  // namespace

TEST(Reconstruction, UniformFieldIsReproduced) {
    const TensorGrid g = unit_grid(3, 3, BoundaryKind::Neumann);
    MixedField f = zero_field(g, 2);
    f.phi.col(0).setConstant(1.5);
    f.phi.col(1).setConstant(-2.0);
    const NodalFluxField r = average_reconstruct(g, simple_bundles(1, 3), f);
    for (int v = 0; v < g.num_vertices(); ++v) {
        EXPECT_EQ(r.values(v, 0), 1.5);
        EXPECT_EQ(r.values(v, 1), -2.0);
    }
}

TEST(Reconstruction, InteriorNodeIsTheMean) {
    const TensorGrid g = unit_grid(2, 2, BoundaryKind::Neumann);
    MixedField f = zero_field(g, 1);
    f.phi << 1.0, 2.0, 3.0, 4.0;
    const NodalFluxField r = average_reconstruct(g, simple_bundles(1, 1), f);
    EXPECT_DOUBLE_EQ(r.values(vertex_at(g, 1, 1), 0), 2.5);
    EXPECT_DOUBLE_EQ(r.values(vertex_at(g, 0, 0), 0), 1.0);
    EXPECT_DOUBLE_EQ(r.values(vertex_at(g, 1, 0), 0), 1.5);
}

TEST(Reconstruction, RobinCornerUsesTheBoundaryTrace) {
    const TensorGrid g = unit_grid(2, 1, BoundaryKind::Robin);
    const auto bundles = simple_bundles(1, 1);
    MixedField f = zero_field(g, 1);
    f.phi(0, 0) = 7.0;
    // Outward p.n = 0.3 on the two facets at the high corner.
    f.flux(g.cell_facet(0, 0, 1), 0) = 0.3;
    f.flux(g.cell_facet(0, 1, 1), 0) = 0.3;
    const NodalFluxField r = average_reconstruct(g, bundles, f);
    EXPECT_NEAR(r.values(vertex_at(g, 1, 1), 0), 0.6, 1e-15);
    // Low corner: outward p.n = -flux = 0 there.
    EXPECT_NEAR(r.values(vertex_at(g, 0, 0), 0), 0.0, 1e-15);
}

TEST(Reconstruction, DirichletVerticesVanish) {
    const TensorGrid g = unit_grid(2, 3, BoundaryKind::Dirichlet);
    MixedField f = zero_field(g, 1);
    f.phi.setOnes();
    const NodalFluxField r = average_reconstruct(g, simple_bundles(1, 1), f);
    for (int v = 0; v < g.num_vertices(); ++v) {
        const Point x = g.vertex_coords(v);
        const bool boundary = x[0] == 0.0 || x[0] == 1.0 || x[1] == 0.0 || x[1] == 1.0;
        EXPECT_EQ(r.values(v, 0), boundary ? 0.0 : 1.0);
    }
}

TEST(Reconstruction, ChangesAreLocal) {
    const TensorGrid g = unit_grid(2, 4, BoundaryKind::Neumann);
    const auto bundles = simple_bundles(1, 1);
    MixedField f = zero_field(g, 1);
    f.phi.col(0).setLinSpaced(0.0, 1.0);
    const NodalFluxField a = average_reconstruct(g, bundles, f);
    const int K = g.cell_id({1, 2, 0});
    f.phi(K, 0) += 1.0;
    const NodalFluxField b = average_reconstruct(g, bundles, f);
    std::vector<bool> touched(g.num_vertices(), false);
    for (int c = 0; c < g.corners(); ++c) touched[g.cell_vertex(K, c)] = true;
    for (int v = 0; v < g.num_vertices(); ++v) {
        if (touched[v]) {
            EXPECT_NE(a.values(v, 0), b.values(v, 0));
        } else {
            EXPECT_EQ(a.values(v, 0), b.values(v, 0));
        }
    }
}

TEST(Reconstruction, EvaluationIsMultilinear) {
    const TensorGrid g = unit_grid(3, 2, BoundaryKind::Neumann);
    NodalFluxField r;
    r.values.resize(g.num_vertices(), 1);
    for (int v = 0; v < g.num_vertices(); ++v) {
        const Point x = g.vertex_coords(v);
        r.values(v, 0) = 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[2] + x[0] * x[1];
    }
    const int K = g.cell_id({1, 0, 1});
    const Box b = g.cell_box(K);
    const Point xi{0.3, 0.6, 0.8};
    Point x;
    for (int a = 0; a < 3; ++a) x[a] = b.lo[a] + xi[a] * (b.hi[a] - b.lo[a]);
    EXPECT_NEAR(r.evaluate(g, K, xi)(0), 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[2] + x[0] * x[1], 1e-14);
    const Eigen::MatrixXd grad = r.gradient(g, K, xi);
    EXPECT_NEAR(grad(0, 0), 2.0 + x[1], 1e-13);
    EXPECT_NEAR(grad(1, 0), -1.0 + x[0], 1e-13);
    EXPECT_NEAR(grad(2, 0), 0.5, 1e-13);
}

namespace {

Box box2(double x0, double y0, double x1, double y1) {
    Box b;
    b.dim = 2;
    b.lo = {x0, y0, 0.0};
    b.hi = {x1, y1, 1.0};
    return b;
}

}  // namespace

TEST(MultiDomainReconstruction, MatchingSplitEqualsMono) {
    const TensorGrid g = unit_grid(2, 4, BoundaryKind::Robin);
    const auto bundles = simple_bundles(1, 3);
    MixedField f = random_field(g, 2, 3);
    const SubdomainLayout layout = make_layout(g, {box2(0, 0, 0.5, 1), box2(0.5, 0, 1, 1)});
    std::vector<MixedField> parts;
    for (const TensorGrid& sg : layout.grids) {
        MixedField p = zero_field(sg, 2);
        for (int K = 0; K < sg.num_cells(); ++K) {
            const Point c = sg.cell_center(K);
            p.phi.row(K) = f.phi.row(g.cell_id({g.locate(0, c[0]), g.locate(1, c[1]), 0}));
        }
        for (int F = 0; F < sg.num_facets(); ++F) {
            const FacetRef r = sg.facet(F);
            Index3 idx{g.locate(0, r.center[0]), g.locate(1, r.center[1]), 0};
            idx[r.axis] = static_cast<int>(std::lower_bound(g.ticks(r.axis).begin(), g.ticks(r.axis).end(), r.center[r.axis]) -
                                           g.ticks(r.axis).begin());
            p.flux.row(F) = f.flux.row(g.facet_id(r.axis, idx));
        }
        parts.push_back(p);
    }
    const NodalFluxField mono = average_reconstruct(g, bundles, f);
    const MultiDomainNodalField multi = average_reconstruct_multidomain(layout, bundles, parts);
    for (std::size_t s = 0; s < layout.grids.size(); ++s) {
        const TensorGrid& sg = layout.grids[s];
        for (int v = 0; v < sg.num_vertices(); ++v) {
            const Point x = sg.vertex_coords(v);
            const int gv = g.vertex_id({g.locate(0, x[0]) + (x[0] == 1.0), g.locate(1, x[1]) + (x[1] == 1.0), 0});
            const Point gx = g.vertex_coords(gv);
            ASSERT_EQ(gx[0], x[0]);
            ASSERT_EQ(gx[1], x[1]);
            EXPECT_NEAR((multi.per_subdomain[s].values.row(v) - mono.values.row(gv)).norm(), 0.0, 1e-14);
        }
    }
}

TEST(MultiDomainReconstruction, HangingNodeUsesTheContainingCell) {
    GridSpec spec;
    spec.dim = 2;
    spec.domain = box2(0, 0, 2, 1);
    spec.cells = {2, 1, 1};
    for (int a = 0; a < 2; ++a) {
        for (int side = 0; side < 2; ++side) spec.boundary.push_back(face_region(spec.domain, a, side, BoundaryKind::Neumann));
    }
    const TensorGrid g = build_grid(spec);
    SubdomainLayout layout = make_layout(g, {box2(0, 0, 1, 1), box2(1, 0, 2, 1)});
    layout.grids[1] = refine_slabs(layout.grids[1], {std::vector<int>{}, {0}, {}});
    MixedField left = zero_field(layout.grids[0], 1);
    MixedField right = zero_field(layout.grids[1], 1);
    left.phi(0, 0) = 5.0;
    right.phi(0, 0) = 1.0;  // lower fine cell
    right.phi(1, 0) = 3.0;  // upper fine cell
    const MultiDomainNodalField r = average_reconstruct_multidomain(layout, simple_bundles(1, 1), {left, right});
    const int v = layout.grids[1].vertex_id({0, 1, 0});
    ASSERT_EQ(layout.grids[1].vertex_coords(v)[1], 0.5);
    EXPECT_DOUBLE_EQ(r.per_subdomain[1].values(v, 0), 3.0);
}
