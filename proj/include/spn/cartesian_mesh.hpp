#pragma once

#include <array>
#include <limits>
#include <vector>

namespace spn {

using Point = std::array<double, 3>;
using Index3 = std::array<int, 3>;

enum class BoundaryKind { Interior, Dirichlet, Neumann, Robin, Interface };

const char* to_string(BoundaryKind kind);

/// Axis-aligned box. Axes at or beyond `dim` are ignored.
struct Box {
    int dim = 3;
    Point lo{0.0, 0.0, 0.0};
    Point hi{1.0, 1.0, 1.0};

    double measure() const;
    bool contains(const Point& x) const;  // closed box
    bool operator==(const Box&) const = default;
};

/// Intersection of two boxes; `measure() <= 0` when they do not overlap.
Box intersect(const Box& a, const Box& b);

struct MaterialRegion {
    Box box;
    int material = 0;
};

/// Boundary condition on the part of the plane {x_axis = position} whose tangential
/// coordinates lie in [lo, hi]. Later regions override earlier ones.
struct BoundaryRegion {
    int axis = 0;
    double position = 0.0;
    Point lo{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
             -std::numeric_limits<double>::infinity()};
    Point hi{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
             std::numeric_limits<double>::infinity()};
    BoundaryKind kind = BoundaryKind::Dirichlet;
};

/// Region covering the whole face of `domain` normal to `axis` on `side` (0 low, 1 high).
BoundaryRegion face_region(const Box& domain, int axis, int side, BoundaryKind kind);

struct FacetRef {
    int id = -1;
    int axis = 0;
    std::array<int, 2> cells{-1, -1};  // lower / upper cell along the axis, -1 if outside
    double area = 0.0;
    bool exterior = false;
    BoundaryKind kind = BoundaryKind::Interior;
    double h_perp = 0.0;  // extent of the owning cell along `axis` (lower cell for interior facets)
    Point center{};

    int owner() const { return cells[0] >= 0 ? cells[0] : cells[1]; }
    /// +1 if the global normal (+e_axis) is the outward normal of `cell`, -1 otherwise.
    int outward_sign(int cell) const { return cell == cells[0] ? 1 : -1; }
};

/// Tensor-product Cartesian grid in 2 or 3 dimensions. Immutable.
class TensorGrid {
public:
    TensorGrid() = default;
    TensorGrid(int dim, std::array<std::vector<double>, 3> ticks, std::vector<int> cell_material,
               std::vector<BoundaryRegion> boundary);

    int dim() const { return dim_; }
    const std::vector<double>& ticks(int axis) const { return ticks_[axis]; }
    int intervals(int axis) const { return n_[axis]; }
    int num_cells() const { return n_[0] * n_[1] * n_[2]; }
    int num_facets() const { return facet_offset_[3]; }
    int num_vertices() const { return (n_[0] + 1) * (dim_ > 1 ? n_[1] + 1 : 1) * (dim_ > 2 ? n_[2] + 1 : 1); }
    int facets_on_axis(int axis) const { return facet_offset_[axis + 1] - facet_offset_[axis]; }
    Box domain() const;

    Index3 cell_index(int cell) const;
    int cell_id(const Index3& idx) const { return idx[0] + n_[0] * (idx[1] + n_[1] * idx[2]); }
    double extent(int cell, int axis) const;
    double cell_volume(int cell) const;
    double cell_diameter(int cell) const;
    Box cell_box(int cell) const;
    Point cell_center(int cell) const;
    int material(int cell) const { return material_[cell]; }
    const std::vector<int>& materials() const { return material_; }

    int facet_id(int axis, const Index3& idx) const;
    int cell_facet(int cell, int axis, int side) const;
    FacetRef facet(int f) const;
    BoundaryKind facet_kind(int f) const { return facet_kind_[f]; }
    const std::vector<BoundaryRegion>& boundary_regions() const { return boundary_; }

    Index3 vertex_extents() const;
    int vertex_id(const Index3& idx) const;
    Point vertex_coords(int v) const;
    /// Vertex of `cell` at corner `bits` (bit a set -> high side along axis a).
    int cell_vertex(int cell, int bits) const;
    int corners() const { return 1 << dim_; }

    /// K itself and its face neighbours, in increasing cell order.
    std::vector<int> neighbors(int cell) const;

    /// Interval index containing coordinate x along axis (clamped to valid range).
    int locate(int axis, double x) const;

private:
    int dim_ = 0;
    std::array<std::vector<double>, 3> ticks_;
    Index3 n_{1, 1, 1};
    std::array<int, 4> facet_offset_{0, 0, 0, 0};
    std::vector<int> material_;
    std::vector<BoundaryRegion> boundary_;
    std::vector<BoundaryKind> facet_kind_;
};

struct GridSpec {
    int dim = 3;
    Box domain;
    Index3 cells{1, 1, 1};                     // used when `ticks` is empty on an axis
    std::array<std::vector<double>, 3> ticks;  // explicit breakpoints (optional)
    std::vector<MaterialRegion> regions;       // later regions override earlier ones
    int background_material = 0;
    std::vector<BoundaryRegion> boundary;
    bool augment = true;  // insert region bounds into the breakpoints
};

/// Throws MisalignedRegionError if `augment` is off and a region bound is not a breakpoint, and
/// LayoutError if a boundary facet has no boundary region.
TensorGrid build_grid(const GridSpec& spec);

/// Bisects the marked intervals (per axis). Children inherit the parent material.
TensorGrid refine_slabs(const TensorGrid& grid, const std::array<std::vector<int>, 3>& marked);

/// Bisects every interval on every axis.
TensorGrid refine_uniform(const TensorGrid& grid);

struct Interface {
    int a = 0, b = 0;  // subdomain indices, a < b
    int axis = 0;
    double position = 0.0;
    Box box;          // degenerate along `axis`
    int low_side = 0;  // 0 if subdomain a lies below the plane, 1 if b does
};

struct SubdomainLayout {
    int dim = 3;
    Box domain;
    std::vector<Box> boxes;
    std::vector<TensorGrid> grids;
    std::vector<Interface> interfaces;

    long total_cells() const;
};

/// Splits `global` into subdomain grids (restriction of its breakpoints and materials). Facets of a
/// subdomain that are not on the domain boundary get BoundaryKind::Interface. Throws LayoutError if
/// the boxes do not tile the domain or are not aligned with the breakpoints.
SubdomainLayout make_layout(const TensorGrid& global, const std::vector<Box>& boxes);

/// Finds the interfaces of a set of boxes (pairs sharing a face piece of positive measure).
std::vector<Interface> find_interfaces(int dim, const std::vector<Box>& boxes);

struct OverlayPatch {
    double area = 0.0;
    Point center{};
    std::array<int, 2> parent{-1, -1};  // local index into InterfaceMesh::parents per side
};

/// Common refinement of the two facet partitions of an interface. Side 0 is subdomain `a`.
struct InterfaceMesh {
    int interface = -1;
    int axis = 0;
    std::array<int, 2> subdomain{-1, -1};
    std::array<int, 2> outward_sign{1, -1};  // sign of +e_axis as outward normal, per side
    std::array<std::vector<int>, 2> parents;  // facet ids in the subdomain grids
    std::array<std::vector<double>, 2> parent_area;
    std::vector<OverlayPatch> patches;
};

InterfaceMesh overlay_traces(const SubdomainLayout& layout, int interface);

}  // namespace spn
