#include "spn/cartesian_mesh.hpp"

#include "spn/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>

namespace spn {

const char* to_string(BoundaryKind kind) {
    switch (kind) {
        case BoundaryKind::Interior: return "interior";
        case BoundaryKind::Dirichlet: return "dirichlet";
        case BoundaryKind::Neumann: return "neumann";
        case BoundaryKind::Robin: return "robin";
        case BoundaryKind::Interface: return "interface";
    }
    return "?";
}

double Box::measure() const {
    double m = 1.0;
    for (int a = 0; a < dim; ++a) m *= hi[a] - lo[a];
    return m;
}

bool Box::contains(const Point& x) const {
    for (int a = 0; a < dim; ++a) {
        if (x[a] < lo[a] || x[a] > hi[a]) return false;
    }
    return true;
}

Box intersect(const Box& a, const Box& b) {
    Box r;
    r.dim = a.dim;
    for (int k = 0; k < 3; ++k) {
        r.lo[k] = std::max(a.lo[k], b.lo[k]);
        r.hi[k] = std::min(a.hi[k], b.hi[k]);
    }
    return r;
}

BoundaryRegion face_region(const Box& domain, int axis, int side, BoundaryKind kind) {
    BoundaryRegion r;
    r.axis = axis;
    r.position = side == 0 ? domain.lo[axis] : domain.hi[axis];
    r.kind = kind;
    return r;
}

TensorGrid::TensorGrid(int dim, std::array<std::vector<double>, 3> ticks, std::vector<int> cell_material,
                       std::vector<BoundaryRegion> boundary)
    : dim_(dim), ticks_(std::move(ticks)), material_(std::move(cell_material)), boundary_(std::move(boundary)) {
    if (dim_ != 2 && dim_ != 3) throw std::invalid_argument("grid dimension must be 2 or 3");
    for (int a = 0; a < 3; ++a) {
        if (a >= dim_) ticks_[a] = {0.0, 1.0};
        if (ticks_[a].size() < 2) throw std::invalid_argument("axis needs at least two breakpoints");
        for (std::size_t i = 1; i < ticks_[a].size(); ++i) {
            if (!(ticks_[a][i] > ticks_[a][i - 1])) {
                throw std::invalid_argument("breakpoints must be strictly increasing");
            }
        }
        n_[a] = static_cast<int>(ticks_[a].size()) - 1;
    }
    if (static_cast<int>(material_.size()) != num_cells()) {
        throw std::invalid_argument("cell material map has the wrong size");
    }
    facet_offset_[0] = 0;
    for (int a = 0; a < 3; ++a) {
        int count = 0;
        if (a < dim_) {
            count = n_[a] + 1;
            for (int b = 0; b < 3; ++b) {
                if (b != a) count *= n_[b];
            }
        }
        facet_offset_[a + 1] = facet_offset_[a] + count;
    }

    facet_kind_.assign(num_facets(), BoundaryKind::Interior);
    for (int a = 0; a < dim_; ++a) {
        for (int side = 0; side < 2; ++side) {
            const int plane = side == 0 ? 0 : n_[a];
            const double pos = ticks_[a][plane];
            Index3 idx{0, 0, 0};
            const int b = (a + 1) % 3;
            const int c = (a + 2) % 3;
            for (idx[c] = 0; idx[c] < n_[c]; ++idx[c]) {
                for (idx[b] = 0; idx[b] < n_[b]; ++idx[b]) {
                    idx[a] = plane;
                    const int f = facet_id(a, idx);
                    const Point center = facet(f).center;
                    bool found = false;
                    BoundaryKind kind = BoundaryKind::Dirichlet;
                    for (const auto& r : boundary_) {
                        if (r.axis != a || r.position != pos) continue;
                        bool inside = true;
                        for (int t = 0; t < dim_; ++t) {
                            if (t == a) continue;
                            if (center[t] < r.lo[t] || center[t] > r.hi[t]) inside = false;
                        }
                        if (inside) {
                            kind = r.kind;
                            found = true;
                        }
                    }
                    if (!found) {
                        throw LayoutError("boundary facet on axis " + std::to_string(a) + " at " +
                                          std::to_string(pos) + " has no boundary condition");
                    }
                    facet_kind_[f] = kind;
                }
            }
        }
    }
}

Box TensorGrid::domain() const {
    Box b;
    b.dim = dim_;
    for (int a = 0; a < 3; ++a) {
        b.lo[a] = ticks_[a].front();
        b.hi[a] = ticks_[a].back();
    }
    return b;
}

Index3 TensorGrid::cell_index(int cell) const {
    Index3 idx;
    idx[0] = cell % n_[0];
    idx[1] = (cell / n_[0]) % n_[1];
    idx[2] = cell / (n_[0] * n_[1]);
    return idx;
}

double TensorGrid::extent(int cell, int axis) const {
    const int i = cell_index(cell)[axis];
    return ticks_[axis][i + 1] - ticks_[axis][i];
}

double TensorGrid::cell_volume(int cell) const {
    double v = 1.0;
    for (int a = 0; a < dim_; ++a) v *= extent(cell, a);
    return v;
}

double TensorGrid::cell_diameter(int cell) const {
    double s = 0.0;
    for (int a = 0; a < dim_; ++a) s += extent(cell, a) * extent(cell, a);
    return std::sqrt(s);
}

Box TensorGrid::cell_box(int cell) const {
    const Index3 idx = cell_index(cell);
    Box b;
    b.dim = dim_;
    for (int a = 0; a < 3; ++a) {
        b.lo[a] = ticks_[a][idx[a]];
        b.hi[a] = ticks_[a][idx[a] + 1];
    }
    return b;
}

Point TensorGrid::cell_center(int cell) const {
    const Box b = cell_box(cell);
    Point c;
    for (int a = 0; a < 3; ++a) c[a] = 0.5 * (b.lo[a] + b.hi[a]);
    return c;
}

int TensorGrid::facet_id(int axis, const Index3& idx) const {
    Index3 ext = n_;
    ext[axis] += 1;
    return facet_offset_[axis] + idx[0] + ext[0] * (idx[1] + ext[1] * idx[2]);
}

int TensorGrid::cell_facet(int cell, int axis, int side) const {
    Index3 idx = cell_index(cell);
    idx[axis] += side;
    return facet_id(axis, idx);
}

FacetRef TensorGrid::facet(int f) const {
    FacetRef r;
    r.id = f;
    int axis = 0;
    while (f >= facet_offset_[axis + 1]) ++axis;
    r.axis = axis;
    Index3 ext = n_;
    ext[axis] += 1;
    int local = f - facet_offset_[axis];
    Index3 idx;
    idx[0] = local % ext[0];
    idx[1] = (local / ext[0]) % ext[1];
    idx[2] = local / (ext[0] * ext[1]);

    Index3 lower = idx;
    lower[axis] -= 1;
    r.cells[0] = idx[axis] > 0 ? cell_id(lower) : -1;
    r.cells[1] = idx[axis] < n_[axis] ? cell_id(idx) : -1;
    r.exterior = r.cells[0] < 0 || r.cells[1] < 0;
    r.kind = facet_kind_.empty() ? BoundaryKind::Interior : facet_kind_[f];
    r.area = 1.0;
    for (int a = 0; a < dim_; ++a) {
        if (a == axis) {
            r.center[a] = ticks_[a][idx[a]];
        } else {
            r.area *= ticks_[a][idx[a] + 1] - ticks_[a][idx[a]];
            r.center[a] = 0.5 * (ticks_[a][idx[a]] + ticks_[a][idx[a] + 1]);
        }
    }
    for (int a = dim_; a < 3; ++a) r.center[a] = 0.5;
    r.h_perp = extent(r.owner(), axis);
    return r;
}

Index3 TensorGrid::vertex_extents() const {
    Index3 e{1, 1, 1};
    for (int a = 0; a < dim_; ++a) e[a] = n_[a] + 1;
    return e;
}

int TensorGrid::vertex_id(const Index3& idx) const {
    const Index3 e = vertex_extents();
    return idx[0] + e[0] * (idx[1] + e[1] * idx[2]);
}

Point TensorGrid::vertex_coords(int v) const {
    const Index3 e = vertex_extents();
    const Index3 idx{v % e[0], (v / e[0]) % e[1], v / (e[0] * e[1])};
    Point p{0.0, 0.0, 0.0};
    for (int a = 0; a < dim_; ++a) p[a] = ticks_[a][idx[a]];
    return p;
}

int TensorGrid::cell_vertex(int cell, int bits) const {
    Index3 idx = cell_index(cell);
    for (int a = 0; a < dim_; ++a) idx[a] += (bits >> a) & 1;
    for (int a = dim_; a < 3; ++a) idx[a] = 0;
    return vertex_id(idx);
}

std::vector<int> TensorGrid::neighbors(int cell) const {
    std::vector<int> out{cell};
    const Index3 idx = cell_index(cell);
    for (int a = 0; a < dim_; ++a) {
        for (int d : {-1, 1}) {
            Index3 j = idx;
            j[a] += d;
            if (j[a] >= 0 && j[a] < n_[a]) out.push_back(cell_id(j));
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

int TensorGrid::locate(int axis, double x) const {
    const auto& t = ticks_[axis];
    int i = static_cast<int>(std::upper_bound(t.begin(), t.end(), x) - t.begin()) - 1;
    return std::clamp(i, 0, n_[axis] - 1);
}

namespace {

bool has_tick(const std::vector<double>& t, double x) { return std::binary_search(t.begin(), t.end(), x); }

}  // namespace

TensorGrid build_grid(const GridSpec& spec) {
    std::array<std::vector<double>, 3> ticks;
    for (int a = 0; a < spec.dim; ++a) {
        if (!spec.ticks[a].empty()) {
            ticks[a] = spec.ticks[a];
        } else {
            const int n = spec.cells[a];
            if (n < 1) throw std::invalid_argument("cell count must be positive");
            const double lo = spec.domain.lo[a];
            const double hi = spec.domain.hi[a];
            for (int i = 0; i <= n; ++i) ticks[a].push_back(i == n ? hi : lo + (hi - lo) * i / n);
        }
        if (ticks[a].front() != spec.domain.lo[a] || ticks[a].back() != spec.domain.hi[a]) {
            throw MisalignedRegionError("breakpoints do not span the domain on axis " + std::to_string(a));
        }
        std::vector<double> extra;
        for (const auto& r : spec.regions) {
            for (double x : {r.box.lo[a], r.box.hi[a]}) {
                if (x > spec.domain.lo[a] && x < spec.domain.hi[a] && !has_tick(ticks[a], x)) extra.push_back(x);
            }
        }
        for (const auto& r : spec.boundary) {
            if (r.axis == a) continue;
            for (double x : {r.lo[a], r.hi[a]}) {
                if (std::isfinite(x) && x > spec.domain.lo[a] && x < spec.domain.hi[a] && !has_tick(ticks[a], x)) {
                    extra.push_back(x);
                }
            }
        }
        if (!extra.empty()) {
            if (!spec.augment) {
                throw MisalignedRegionError("region bound " + std::to_string(extra.front()) +
                                            " is not a breakpoint on axis " + std::to_string(a));
            }
            ticks[a].insert(ticks[a].end(), extra.begin(), extra.end());
            std::sort(ticks[a].begin(), ticks[a].end());
            ticks[a].erase(std::unique(ticks[a].begin(), ticks[a].end()), ticks[a].end());
        }
    }
    Index3 n{1, 1, 1};
    for (int a = 0; a < spec.dim; ++a) n[a] = static_cast<int>(ticks[a].size()) - 1;
    std::vector<int> material(static_cast<std::size_t>(n[0]) * n[1] * n[2], spec.background_material);
    for (int k = 0; k < n[2]; ++k) {
        for (int j = 0; j < n[1]; ++j) {
            for (int i = 0; i < n[0]; ++i) {
                const Index3 idx{i, j, k};
                Point c{0.5, 0.5, 0.5};
                for (int a = 0; a < spec.dim; ++a) c[a] = 0.5 * (ticks[a][idx[a]] + ticks[a][idx[a] + 1]);
                for (const auto& r : spec.regions) {
                    if (r.box.contains(c)) material[i + n[0] * (j + n[1] * k)] = r.material;
                }
            }
        }
    }
    return TensorGrid(spec.dim, std::move(ticks), std::move(material), spec.boundary);
}

TensorGrid refine_slabs(const TensorGrid& grid, const std::array<std::vector<int>, 3>& marked) {
    const int dim = grid.dim();
    std::array<std::vector<double>, 3> ticks;
    std::array<std::vector<int>, 3> parent;  // new interval -> old interval
    for (int a = 0; a < 3; ++a) {
        const auto& old = grid.ticks(a);
        if (a >= dim) {
            ticks[a] = old;
            parent[a] = {0};
            continue;
        }
        std::vector<char> mark(grid.intervals(a), 0);
        for (int i : marked[a]) {
            if (i < 0 || i >= grid.intervals(a)) throw std::out_of_range("marked interval out of range");
            mark[i] = 1;
        }
        ticks[a].push_back(old[0]);
        for (int i = 0; i < grid.intervals(a); ++i) {
            if (mark[i]) {
                ticks[a].push_back(0.5 * (old[i] + old[i + 1]));
                parent[a].push_back(i);
            }
            ticks[a].push_back(old[i + 1]);
            parent[a].push_back(i);
        }
    }
    const Index3 n{static_cast<int>(parent[0].size()), static_cast<int>(parent[1].size()),
                   static_cast<int>(parent[2].size())};
    std::vector<int> material(static_cast<std::size_t>(n[0]) * n[1] * n[2]);
    for (int k = 0; k < n[2]; ++k) {
        for (int j = 0; j < n[1]; ++j) {
            for (int i = 0; i < n[0]; ++i) {
                material[i + n[0] * (j + n[1] * k)] = grid.material(grid.cell_id({parent[0][i], parent[1][j], parent[2][k]}));
            }
        }
    }
    return TensorGrid(dim, std::move(ticks), std::move(material), grid.boundary_regions());
}

TensorGrid refine_uniform(const TensorGrid& grid) {
    std::array<std::vector<int>, 3> marked;
    for (int a = 0; a < grid.dim(); ++a) {
        for (int i = 0; i < grid.intervals(a); ++i) marked[a].push_back(i);
    }
    return refine_slabs(grid, marked);
}

long SubdomainLayout::total_cells() const {
    long n = 0;
    for (const auto& g : grids) n += g.num_cells();
    return n;
}

std::vector<Interface> find_interfaces(int dim, const std::vector<Box>& boxes) {
    std::vector<Interface> out;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        for (std::size_t j = i + 1; j < boxes.size(); ++j) {
            for (int a = 0; a < dim; ++a) {
                int low_side = -1;
                double pos = 0.0;
                if (boxes[i].hi[a] == boxes[j].lo[a]) {
                    low_side = 0;
                    pos = boxes[i].hi[a];
                } else if (boxes[j].hi[a] == boxes[i].lo[a]) {
                    low_side = 1;
                    pos = boxes[j].hi[a];
                } else {
                    continue;
                }
                Box inter = intersect(boxes[i], boxes[j]);
                inter.lo[a] = inter.hi[a] = pos;
                bool positive = true;
                for (int t = 0; t < dim; ++t) {
                    if (t != a && !(inter.hi[t] > inter.lo[t])) positive = false;
                }
                if (!positive) continue;
                Interface f;
                f.a = static_cast<int>(i);
                f.b = static_cast<int>(j);
                f.axis = a;
                f.position = pos;
                f.box = inter;
                f.low_side = low_side;
                out.push_back(f);
            }
        }
    }
    return out;
}

SubdomainLayout make_layout(const TensorGrid& global, const std::vector<Box>& boxes) {
    const int dim = global.dim();
    const Box domain = global.domain();
    SubdomainLayout layout;
    layout.dim = dim;
    layout.domain = domain;
    layout.boxes = boxes;
    for (auto& b : layout.boxes) b.dim = dim;

    double volume = 0.0;
    for (std::size_t i = 0; i < layout.boxes.size(); ++i) {
        const Box& bi = layout.boxes[i];
        if (!(bi.measure() > 0.0)) throw LayoutError("subdomain " + std::to_string(i) + " is empty");
        for (int a = 0; a < dim; ++a) {
            if (bi.lo[a] < domain.lo[a] || bi.hi[a] > domain.hi[a]) {
                throw LayoutError("subdomain " + std::to_string(i) + " leaves the domain");
            }
        }
        volume += bi.measure();
        for (std::size_t j = i + 1; j < layout.boxes.size(); ++j) {
            const Box x = intersect(bi, layout.boxes[j]);
            bool overlap = true;
            for (int a = 0; a < dim; ++a) {
                if (!(x.hi[a] > x.lo[a])) overlap = false;
            }
            if (overlap) throw LayoutError("subdomains " + std::to_string(i) + " and " + std::to_string(j) + " overlap");
        }
    }
    if (std::abs(volume - domain.measure()) > 1e-12 * domain.measure()) {
        throw LayoutError("subdomains do not cover the domain");
    }

    for (std::size_t s = 0; s < layout.boxes.size(); ++s) {
        const Box& b = layout.boxes[s];
        std::array<std::vector<double>, 3> ticks;
        for (int a = 0; a < dim; ++a) {
            const auto& t = global.ticks(a);
            if (!has_tick(t, b.lo[a]) || !has_tick(t, b.hi[a])) {
                throw LayoutError("subdomain " + std::to_string(s) + " is not aligned with the mesh");
            }
            for (double x : t) {
                if (x >= b.lo[a] && x <= b.hi[a]) ticks[a].push_back(x);
            }
        }
        std::vector<BoundaryRegion> regions;
        for (int a = 0; a < dim; ++a) {
            for (int side = 0; side < 2; ++side) regions.push_back(face_region(b, a, side, BoundaryKind::Interface));
        }
        for (const auto& r : global.boundary_regions()) {
            const bool on_boundary = r.position == domain.lo[r.axis] || r.position == domain.hi[r.axis];
            if (on_boundary) regions.push_back(r);
        }
        Index3 n{1, 1, 1};
        for (int a = 0; a < dim; ++a) n[a] = static_cast<int>(ticks[a].size()) - 1;
        std::vector<int> material;
        material.reserve(static_cast<std::size_t>(n[0]) * n[1] * n[2]);
        for (int k = 0; k < n[2]; ++k) {
            for (int j = 0; j < n[1]; ++j) {
                for (int i = 0; i < n[0]; ++i) {
                    Index3 gi{0, 0, 0};
                    const Index3 li{i, j, k};
                    for (int a = 0; a < dim; ++a) gi[a] = global.locate(a, 0.5 * (ticks[a][li[a]] + ticks[a][li[a] + 1]));
                    material.push_back(global.material(global.cell_id(gi)));
                }
            }
        }
        layout.grids.emplace_back(dim, std::move(ticks), std::move(material), std::move(regions));
    }
    layout.interfaces = find_interfaces(dim, layout.boxes);
    return layout;
}

InterfaceMesh overlay_traces(const SubdomainLayout& layout, int index) {
    const Interface& itf = layout.interfaces.at(index);
    const int dim = layout.dim;
    const int axis = itf.axis;
    InterfaceMesh mesh;
    mesh.interface = index;
    mesh.axis = axis;
    mesh.subdomain = {itf.a, itf.b};
    for (int s = 0; s < 2; ++s) mesh.outward_sign[s] = (s == itf.low_side) ? 1 : -1;

    std::vector<int> tangential;
    for (int a = 0; a < dim; ++a) {
        if (a != axis) tangential.push_back(a);
    }
    // Union of both sides' breakpoints, clipped to the interface.
    std::vector<std::vector<double>> union_ticks;
    for (int t : tangential) {
        std::vector<double> u;
        for (int s = 0; s < 2; ++s) {
            const auto& ticks = layout.grids[mesh.subdomain[s]].ticks(t);
            if (!has_tick(ticks, itf.box.lo[t]) || !has_tick(ticks, itf.box.hi[t])) {
                throw LayoutError("interface " + std::to_string(index) + " is not resolved by subdomain " +
                                  std::to_string(mesh.subdomain[s]));
            }
            for (double x : ticks) {
                if (x >= itf.box.lo[t] && x <= itf.box.hi[t]) u.push_back(x);
            }
        }
        std::sort(u.begin(), u.end());
        u.erase(std::unique(u.begin(), u.end()), u.end());
        union_ticks.push_back(std::move(u));
    }

    std::array<std::unordered_map<int, int>, 2> parent_lookup;
    auto parent_index = [&](int side, int facet, double area) {
        auto [it, inserted] = parent_lookup[side].try_emplace(facet, static_cast<int>(mesh.parents[side].size()));
        if (inserted) {
            mesh.parents[side].push_back(facet);
            mesh.parent_area[side].push_back(area);
        }
        return it->second;
    };

    const int n0 = static_cast<int>(union_ticks[0].size()) - 1;
    const int n1 = dim == 3 ? static_cast<int>(union_ticks[1].size()) - 1 : 1;
    for (int j = 0; j < n1; ++j) {
        for (int i = 0; i < n0; ++i) {
            OverlayPatch p;
            p.center[axis] = itf.position;
            p.area = union_ticks[0][i + 1] - union_ticks[0][i];
            p.center[tangential[0]] = 0.5 * (union_ticks[0][i] + union_ticks[0][i + 1]);
            if (dim == 3) {
                p.area *= union_ticks[1][j + 1] - union_ticks[1][j];
                p.center[tangential[1]] = 0.5 * (union_ticks[1][j] + union_ticks[1][j + 1]);
            } else {
                p.center[2] = 0.5;
            }
            for (int s = 0; s < 2; ++s) {
                const TensorGrid& g = layout.grids[mesh.subdomain[s]];
                Index3 idx{0, 0, 0};
                for (int t : tangential) idx[t] = g.locate(t, p.center[t]);
                const bool below = s == itf.low_side;
                idx[axis] = below ? g.intervals(axis) : 0;
                const int f = g.facet_id(axis, idx);
                p.parent[s] = parent_index(s, f, g.facet(f).area);
            }
            mesh.patches.push_back(p);
        }
    }
    return mesh;
}

}  // namespace spn
