#include "spn/bench_io.hpp"

#include "spn/errors.hpp"
#include "spn/quadrature.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <numbers>
#include <sstream>

#ifndef SPN_DATA_DIR
#define SPN_DATA_DIR "data"
#endif

namespace spn {

using nlohmann::json;

namespace {

const char* const kFaces[] = {"x-", "x+", "y-", "y+", "z-", "z+"};

std::string face_name(int axis, int side) { return kFaces[2 * axis + side]; }

bool vec_equal(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return a.size() == b.size() && a == b; }

bool xs_equal(const MaterialCrossSections& a, const MaterialCrossSections& b) {
    if (!vec_equal(a.sigma_t, b.sigma_t) || a.sigma_s.size() != b.sigma_s.size()) return false;
    for (std::size_t m = 0; m < a.sigma_s.size(); ++m) {
        if (a.sigma_s[m].rows() != b.sigma_s[m].rows() || a.sigma_s[m].cols() != b.sigma_s[m].cols() ||
            a.sigma_s[m] != b.sigma_s[m]) {
            return false;
        }
    }
    return true;
}

bool box_equal(const Box& a, const Box& b) {
    for (int k = 0; k < a.dim; ++k) {
        if (a.lo[k] != b.lo[k] || a.hi[k] != b.hi[k]) return false;
    }
    return a.dim == b.dim;
}

}  // namespace

bool ProblemConfig::operator==(const ProblemConfig& o) const {
    if (name != o.name || dim != o.dim || order != o.order || groups != o.groups || !box_equal(domain, o.domain) ||
        background != o.background || mode != o.mode || output_dir != o.output_dir) {
        return false;
    }
    for (int a = 0; a < dim; ++a) {
        if (cells[a] != o.cells[a]) return false;
    }
    if (materials.size() != o.materials.size() || regions.size() != o.regions.size() ||
        boundary.size() != o.boundary.size() || subdomains.size() != o.subdomains.size()) {
        return false;
    }
    for (std::size_t i = 0; i < materials.size(); ++i) {
        if (materials[i].name != o.materials[i].name || !xs_equal(materials[i].xs, o.materials[i].xs) ||
            !vec_equal(materials[i].source, o.materials[i].source)) {
            return false;
        }
    }
    for (std::size_t i = 0; i < regions.size(); ++i) {
        if (regions[i].material != o.regions[i].material || !box_equal(regions[i].box, o.regions[i].box)) return false;
    }
    for (std::size_t i = 0; i < boundary.size(); ++i) {
        const auto& x = boundary[i];
        const auto& y = o.boundary[i];
        if (x.axis != y.axis || x.side != y.side || x.kind != y.kind || x.patch.has_value() != y.patch.has_value()) {
            return false;
        }
        if (x.patch && !box_equal(*x.patch, *y.patch)) return false;
    }
    for (std::size_t i = 0; i < subdomains.size(); ++i) {
        if (!box_equal(subdomains[i].box, o.subdomains[i].box) || subdomains[i].theta != o.subdomains[i].theta) return false;
    }
    return amr.theta == o.amr.theta && amr.eps_rel == o.amr.eps_rel && amr.max_iterations == o.amr.max_iterations;
}


namespace {

const char* kind_name(BoundaryKind k) { return to_string(k); }

struct Reader {
    std::vector<std::string> issues;

    void fail(const std::string& path, const std::string& msg) { issues.push_back(path + ": " + msg); }

    const json* field(const json& obj, const char* key, const std::string& path, bool required = true) {
        if (!obj.is_object()) {
            fail(path, "expected an object");
            return nullptr;
        }
        auto it = obj.find(key);
        if (it == obj.end()) {
            if (required) fail(path + "." + key, "missing");
            return nullptr;
        }
        return &*it;
    }

    std::optional<double> number(const json* v, const std::string& path) {
        if (!v) return std::nullopt;
        if (!v->is_number()) {
            fail(path, "expected a number");
            return std::nullopt;
        }
        return v->get<double>();
    }

    std::optional<int> integer(const json* v, const std::string& path) {
        if (!v) return std::nullopt;
        if (!v->is_number_integer()) {
            fail(path, "expected an integer");
            return std::nullopt;
        }
        return v->get<int>();
    }

    std::optional<std::string> string(const json* v, const std::string& path) {
        if (!v) return std::nullopt;
        if (!v->is_string()) {
            fail(path, "expected a string");
            return std::nullopt;
        }
        return v->get<std::string>();
    }

    std::optional<std::vector<double>> numbers(const json* v, const std::string& path, std::size_t expected = 0) {
        if (!v) return std::nullopt;
        if (!v->is_array()) {
            fail(path, "expected an array of numbers");
            return std::nullopt;
        }
        std::vector<double> out;
        for (std::size_t i = 0; i < v->size(); ++i) {
            if (!(*v)[i].is_number()) {
                fail(path + "[" + std::to_string(i) + "]", "expected a number");
                return std::nullopt;
            }
            out.push_back((*v)[i].get<double>());
        }
        if (expected && out.size() != expected) {
            fail(path, "expected " + std::to_string(expected) + " entries, got " + std::to_string(out.size()));
            return std::nullopt;
        }
        return out;
    }

    std::optional<Box> box(const json& obj, const std::string& path, int dim) {
        const auto lo = numbers(field(obj, "lo", path), path + ".lo", static_cast<std::size_t>(dim));
        const auto hi = numbers(field(obj, "hi", path), path + ".hi", static_cast<std::size_t>(dim));
        if (!lo || !hi) return std::nullopt;
        Box b;
        b.dim = dim;
        for (int a = 0; a < dim; ++a) {
            b.lo[a] = (*lo)[a];
            b.hi[a] = (*hi)[a];
            if (!(b.hi[a] > b.lo[a])) {
                fail(path, "hi must exceed lo on every axis");
                return std::nullopt;
            }
        }
        if (dim == 2) {
            b.lo[2] = 0.0;
            b.hi[2] = 1.0;
        }
        return b;
    }
};

std::optional<BoundaryKind> parse_kind(const std::string& s) {
    if (s == "dirichlet") return BoundaryKind::Dirichlet;
    if (s == "neumann") return BoundaryKind::Neumann;
    if (s == "robin") return BoundaryKind::Robin;
    return std::nullopt;
}

json box_json(const Box& b) {
    json lo = json::array();
    json hi = json::array();
    for (int a = 0; a < b.dim; ++a) {
        lo.push_back(b.lo[a]);
        hi.push_back(b.hi[a]);
    }
    return json{{"lo", lo}, {"hi", hi}};
}

std::optional<MaterialCrossSections> parse_xs(Reader& r, const json& m, const std::string& path, int groups) {
    const auto st = r.numbers(r.field(m, "sigma_t", path), path + ".sigma_t", static_cast<std::size_t>(groups));
    const json* ss = r.field(m, "sigma_s", path);
    if (!st || !ss) return std::nullopt;
    if (!ss->is_array() || ss->empty()) {
        r.fail(path + ".sigma_s", "expected a non-empty array of G x G matrices (one per Legendre moment)");
        return std::nullopt;
    }
    MaterialCrossSections xs;
    xs.sigma_t = Eigen::Map<const Eigen::VectorXd>(st->data(), groups);
    for (std::size_t mom = 0; mom < ss->size(); ++mom) {
        const std::string mp = path + ".sigma_s[" + std::to_string(mom) + "]";
        const json& mat = (*ss)[mom];
        if (!mat.is_array() || static_cast<int>(mat.size()) != groups) {
            r.fail(mp, "expected " + std::to_string(groups) + " rows");
            return std::nullopt;
        }
        Eigen::MatrixXd S(groups, groups);
        for (int g = 0; g < groups; ++g) {
            const auto row = r.numbers(&mat[g], mp + "[" + std::to_string(g) + "]", static_cast<std::size_t>(groups));
            if (!row) return std::nullopt;
            for (int h = 0; h < groups; ++h) S(g, h) = (*row)[h];
        }
        xs.sigma_s.push_back(S);
    }
    return xs;
}

json xs_json(const MaterialCrossSections& xs) {
    json st = json::array();
    for (int g = 0; g < xs.groups(); ++g) st.push_back(xs.sigma_t(g));
    json ss = json::array();
    for (const auto& S : xs.sigma_s) {
        json mat = json::array();
        for (int g = 0; g < S.rows(); ++g) {
            json row = json::array();
            for (int h = 0; h < S.cols(); ++h) row.push_back(S(g, h));
            mat.push_back(row);
        }
        ss.push_back(mat);
    }
    return json{{"sigma_t", st}, {"sigma_s", ss}};
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << text;
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace

ProblemConfig parse_config(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError({std::string("$: ") + e.what()});
    }
    Reader r;
    ProblemConfig c;
    const std::string root = "$";
    if (auto v = r.string(r.field(doc, "name", root, false), "$.name")) c.name = *v;
    const auto dim = r.integer(r.field(doc, "dimension", root), "$.dimension");
    const auto order = r.integer(r.field(doc, "spn_order", root), "$.spn_order");
    const auto groups = r.integer(r.field(doc, "groups", root), "$.groups");
    if (dim && *dim != 2 && *dim != 3) r.fail("$.dimension", "must be 2 or 3");
    if (order && (*order < 1 || *order % 2 == 0)) r.fail("$.spn_order", "must be odd and >= 1");
    if (groups && *groups < 1) r.fail("$.groups", "must be >= 1");
    if (!r.issues.empty() || !dim || !order || !groups) throw ConfigError(r.issues);
    c.dim = *dim;
    c.order = *order;
    c.groups = *groups;
    const int nhat = (c.order + 1) / 2;
    const int ncomp = nhat * c.groups;

    if (const json* d = r.field(doc, "domain", root)) {
        if (auto b = r.box(*d, "$.domain", c.dim)) c.domain = *b;
    }
    if (const json* m = r.field(doc, "mesh", root)) {
        if (auto cells = r.numbers(r.field(*m, "cells", "$.mesh"), "$.mesh.cells", static_cast<std::size_t>(c.dim))) {
            for (int a = 0; a < c.dim; ++a) {
                c.cells[a] = static_cast<int>((*cells)[a]);
                if (c.cells[a] < 1 || c.cells[a] != (*cells)[a]) r.fail("$.mesh.cells", "must be positive integers");
            }
        }
    }

    if (const json* mats = r.field(doc, "materials", root)) {
        if (!mats->is_array() || mats->empty()) {
            r.fail("$.materials", "expected a non-empty array");
        } else {
            for (std::size_t i = 0; i < mats->size(); ++i) {
                const std::string path = "$.materials[" + std::to_string(i) + "]";
                const json& m = (*mats)[i];
                MaterialSpec spec;
                if (auto n = r.string(r.field(m, "name", path), path + ".name")) spec.name = *n;
                auto xs = parse_xs(r, m, path, c.groups);
                if (!xs) continue;
                spec.xs = *xs;
                if (const json* src = r.field(m, "source", path, false)) {
                    if (auto v = r.numbers(src, path + ".source")) {
                        if (static_cast<int>(v->size()) == ncomp) {
                            spec.source = Eigen::Map<const Eigen::VectorXd>(v->data(), ncomp);
                        } else if (static_cast<int>(v->size()) == c.groups) {
                            spec.source = Eigen::VectorXd::Zero(ncomp);
                            for (int g = 0; g < c.groups; ++g) spec.source(g * nhat) = (*v)[g];
                        } else {
                            r.fail(path + ".source", "expected G or nhat*G entries");
                        }
                    }
                }
                try {
                    const SpnMatrixBundle b = build_bundle(spec.xs, compute_angular_constants(c.order));
                    const AssumptionReport rep = validate_coefficient_assumptions(b);
                    if (!rep.removal_positive) r.fail(path, "removal cross section must be positive");
                    if (!rep.coupling_bounded) r.fail(path, "group coupling too strong for the coefficient assumptions");
                    if (!rep.positivity) r.fail(path, "Te or To^{-1} is not positive definite");
                } catch (const AssumptionViolation& e) {
                    r.fail(path, e.what());
                }
                c.materials.push_back(std::move(spec));
            }
        }
    }
    auto known = [&](const std::string& name) {
        for (const auto& m : c.materials) {
            if (m.name == name) return true;
        }
        return false;
    };
    if (auto bg = r.string(r.field(doc, "background", root), "$.background")) {
        c.background = *bg;
        if (!c.materials.empty() && !known(*bg)) r.fail("$.background", "unknown material '" + *bg + "'");
    }
    if (const json* regs = r.field(doc, "regions", root, false)) {
        for (std::size_t i = 0; i < regs->size(); ++i) {
            const std::string path = "$.regions[" + std::to_string(i) + "]";
            RegionSpec reg;
            if (auto n = r.string(r.field((*regs)[i], "material", path), path + ".material")) {
                reg.material = *n;
                if (!c.materials.empty() && !known(*n)) r.fail(path + ".material", "unknown material '" + *n + "'");
            }
            if (auto b = r.box((*regs)[i], path, c.dim)) reg.box = *b;
            c.regions.push_back(reg);
        }
    }
    if (const json* bcs = r.field(doc, "boundary", root)) {
        for (std::size_t i = 0; i < bcs->size(); ++i) {
            const std::string path = "$.boundary[" + std::to_string(i) + "]";
            const json& b = (*bcs)[i];
            BoundarySpec spec;
            if (auto f = r.string(r.field(b, "face", path), path + ".face")) {
                bool found = false;
                for (int k = 0; k < 2 * c.dim; ++k) {
                    if (*f == kFaces[k]) {
                        spec.axis = k / 2;
                        spec.side = k % 2;
                        found = true;
                    }
                }
                if (!found) r.fail(path + ".face", "unknown face '" + *f + "'");
            }
            if (auto k = r.string(r.field(b, "kind", path), path + ".kind")) {
                if (auto kind = parse_kind(*k)) {
                    spec.kind = *kind;
                } else {
                    r.fail(path + ".kind", "expected dirichlet, neumann or robin");
                }
            }
            if (b.contains("lo") || b.contains("hi")) {
                if (auto p = r.box(b, path, c.dim)) spec.patch = *p;
            }
            c.boundary.push_back(spec);
        }
    }
    if (const json* amr = r.field(doc, "amr", root, false)) {
        if (const json* th = r.field(*amr, "theta", "$.amr", false)) {
            if (auto v = r.numbers(th, "$.amr.theta")) c.amr.theta = *v;
        }
        if (auto v = r.number(r.field(*amr, "eps_rel", "$.amr", false), "$.amr.eps_rel")) c.amr.eps_rel = *v;
        if (auto v = r.integer(r.field(*amr, "max_iterations", "$.amr", false), "$.amr.max_iterations")) {
            c.amr.max_iterations = *v;
        }
    }
    for (std::size_t i = 0; i < c.amr.theta.size(); ++i) {
        const double t = c.amr.theta[i];
        if (!(t > 0.0 && t <= 1.0)) {
            r.fail("$.amr.theta[" + std::to_string(i) + "]", "value " + std::to_string(t) + " outside (0, 1]");
        }
    }
    if (!(c.amr.eps_rel > 0.0)) r.fail("$.amr.eps_rel", "must be positive");
    if (c.amr.max_iterations < 1) r.fail("$.amr.max_iterations", "must be >= 1");
    if (auto m = r.string(r.field(doc, "mode", root, false), "$.mode")) {
        c.mode = *m;
        if (*m != "mono" && *m != "ddm") r.fail("$.mode", "expected mono or ddm");
    }
    if (const json* subs = r.field(doc, "subdomains", root, false)) {
        for (std::size_t i = 0; i < subs->size(); ++i) {
            const std::string path = "$.subdomains[" + std::to_string(i) + "]";
            SubdomainSpec s;
            if (auto b = r.box((*subs)[i], path, c.dim)) s.box = *b;
            if (auto t = r.number(r.field((*subs)[i], "theta", path, false), path + ".theta")) {
                s.theta = *t;
                if (!(*t > 0.0 && *t <= 1.0)) r.fail(path + ".theta", "value " + std::to_string(*t) + " outside (0, 1]");
            }
            c.subdomains.push_back(s);
        }
    }
    if (c.mode == "ddm" && c.subdomains.empty()) r.fail("$.subdomains", "required in ddm mode");
    if (auto o = r.string(r.field(doc, "output_dir", root, false), "$.output_dir")) c.output_dir = *o;
    if (!r.issues.empty()) throw ConfigError(r.issues);
    return c;
}

ProblemConfig load_config(const std::string& path) { return parse_config(read_file(path)); }

std::string emit_config(const ProblemConfig& c) {
    json doc;
    doc["name"] = c.name;
    doc["dimension"] = c.dim;
    doc["spn_order"] = c.order;
    doc["groups"] = c.groups;
    doc["domain"] = box_json(c.domain);
    json cells = json::array();
    for (int a = 0; a < c.dim; ++a) cells.push_back(c.cells[a]);
    doc["mesh"] = json{{"cells", cells}};
    json mats = json::array();
    for (const auto& m : c.materials) {
        json j = xs_json(m.xs);
        j["name"] = m.name;
        if (m.source.size() > 0) {
            json src = json::array();
            for (Eigen::Index k = 0; k < m.source.size(); ++k) src.push_back(m.source(k));
            j["source"] = src;
        }
        mats.push_back(j);
    }
    doc["materials"] = mats;
    doc["background"] = c.background;
    json regs = json::array();
    for (const auto& reg : c.regions) {
        json j = box_json(reg.box);
        j["material"] = reg.material;
        regs.push_back(j);
    }
    doc["regions"] = regs;
    json bcs = json::array();
    for (const auto& b : c.boundary) {
        json j = b.patch ? box_json(*b.patch) : json::object();
        j["face"] = face_name(b.axis, b.side);
        j["kind"] = kind_name(b.kind);
        bcs.push_back(j);
    }
    doc["boundary"] = bcs;
    doc["amr"] = json{{"theta", c.amr.theta}, {"eps_rel", c.amr.eps_rel}, {"max_iterations", c.amr.max_iterations}};
    doc["mode"] = c.mode;
    json subs = json::array();
    for (const auto& s : c.subdomains) {
        json j = box_json(s.box);
        j["theta"] = s.theta;
        subs.push_back(j);
    }
    doc["subdomains"] = subs;
    doc["output_dir"] = c.output_dir;
    return doc.dump(2) + "\n";
}

std::string default_cross_section_path() { return std::string(SPN_DATA_DIR) + "/takeda_model1_xs.json"; }

std::vector<MaterialSpec> load_cross_sections(const std::string& path, int groups) {
    json doc;
    try {
        doc = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError({path + ": " + e.what()});
    }
    Reader r;
    std::vector<MaterialSpec> out;
    const json* mats = r.field(doc, "materials", path);
    if (mats && mats->is_object()) {
        for (const auto& [name, m] : mats->items()) {
            MaterialSpec spec;
            spec.name = name;
            if (auto xs = parse_xs(r, m, path + ".materials." + name, groups)) spec.xs = *xs;
            out.push_back(std::move(spec));
        }
    }
    if (!r.issues.empty()) throw ConfigError(r.issues);
    return out;
}

ProblemConfig takeda_preset(TakedaVariant variant, int dim, const std::string& xs_path) {
    if (dim != 2 && dim != 3) throw std::invalid_argument("benchmark preset needs dim 2 or 3");
    ProblemConfig c;
    c.dim = dim;
    c.order = 1;
    c.groups = 2;
    c.domain.dim = dim;
    c.domain.lo = {0.0, 0.0, 0.0};
    c.domain.hi = {25.0, 25.0, dim == 3 ? 25.0 : 1.0};
    c.cells = {5, 5, dim == 3 ? 5 : 1};
    const std::vector<MaterialSpec> xs = load_cross_sections(xs_path, 2);
    for (const char* name : {"core", "reflector", "control_rod"}) {
        bool found = false;
        for (const auto& m : xs) {
            if (m.name != name) continue;
            MaterialSpec spec = m;
            spec.source = Eigen::VectorXd::Zero(2);
            if (spec.name == "core") spec.source << 9.09319e-3, 2.90183e-1;
            c.materials.push_back(spec);
            found = true;
        }
        if (!found) throw ConfigError({xs_path + ": missing material '" + std::string(name) + "'"});
    }
    c.background = "reflector";
    auto box = [&](Point lo, Point hi) {
        Box b;
        b.dim = dim;
        b.lo = lo;
        b.hi = hi;
        if (dim == 2) {
            b.lo[2] = 0.0;
            b.hi[2] = 1.0;
        }
        return b;
    };
    c.regions.push_back({"core", box({0, 0, 0}, {15, 15, 15})});
    c.regions.push_back({"control_rod", box({15, 0, 0}, {20, 5, 25})});
    for (int a = 0; a < dim; ++a) {
        c.boundary.push_back({a, 0, BoundaryKind::Neumann, std::nullopt});
        c.boundary.push_back({a, 1, BoundaryKind::Robin, std::nullopt});
    }
    c.amr.eps_rel = 4e-3;
    c.amr.max_iterations = 10;

    if (dim == 3) {
        c.subdomains = {
            {box({0, 0, 0}, {15, 15, 15}), 0.5},   {box({15, 0, 0}, {20, 5, 25}), 0.5},
            {box({20, 0, 0}, {25, 25, 25}), 0.5},  {box({15, 5, 0}, {20, 25, 25}), 0.5},
            {box({0, 15, 0}, {15, 25, 25}), 0.5},  {box({0, 0, 15}, {15, 15, 25}), 0.5},
        };
    } else {
        c.subdomains = {
            {box({0, 0, 0}, {15, 15, 1}), 0.5},  {box({15, 0, 0}, {20, 5, 1}), 0.5},
            {box({20, 0, 0}, {25, 25, 1}), 0.5}, {box({15, 5, 0}, {20, 25, 1}), 0.5},
            {box({0, 15, 0}, {15, 25, 1}), 0.5},
        };
    }
    switch (variant) {
        case TakedaVariant::Mono1:
            c.name = "MONO-1";
            c.mode = "mono";
            c.amr.theta = {0.5};
            break;
        case TakedaVariant::Mono2:
            c.name = "MONO-2";
            c.mode = "mono";
            c.amr.theta = {0.2};
            break;
        case TakedaVariant::Ddm1:
            c.name = "DDM-1";
            c.mode = "ddm";
            break;
        case TakedaVariant::Ddm2:
            c.name = "DDM-2";
            c.mode = "ddm";
            for (std::size_t s = 0; s < c.subdomains.size(); ++s) c.subdomains[s].theta = s == 1 ? 0.7 : 0.2;
            break;
    }
    if (c.mode == "ddm") {
        c.amr.theta.clear();
        for (const auto& s : c.subdomains) c.amr.theta.push_back(s.theta);
    } else {
        for (auto& s : c.subdomains) s.theta = c.amr.theta.front();
    }
    if (dim == 2) c.name += "-2D";
    c.output_dir = "out";
    return c;
}

SourceFunction material_source(std::vector<Eigen::VectorXd> per_material, int ncomp) {
    return [per_material = std::move(per_material), ncomp](const TensorGrid& grid) {
        SourceField s = SourceField::Zero(grid.num_cells(), ncomp);
        for (int K = 0; K < grid.num_cells(); ++K) {
            const Eigen::VectorXd& v = per_material.at(grid.material(K));
            if (v.size() > 0) s.row(K) = v.transpose();
        }
        return s;
    };
}

BuiltProblem build_problem(const ProblemConfig& c) {
    BuiltProblem out;
    const AngularConstants ac = compute_angular_constants(c.order);
    const int ncomp = ac.nhat * c.groups;
    std::vector<Eigen::VectorXd> sources;
    auto material_id = [&](const std::string& name) {
        for (std::size_t i = 0; i < c.materials.size(); ++i) {
            if (c.materials[i].name == name) return static_cast<int>(i);
        }
        throw ConfigError({"unknown material '" + name + "'"});
    };
    for (const auto& m : c.materials) {
        out.material_names.push_back(m.name);
        out.problem.bundles.push_back(build_bundle(m.xs, ac));
        sources.push_back(m.source.size() > 0 ? m.source : Eigen::VectorXd::Zero(ncomp));
    }
    GridSpec spec;
    spec.dim = c.dim;
    spec.domain = c.domain;
    spec.cells = c.cells;
    spec.background_material = material_id(c.background);
    for (const auto& reg : c.regions) spec.regions.push_back({reg.box, material_id(reg.material)});
    for (const auto& b : c.boundary) {
        BoundaryRegion r = face_region(c.domain, b.axis, b.side, b.kind);
        if (b.patch) {
            for (int a = 0; a < c.dim; ++a) {
                if (a == b.axis) continue;
                r.lo[a] = b.patch->lo[a];
                r.hi[a] = b.patch->hi[a];
            }
        }
        spec.boundary.push_back(r);
    }
    // Subdomain bounds must be mesh lines as well.
    for (const auto& s : c.subdomains) spec.regions.push_back({s.box, spec.background_material});
    TensorGrid probe = build_grid(spec);
    spec.regions.erase(spec.regions.end() - static_cast<std::ptrdiff_t>(c.subdomains.size()), spec.regions.end());
    for (int a = 0; a < c.dim; ++a) spec.ticks[a] = probe.ticks(a);
    out.problem.grid = build_grid(spec);
    out.problem.source = material_source(std::move(sources), ncomp);
    for (const auto& s : c.subdomains) out.subdomains.push_back(s.box);
    out.amr = c.amr;
    return out;
}

SubdomainLayout build_layout(const BuiltProblem& built) {
    if (built.subdomains.empty()) {
        return make_layout(built.problem.grid, {built.problem.grid.domain()});
    }
    return make_layout(built.problem.grid, built.subdomains);
}

namespace {

MmsProblem make_mms(int dim, const MaterialCrossSections& xs, int order, int cells) {
    MmsProblem p;
    const AngularConstants ac = compute_angular_constants(order);
    p.bundles = {build_bundle(xs, ac)};
    const SpnMatrixBundle B = p.bundles.front();
    const int nc = B.components();
    GridSpec spec;
    spec.dim = dim;
    spec.domain.dim = dim;
    spec.domain.lo = {0.0, 0.0, 0.0};
    spec.domain.hi = {1.0, 1.0, 1.0};
    spec.cells = {cells, cells, dim == 3 ? cells : 1};
    for (int a = 0; a < dim; ++a) {
        for (int side = 0; side < 2; ++side) spec.boundary.push_back(face_region(spec.domain, a, side, BoundaryKind::Dirichlet));
    }
    p.grid = build_grid(spec);
    Eigen::VectorXd scale(nc);
    for (int c = 0; c < nc; ++c) scale(c) = 1.0 / (1.0 + c);
    const double pi = std::numbers::pi;
    auto phi = [dim, scale, pi](const Point& x) {
        double s = 1.0;
        for (int a = 0; a < dim; ++a) s *= std::sin(pi * x[a]);
        return Eigen::VectorXd(scale * s);
    };
    auto flux = [dim, scale, pi, B](const Point& x) {
        Eigen::MatrixXd p(dim, scale.size());
        for (int a = 0; a < dim; ++a) {
            double d = pi * std::cos(pi * x[a]);
            for (int b = 0; b < dim; ++b) {
                if (b != a) d *= std::sin(pi * x[b]);
            }
            p.row(a) = (-(B.To_inv * (B.H * (scale * d)))).transpose();
        }
        return p;
    };
    const Eigen::MatrixXd op = dim * pi * pi * B.D + B.Te;
    p.phi = phi;
    p.flux = flux;
    p.source = [phi, op, nc](const TensorGrid& grid) {
        const QuadratureRule q = gauss_legendre_unit(4);
        SourceField s = SourceField::Zero(grid.num_cells(), nc);
        const int dim = grid.dim();
        for (int K = 0; K < grid.num_cells(); ++K) {
            const Box b = grid.cell_box(K);
            Eigen::VectorXd avg = Eigen::VectorXd::Zero(nc);
            const int nq = dim == 3 ? 64 : 16;
            for (int k = 0; k < nq; ++k) {
                Point x{0.0, 0.0, 0.0};
                double w = 1.0;
                int rest = k;
                for (int a = 0; a < dim; ++a) {
                    const int i = rest % 4;
                    rest /= 4;
                    x[a] = b.lo[a] + (b.hi[a] - b.lo[a]) * q.nodes[i];
                    w *= q.weights[i];
                }
                avg += w * phi(x);
            }
            s.row(K) = (op * avg).transpose();
        }
        return s;
    };
    return p;
}

}  // namespace

MmsProblem mms_problem(int dim, const MaterialCrossSections& xs, int order, int cells) {
    return make_mms(dim, xs, order, cells);
}

MmsProblem mms_problem(int dim, int groups, int order, int cells, bool symmetric) {
    MaterialCrossSections xs;
    xs.sigma_t = Eigen::VectorXd::Ones(groups);
    xs.sigma_s.assign(2, Eigen::MatrixXd::Zero(groups, groups));
    for (int g = 0; g < groups; ++g) {
        xs.sigma_s[0](g, g) = 0.5;
        xs.sigma_s[1](g, g) = 0.1;
        if (g + 1 < groups) {
            xs.sigma_s[0](g, g + 1) = 0.1;
            if (symmetric) xs.sigma_s[0](g + 1, g) = 0.1;
        }
    }
    return make_mms(dim, xs, order, cells);
}

namespace {

template <class F>
void for_each_cell_point(const TensorGrid& grid, int K, int npts, F&& f) {
    const QuadratureRule q = gauss_legendre_unit(npts);
    const int dim = grid.dim();
    const Box b = grid.cell_box(K);
    int total = 1;
    for (int a = 0; a < dim; ++a) total *= npts;
    for (int k = 0; k < total; ++k) {
        Point xi{0.5, 0.5, 0.5};
        Point x{0.0, 0.0, 0.0};
        double w = 1.0;
        int rest = k;
        for (int a = 0; a < dim; ++a) {
            const int i = rest % npts;
            rest /= npts;
            xi[a] = q.nodes[i];
            x[a] = b.lo[a] + (b.hi[a] - b.lo[a]) * q.nodes[i];
            w *= q.weights[i];
        }
        f(xi, x, w);
    }
}

}  // namespace

double l2_error_phi(const TensorGrid& grid, const MixedField& field,
                    const std::function<Eigen::VectorXd(const Point&)>& phi) {
    double s = 0.0;
    for (int K = 0; K < grid.num_cells(); ++K) {
        const double vol = grid.cell_volume(K);
        for_each_cell_point(grid, K, 3, [&](const Point&, const Point& x, double w) {
            s += w * vol * (phi(x) - field.phi.row(K).transpose()).squaredNorm();
        });
    }
    return std::sqrt(s);
}

double l2_error_flux(const TensorGrid& grid, const MixedField& field,
                     const std::function<Eigen::MatrixXd(const Point&)>& flux) {
    double s = 0.0;
    for (int K = 0; K < grid.num_cells(); ++K) {
        const double vol = grid.cell_volume(K);
        for_each_cell_point(grid, K, 3, [&](const Point& xi, const Point& x, double w) {
            s += w * vol * (flux(x) - evaluate_flux(grid, field, K, xi)).squaredNorm();
        });
    }
    return std::sqrt(s);
}

SErrorParts s_error_parts(const TensorGrid& grid, const MixedField& field, const TensorGrid& ref_grid,
                          const MixedField& ref_field, const std::vector<SpnMatrixBundle>& bundles) {
    const int dim = grid.dim();
    std::array<std::vector<double>, 3> ticks;
    for (int a = 0; a < 3; ++a) {
        if (a >= dim) {
            ticks[a] = {0.0, 1.0};
            continue;
        }
        std::merge(grid.ticks(a).begin(), grid.ticks(a).end(), ref_grid.ticks(a).begin(), ref_grid.ticks(a).end(),
                   std::back_inserter(ticks[a]));
        ticks[a].erase(std::unique(ticks[a].begin(), ticks[a].end()), ticks[a].end());
        const double lo = grid.ticks(a).front();
        const double hi = grid.ticks(a).back();
        std::erase_if(ticks[a], [&](double x) { return x < lo || x > hi; });
    }
    double err = 0.0;
    double ref = 0.0;
    const Index3 n{static_cast<int>(ticks[0].size()) - 1, static_cast<int>(ticks[1].size()) - 1,
                   static_cast<int>(ticks[2].size()) - 1};
    for (int k = 0; k < n[2]; ++k) {
        for (int j = 0; j < n[1]; ++j) {
            for (int i = 0; i < n[0]; ++i) {
                const Index3 s{i, j, k};
                Point c{0.5, 0.5, 0.5};
                std::array<double, 3> h{1.0, 1.0, 1.0};
                double vol = 1.0;
                for (int a = 0; a < dim; ++a) {
                    c[a] = 0.5 * (ticks[a][s[a]] + ticks[a][s[a] + 1]);
                    h[a] = ticks[a][s[a] + 1] - ticks[a][s[a]];
                    vol *= h[a];
                }
                Index3 gi{0, 0, 0};
                Index3 ri{0, 0, 0};
                for (int a = 0; a < dim; ++a) {
                    gi[a] = grid.locate(a, c[a]);
                    ri[a] = ref_grid.locate(a, c[a]);
                }
                const int K = grid.cell_id(gi);
                const int R = ref_grid.cell_id(ri);
                const SpnMatrixBundle& B = bundles.at(grid.material(K));
                const Eigen::VectorXd d_o = B.To.diagonal();
                const Eigen::VectorXd d_e = B.Te.diagonal();
                const double hk = grid.cell_diameter(K);
                const Box bk = grid.cell_box(K);
                const Box br = ref_grid.cell_box(R);
                auto local = [&](const Box& b, int a, double x) { return (x - b.lo[a]) / (b.hi[a] - b.lo[a]); };
                double e_acc = 0.0;
                double r_acc = 0.0;
                for (int a = 0; a < dim; ++a) {
                    const double x0 = ticks[a][s[a]];
                    const double x1 = ticks[a][s[a] + 1];
                    Point xi_h{0.5, 0.5, 0.5}, xi_r{0.5, 0.5, 0.5};
                    xi_h[a] = local(bk, a, x0);
                    xi_r[a] = local(br, a, x0);
                    const Eigen::VectorXd ph0 = evaluate_flux(grid, field, K, xi_h).row(a).transpose();
                    const Eigen::VectorXd pr0 = evaluate_flux(ref_grid, ref_field, R, xi_r).row(a).transpose();
                    xi_h[a] = local(bk, a, x1);
                    xi_r[a] = local(br, a, x1);
                    const Eigen::VectorXd ph1 = evaluate_flux(grid, field, K, xi_h).row(a).transpose();
                    const Eigen::VectorXd pr1 = evaluate_flux(ref_grid, ref_field, R, xi_r).row(a).transpose();
                    const Eigen::ArrayXd e0 = (pr0 - ph0).array();
                    const Eigen::ArrayXd e1 = (pr1 - ph1).array();
                    e_acc += vol / 3.0 * (d_o.array() * (e0 * e0 + e0 * e1 + e1 * e1)).sum();
                    const Eigen::ArrayXd r0 = pr0.array();
                    const Eigen::ArrayXd r1 = pr1.array();
                    r_acc += vol / 3.0 * (d_o.array() * (r0 * r0 + r0 * r1 + r1 * r1)).sum();

                    // Robin boundary pieces of this sub-cell.
                    for (int side = 0; side < 2; ++side) {
                        const bool at_lo = side == 0 && s[a] == 0;
                        const bool at_hi = side == 1 && s[a] == n[a] - 1;
                        if (!at_lo && !at_hi) continue;
                        const int f = grid.cell_facet(K, a, side);
                        if (grid.facet_kind(f) != BoundaryKind::Robin) continue;
                        const Eigen::VectorXd e = side ? Eigen::VectorXd(pr1 - ph1) : Eigen::VectorXd(pr0 - ph0);
                        const Eigen::VectorXd rr = side ? pr1 : pr0;
                        const double w = d_o.maxCoeff() * grid.extent(K, a) * vol / h[a];
                        e_acc += w * e.dot(B.Gamma_tilde * e);
                        r_acc += w * rr.dot(B.Gamma_tilde * rr);
                    }
                }
                const Eigen::VectorXd dphi = ref_field.phi.row(R).transpose() - field.phi.row(K).transpose();
                e_acc += vol * (d_e.array() * dphi.array().square()).sum();
                r_acc += vol * (d_e.array() * ref_field.phi.row(R).transpose().array().square()).sum();
                const Eigen::VectorXd ddiv = cell_divergence(ref_grid, ref_field, R) - cell_divergence(grid, field, K);
                const Eigen::VectorXd rdiv = cell_divergence(ref_grid, ref_field, R);
                e_acc += d_o.maxCoeff() * hk * hk * vol * ddiv.squaredNorm();
                r_acc += d_o.maxCoeff() * hk * hk * vol * rdiv.squaredNorm();
                err += e_acc;
                ref += r_acc;
            }
        }
    }
    return {err, ref};
}

double relative_s_error(const TensorGrid& grid, const MixedField& field, const TensorGrid& ref_grid,
                        const MixedField& ref_field, const std::vector<SpnMatrixBundle>& bundles) {
    const SErrorParts p = s_error_parts(grid, field, ref_grid, ref_field, bundles);
    return p.reference2 > 0.0 ? std::sqrt(p.error2 / p.reference2) : std::sqrt(p.error2);
}

std::string csv_header(std::size_t subdomains) {
    std::string h = "iteration,cells,max_eta_K,max_eta_K_robin_cells,max_eta_bc,max_bc_ratio,phi_norm,eps_amr,rel_s_error";
    for (std::size_t s = 0; s < subdomains; ++s) h += ",max_eta_K_sub" + std::to_string(s + 1);
    return h;
}

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string format_csv(const std::vector<AmrIterationRecord>& records, std::size_t subdomains) {
    std::string out = csv_header(subdomains) + "\n";
    for (const auto& r : records) {
        out += std::to_string(r.iteration) + "," + std::to_string(r.cells) + "," + fmt(r.max_eta) + "," +
               fmt(r.max_eta_boundary) + "," + fmt(r.max_eta_bc) + "," + fmt(r.max_bc_ratio) + "," + fmt(r.phi_norm) +
               "," + fmt(r.eps_amr) + "," + (r.rel_error ? fmt(*r.rel_error) : std::string());
        for (std::size_t s = 0; s < subdomains; ++s) {
            out += ",";
            out += s < r.subdomain_max.size() && r.subdomain_max[s] ? fmt(*r.subdomain_max[s]) : std::string("-");
        }
        out += "\n";
    }
    return out;
}

void export_csv(const std::vector<AmrIterationRecord>& records, const std::string& path, std::size_t subdomains) {
    write_file(path, format_csv(records, subdomains));
}

std::vector<AmrIterationRecord> parse_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) return {};
    std::size_t columns = 1;
    for (char ch : line) columns += ch == ',';
    const std::size_t subdomains = columns - 9;
    std::vector<AmrIterationRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::string cur;
        for (char ch : line) {
            if (ch == ',') {
                cells.push_back(cur);
                cur.clear();
            } else {
                cur += ch;
            }
        }
        cells.push_back(cur);
        if (cells.size() != columns) throw IoError("malformed CSV row: " + line);
        AmrIterationRecord r;
        r.iteration = std::stoi(cells[0]);
        r.cells = std::stol(cells[1]);
        r.max_eta = std::strtod(cells[2].c_str(), nullptr);
        r.max_eta_boundary = std::strtod(cells[3].c_str(), nullptr);
        r.max_eta_bc = std::strtod(cells[4].c_str(), nullptr);
        r.max_bc_ratio = std::strtod(cells[5].c_str(), nullptr);
        r.phi_norm = std::strtod(cells[6].c_str(), nullptr);
        r.eps_amr = std::strtod(cells[7].c_str(), nullptr);
        if (!cells[8].empty()) r.rel_error = std::strtod(cells[8].c_str(), nullptr);
        for (std::size_t s = 0; s < subdomains; ++s) {
            const std::string& v = cells[9 + s];
            if (v == "-") {
                r.subdomain_max.emplace_back(std::nullopt);
            } else {
                r.subdomain_max.emplace_back(std::strtod(v.c_str(), nullptr));
            }
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<AmrIterationRecord> read_csv(const std::string& path) { return parse_csv(read_file(path)); }

void export_vtk(const TensorGrid& grid, const MixedField& field, const NodalFluxField* recon,
                const std::vector<VtkCellData>& extra, const std::string& path) {
    std::ostringstream out;
    out << "# vtk DataFile Version 3.0\n";
    out << "SPN mixed solution\n";
    out << "ASCII\n";
    out << "DATASET RECTILINEAR_GRID\n";
    const Index3 e = grid.vertex_extents();
    out << "DIMENSIONS " << e[0] << " " << e[1] << " " << e[2] << "\n";
    const char* names[] = {"X_COORDINATES", "Y_COORDINATES", "Z_COORDINATES"};
    for (int a = 0; a < 3; ++a) {
        const std::vector<double> coords = a < grid.dim() ? grid.ticks(a) : std::vector<double>{0.0};
        out << names[a] << " " << coords.size() << " double\n";
        for (std::size_t i = 0; i < coords.size(); ++i) out << (i ? " " : "") << fmt(coords[i]);
        out << "\n";
    }
    out << "CELL_DATA " << grid.num_cells() << "\n";
    auto scalars = [&](const std::string& name, auto&& value, int count) {
        out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
        for (int i = 0; i < count; ++i) out << fmt(value(i)) << "\n";
    };
    out << "SCALARS material int 1\nLOOKUP_TABLE default\n";
    for (int K = 0; K < grid.num_cells(); ++K) out << grid.material(K) << "\n";
    for (int c = 0; c < field.components(); ++c) {
        scalars("phi_" + std::to_string(c), [&](int K) { return field.phi(K, c); }, grid.num_cells());
    }
    for (const auto& d : extra) scalars(d.name, [&](int K) { return d.values(K); }, grid.num_cells());
    if (recon) {
        out << "POINT_DATA " << grid.num_vertices() << "\n";
        for (int c = 0; c < recon->components(); ++c) {
            scalars("phi_tilde_" + std::to_string(c), [&](int v) { return recon->values(v, c); }, grid.num_vertices());
        }
    }
    write_file(path, out.str());
}

}  // namespace spn
