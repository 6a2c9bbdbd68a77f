#include "spn/bench_io.hpp"
#include "spn/errors.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace spn;

namespace {

const char* kMinimal = R"({
  "name": "slab",
  "dimension": 2,
  "spn_order": 3,
  "groups": 1,
  "domain": {"lo": [0, 0], "hi": [2, 1]},
  "mesh": {"cells": [4, 2]},
  "materials": [
    {"name": "fuel", "sigma_t": [1.0], "sigma_s": [[[0.5]], [[0.1]]], "source": [1.0]},
    {"name": "water", "sigma_t": [2.0], "sigma_s": [[[1.5]]]}
  ],
  "background": "water",
  "regions": [{"material": "fuel", "lo": [0, 0], "hi": [1, 1]}],
  "boundary": [
    {"face": "x-", "kind": "neumann"}, {"face": "x+", "kind": "robin"},
    {"face": "y-", "kind": "dirichlet"}, {"face": "y+", "kind": "neumann"},
    {"face": "y+", "kind": "robin", "lo": [0, 0], "hi": [1.5, 1]}
  ],
  "amr": {"theta": [0.4], "eps_rel": 0.01, "max_iterations": 3}
})";

std::vector<std::string> issues_of(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.issues();
    }
    return {};
}

bool has_issue(const std::vector<std::string>& issues, const std::string& path) {
    return std::any_of(issues.begin(), issues.end(), [&](const std::string& i) { return i.rfind(path + ":", 0) == 0; });
}

std::string replace(std::string s, const std::string& from, const std::string& to) {
    const auto pos = s.find(from);
    EXPECT_NE(pos, std::string::npos) << from;
    if (pos != std::string::npos) s.replace(pos, from.size(), to);
    return s;
}

std::filesystem::path scratch_dir() {
    auto d = std::filesystem::temp_directory_path() / "spn_bench_io_test";
    std::filesystem::create_directories(d);
    return d;
}

}  // namespace

TEST(Config, ParsesMinimalExample) {
    const ProblemConfig c = parse_config(kMinimal);
    EXPECT_EQ(c.dim, 2);
    EXPECT_EQ(c.order, 3);
    ASSERT_EQ(c.materials.size(), 2u);
    // A per-group source sits on the first moment of each group.
    EXPECT_EQ(c.materials[0].source.size(), 2);
    EXPECT_EQ(c.materials[0].source(0), 1.0);
    EXPECT_EQ(c.materials[0].source(1), 0.0);
    EXPECT_EQ(c.materials[1].source.size(), 0);
    ASSERT_EQ(c.boundary.size(), 5u);
    EXPECT_EQ(c.boundary[2].kind, BoundaryKind::Dirichlet);
    EXPECT_FALSE(c.boundary[3].patch.has_value());
    EXPECT_TRUE(c.boundary[4].patch.has_value());
    EXPECT_EQ(c.amr.max_iterations, 3);
}

TEST(Config, RoundTrip) {
    const ProblemConfig c = parse_config(kMinimal);
    EXPECT_EQ(parse_config(emit_config(c)), c);
    for (auto v : {TakedaVariant::Mono1, TakedaVariant::Mono2, TakedaVariant::Ddm1, TakedaVariant::Ddm2}) {
        for (int dim : {2, 3}) {
            const ProblemConfig p = takeda_preset(v, dim);
            EXPECT_EQ(parse_config(emit_config(p)), p);
        }
    }
}

TEST(Config, ReportsOffendingKeys) {
    const auto bad_theta = issues_of(replace(kMinimal, "\"theta\": [0.4]", "\"theta\": [1.5]"));
    EXPECT_TRUE(has_issue(bad_theta, "$.amr.theta[0]"));
    const auto several = issues_of(
        replace(replace(replace(kMinimal, "\"neumann\"", "\"periodic\""), "\"background\": \"water\"",
                        "\"background\": \"steel\""),
                "\"cells\": [4, 2]", "\"cells\": [4, 0]"));
    EXPECT_TRUE(has_issue(several, "$.boundary[0].kind"));
    EXPECT_TRUE(has_issue(several, "$.background"));
    EXPECT_TRUE(has_issue(several, "$.mesh.cells"));
    EXPECT_TRUE(has_issue(issues_of(replace(kMinimal, "\"spn_order\": 3", "\"spn_order\": 2")), "$.spn_order"));
    EXPECT_TRUE(has_issue(issues_of(replace(kMinimal, "\"sigma_t\": [2.0]", "\"sigma_t\": [1.0]")), "$.materials[1]"));
    EXPECT_TRUE(has_issue(issues_of(replace(kMinimal, "\"amr\"", "\"mode\": \"ddm\", \"amr\"")), "$.subdomains"));
    EXPECT_TRUE(has_issue(issues_of("{not json"), "$"));
}

TEST(Config, BuildsGridWithRegionsAndPatches) {
    const BuiltProblem b = build_problem(parse_config(kMinimal));
    const TensorGrid& g = b.problem.grid;
    EXPECT_EQ(g.num_cells(), 8);
    EXPECT_EQ(b.material_names, (std::vector<std::string>{"fuel", "water"}));
    for (int K = 0; K < g.num_cells(); ++K) EXPECT_EQ(g.material(K), g.cell_center(K)[0] < 1.0 ? 0 : 1);
    const SourceField s = b.problem.source(g);
    EXPECT_EQ(s.cols(), 2);
    EXPECT_EQ(s(0, 0), 1.0);
    EXPECT_EQ(s(g.num_cells() - 1, 0), 0.0);
    // The Robin patch overrides the Neumann face on x < 1.5 only.
    for (int f = 0; f < g.num_facets(); ++f) {
        const FacetRef r = g.facet(f);
        if (r.axis != 1 || g.facet_kind(f) == BoundaryKind::Interior) continue;
        const Point c = g.cell_center(r.owner());
        if (c[1] < 0.5) continue;
        EXPECT_EQ(g.facet_kind(f), c[0] < 1.5 ? BoundaryKind::Robin : BoundaryKind::Neumann);
    }
}

TEST(Config, UncoveredBoundaryIsRejected) {
    const std::string text = replace(kMinimal, "{\"face\": \"y+\", \"kind\": \"neumann\"},", "");
    EXPECT_THROW(build_problem(parse_config(text)), LayoutError);
}

TEST(Presets, BenchmarkGeometry) {
    for (int dim : {2, 3}) {
        const ProblemConfig c = takeda_preset(TakedaVariant::Mono1, dim);
        const BuiltProblem b = build_problem(c);
        EXPECT_EQ(b.problem.grid.num_cells(), dim == 3 ? 125 : 25);
        EXPECT_EQ(b.problem.bundles.size(), 3u);
        const ProblemConfig d = takeda_preset(TakedaVariant::Ddm2, dim);
        EXPECT_EQ(d.mode, "ddm");
        EXPECT_EQ(d.subdomains.size(), dim == 3 ? 6u : 5u);
        const SubdomainLayout l = build_layout(build_problem(d));
        EXPECT_EQ(l.total_cells(), dim == 3 ? 125 : 25);
    }
}

TEST(Presets, CrossSectionsLoad) {
    const std::vector<MaterialSpec> xs = load_cross_sections(default_cross_section_path(), 2);
    ASSERT_EQ(xs.size(), 3u);
    for (const auto& m : xs) {
        EXPECT_EQ(m.xs.groups(), 2);
        EXPECT_TRUE(validate_coefficient_assumptions(build_bundle(m.xs, compute_angular_constants(1))).ok()) << m.name;
    }
    EXPECT_THROW(load_cross_sections("/nonexistent/xs.json", 2), IoError);
}

TEST(Csv, RoundTripWithSentinel) {
    std::vector<AmrIterationRecord> recs(2);
    recs[0].iteration = 0;
    recs[0].cells = 25;
    recs[0].max_eta = 1.0 / 3.0;
    recs[0].eps_amr = 1e-3;
    recs[0].rel_error = 0.125;
    recs[0].subdomain_max = {0.25, std::nullopt};
    recs[1].iteration = 1;
    recs[1].cells = 40;
    recs[1].max_eta = 0.1;
    recs[1].subdomain_max = {std::nullopt, std::nullopt};
    const std::string text = format_csv(recs, 2);
    EXPECT_EQ(text.substr(0, text.find('\n')), csv_header(2));
    const auto back = parse_csv(text);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].max_eta, recs[0].max_eta);
    EXPECT_EQ(back[0].rel_error, recs[0].rel_error);
    EXPECT_FALSE(back[1].rel_error.has_value());
    EXPECT_EQ(back[0].subdomain_max, recs[0].subdomain_max);
    EXPECT_EQ(back[1].subdomain_max, recs[1].subdomain_max);
    EXPECT_EQ(format_csv(back, 2), text);

    const auto path = (scratch_dir() / "history.csv").string();
    export_csv(recs, path, 2);
    EXPECT_EQ(format_csv(read_csv(path), 2), text);
}

TEST(Vtk, RectilinearStructure) {
    const TensorGrid g = spn::testing::unit_grid(2, 2, BoundaryKind::Robin);
    const auto bundles = spn::testing::simple_bundles(1, 1);
    const MixedField f = solve_mono(g, bundles, SourceField::Ones(4, 1));
    const NodalFluxField r = average_reconstruct(g, bundles, f);
    const auto path = (scratch_dir() / "field.vtk").string();
    export_vtk(g, f, &r, {{"eta_K", Eigen::VectorXd::Ones(4)}}, path);
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string s = ss.str();
    for (const char* key : {"DATASET RECTILINEAR_GRID", "DIMENSIONS 3 3 1", "X_COORDINATES 3 double", "CELL_DATA 4",
                            "SCALARS material int 1", "SCALARS phi_0 double 1", "SCALARS eta_K double 1",
                            "POINT_DATA 9", "SCALARS phi_tilde_0 double 1"}) {
        EXPECT_NE(s.find(key), std::string::npos) << key;
    }
}

TEST(Mms, SourceMatchesExactSolution) {
    // The manufactured source is consistent: error shrinks under refinement.
    const MmsProblem a = mms_problem(2, 1, 1, 4);
    const MmsProblem b = mms_problem(2, 1, 1, 8);
    const double ea = l2_error_phi(a.grid, solve_mono(a.grid, a.bundles, a.source(a.grid)), a.phi);
    const double eb = l2_error_phi(b.grid, solve_mono(b.grid, b.bundles, b.source(b.grid)), b.phi);
    EXPECT_LT(eb, 0.6 * ea);
}

TEST(Mms, RelativeErrorAgainstItselfIsZero) {
    const MmsProblem p = mms_problem(2, 2, 1, 4);
    const MixedField f = solve_mono(p.grid, p.bundles, p.source(p.grid));
    EXPECT_LE(relative_s_error(p.grid, f, p.grid, f, p.bundles), 1e-14);
    const TensorGrid fine = refine_uniform(p.grid);
    const MixedField ff = solve_mono(fine, p.bundles, p.source(fine));
    const double e = relative_s_error(p.grid, f, fine, ff, p.bundles);
    EXPECT_GT(e, 0.0);
    EXPECT_LT(e, 1.0);
}
