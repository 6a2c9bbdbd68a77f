#pragma once

#include "spn/amr.hpp"
#include "spn/cartesian_mesh.hpp"
#include "spn/estimators.hpp"
#include "spn/mixed_fem.hpp"
#include "spn/reconstruction.hpp"
#include "spn/spn_coefficients.hpp"

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace spn {

struct MaterialSpec {
    std::string name;
    MaterialCrossSections xs;
    Eigen::VectorXd source;  // per component; empty means no source
};

struct RegionSpec {
    std::string material;
    Box box;
};

struct BoundarySpec {
    int axis = 0;
    int side = 0;  // 0 low face, 1 high face
    BoundaryKind kind = BoundaryKind::Robin;
    std::optional<Box> patch;  // tangential restriction of the face
};

struct SubdomainSpec {
    Box box;
    double theta = 0.5;
};

struct ProblemConfig {
    std::string name;
    int dim = 3;
    int order = 1;
    int groups = 1;
    Box domain;
    Index3 cells{1, 1, 1};
    std::vector<MaterialSpec> materials;
    std::string background;
    std::vector<RegionSpec> regions;
    std::vector<BoundarySpec> boundary;
    AmrConfig amr;
    std::string mode = "mono";  // "mono" or "ddm"
    std::vector<SubdomainSpec> subdomains;
    std::string output_dir = "out";

    bool operator==(const ProblemConfig&) const;
};

/// Throws ConfigError listing every offending key.
ProblemConfig parse_config(const std::string& text);
ProblemConfig load_config(const std::string& path);
std::string emit_config(const ProblemConfig& config);

/// Cross sections shipped with the repository for the benchmark (core, reflector, control rod).
std::string default_cross_section_path();
std::vector<MaterialSpec> load_cross_sections(const std::string& path, int groups);

enum class TakedaVariant { Mono1, Mono2, Ddm1, Ddm2 };

/// Benchmark preset. dim = 3 is the full geometry; dim = 2 is the reduced (x, y) analogue.
ProblemConfig takeda_preset(TakedaVariant variant, int dim = 3, const std::string& xs_path = default_cross_section_path());

/// Everything needed to run a configuration.
struct BuiltProblem {
    AmrProblem problem;
    std::vector<std::string> material_names;
    std::vector<Box> subdomains;
    AmrConfig amr;
};

BuiltProblem build_problem(const ProblemConfig& config);
SubdomainLayout build_layout(const BuiltProblem& built);

/// Source field of a grid from per-material source vectors.
SourceFunction material_source(std::vector<Eigen::VectorXd> per_material, int ncomp);

/// Manufactured Dirichlet problem on (0,1)^d: phi_c = s_c prod sin(pi x_i), p = -To^{-1} H grad phi,
/// S_f = H^T div p + Te phi cell-averaged with a 4-point Gauss rule per axis.
struct MmsProblem {
    TensorGrid grid;
    std::vector<SpnMatrixBundle> bundles;
    SourceFunction source;
    std::function<Eigen::VectorXd(const Point&)> phi;
    std::function<Eigen::MatrixXd(const Point&)> flux;  // dim x ncomp
};

/// Constant cross sections: sigma_t = 1, isotropic within-group scattering 0.5 (plus weak
/// downscatter when groups > 1). `symmetric` makes the group coupling symmetric.
MmsProblem mms_problem(int dim, int groups, int order, int cells, bool symmetric = false);

/// Same, with a single given material.
MmsProblem mms_problem(int dim, const MaterialCrossSections& xs, int order, int cells);

double l2_error_phi(const TensorGrid& grid, const MixedField& field, const std::function<Eigen::VectorXd(const Point&)>& phi);
double l2_error_flux(const TensorGrid& grid, const MixedField& field,
                     const std::function<Eigen::MatrixXd(const Point&)>& flux);

/// Squared S-norm of (ref - field) and of ref over the part of the domain covered by `grid`.
struct SErrorParts {
    double error2 = 0.0;
    double reference2 = 0.0;
};
SErrorParts s_error_parts(const TensorGrid& grid, const MixedField& field, const TensorGrid& ref_grid,
                          const MixedField& ref_field, const std::vector<SpnMatrixBundle>& bundles);

/// Relative S-norm distance between a field and a reference field on another grid of the same domain,
/// evaluated on the common refinement with the weights of `grid`.
double relative_s_error(const TensorGrid& grid, const MixedField& field, const TensorGrid& ref_grid,
                        const MixedField& ref_field, const std::vector<SpnMatrixBundle>& bundles);

std::string csv_header(std::size_t subdomains);
void export_csv(const std::vector<AmrIterationRecord>& records, const std::string& path, std::size_t subdomains = 0);
std::string format_csv(const std::vector<AmrIterationRecord>& records, std::size_t subdomains = 0);
std::vector<AmrIterationRecord> read_csv(const std::string& path);
std::vector<AmrIterationRecord> parse_csv(const std::string& text);

struct VtkCellData {
    std::string name;
    Eigen::VectorXd values;
};

/// Legacy ASCII rectilinear grid with phi per component, the given cell arrays and the
/// reconstruction as point data (if `recon` is non-null).
void export_vtk(const TensorGrid& grid, const MixedField& field, const NodalFluxField* recon,
                const std::vector<VtkCellData>& extra, const std::string& path);

}  // namespace spn
