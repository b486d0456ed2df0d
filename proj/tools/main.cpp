#include "psbfem/case.hpp"
#include "psbfem/io.hpp"
#include "psbfem/mesh_gen.hpp"
#include "psbfem/verification.hpp"

#include "CLI11.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace {

using namespace psbfem;

int cmd_run(const std::string& case_file, int threads) {
  AnalysisCase cs = load_case(case_file);
  CaseSummary sum = run_case(cs, threads);
  std::cout << sum.to_json() << '\n';
  return 0;
}

int cmd_convergence(const std::string& case_file, const std::vector<double>& sizes,
                    int threads, const std::string& csv_path) {
  AnalysisCase base = load_case(case_file);
  if (base.generator != "box")
    throw Error("convergence studies need a 'box' generator case");
  if (base.reference.monitor_values.empty())
    throw Error("convergence studies need reference monitor_values");

  std::ostringstream csv;
  csv << "size,n_elements";
  for (const auto& m : base.boundary.monitors) csv << ',' << m.label << "_rel_error";
  csv << '\n';

  std::cout << "size  elements  monitor relative errors\n";
  for (double size : sizes) {
    AnalysisCase cs = base;
    for (int d = 0; d < 3; ++d)
      cs.divisions[d] = std::max(1, int(std::lround(cs.domain.extent()[d] / size)));
    cs.output = {};  // per-size file outputs are not useful
    CaseSummary sum = run_case(cs, threads);
    csv << format_sig12(size) << ',' << sum.n_elements;
    std::cout << size << "  " << sum.n_elements << " ";
    for (double e : sum.monitor_rel_errors) {
      csv << ',' << format_sig12(e);
      std::cout << "  " << e;
    }
    csv << '\n';
    std::cout << '\n';
  }
  if (!csv_path.empty()) {
    std::ofstream out(csv_path);
    if (!out) throw Error("cannot open '" + csv_path + "' for writing");
    out << csv.str();
  } else {
    std::cout << csv.str();
  }
  return 0;
}

int cmd_validate(const std::string& mesh_file) {
  Mesh mesh;
  try {
    mesh = load_mesh(mesh_file);
  } catch (const ValidationError& ex) {
    std::cout << "INVALID\n" << ex.what() << '\n';
    return 1;
  }
  ValidationReport rep = validate_mesh(mesh);
  if (!rep.ok()) {
    std::cout << "INVALID\n" << rep.to_string();
    return 1;
  }
  std::cout << "VALID: " << mesh.nodes.size() << " nodes, " << mesh.faces.size()
            << " faces, " << mesh.elements.size() << " elements\n";
  return 0;
}

int cmd_oracle_check(int count, unsigned seed, int n_radial) {
  const Material mat = Material::isotropic(1.0, 1.0);
  double worst_k = 0.0, worst_m = 0.0;
  std::cout << "element  shape_nodes  stiffness_rel_diff  mass_rel_diff\n";
  for (int i = 0; i < count; ++i) {
    Mesh m = random_element(seed + unsigned(i));
    ElementGeometry geom = ElementGeometry::build(m, 0);
    ElementCoefficients coeffs = assemble_element_coeffs(geom, mat);
    ModalBasis mb = eigen_split(build_hamiltonian(coeffs));

    Eigen::MatrixXd K = element_stiffness(mb);
    Eigen::MatrixXd Ko = schur_stiffness_oracle(coeffs);
    const double dk = (K - Ko).norm() / K.norm();

    Eigen::MatrixXd M = element_mass(mb, coeffs.M0);
    Eigen::MatrixXd Mo = radial_mass_oracle(mb, coeffs.M0, n_radial);
    const double dm = (M - Mo).norm() / M.norm();

    worst_k = std::max(worst_k, dk);
    worst_m = std::max(worst_m, dm);
    std::cout << i << "  " << geom.nodes.size() << "  " << dk << "  " << dm << '\n';
  }
  std::cout << "worst stiffness diff " << worst_k << ", worst mass diff " << worst_m << '\n';
  return (worst_k <= 1e-8 && worst_m <= 1e-8) ? 0 : 1;
}

int cmd_export(const std::string& mesh_file, const std::string& out_file) {
  Mesh mesh = load_mesh(mesh_file);
  export_vtk(mesh, {}, out_file);
  std::cout << "wrote " << out_file << '\n';
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Polyhedral scaled boundary finite element solver for Darcy seepage"};
  app.require_subcommand(1);

  int threads = int(std::thread::hardware_concurrency());
  if (threads < 1) threads = 1;
  app.add_option("--threads", threads, "Worker threads for element assembly");

  std::string case_file, mesh_file, out_file, csv_path;
  std::vector<double> sizes;
  int count = 50, n_radial = 64;
  unsigned seed = 20240001;

  auto* run = app.add_subcommand("run", "Run an analysis case file");
  run->add_option("case", case_file, "JSON case file")->required();

  auto* conv = app.add_subcommand("convergence", "Mesh-size convergence study");
  conv->add_option("case", case_file, "JSON case template (box generator)")->required();
  conv->add_option("--sizes", sizes, "Element sizes to run")->required();
  conv->add_option("--csv", csv_path, "Write the error table to this CSV file");

  auto* val = app.add_subcommand("validate-mesh", "Validate a mesh file");
  val->add_option("mesh", mesh_file, "Mesh file (.json or .inp)")->required();

  auto* orc = app.add_subcommand("oracle-check", "Cross-check element operators vs oracles");
  orc->add_option("--count", count, "Number of random elements");
  orc->add_option("--seed", seed, "Corpus seed");
  orc->add_option("--n-radial", n_radial, "Radial quadrature points for the mass oracle");

  auto* exp = app.add_subcommand("export", "Convert a mesh to legacy VTK");
  exp->add_option("mesh", mesh_file, "Mesh file (.json or .inp)")->required();
  exp->add_option("output", out_file, "Output .vtk path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(case_file, threads);
    if (*conv) return cmd_convergence(case_file, sizes, threads, csv_path);
    if (*val) return cmd_validate(mesh_file);
    if (*orc) return cmd_oracle_check(count, seed, n_radial);
    if (*exp) return cmd_export(mesh_file, out_file);
  } catch (const psbfem::ParseError& ex) {
    std::cerr << "config error: " << ex.what() << '\n';
    return 2;
  } catch (const psbfem::ValidationError& ex) {
    std::cerr << "mesh error: " << ex.what() << '\n';
    return 3;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  }
  return 0;
}
