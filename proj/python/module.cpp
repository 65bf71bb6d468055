#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "forge/codec.hpp"
#include "forge/difficulty.hpp"
#include "forge/errors.hpp"
#include "forge/harness.hpp"
#include "forge/workbench.hpp"

namespace py = pybind11;
using namespace forge;
namespace fs = std::filesystem;

namespace {

DifficultyVector vector_of(const std::vector<int>& levels) {
  if (levels.size() != kDimensionCount) {
    throw ConfigError("difficulty vector needs " + std::to_string(kDimensionCount) + " levels");
  }
  std::array<int, kDimensionCount> a{};
  std::copy(levels.begin(), levels.end(), a.begin());
  return DifficultyVector(a);
}

std::string run_pipeline_json(const fs::path& config_path, const fs::path& root) {
  const RunConfig config = RunConfig::load(config_path);
  const auto providers = load_providers(config.providers_file);
  py::gil_scoped_release release;
  return run_pipeline(config, providers, root).manifest.to_json().dump();
}

std::string manifest_json(const fs::path& root, const std::string& benchmark_id) {
  return BenchmarkStore(root, benchmark_id).read_manifest().to_json().dump();
}

std::string manifest_digest(const fs::path& root, const std::string& benchmark_id) {
  return BenchmarkStore(root, benchmark_id).read_manifest().digest();
}

std::string stats(const fs::path& root, const std::string& benchmark_id) {
  return stats_markdown(BenchmarkStore(root, benchmark_id).read_manifest());
}

std::string accuracy_markdown(const fs::path& root, const std::string& benchmark_id, const fs::path& results,
                              bool exact) {
  const BenchmarkManifest m = BenchmarkStore(root, benchmark_id).read_manifest();
  ResultSet rs;
  rs.index = ResultSet::index_from(m);
  rs.records = read_results(results);
  return aggregate(rs, exact ? AverageMode::Exact : AverageMode::Rendered).to_markdown();
}

std::vector<std::vector<std::optional<double>>> spearman_rows(const std::vector<std::vector<int>>& annotations) {
  std::vector<DifficultyVector> vs;
  for (const auto& a : annotations) vs.push_back(vector_of(a));
  const SpearmanMatrix m = spearman_matrix(vs);
  std::vector<std::vector<std::optional<double>>> out;
  for (const auto& row : m.rho) out.emplace_back(row.begin(), row.end());
  return out;
}

} // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of forgebench";

  auto base = py::register_exception<Error>(m, "ForgeError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<DecodeError>(m, "DecodeError", base.ptr());
  py::register_exception<InfrastructureError>(m, "InfrastructureError", base.ptr());

  m.def("encode_secret", [](const std::string& s) { return encode_secret(s); }, py::arg("plaintext"));
  m.def("decode_secret", [](const std::string& s) { return decode_secret(s); }, py::arg("encoded"));

  m.def("dimension_keys", [] {
    std::vector<std::string> out;
    for (Dimension d : kAllDimensions) out.emplace_back(dimension_key(d));
    return out;
  });
  m.def("check_composition",
        [](int level, const std::vector<int>& v) { return check_composition(Level(level), vector_of(v)); },
        py::arg("level"), py::arg("vector"));
  m.def("admissible_levels", [](const std::vector<int>& v) { return admissible_levels(vector_of(v)); },
        py::arg("vector"));

  m.def("spearman", &spearman, py::arg("x"), py::arg("y"));
  m.def("spearman_matrix", &spearman_rows, py::arg("annotations"));

  m.def("run_pipeline", &run_pipeline_json, py::arg("config"), py::arg("root"),
        "Run every stage for the config and return the manifest as JSON text.");
  m.def("read_manifest", &manifest_json, py::arg("root"), py::arg("benchmark_id"));
  m.def("manifest_digest", &manifest_digest, py::arg("root"), py::arg("benchmark_id"));
  m.def("stats_markdown", &stats, py::arg("root"), py::arg("benchmark_id"));
  m.def("accuracy_markdown", &accuracy_markdown, py::arg("root"), py::arg("benchmark_id"), py::arg("results"),
        py::arg("exact") = false);
}
