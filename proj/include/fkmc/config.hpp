#pragma once

#include <optional>
#include <string>

#include "json.hpp"

#include "fkmc/fields.hpp"
#include "fkmc/semigroup.hpp"

namespace fkmc {

enum class Command {
  semigroup,
  kernel,
  heatmap,
  trace,
  kato,
  validate,
  selftest
};

const char* command_name(Command cmd);

struct AxisGrid {
  double min = 0.0;
  double max = 0.0;
  int count = 0;
};

struct SemigroupBlock {
  VectorField f;
  std::vector<double> x;
  bool domination = false;
};

struct KernelBlock {
  std::vector<double> x, y;
  bool symmetric_pair = false;
};

struct HeatmapBlock {
  AxisGrid x_grid, y_grid;  // space_dim must be 1
};

struct TraceBlock {
  std::vector<double> box_lo, box_hi;
  double resolution = 0.0;
};

struct KatoBlock {
  std::vector<std::vector<double>> probes;
  std::vector<double> times;
};

struct ValidateBlock {
  VectorField f;
  std::vector<std::vector<double>> x_probes;
  std::vector<std::pair<std::vector<double>, std::vector<double>>> kernel_pairs;
  std::vector<double> box_lo, box_hi;
  std::vector<int> mesh;
  double sigma = 3.0;
  double semigroup_rel_floor = 0.02;
  double kernel_rel_floor = 0.03;
  std::int64_t kernel_paths = 0;  // 0: reuse n_paths
};

/// Parsed and validated run configuration.  Unknown keys anywhere are
/// rejected with the offending field path.
struct RunConfig {
  Command command = Command::selftest;
  int schema_version = 1;
  int space_dim = 0;
  int fiber_dim = 0;
  double time = 0.0;
  int steps = 0;
  std::int64_t n_paths = 0;
  std::uint64_t seed = 0;
  Scheme scheme;
  int workers = 0;
  std::string output;
  GaugeField gauge;
  Potential potential;

  std::optional<SemigroupBlock> semigroup;
  std::optional<KernelBlock> kernel;
  std::optional<HeatmapBlock> heatmap;
  std::optional<TraceBlock> trace;
  std::optional<KatoBlock> kato;
  std::optional<ValidateBlock> validate;
};

/// Parses the configuration document for the given command.  Tabulated field
/// files are resolved relative to base_dir.
RunConfig parse_config(const nlohmann::json& doc, Command cmd,
                       const std::string& base_dir = ".");

RunConfig load_config_file(const std::string& path, Command cmd);

}  // namespace fkmc
