#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "piezo/materials.hpp"
#include "piezo/mesh.hpp"
#include "piezo/verify.hpp"

namespace piezo {

struct MeshSpec {
  enum class Source { Generate, File };
  Source source = Source::Generate;
  std::string path;
  int nx = 4;
  int ny = 4;
  double lx = 1.0;
  double ly = 1.0;
  RectTagging tags;
};

struct DriveSpec {
  enum class Kind { Zero, Trapezoid, Table };
  Kind kind = Kind::Zero;
  double amplitude = 0.0;
  double t_rise = 0.0;
  double t_hold = 0.0;
  double t_fall = 0.0;
  std::string path;
};

struct EnergySpec {
  bool check_decay = false;  // simulate fails (exit 1) if the decay check fails
  double slack = 1e-6;
  double decay_fraction = 1e-2;
};

struct VerifySpec {
  std::vector<int> levels{4, 8, 16};
  int samples = 100;
  std::uint64_t seed = 42;
  std::vector<double> scale_factors{1e-3, 1.0, 2.0, 1e3};
  ManufacturedKind mms_case = ManufacturedKind::Quadratic;
  double mms_t_end = 0.5;
  double mms_dt_per_h = 0.25;
  double oracle_rtol = 1e-11;
  double oracle_tolerance = 1e-4;
  double tolerance = 1e-10;
};

/// Validated run description. Relative paths are resolved against the
/// directory of the config file.
struct RunConfig {
  MeshSpec mesh;
  std::string material_preset = "pzt5a";
  MaterialParams material = pzt5a_params();
  DriveSpec drive;
  double dt = 0.0;
  double t_end = 0.0;
  double alpha_h = -0.05;
  std::size_t stride = 1;
  std::size_t snapshot_stride = 0;  // 0 disables snapshots.bin
  std::string output_dir = "out";
  int threads = 0;
  EnergySpec energy;
  VerifySpec verify;
};

/// Line-oriented `key = value` with `[section]` headers; `section.key` is
/// accepted anywhere. '#' and ';' start comments. Throws ConfigError with the
/// offending line and key; a missing mesh or drive file is a ParseError.
RunConfig parse_config(std::string_view text, const std::string& base_dir = ".");
RunConfig load_config(const std::string& path);

}  // namespace piezo
