#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "piezo/config.hpp"
#include "piezo/drive.hpp"
#include "piezo/energy.hpp"
#include "piezo/error.hpp"

namespace piezo {

Mesh build_mesh(const RunConfig& cfg);
Drive build_drive(const RunConfig& cfg);

/// Process exit code for an error kind: 1 verification failure, 2 input
/// error, 3 internal error.
int exit_code_for(ErrorKind kind) noexcept;

/// `piezo: error[<Kind>]: <message>` on a single line.
std::string diagnostic_line(ErrorKind kind, std::string_view message);

struct SimulateResult {
  EnergyReport energy;
  std::optional<bool> monotone;  // unset when the drive never switches off
  std::optional<DecayVerdict> decay;
  double max_identity_residual = 0.0;
  bool passed = true;  // false only when a requested decay check fails
  std::string summary_json;
};

/// Runs the time loop and writes trajectory.csv, drive.csv,
/// energy_summary.json and (optionally) snapshots.bin into the output
/// directory.
SimulateResult cmd_simulate(const RunConfig& cfg);

struct VerifyResult {
  bool passed = false;
  std::string json;
};

/// study is one of oracle, mms, coercivity, scaling, lift, zero. The report is
/// also written to verify_<study>.json in the output directory.
VerifyResult cmd_verify(const RunConfig& cfg, std::string_view study);

/// Writes the configured mesh to <output>/mesh.txt and returns the path.
std::string cmd_mesh_gen(const RunConfig& cfg);

/// Writes the assembled blocks to <output>/system/ and returns the directory.
std::string cmd_dump_system(const RunConfig& cfg);

}  // namespace piezo
