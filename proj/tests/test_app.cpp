#include <algorithm>
#include <filesystem>

#include <gtest/gtest.h>

#include "json.hpp"
#include "piezo/app.hpp"
#include "test_support.hpp"

using namespace piezo;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string base_config(const fs::path& out) {
  return "[mesh]\nnx = 2\nny = 2\n[material]\npreset = identity\n[time]\ndt = 1e-3\nt_end = 1e-2\n"
         "[output]\ndirectory = " +
         out.string() + "\n";
}

// O(1) piezoelectric material with strong Rayleigh damping and a short pulse.
std::string damped_pulse_config(const fs::path& out) {
  return "[mesh]\nnx = 2\nny = 2\n"
         "[material]\npreset = identity\nc12 = 0.2\nc13 = 0.3\ne13 = -0.2\ne15 = 0.3\ne33 = 0.5\n"
         "alpha = 2\nbeta = 0.01\n"
         "[drive]\nkind = trapezoid\namplitude = 5\nt_rise = 0.1\nt_hold = 0.1\nt_fall = 0.1\n"
         "[time]\ndt = 1e-2\nt_end = 10\n"
         "[energy]\ncheck_decay = true\n"
         "[output]\ndirectory = " +
         out.string() + "\nsnapshot_stride = 100\n";
}

std::size_t line_count(const fs::path& p) {
  const std::string s = test::read_file(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST(App, ExitCodes) {
  EXPECT_EQ(exit_code_for(ErrorKind::RateFailure), 1);
  EXPECT_EQ(exit_code_for(ErrorKind::CoercivityViolation), 1);
  for (auto k : {ErrorKind::SolveFailure, ErrorKind::SingularLift, ErrorKind::NonFiniteState,
                 ErrorKind::StiffnessFailure}) {
    EXPECT_EQ(exit_code_for(k), 3);
  }
  for (auto k : {ErrorKind::InvalidScalar, ErrorKind::NonPositiveDefinite, ErrorKind::ParseError,
                 ErrorKind::TopologyError, ErrorKind::InvalidDimension, ErrorKind::DegenerateCell,
                 ErrorKind::DimensionMismatch, ErrorKind::PreconditionViolated, ErrorKind::TooLarge,
                 ErrorKind::ConfigError, ErrorKind::IoError}) {
    EXPECT_EQ(exit_code_for(k), 2) << error_kind_name(k);
  }
}

TEST(App, DiagnosticIsOneLine) {
  EXPECT_EQ(diagnostic_line(ErrorKind::ConfigError, "line 3: foo: unknown key"),
            "piezo: error[ConfigError]: line 3: foo: unknown key");
  const std::string d = diagnostic_line(ErrorKind::ParseError, "a\nb\r\nc");
  EXPECT_EQ(d.find('\n'), std::string::npos);
  EXPECT_EQ(d.find('\r'), std::string::npos);
}

TEST(App, SimulateZeroDrive) {
  const auto dir = test::scratch_dir();
  RunConfig cfg = parse_config(base_config(dir / "out"));
  cfg.stride = 3;
  const SimulateResult r = cmd_simulate(cfg);
  EXPECT_TRUE(r.passed);
  ASSERT_TRUE(r.monotone.has_value());
  EXPECT_TRUE(*r.monotone);
  EXPECT_EQ(r.max_identity_residual, 0.0);
  EXPECT_EQ(r.energy.rows.size(), 11u);

  // Header plus steps 0, 3, 6, 9 and the final step 10.
  EXPECT_EQ(line_count(dir / "out" / "trajectory.csv"), 6u);
  EXPECT_EQ(line_count(dir / "out" / "drive.csv"), 6u);
  const std::string traj = test::read_file(dir / "out" / "trajectory.csv");
  EXPECT_EQ(traj.substr(0, traj.find('\n')), kTrajectoryCsvHeader);
  EXPECT_FALSE(fs::exists(dir / "out" / "snapshots.bin"));

  const json s = json::parse(test::read_file(dir / "out" / "energy_summary.json"));
  EXPECT_EQ(s["monotone"], true);
  EXPECT_EQ(s["steps"], 10);
  EXPECT_EQ(s["eta_tilde_final"], 0.0);
  EXPECT_FALSE(s.contains("decay_check"));
}

TEST(App, SimulateDampedPulseDecays) {
  const auto dir = test::scratch_dir();
  const RunConfig cfg = parse_config(damped_pulse_config(dir / "out"));
  const SimulateResult r = cmd_simulate(cfg);
  ASSERT_TRUE(r.decay.has_value());
  EXPECT_TRUE(r.decay->monotone);
  EXPECT_TRUE(r.passed);
  EXPECT_LE(r.max_identity_residual, 1e-3);
  EXPECT_LT(r.decay->limit, 1e-2 * r.decay->eta_tilde_max);

  const json s = json::parse(test::read_file(dir / "out" / "energy_summary.json"));
  EXPECT_EQ(s["decay_check"]["passed"], true);
  EXPECT_NEAR(s["t0_off"].get<double>(), 0.3, 1e-15);
  EXPECT_TRUE(s["components"].is_object());

  // Snapshot records: t, then length-prefixed u, v, a, phi0.
  const std::size_t n_u = 18, n_phi = 9;
  const std::size_t record = 8 + 3 * (8 + 8 * n_u) + (8 + 8 * n_phi);
  EXPECT_EQ(fs::file_size(dir / "out" / "snapshots.bin"), 11 * record);
}

TEST(App, SimulateIsDeterministic) {
  const auto dir = test::scratch_dir();
  RunConfig a = parse_config(damped_pulse_config(dir / "a"));
  RunConfig b = parse_config(damped_pulse_config(dir / "b"));
  a.threads = 1;
  b.threads = 3;
  cmd_simulate(a);
  cmd_simulate(b);
  for (const char* f : {"trajectory.csv", "drive.csv", "energy_summary.json", "snapshots.bin"}) {
    EXPECT_EQ(test::read_file(dir / "a" / f), test::read_file(dir / "b" / f)) << f;
  }
}

TEST(App, DecayCheckWithoutDampingIsRejected) {
  const auto dir = test::scratch_dir();
  RunConfig cfg = parse_config(damped_pulse_config(dir / "out"));
  cfg.material.alpha = 0.0;
  try {
    cmd_simulate(cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::PreconditionViolated);
  }
}

TEST(App, VerifyStudies) {
  const auto dir = test::scratch_dir();
  const std::string cfg_text =
      "[mesh]\nnx = 1\nny = 1\n"
      "[material]\npreset = identity\nc12 = 0.2\ne15 = 0.3\ne33 = 0.5\nalpha = 0.1\nbeta = 0.01\n"
      "[drive]\nkind = trapezoid\namplitude = 10\nt_rise = 0.25\nt_hold = 0.25\nt_fall = 0.25\n"
      "[time]\ndt = 1e-3\nt_end = 1\n"
      "[verify]\nsamples = 20\n"
      "[output]\ndirectory = " +
      (dir / "out").string() + "\n";
  const RunConfig cfg = parse_config(cfg_text);
  for (const char* study : {"zero", "coercivity", "lift", "scaling", "mms", "oracle"}) {
    const VerifyResult r = cmd_verify(cfg, study);
    EXPECT_TRUE(r.passed) << study << "\n" << r.json;
    const json j = json::parse(r.json);
    EXPECT_EQ(j["study"], study);
    EXPECT_EQ(j["passed"], true);
    EXPECT_TRUE(fs::exists(dir / "out" / (std::string("verify_") + study + ".json")));
  }
  try {
    cmd_verify(cfg, "bogus");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ConfigError);
  }
}

TEST(App, MeshGenAndDump) {
  const auto dir = test::scratch_dir();
  RunConfig cfg = parse_config(base_config(dir / "out"));
  const std::string path = cmd_mesh_gen(cfg);
  EXPECT_EQ(load_mesh(path), generate_rect(2, 2, 1.0, 1.0));

  cfg.mesh.source = MeshSpec::Source::File;
  cfg.mesh.path = path;
  EXPECT_EQ(build_mesh(cfg), generate_rect(2, 2, 1.0, 1.0));

  const std::string sys_dir = cmd_dump_system(cfg);
  EXPECT_TRUE(fs::exists(fs::path(sys_dir) / "K_uu.txt"));
  EXPECT_TRUE(fs::exists(fs::path(sys_dir) / "g_unit.txt"));
}

TEST(App, BuildDriveFromTable) {
  const auto dir = test::scratch_dir();
  test::write_file(dir / "d.csv", "t,phi_e\n0,0\n0.004,2\n0.008,0\n");
  const RunConfig cfg = parse_config(base_config(dir / "out") + "[drive]\nkind = table\npath = d.csv\n",
                                     dir.string());
  const Drive d = build_drive(cfg);
  EXPECT_DOUBLE_EQ(d.phi_e.value(0.002), 1.0);
  EXPECT_DOUBLE_EQ(*d.t0_off, 0.008);
  const SimulateResult r = cmd_simulate(cfg);
  EXPECT_TRUE(r.monotone.has_value());
}
