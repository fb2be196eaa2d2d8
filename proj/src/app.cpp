#include "piezo/app.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "piezo/assembly.hpp"
#include "piezo/timeint.hpp"
#include "piezo/verify.hpp"

namespace piezo {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "snapshot writer assumes little endian");

void ensure_directory(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw Error(ErrorKind::IoError, "cannot create output directory '" + dir + "'");
  }
}

std::ofstream open_output(const std::string& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw Error(ErrorKind::IoError, "cannot write '" + path + "'");
  return out;
}

void write_vector(std::ofstream& out, const Eigen::VectorXd& v) {
  const auto n = static_cast<std::uint64_t>(v.size());
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
}

void write_snapshot(std::ofstream& out, const State& s) {
  out.write(reinterpret_cast<const char*>(&s.t), sizeof(double));
  write_vector(out, s.u);
  write_vector(out, s.v);
  write_vector(out, s.a);
  write_vector(out, s.phi0);
}

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

json nullable(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

AssembledSystem assemble_config(const RunConfig& cfg, const Mesh& mesh) {
  const MaterialSet material = build_material(cfg.material);
  return assemble(mesh, build_dofmap(mesh), material, AssemblyOptions{cfg.threads});
}

std::optional<bool> scan_monotone(const EnergyReport& report, std::optional<double> t0_off,
                                  double slack) {
  if (!t0_off) return std::nullopt;
  const double guard = 1e-12 * std::max(1.0, std::abs(*t0_off));
  std::size_t first = report.rows.size();
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    if (report.rows[i].t >= *t0_off - guard) {
      first = i;
      break;
    }
  }
  if (first == report.rows.size()) return std::nullopt;
  const double allowance = slack * report.rows[first].eta_tilde;
  for (std::size_t i = first + 1; i < report.rows.size(); ++i) {
    if (report.rows[i].eta_tilde - report.rows[i - 1].eta_tilde > allowance) return false;
  }
  return true;
}

json state_norms(const SupNorms& n) {
  return {{"u", n.u}, {"v", n.v}, {"a", n.a}, {"phi0", n.phi0}};
}

// ---------------------------------------------------------------------------
// Studies
// ---------------------------------------------------------------------------

json study_oracle(const RunConfig& cfg, bool& passed) {
  const Mesh mesh = build_mesh(cfg);
  const AssembledSystem system = assemble_config(cfg, mesh);
  const SemiDiscreteSystem sys = semi_discrete(system);
  const Drive drive = build_drive(cfg);
  const Excitation exc = drive_excitation(system, drive);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(system.dofmap.n_u);

  OracleOptions opt;
  opt.rtol = cfg.verify.oracle_rtol;
  const OracleRun ref = dense_oracle(sys, exc, zero, zero, cfg.t_end, opt);
  const RunOptions coarse{cfg.dt, cfg.t_end, HhtParams{cfg.alpha_h}};
  const RunOptions fine{0.5 * cfg.dt, cfg.t_end, HhtParams{cfg.alpha_h}};
  const OracleComparison c1 = compare_with_oracle(sys, exc, zero, zero, coarse, ref);
  const OracleComparison c2 = compare_with_oracle(sys, exc, zero, zero, fine, ref);
  const double ratio = c2.rel_diff > 0.0 ? c1.rel_diff / c2.rel_diff : 0.0;

  const auto hht_residual = [&](const RunOptions& o) {
    EnergyMonitor monitor(system, exc);
    run(sys, exc, zero, zero, o, [&](std::size_t, const State& s) { monitor(s); });
    return check_energy_identity(monitor.report());
  };
  const double res_coarse = hht_residual(coarse);
  const double res_fine = hht_residual(fine);
  const double res_oracle = oracle_identity_residual(ref);

  const bool ok_diff = c1.rel_diff <= cfg.verify.oracle_tolerance;
  const bool ok_ratio = ratio >= 3.0;
  const bool ok_identity = res_oracle <= 1e-8;
  passed = ok_diff && ok_ratio && ok_identity;
  return {
      {"dofs", system.dofmap.n_u + system.dofmap.n_phi},
      {"oracle_steps", ref.accepted_steps},
      {"oracle_rejected", ref.rejected_steps},
      {"rel_diff_dt", c1.rel_diff},
      {"rel_diff_dt_half", c2.rel_diff},
      {"rel_diff_phi_dt", c1.rel_diff_phi},
      {"reduction_ratio", ratio},
      {"observed_order", ratio > 0.0 ? std::log2(ratio) : 0.0},
      {"oracle_identity_residual", res_oracle},
      {"hht_identity_residual_dt", res_coarse},
      {"hht_identity_residual_dt_half", res_fine},
      {"checks", {{"rel_diff", ok_diff}, {"reduction", ok_ratio}, {"identity", ok_identity}}},
  };
}

json study_mms(const RunConfig& cfg, bool& passed) {
  const MaterialSet material = build_material(cfg.material);
  MmsOptions opt;
  opt.kind = cfg.verify.mms_case;
  opt.levels = cfg.verify.levels;
  opt.t_end = cfg.verify.mms_t_end;
  opt.dt_per_h = cfg.verify.mms_dt_per_h;
  opt.hht.alpha_h = cfg.alpha_h;
  opt.enforce = false;
  const MmsReport r = manufactured_convergence(material, opt);
  passed = r.passed;
  json levels = json::array();
  for (const auto& l : r.levels) {
    levels.push_back({{"n", l.n}, {"h", l.h}, {"dt", l.dt}, {"err_u", l.err_u}, {"err_phi", l.err_phi}});
  }
  const char* kind = opt.kind == ManufacturedKind::Constant ? "constant"
                     : opt.kind == ManufacturedKind::Affine ? "affine"
                                                             : "quadratic";
  return {{"case", kind},          {"levels", levels},         {"rate_u", r.rate_u},
          {"rate_phi", r.rate_phi}, {"max_error", r.max_error}, {"min_rate", opt.min_rate},
          {"max_rate", opt.max_rate}};
}

json study_coercivity(const RunConfig& cfg, bool& passed) {
  const Mesh mesh = build_mesh(cfg);
  const MaterialSet material = build_material(cfg.material);
  const AssembledSystem system = assemble(mesh, build_dofmap(mesh), material, AssemblyOptions{cfg.threads});
  const StructuralReport st = check_structure(system);
  json out{{"symmetry",
            {{"M", st.symmetry_M},
             {"K_uu", st.symmetry_K_uu},
             {"C_damp", st.symmetry_C_damp},
             {"K_phiphi", st.symmetry_K_phiphi}}},
           {"null_space_dim", st.null_space_dim},
           {"expected_null_space_dim", st.expected_null_space_dim},
           {"samples", cfg.verify.samples},
           {"seed", cfg.verify.seed}};
  try {
    const CoercivityReport c = check_coercivity(system, material, cfg.verify.samples, cfg.verify.seed);
    out["lambda_mech"] = c.lambda_mech;
    out["lambda_elec"] = c.lambda_elec;
    out["min_quotient_mech"] = c.min_quotient_mech;
    out["min_quotient_elec"] = c.min_quotient_elec;
    passed = st.passed;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::CoercivityViolation) throw;
    out["violation"] = e.what();
    passed = false;
  }
  return out;
}

json study_scaling(const RunConfig& cfg, bool& passed) {
  const Mesh mesh = build_mesh(cfg);
  const AssembledSystem system = assemble_config(cfg, mesh);
  const SemiDiscreteSystem sys = semi_discrete(system);
  const Excitation exc = drive_excitation(system, build_drive(cfg));
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(system.dofmap.n_u);
  const ScalingReport r = check_apriori_bound(sys, exc, zero, zero,
                                              RunOptions{cfg.dt, cfg.t_end, HhtParams{cfg.alpha_h}},
                                              cfg.verify.scale_factors, cfg.verify.tolerance);
  passed = r.passed;
  json entries = json::array();
  for (const auto& e : r.entries) {
    entries.push_back(
        {{"s", e.s}, {"norms", state_norms(e.norms)}, {"max_rel_dev", e.max_rel_dev}, {"c_h", e.c_h}});
  }
  return {{"base", state_norms(r.base)},
          {"input_norm", r.input_norm},
          {"entries", entries},
          {"max_rel_dev", r.max_rel_dev},
          {"tolerance", cfg.verify.tolerance}};
}

json study_lift(const RunConfig& cfg, bool& passed) {
  const Mesh mesh = build_mesh(cfg);
  const MaterialSet material = build_material(cfg.material);
  const Eigen::VectorXd alt = indicator_lift(build_dofmap(mesh));
  const LiftReport r = check_lift_independence(mesh, material, build_drive(cfg), alt,
                                               RunOptions{cfg.dt, cfg.t_end, HhtParams{cfg.alpha_h}},
                                               cfg.verify.tolerance);
  passed = r.passed;
  return {{"alternative", "indicator"},
          {"max_rel_diff_phi", r.max_rel_diff_phi},
          {"max_rel_diff_u", r.max_rel_diff_u},
          {"tolerance", cfg.verify.tolerance}};
}

json study_zero(const RunConfig& cfg, bool& passed) {
  const Mesh mesh = build_mesh(cfg);
  const AssembledSystem system = assemble_config(cfg, mesh);
  const ZeroDataReport r =
      check_zero_data(system, RunOptions{cfg.dt, cfg.t_end, HhtParams{cfg.alpha_h}});
  passed = r.passed;
  return {{"steps", r.steps}, {"max_norm", r.max_norm}, {"tolerance", 1e-12}};
}

}  // namespace

Mesh build_mesh(const RunConfig& cfg) {
  if (cfg.mesh.source == MeshSpec::Source::File) return load_mesh(cfg.mesh.path);
  return generate_rect(cfg.mesh.nx, cfg.mesh.ny, cfg.mesh.lx, cfg.mesh.ly, cfg.mesh.tags);
}

Drive build_drive(const RunConfig& cfg) {
  switch (cfg.drive.kind) {
    case DriveSpec::Kind::Zero: return Drive::zero();
    case DriveSpec::Kind::Trapezoid:
      return Drive::trapezoid(cfg.drive.amplitude, cfg.drive.t_rise, cfg.drive.t_hold, cfg.drive.t_fall);
    case DriveSpec::Kind::Table: return load_drive_table(cfg.drive.path);
  }
  return Drive::zero();
}

int exit_code_for(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::RateFailure:
    case ErrorKind::CoercivityViolation:
      return 1;
    case ErrorKind::SolveFailure:
    case ErrorKind::SingularLift:
    case ErrorKind::NonFiniteState:
    case ErrorKind::StiffnessFailure:
      return 3;
    default:
      return 2;
  }
}

std::string diagnostic_line(ErrorKind kind, std::string_view message) {
  std::string msg(message);
  std::replace(msg.begin(), msg.end(), '\n', ' ');
  std::replace(msg.begin(), msg.end(), '\r', ' ');
  return "piezo: error[" + std::string(error_kind_name(kind)) + "]: " + msg;
}

SimulateResult cmd_simulate(const RunConfig& cfg) {
  const Mesh mesh = build_mesh(cfg);
  const MaterialSet material = build_material(cfg.material);
  const AssembledSystem system = assemble(mesh, build_dofmap(mesh), material, AssemblyOptions{cfg.threads});
  const SemiDiscreteSystem sys = semi_discrete(system);
  const Drive drive = build_drive(cfg);
  const Excitation exc = drive_excitation(system, drive);
  const RunOptions options{cfg.dt, cfg.t_end, HhtParams{cfg.alpha_h}};
  const std::size_t n_steps = step_count(cfg.dt, cfg.t_end);

  ensure_directory(cfg.output_dir);
  const fs::path dir(cfg.output_dir);
  std::ofstream traj = open_output((dir / "trajectory.csv").string());
  std::ofstream drive_csv = open_output((dir / "drive.csv").string());
  std::ofstream snapshots;
  if (cfg.snapshot_stride > 0) {
    snapshots = open_output((dir / "snapshots.bin").string(), std::ios::out | std::ios::binary);
  }
  traj << kTrajectoryCsvHeader << '\n';
  drive_csv << "t,phi_e\n";

  SimulateResult result;
  EnergyMonitor monitor(system, exc);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(system.dofmap.n_u);
  run(sys, exc, zero, zero, options, [&](std::size_t k, const State& s) {
    monitor(s);
    if (k % cfg.stride == 0 || k == n_steps) {
      traj << trajectory_csv_line(monitor.report().rows.back()) << '\n';
      drive_csv << fmt(s.t) << ',' << fmt(drive.phi_e.value(s.t)) << '\n';
    }
    if (cfg.snapshot_stride > 0 && (k % cfg.snapshot_stride == 0 || k == n_steps)) {
      write_snapshot(snapshots, s);
    }
  });
  if (!traj || !drive_csv || (cfg.snapshot_stride > 0 && !snapshots)) {
    throw Error(ErrorKind::IoError, "failed while writing outputs to '" + cfg.output_dir + "'");
  }

  result.energy = monitor.report();
  const auto& rows = result.energy.rows;
  result.max_identity_residual = check_energy_identity(result.energy);
  result.monotone = scan_monotone(result.energy, drive.t0_off, cfg.energy.slack);
  double eta_max = 0.0;
  for (const auto& r : rows) eta_max = std::max(eta_max, r.eta_tilde);

  json summary{
      {"monotone", result.monotone ? json(*result.monotone) : json(nullptr)},
      {"max_identity_residual", result.max_identity_residual},
      {"eta_tilde_final", rows.back().eta_tilde},
      {"eta_final", rows.back().eta},
      {"eta_tilde_max", eta_max},
      {"norm_Bv_L2_max", std::max_element(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
                           return a.norm_Bv_L2 < b.norm_Bv_L2;
                         })->norm_Bv_L2},
      {"t0_off", nullable(drive.t0_off)},
      {"steps", n_steps},
      {"dt", cfg.dt},
      {"t_end", cfg.t_end},
      {"alpha_h", cfg.alpha_h},
      {"components", nullptr},
  };
  if (drive.t0_off && material.alpha > 0.0 && material.beta > 0.0 && *drive.t0_off <= cfg.t_end) {
    const DecayVerdict v = check_monotone_decay(result.energy, drive.t0_off, cfg.energy.slack,
                                                material.alpha, material.beta, cfg.energy.decay_fraction);
    result.decay = v;
    summary["components"] = {{"kinetic_ratio", v.components.kinetic_ratio},
                             {"strain_ratio", v.components.strain_ratio},
                             {"electric_ratio", v.components.electric_ratio},
                             {"kinetic_decayed", v.components.kinetic},
                             {"strain_decayed", v.components.strain},
                             {"electric_decayed", v.components.electric}};
  }
  if (cfg.energy.check_decay) {
    if (!result.decay) {
      const DecayVerdict v = check_monotone_decay(result.energy, drive.t0_off, cfg.energy.slack,
                                                  material.alpha, material.beta,
                                                  cfg.energy.decay_fraction);
      result.decay = v;
    }
    const DecayVerdict& v = *result.decay;
    const bool small = v.limit <= cfg.energy.decay_fraction * v.eta_tilde_max;
    result.passed = v.monotone && small;
    summary["decay_check"] = {{"passed", result.passed},
                              {"monotone", v.monotone},
                              {"final_over_max", v.eta_tilde_max > 0.0 ? v.limit / v.eta_tilde_max : 0.0},
                              {"fraction", cfg.energy.decay_fraction},
                              {"max_increase", v.max_increase},
                              {"slack", cfg.energy.slack}};
  }
  result.summary_json = summary.dump(2);
  std::ofstream js = open_output((dir / "energy_summary.json").string());
  js << result.summary_json << '\n';
  if (!js) throw Error(ErrorKind::IoError, "failed to write energy_summary.json");
  return result;
}

VerifyResult cmd_verify(const RunConfig& cfg, std::string_view study) {
  bool passed = false;
  json metrics;
  if (study == "oracle") metrics = study_oracle(cfg, passed);
  else if (study == "mms") metrics = study_mms(cfg, passed);
  else if (study == "coercivity") metrics = study_coercivity(cfg, passed);
  else if (study == "scaling") metrics = study_scaling(cfg, passed);
  else if (study == "lift") metrics = study_lift(cfg, passed);
  else if (study == "zero") metrics = study_zero(cfg, passed);
  else {
    throw Error(ErrorKind::ConfigError,
                "unknown study '" + std::string(study) +
                    "' (expected oracle, mms, coercivity, scaling, lift or zero)");
  }
  VerifyResult r;
  r.passed = passed;
  r.json = json{{"study", study}, {"passed", passed}, {"metrics", metrics}}.dump(2);
  ensure_directory(cfg.output_dir);
  std::ofstream out =
      open_output((fs::path(cfg.output_dir) / ("verify_" + std::string(study) + ".json")).string());
  out << r.json << '\n';
  return r;
}

std::string cmd_mesh_gen(const RunConfig& cfg) {
  const Mesh mesh = build_mesh(cfg);
  ensure_directory(cfg.output_dir);
  const std::string path = (fs::path(cfg.output_dir) / "mesh.txt").string();
  save_mesh(mesh, path);
  return path;
}

std::string cmd_dump_system(const RunConfig& cfg) {
  const Mesh mesh = build_mesh(cfg);
  const AssembledSystem system = assemble_config(cfg, mesh);
  const std::string dir = (fs::path(cfg.output_dir) / "system").string();
  ensure_directory(dir);
  dump_system(system, dir);
  return dir;
}

}  // namespace piezo
