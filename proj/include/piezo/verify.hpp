#pragma once

#include <cstdint>
#include <vector>

#include "piezo/assembly.hpp"
#include "piezo/drive.hpp"
#include "piezo/energy.hpp"
#include "piezo/timeint.hpp"

namespace piezo {

// ---------------------------------------------------------------------------
// Dense reference solver
// ---------------------------------------------------------------------------

struct OracleOptions {
  double rtol = 1e-11;
  /// Absolute floor relative to the largest magnitude seen in each block
  /// (u, v, energy integrals).
  double atol = 1e-13;
  std::size_t max_dofs = 64;
  std::size_t max_steps = 5'000'000;
  /// Output times in (0, t_end]; t = 0 and t_end are always sampled.
  std::vector<double> sample_times;
};

struct OracleSample {
  double t = 0.0;
  Eigen::VectorXd u;
  Eigen::VectorXd v;
  Eigen::VectorXd phi0;
  double eta_tilde = 0.0;
  double gamma = 0.0;
  double work = 0.0;
  double F_l = 0.0;
  double F_r = 0.0;
};

struct OracleRun {
  std::vector<OracleSample> samples;
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;
  double rtol = 0.0;

  [[nodiscard]] const OracleSample& terminal() const { return samples.back(); }
};

/// Integrates the potential-eliminated first-order system
///   u' = v,  M v' = f - C v - K u - coupling phi_f(u, t)
/// with an adaptive Dormand-Prince 5(4) pair, splitting the interval at load
/// kinks. The damping and work integrals of the energy balance are carried as
/// extra ODE components. Throws TooLarge (n_u + n_phi > max_dofs) or
/// StiffnessFailure (step size underflow).
OracleRun dense_oracle(const SemiDiscreteSystem& sys, const Excitation& excitation,
                       const Eigen::VectorXd& u0, const Eigen::VectorXd& u1, double t_end,
                       const OracleOptions& options = {});

/// max_t |F_l - F_r| / max(1, max_t F_r) over the oracle samples.
double oracle_identity_residual(const OracleRun& run);

struct OracleComparison {
  double rel_diff = 0.0;      // |(u, v)_hht - (u, v)_ref| / |(u, v)_ref| at t_end
  double rel_diff_phi = 0.0;  // same for phi0
};

OracleComparison compare_with_oracle(const SemiDiscreteSystem& sys, const Excitation& excitation,
                                     const Eigen::VectorXd& u0, const Eigen::VectorXd& u1,
                                     const RunOptions& options, const OracleRun& reference);

// ---------------------------------------------------------------------------
// Manufactured solutions
// ---------------------------------------------------------------------------

enum class ManufacturedKind { Constant, Affine, Quadratic };

struct MmsOptions {
  ManufacturedKind kind = ManufacturedKind::Quadratic;
  std::vector<int> levels{4, 8, 16};  // cells per side of the unit square
  double t_end = 0.5;
  double dt_per_h = 0.25;             // dt = dt_per_h * h
  HhtParams hht{};
  double min_rate = 1.7;
  double max_rate = 2.3;
  bool enforce = true;                // throw RateFailure below min_rate
};

struct MmsLevel {
  int n = 0;
  double h = 0.0;
  double dt = 0.0;
  double err_u = 0.0;
  double err_phi = 0.0;
};

struct MmsReport {
  std::vector<MmsLevel> levels;
  double rate_u = 0.0;   // least-squares slope of log(err) against log(h)
  double rate_phi = 0.0;
  double max_error = 0.0;
  bool passed = false;
};

/// Runs the solver on the unit square (ground at z = 0, electrode at z = 1)
/// against a closed-form displacement/potential pair, with the matching
/// volume and boundary sources, and reports L2 errors at t_end.
MmsReport manufactured_convergence(const MaterialSet& material, const MmsOptions& options = {});

// ---------------------------------------------------------------------------
// Linearity / a-priori bound
// ---------------------------------------------------------------------------

struct SupNorms {
  double u = 0.0;
  double v = 0.0;
  double a = 0.0;
  double phi0 = 0.0;
};

SupNorms trajectory_sup_norms(const SemiDiscreteSystem& sys, const Excitation& excitation,
                              const Eigen::VectorXd& u0, const Eigen::VectorXd& u1,
                              const RunOptions& options);

struct ScalingEntry {
  double s = 0.0;
  SupNorms norms;
  double max_rel_dev = 0.0;  // max over norms of |N_s - s N_1| / (s N_1)
  double c_h = 0.0;          // (sup u + sup v + sup phi0) / input norm
};

struct ScalingReport {
  SupNorms base;
  double input_norm = 0.0;
  std::vector<ScalingEntry> entries;
  double max_rel_dev = 0.0;
  bool passed = false;
};

/// Runs the trajectory with inputs (s u0, s u1, s phi_e) for each s and
/// checks that every sup-norm scales by s within tol (absolute 1e-12 at s = 0).
ScalingReport check_apriori_bound(const SemiDiscreteSystem& sys, const Excitation& excitation,
                                  const Eigen::VectorXd& u0, const Eigen::VectorXd& u1,
                                  const RunOptions& options, const std::vector<double>& scale_factors,
                                  double tol = 1e-10);

// ---------------------------------------------------------------------------
// Coercivity, lift independence, uniqueness
// ---------------------------------------------------------------------------

struct CoercivityReport {
  double lambda_mech = 0.0;
  double lambda_elec = 0.0;
  double min_quotient_mech = 0.0;  // min x^T K_uu x / x^T L_B x
  double min_quotient_elec = 0.0;  // min y^T K_phiphi y / y^T L y
  int samples = 0;
};

/// Random-vector Rayleigh quotient checks (fixed seed). Throws
/// CoercivityViolation when x^T K_uu x < lambda_mech x^T L_B x beyond round-off
/// (or the electric counterpart on free potential DOFs).
CoercivityReport check_coercivity(const AssembledSystem& system, const MaterialSet& material,
                                  int n_samples, std::uint64_t seed = 42);

struct LiftReport {
  double max_rel_diff_phi = 0.0;
  double max_rel_diff_u = 0.0;
  bool passed = false;
};

/// Runs the same problem with the harmonic lift and with alternative_lift and
/// compares the reconstructed potentials phi0 + phi_e chi and displacements at
/// every step, relative to their largest norm over the run.
LiftReport check_lift_independence(const Mesh& mesh, const MaterialSet& material, const Drive& drive,
                                   const Eigen::VectorXd& alternative_lift,
                                   const RunOptions& options, double tol = 1e-10);

struct StructuralReport {
  double symmetry_M = 0.0;
  double symmetry_K_uu = 0.0;
  double symmetry_C_damp = 0.0;
  double symmetry_K_phiphi = 0.0;
  double max_symmetry_defect = 0.0;
  int null_space_dim = -1;  // -1 when the system is too large for a dense eigensolve
  int expected_null_space_dim = 0;
  bool passed = false;
};

/// Relative symmetry defects of the assembled blocks and the number of rigid
/// modes of K_uu (eigenvalues below 1e-10 of the largest).
StructuralReport check_structure(const AssembledSystem& system, int max_dense_dofs = 4000);

struct ZeroDataReport {
  std::size_t steps = 0;
  double max_norm = 0.0;  // largest sampled norm of u, v, a, phi0
  bool passed = false;
};

ZeroDataReport check_zero_data(const AssembledSystem& system, const RunOptions& options,
                               double tol = 1e-12);

}  // namespace piezo
