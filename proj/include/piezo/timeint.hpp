#pragma once

#include <cstddef>
#include <functional>

#include <Eigen/Dense>

#include "piezo/assembly.hpp"
#include "piezo/drive.hpp"
#include "piezo/linalg.hpp"

namespace piezo {

/// Semi-discrete equations restricted to the free potential DOFs:
///
///   M a + C v + K u + coupling * phi_f        = f(t)
///   coupling^T u - dielectric * phi_f          = g_f(t)
///
/// Full potential vectors have n_phi entries and are zero off free_phi.
struct SemiDiscreteSystem {
  SparseMatrix M;
  SparseMatrix C;
  SparseMatrix K;
  SparseMatrix coupling;    // n_u x n_free
  SparseMatrix dielectric;  // n_free x n_free
  std::vector<int> free_phi;
  int n_phi = 0;

  [[nodiscard]] int n_u() const noexcept { return static_cast<int>(M.rows()); }
  [[nodiscard]] int n_free() const noexcept { return static_cast<int>(free_phi.size()); }

  [[nodiscard]] Eigen::VectorXd restrict_phi(const Eigen::VectorXd& full) const;
  [[nodiscard]] Eigen::VectorXd expand_phi(const Eigen::VectorXd& free) const;
};

SemiDiscreteSystem semi_discrete(const AssembledSystem& system);

/// Dense K + coupling * dielectric^{-1} * coupling^T (stiffness with the
/// potential eliminated). Intended for small systems.
Eigen::MatrixXd condensed_stiffness(const SemiDiscreteSystem& sys);

/// Excitation for an electrode drive: phi_e(t) * (f_unit, g_unit).
Excitation drive_excitation(const AssembledSystem& system, const Drive& drive);

struct State {
  double t = 0.0;
  Eigen::VectorXd u;
  Eigen::VectorXd v;
  Eigen::VectorXd a;
  Eigen::VectorXd phi0;  // n_phi entries, zero on constrained DOFs
};

/// Factorized elliptic solve for the homogenized potential given u.
class PotentialSolver {
 public:
  explicit PotentialSolver(const SemiDiscreteSystem& sys);

  /// dielectric * phi_f = coupling^T u - g_f; returns the full-length vector.
  [[nodiscard]] Eigen::VectorXd solve(const Eigen::VectorXd& u, const Eigen::VectorXd& g_full) const;

 private:
  const SemiDiscreteSystem* sys_;
  SpdSolver solver_;
};

Eigen::VectorXd solve_potential(const SemiDiscreteSystem& sys, const Eigen::VectorXd& u, double t,
                                const Excitation& excitation);

/// Consistent initial state: phi0 from the elliptic equation and the
/// acceleration from the momentum equation at t = 0.
State initialize(const SemiDiscreteSystem& sys, const Excitation& excitation,
                 const Eigen::VectorXd& u0, const Eigen::VectorXd& u1);

/// HHT-alpha with alpha_h in [-1/3, 0], beta = (1 - alpha_h)^2 / 4,
/// gamma = 1/2 - alpha_h.
struct HhtParams {
  double alpha_h = -0.05;

  [[nodiscard]] double newmark_beta() const noexcept { return 0.25 * (1.0 - alpha_h) * (1.0 - alpha_h); }
  [[nodiscard]] double newmark_gamma() const noexcept { return 0.5 - alpha_h; }
};

/// Fixed-step HHT-alpha integrator. Internal, damping and coupling forces are
/// blended between the old and new step; the load f is evaluated at the
/// shifted time t_{n+1} + alpha_h dt; the electrostatic equation holds at
/// t_{n+1}. Both factorizations are computed once at construction.
class HhtIntegrator {
 public:
  HhtIntegrator(const SemiDiscreteSystem& sys, const Excitation& excitation, double dt,
                HhtParams params = {});

  [[nodiscard]] State initialize(const Eigen::VectorXd& u0, const Eigen::VectorXd& u1) const;

  /// Advances one step. Throws NonFiniteState if the new state overflows.
  [[nodiscard]] State step(const State& s) const;

  [[nodiscard]] double dt() const noexcept { return dt_; }
  [[nodiscard]] const HhtParams& params() const noexcept { return params_; }

 private:
  const SemiDiscreteSystem* sys_;
  const Excitation* excitation_;
  double dt_;
  HhtParams params_;
  PotentialSolver potential_;
  QuasiDefiniteSolver effective_;
};

struct RunOptions {
  double dt = 0.0;
  double t_end = 0.0;
  HhtParams hht;
};

using StepObserver = std::function<void(std::size_t step, const State& state)>;

/// Number of steps for (dt, t_end); validates the dt guards.
std::size_t step_count(double dt, double t_end);

/// Time loop: calls observer for the initial state (step 0) and after every
/// step. Errors are rethrown with the step index and dt attached. Returns the
/// final state.
State run(const SemiDiscreteSystem& sys, const Excitation& excitation, const Eigen::VectorXd& u0,
          const Eigen::VectorXd& u1, const RunOptions& options, const StepObserver& observer = {});

}  // namespace piezo
