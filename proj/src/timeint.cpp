#include "piezo/timeint.hpp"

#include <cmath>
#include <sstream>

#include "piezo/error.hpp"

namespace piezo {

namespace {

void require_size(const Eigen::VectorXd& v, int n, const char* what) {
  if (v.size() != n) {
    std::ostringstream msg;
    msg << what << " has " << v.size() << " entries, expected " << n;
    throw Error(ErrorKind::DimensionMismatch, msg.str());
  }
}

SparseMatrix block_matrix(const SparseMatrix& a, const SparseMatrix& b, const SparseMatrix& c) {
  // [[a, b], [b^T, -c]]
  const Eigen::Index n = a.rows();
  const Eigen::Index m = c.rows();
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(a.nonZeros() + 2 * b.nonZeros() + c.nonZeros()));
  for (Eigen::Index r = 0; r < a.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(a, r); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
  }
  for (Eigen::Index r = 0; r < b.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(b, r); it; ++it) {
      t.emplace_back(it.row(), n + it.col(), it.value());
      t.emplace_back(n + it.col(), it.row(), it.value());
    }
  }
  for (Eigen::Index r = 0; r < c.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(c, r); it; ++it) t.emplace_back(n + it.row(), n + it.col(), -it.value());
  }
  SparseMatrix out(n + m, n + m);
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

bool finite_state(const State& s) {
  return s.u.allFinite() && s.v.allFinite() && s.a.allFinite() && s.phi0.allFinite();
}

}  // namespace

Eigen::VectorXd SemiDiscreteSystem::restrict_phi(const Eigen::VectorXd& full) const {
  Eigen::VectorXd out(n_free());
  for (int i = 0; i < n_free(); ++i) out(i) = full(free_phi[i]);
  return out;
}

Eigen::VectorXd SemiDiscreteSystem::expand_phi(const Eigen::VectorXd& free) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n_phi);
  for (int i = 0; i < n_free(); ++i) out(free_phi[i]) = free(i);
  return out;
}

SemiDiscreteSystem semi_discrete(const AssembledSystem& system) {
  const DofMap& d = system.dofmap;
  std::vector<int> all_u(static_cast<std::size_t>(d.n_u));
  for (int i = 0; i < d.n_u; ++i) all_u[i] = i;
  SemiDiscreteSystem s;
  s.M = system.M;
  s.C = system.C_damp;
  s.K = system.K_uu;
  s.coupling = select(system.K_uphi, all_u, d.free_phi);
  s.dielectric = select(system.K_phiphi, d.free_phi, d.free_phi);
  s.free_phi = d.free_phi;
  s.n_phi = d.n_phi;
  return s;
}

Eigen::MatrixXd condensed_stiffness(const SemiDiscreteSystem& sys) {
  Eigen::MatrixXd k = Eigen::MatrixXd(sys.K);
  if (sys.n_free() == 0) return k;
  const Eigen::MatrixXd ct = Eigen::MatrixXd(sys.coupling.transpose());
  const Eigen::MatrixXd x = SpdSolver(sys.dielectric).solve(ct);
  k += Eigen::MatrixXd(sys.coupling) * x;
  return k;
}

Excitation drive_excitation(const AssembledSystem& system, const Drive& drive) {
  Excitation e;
  e.n_u = system.dofmap.n_u;
  e.n_phi = system.dofmap.n_phi;
  e.terms.push_back({drive.phi_e, system.f_unit, system.g_unit});
  e.t0_off = drive.t0_off;
  return e;
}

PotentialSolver::PotentialSolver(const SemiDiscreteSystem& sys) : sys_(&sys), solver_(sys.dielectric) {}

Eigen::VectorXd PotentialSolver::solve(const Eigen::VectorXd& u, const Eigen::VectorXd& g_full) const {
  require_size(u, sys_->n_u(), "displacement");
  require_size(g_full, sys_->n_phi, "charge load");
  if (sys_->n_free() == 0) return Eigen::VectorXd::Zero(sys_->n_phi);
  const Eigen::VectorXd rhs = sys_->coupling.transpose() * u - sys_->restrict_phi(g_full);
  return sys_->expand_phi(solver_.solve(rhs));
}

Eigen::VectorXd solve_potential(const SemiDiscreteSystem& sys, const Eigen::VectorXd& u, double t,
                                const Excitation& excitation) {
  return PotentialSolver(sys).solve(u, excitation.g(t));
}

namespace {

State initial_state(const SemiDiscreteSystem& sys, const PotentialSolver& potential,
                    const Excitation& excitation, const Eigen::VectorXd& u0,
                    const Eigen::VectorXd& u1) {
  require_size(u0, sys.n_u(), "u0");
  require_size(u1, sys.n_u(), "u1");
  State s;
  s.t = 0.0;
  s.u = u0;
  s.v = u1;
  s.phi0 = potential.solve(u0, excitation.g(0.0));
  const Eigen::VectorXd rhs = excitation.f(0.0) - sys.C * u1 - sys.K * u0 -
                              sys.coupling * sys.restrict_phi(s.phi0);
  s.a = SpdSolver(sys.M).solve(rhs);
  return s;
}

}  // namespace

State initialize(const SemiDiscreteSystem& sys, const Excitation& excitation,
                 const Eigen::VectorXd& u0, const Eigen::VectorXd& u1) {
  return initial_state(sys, PotentialSolver(sys), excitation, u0, u1);
}

HhtIntegrator::HhtIntegrator(const SemiDiscreteSystem& sys, const Excitation& excitation, double dt,
                             HhtParams params)
    : sys_(&sys), excitation_(&excitation), dt_(dt), params_(params), potential_(sys) {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw Error(ErrorKind::InvalidScalar, "time step must be positive and finite");
  }
  if (!(params.alpha_h >= -1.0 / 3.0 - 1e-15 && params.alpha_h <= 0.0)) {
    throw Error(ErrorKind::InvalidScalar, "HHT alpha must lie in [-1/3, 0]");
  }
  if (excitation.n_u != sys.n_u() || excitation.n_phi != sys.n_phi) {
    throw Error(ErrorKind::DimensionMismatch, "excitation does not match the system size");
  }
  // Unknowns (a_{n+1}, phi_f / (beta dt^2)) share the symmetric matrix
  // [[K + M / ((1 + alpha) beta dt^2) + gamma / (beta dt) C, coupling],
  //  [coupling^T, -dielectric]].
  const double beta = params_.newmark_beta();
  const double gamma = params_.newmark_gamma();
  const double one_plus = 1.0 + params_.alpha_h;
  const SparseMatrix s = sys.K + (1.0 / (one_plus * beta * dt * dt)) * sys.M +
                         (gamma / (beta * dt)) * sys.C;
  effective_ = QuasiDefiniteSolver(block_matrix(s, sys.coupling, sys.dielectric));
}

State HhtIntegrator::initialize(const Eigen::VectorXd& u0, const Eigen::VectorXd& u1) const {
  return initial_state(*sys_, potential_, *excitation_, u0, u1);
}

State HhtIntegrator::step(const State& s) const {
  const SemiDiscreteSystem& sys = *sys_;
  const double dt = dt_;
  const double alpha = params_.alpha_h;
  const double beta = params_.newmark_beta();
  const double gamma = params_.newmark_gamma();
  const double one_plus = 1.0 + alpha;
  const double t_next = s.t + dt;
  const double t_shift = t_next + alpha * dt;
  const int n_u = sys.n_u();

  const Eigen::VectorXd u_pred = s.u + dt * s.v + (dt * dt * (0.5 - beta)) * s.a;
  const Eigen::VectorXd v_pred = s.v + (dt * (1.0 - gamma)) * s.a;
  const Eigen::VectorXd phi_f = sys.restrict_phi(s.phi0);

  Eigen::VectorXd rhs_u = excitation_->f(t_shift) - one_plus * (sys.C * v_pred + sys.K * u_pred);
  if (alpha != 0.0) rhs_u += alpha * (sys.C * s.v + sys.K * s.u + sys.coupling * phi_f);
  rhs_u /= one_plus * beta * dt * dt;

  const Eigen::VectorXd rhs_phi =
      (sys.restrict_phi(excitation_->g(t_next)) - sys.coupling.transpose() * u_pred) /
      (beta * dt * dt);

  Eigen::VectorXd rhs(n_u + sys.n_free());
  rhs << rhs_u, rhs_phi;
  const Eigen::VectorXd sol = effective_.solve(rhs);

  State out;
  out.t = t_next;
  out.a = sol.head(n_u);
  out.u = u_pred + (beta * dt * dt) * out.a;
  out.v = v_pred + (gamma * dt) * out.a;
  out.phi0 = potential_.solve(out.u, excitation_->g(t_next));
  if (!finite_state(out)) {
    std::ostringstream msg;
    msg << "non-finite state at t = " << t_next << " (dt = " << dt << ")";
    throw Error(ErrorKind::NonFiniteState, msg.str());
  }
  return out;
}

std::size_t step_count(double dt, double t_end) {
  if (!(t_end >= 0.0) || !std::isfinite(t_end)) {
    throw Error(ErrorKind::InvalidScalar, "t_end must be finite and nonnegative");
  }
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw Error(ErrorKind::InvalidScalar, "dt must be positive and finite");
  }
  if (t_end == 0.0) return 0;
  if (!(dt > 1e-15 * t_end)) throw Error(ErrorKind::InvalidScalar, "dt is degenerate relative to t_end");
  const double ratio = t_end / dt;
  const double n = std::round(ratio);
  if (n < 1.0 || std::abs(ratio - n) > 1e-9 * std::max(1.0, n)) {
    std::ostringstream msg;
    msg << "dt = " << dt << " does not divide t_end = " << t_end;
    throw Error(ErrorKind::PreconditionViolated, msg.str());
  }
  return static_cast<std::size_t>(n);
}

State run(const SemiDiscreteSystem& sys, const Excitation& excitation, const Eigen::VectorXd& u0,
          const Eigen::VectorXd& u1, const RunOptions& options, const StepObserver& observer) {
  const std::size_t n_steps = step_count(options.dt, options.t_end);
  const HhtIntegrator integrator(sys, excitation, options.dt, options.hht);
  State state = integrator.initialize(u0, u1);
  if (observer) observer(0, state);
  for (std::size_t k = 1; k <= n_steps; ++k) {
    try {
      State next = integrator.step(state);
      next.t = static_cast<double>(k) * options.dt;
      state = std::move(next);
    } catch (const Error& e) {
      std::ostringstream msg;
      msg << "step " << k << " (dt = " << options.dt << "): " << e.what();
      throw Error(e.kind(), msg.str());
    }
    if (observer) observer(k, state);
  }
  return state;
}

}  // namespace piezo
