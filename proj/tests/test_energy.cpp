#include <algorithm>
#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "piezo/energy.hpp"
#include "piezo/error.hpp"
#include "test_support.hpp"

using namespace piezo;

namespace {

SparseMatrix diag(std::initializer_list<double> d) {
  SparseMatrix m(static_cast<Eigen::Index>(d.size()), static_cast<Eigen::Index>(d.size()));
  Eigen::Index i = 0;
  for (double x : d) {
    m.insert(i, i) = x;
    ++i;
  }
  m.makeCompressed();
  return m;
}

// One displacement DOF and one potential DOF with unit reference operators.
AssembledSystem toy_system(double m, double k, double c, double kp) {
  AssembledSystem s;
  s.dim = 2;
  s.rho = 1.0;
  s.M = diag({m});
  s.K_uu = diag({k});
  s.C_damp = diag({c});
  s.K_phiphi = diag({kp});
  s.K_uphi = SparseMatrix(1, 1);
  s.L_B = diag({1.0});
  s.L = diag({1.0});
  return s;
}

State state_at(double t, double u, double v, double phi) {
  State s;
  s.t = t;
  s.u = Eigen::VectorXd::Constant(1, u);
  s.v = Eigen::VectorXd::Constant(1, v);
  s.a = Eigen::VectorXd::Zero(1);
  s.phi0 = Eigen::VectorXd::Constant(1, phi);
  return s;
}

Excitation hat_load(bool mechanical) {
  Excitation e;
  e.n_u = 1;
  e.n_phi = 1;
  LoadTerm term;
  term.scale = TimeFunction::piecewise_linear({0.0, 1.0, 2.0}, {0.0, 1.0, 0.0});
  if (mechanical) {
    term.f = Eigen::VectorXd::Ones(1);
  } else {
    term.g = Eigen::VectorXd::Ones(1);
  }
  e.terms.push_back(term);
  return e;
}

EnergyRow row_with(double t, double eta_tilde) {
  EnergyRow r;
  r.t = t;
  r.eta_tilde = eta_tilde;
  r.kinetic = eta_tilde;
  return r;
}

double identity_residual(double dt) {
  const Mesh mesh = generate_rect(2, 2, 1.0, 1.0);
  const DofMap dofs = build_dofmap(mesh);
  const AssembledSystem asys = assemble(mesh, dofs, build_material(test::unit_params()), {1});
  const SemiDiscreteSystem sys = semi_discrete(asys);
  const Excitation exc = drive_excitation(asys, Drive::trapezoid(10.0, 0.25, 0.25, 0.25));
  EnergyMonitor mon(asys, exc);
  const Eigen::VectorXd z = Eigen::VectorXd::Zero(sys.n_u());
  run(sys, exc, z, z, RunOptions{dt, 1.0, {}}, [&](std::size_t, const State& s) { mon(s); });
  return check_energy_identity(mon.report());
}

}  // namespace

TEST(Energy, QuadraticFormsAndNorms) {
  const AssembledSystem s = toy_system(2.0, 3.0, 0.0, 5.0);
  EnergyAccumulator acc;
  const EnergyRow r = sample_energies(s, state_at(0.0, 2.0, 1.0, 3.0), Excitation{1, 1, {}, {}}, acc);
  EXPECT_DOUBLE_EQ(r.kinetic, 2.0);
  EXPECT_DOUBLE_EQ(r.strain, 12.0);
  EXPECT_DOUBLE_EQ(r.electric, 45.0);
  EXPECT_DOUBLE_EQ(r.eta_tilde, 59.0);
  // |u|^2 uses M / rho; |Bu| and |grad phi| use the unit operators.
  EXPECT_DOUBLE_EQ(r.norm_u_L2, std::sqrt(8.0));
  EXPECT_DOUBLE_EQ(r.norm_v_L2, std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(r.norm_Bu_L2, 2.0);
  EXPECT_DOUBLE_EQ(r.norm_phi_H1, 3.0);
  EXPECT_DOUBLE_EQ(r.eta, 2.0 + 8.0 + 4.0 + 9.0);
  EXPECT_DOUBLE_EQ(r.F_l, r.F_r);
}

TEST(Energy, WorkIntegralIsSplitAtKinks) {
  // v = 1 throughout and f = hat(t): 2 int_0^2 hat = 2. A plain trapezoid over
  // [0, 2] would see hat(0) = hat(2) = 0 and return 0.
  const AssembledSystem s = toy_system(1.0, 0.0, 0.0, 1.0);
  const Excitation e = hat_load(true);
  EnergyAccumulator acc;
  sample_energies(s, state_at(0.0, 0.0, 1.0, 0.0), e, acc);
  const EnergyRow r = sample_energies(s, state_at(2.0, 0.0, 1.0, 0.0), e, acc);
  EXPECT_DOUBLE_EQ(r.work, 2.0);
  EXPECT_DOUBLE_EQ(r.F_r, 1.0 + 2.0);
}

TEST(Energy, ChargeWorkUsesOneSidedRates) {
  // phi0 = t, g = hat(t): -2 int_0^2 hat'(t) t dt = -2 (1/2 - 3/2) = 2.
  const AssembledSystem s = toy_system(1.0, 0.0, 0.0, 0.0);
  const Excitation e = hat_load(false);
  EnergyAccumulator acc;
  sample_energies(s, state_at(0.0, 0.0, 0.0, 0.0), e, acc);
  const EnergyRow r = sample_energies(s, state_at(2.0, 0.0, 0.0, 2.0), e, acc);
  EXPECT_DOUBLE_EQ(r.work, 2.0);
}

TEST(Energy, DampingIntegralTrapezoid) {
  const AssembledSystem s = toy_system(1.0, 0.0, 0.5, 0.0);
  EnergyAccumulator acc;
  const Excitation none{1, 1, {}, {}};
  sample_energies(s, state_at(0.0, 0.0, 1.0, 0.0), none, acc);
  const EnergyRow r = sample_energies(s, state_at(0.5, 0.0, 3.0, 0.0), none, acc);
  // 2 c v^2 sampled at 1 and 9, trapezoid over 0.5.
  EXPECT_DOUBLE_EQ(r.gamma, 0.25 * (1.0 + 9.0));
}

TEST(Energy, UndampedTrapezoidalRunConservesEnergy) {
  AssembledSystem a = toy_system(1.0, 4.0, 0.0, 1.0);
  SemiDiscreteSystem sys;
  sys.M = a.M;
  sys.C = a.C_damp;
  sys.K = a.K_uu;
  sys.coupling = SparseMatrix(1, 0);
  sys.dielectric = SparseMatrix(0, 0);
  sys.free_phi = {};
  sys.n_phi = 1;
  const Excitation none{1, 1, {}, {}};
  EnergyMonitor mon(a, none);
  run(sys, none, Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1), RunOptions{0.01, 5.0, {0.0}},
      [&](std::size_t, const State& st) { mon(st); });
  for (const auto& r : mon.report().rows) ASSERT_NEAR(r.eta_tilde, 4.0, 1e-12);
  EXPECT_LE(check_energy_identity(mon.report()), 1e-14);
}

TEST(Energy, IdentityResidualConvergesWithStep) {
  const double r1 = identity_residual(1e-3);
  const double r2 = identity_residual(5e-4);
  EXPECT_LT(r1, 1e-4);
  EXPECT_GT(r1 / r2, 3.0);
}

TEST(Energy, NormsOnMesh) {
  const double lx = 2.0, ly = 0.5;
  const Mesh mesh = generate_rect(3, 2, lx, ly);
  const DofMap dofs = build_dofmap(mesh);
  const AssembledSystem asys = assemble(mesh, dofs, build_material(pzt5a_params()), {1});
  State st;
  st.u = Eigen::VectorXd::Zero(dofs.n_u);
  for (int i = 0; i < dofs.n_u; i += 2) {
    st.u(i) = 0.3;
    st.u(i + 1) = -0.4;
  }
  st.v = st.u;
  st.a = st.u;
  st.phi0 = Eigen::VectorXd::Zero(dofs.n_phi);
  for (std::size_t i = 0; i < mesh.node_count(); ++i) st.phi0(i) = 2.0 * mesh.nodes()[i][0];
  EnergyAccumulator acc;
  const EnergyRow r = sample_energies(asys, st, Excitation{dofs.n_u, dofs.n_phi, {}, {}}, acc);
  EXPECT_NEAR(r.norm_u_L2, 0.5 * std::sqrt(lx * ly), 1e-14);
  EXPECT_NEAR(r.norm_Bu_L2, 0.0, 1e-6);
  EXPECT_NEAR(r.norm_phi_H1, 2.0 * std::sqrt(lx * ly), 1e-13);
}

TEST(Energy, IdentityCheckNormalization) {
  EnergyReport rep;
  EnergyRow a;
  a.F_l = 0.5;
  a.F_r = 0.25;
  rep.rows.push_back(a);
  EXPECT_DOUBLE_EQ(check_energy_identity(rep), 0.25);
  EnergyRow b;
  b.F_l = 10.0;
  b.F_r = 10.5;
  rep.rows.push_back(b);
  EXPECT_DOUBLE_EQ(check_energy_identity(rep), 0.5 / 10.5);
}

TEST(Energy, MonotoneDecayVerdict) {
  EnergyReport rep;
  for (double e : {0.0, 5.0, 10.0, 8.0, 6.0, 6.0, 3.0}) rep.rows.push_back(row_with(rep.rows.size(), e));
  const DecayVerdict ok = check_monotone_decay(rep, 2.0, 1e-6, 1.0, 1.0);
  EXPECT_TRUE(ok.monotone);
  EXPECT_DOUBLE_EQ(ok.eta_tilde_off, 10.0);
  EXPECT_DOUBLE_EQ(ok.eta_tilde_max, 10.0);
  EXPECT_DOUBLE_EQ(ok.limit, 3.0);
  EXPECT_DOUBLE_EQ(ok.components.kinetic_ratio, 0.3);
  EXPECT_FALSE(ok.components.kinetic);

  rep.rows[5].eta_tilde = 6.5;  // increase of 0.5 after switch-off
  const DecayVerdict bad = check_monotone_decay(rep, 2.0, 1e-6, 1.0, 1.0);
  EXPECT_FALSE(bad.monotone);
  EXPECT_DOUBLE_EQ(bad.max_increase, 0.5);
  // Slack is relative to eta_tilde at switch-off.
  EXPECT_TRUE(check_monotone_decay(rep, 2.0, 0.06, 1.0, 1.0).monotone);
  // Increases before the switch-off time are not checked.
  EXPECT_TRUE(check_monotone_decay(rep, 6.0, 0.0, 1.0, 1.0).monotone);
  // A run that ends before switch-off cannot be certified.
  EXPECT_FALSE(check_monotone_decay(rep, 100.0, 0.0, 1.0, 1.0).monotone);
}

TEST(Energy, DecayPreconditions) {
  EnergyReport rep;
  rep.rows.push_back(row_with(0.0, 1.0));
  const auto kind = [&](std::optional<double> off, double a, double b) {
    try {
      check_monotone_decay(rep, off, 0.0, a, b);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::IoError;
  };
  EXPECT_EQ(kind(std::nullopt, 1.0, 1.0), ErrorKind::PreconditionViolated);
  EXPECT_EQ(kind(0.0, 0.0, 1.0), ErrorKind::PreconditionViolated);
  EXPECT_EQ(kind(0.0, 1.0, 0.0), ErrorKind::PreconditionViolated);
}

TEST(Energy, CsvLineRoundTrips) {
  EnergyRow r;
  r.t = 1e-7;
  r.norm_u_L2 = 0.1;
  r.eta = 1.0 / 3.0;
  r.F_l = 2.0;
  r.F_r = 1.5;
  const std::string line = trajectory_csv_line(r);
  std::vector<double> vals;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
  ASSERT_EQ(vals.size(), 9u);
  EXPECT_EQ(vals[0], 1e-7);
  EXPECT_EQ(vals[1], 0.1);
  EXPECT_EQ(vals[5], 1.0 / 3.0);
  EXPECT_EQ(vals[8], 0.5);
  const std::string header = kTrajectoryCsvHeader;
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), 8);
}
