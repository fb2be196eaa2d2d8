#include <cmath>

#include <gtest/gtest.h>

#include "piezo/error.hpp"
#include "piezo/verify.hpp"
#include "test_support.hpp"

using namespace piezo;

namespace {

SparseMatrix scalar(double x) {
  SparseMatrix m(1, 1);
  m.insert(0, 0) = x;
  m.makeCompressed();
  return m;
}

SemiDiscreteSystem oscillator(double c, double k) {
  SemiDiscreteSystem s;
  s.M = scalar(1.0);
  s.C = scalar(c);
  s.K = scalar(k);
  s.coupling = SparseMatrix(1, 0);
  s.dielectric = SparseMatrix(0, 0);
  return s;
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::IoError;
}

struct Problem {
  Mesh mesh;
  MaterialSet material;
  AssembledSystem asys;
  SemiDiscreteSystem sys;
  Drive drive;
  Excitation exc;
};

Problem problem(int nx, int ny, const MaterialParams& p, const Drive& drive) {
  Mesh mesh = generate_rect(nx, ny, 1.0, 1.0);
  const DofMap dofs = build_dofmap(mesh);
  MaterialSet mat = build_material(p);
  AssembledSystem asys = assemble(mesh, dofs, mat, {1});
  SemiDiscreteSystem sys = semi_discrete(asys);
  Excitation exc = drive_excitation(asys, drive);
  return {std::move(mesh), std::move(mat), std::move(asys), std::move(sys), drive, std::move(exc)};
}

Drive unit_pulse() { return Drive::trapezoid(10.0, 0.25, 0.25, 0.25); }

}  // namespace

TEST(Oracle, HarmonicOscillator) {
  const auto sys = oscillator(0.0, 4.0);
  Excitation none{1, 0, {}, {}};
  OracleOptions o;
  o.sample_times = {0.5, 1.0, 2.0, 3.0};
  const OracleRun r = dense_oracle(sys, none, Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1), 5.0, o);
  ASSERT_EQ(r.samples.size(), 6u);
  for (const auto& s : r.samples) {
    EXPECT_NEAR(s.u(0), std::cos(2.0 * s.t), 1e-9) << s.t;
    EXPECT_NEAR(s.v(0), -2.0 * std::sin(2.0 * s.t), 2e-9) << s.t;
    EXPECT_NEAR(s.eta_tilde, 4.0, 1e-9);
  }
  EXPECT_EQ(r.terminal().t, 5.0);
  EXPECT_GT(r.accepted_steps, 0u);
}

TEST(Oracle, DampedOscillatorEnergyIdentity) {
  const double zeta = 0.1;
  const auto sys = oscillator(2.0 * zeta, 1.0);
  Excitation none{1, 0, {}, {}};
  const OracleRun r = dense_oracle(sys, none, Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1), 3.0);
  const double wd = std::sqrt(1.0 - zeta * zeta);
  const double exact = std::exp(-zeta * 3.0) * (std::cos(wd * 3.0) + zeta / wd * std::sin(wd * 3.0));
  EXPECT_NEAR(r.terminal().u(0), exact, 1e-9);
  EXPECT_GT(r.terminal().gamma, 0.0);
  EXPECT_LE(oracle_identity_residual(r), 1e-9);
}

TEST(Oracle, ForcedOscillatorAcrossKinks) {
  // u'' + u = hat(t) with hat rising on [0, 1] and falling on [1, 2]; for
  // t >= 2 the closed-form response is
  //   u = -sin(t) + 2 sin(t - 1) - sin(t - 2).
  const auto sys = oscillator(0.0, 1.0);
  Excitation e{1, 0, {}, {}};
  e.terms.push_back({TimeFunction::piecewise_linear({0, 1, 2}, {0, 1, 0}), Eigen::VectorXd::Ones(1),
                     Eigen::VectorXd()});
  const Eigen::VectorXd z = Eigen::VectorXd::Zero(1);
  const OracleRun r = dense_oracle(sys, e, z, z, 4.0);
  const double t = 4.0;
  const double exact = -std::sin(t) + 2.0 * std::sin(t - 1.0) - std::sin(t - 2.0);
  EXPECT_NEAR(r.terminal().u(0), exact, 1e-9);
  EXPECT_LE(oracle_identity_residual(r), 1e-9);
}

TEST(Oracle, ZeroDataIsZero) {
  auto p = problem(1, 1, test::unit_params(), Drive::zero());
  const Eigen::VectorXd z = Eigen::VectorXd::Zero(p.sys.n_u());
  const OracleRun r = dense_oracle(p.sys, p.exc, z, z, 1.0);
  EXPECT_EQ(r.terminal().u.norm(), 0.0);
  EXPECT_EQ(r.terminal().F_l, 0.0);
}

TEST(Oracle, EnergyIdentityOnMesh) {
  auto p = problem(2, 2, test::unit_params(), unit_pulse());
  ASSERT_EQ(p.sys.n_free(), 3);
  const Eigen::VectorXd z = Eigen::VectorXd::Zero(p.sys.n_u());
  OracleOptions o;
  o.rtol = 1e-12;
  for (int k = 1; k < 20; ++k) o.sample_times.push_back(0.05 * k);
  const OracleRun r = dense_oracle(p.sys, p.exc, z, z, 1.0, o);
  EXPECT_GT(r.terminal().F_r, 1.0);
  EXPECT_LE(oracle_identity_residual(r), 1e-8);
}

TEST(Oracle, HhtConvergesToOracle) {
  auto p = problem(1, 1, test::unit_params(), unit_pulse());
  const Eigen::VectorXd z = Eigen::VectorXd::Zero(p.sys.n_u());
  OracleOptions o;
  o.rtol = 1e-12;
  const OracleRun ref = dense_oracle(p.sys, p.exc, z, z, 1.0, o);
  const auto c1 = compare_with_oracle(p.sys, p.exc, z, z, RunOptions{1e-4, 1.0, {}}, ref);
  const auto c2 = compare_with_oracle(p.sys, p.exc, z, z, RunOptions{5e-5, 1.0, {}}, ref);
  EXPECT_LE(c1.rel_diff, 1e-4);
  EXPECT_GE(c1.rel_diff / c2.rel_diff, 3.0);
}

TEST(Oracle, Guards) {
  auto big = problem(8, 8, test::unit_params(), Drive::zero());
  const Eigen::VectorXd z = Eigen::VectorXd::Zero(big.sys.n_u());
  EXPECT_EQ(kind_of([&] { dense_oracle(big.sys, big.exc, z, z, 1.0); }), ErrorKind::TooLarge);

  auto small = problem(1, 1, test::unit_params(), Drive::zero());
  const Eigen::VectorXd bad = Eigen::VectorXd::Zero(3);
  EXPECT_EQ(kind_of([&] { dense_oracle(small.sys, small.exc, bad, bad, 1.0); }),
            ErrorKind::DimensionMismatch);

  // A stiff system under a tiny step budget.
  const auto stiff = oscillator(0.0, 1e12);
  Excitation none{1, 0, {}, {}};
  OracleOptions o;
  o.max_steps = 100;
  EXPECT_EQ(kind_of([&] {
              dense_oracle(stiff, none, Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1), 1.0, o);
            }),
            ErrorKind::StiffnessFailure);
}

TEST(Electrostatics, UncoupledPotentialMatchesDirectSolve) {
  // With e = 0 the potential is decoupled: the reconstructed phi0 + phi_e chi
  // must solve the Dirichlet problem K_phiphi phi = 0 on free rows.
  MaterialParams mp = test::unit_params();
  mp.e13 = mp.e15 = mp.e33 = 0.0;
  mp.eps11 = 2.0;
  Mesh mesh = generate_rect(3, 4, 1.0, 1.0);
  const DofMap d = build_dofmap(mesh);
  AssembledSystem asys = assemble(mesh, d, build_material(mp), {1});
  set_lift(asys, lift_vectors(asys, indicator_lift(d)));
  const SemiDiscreteSystem sys = semi_discrete(asys);
  const Drive drive = Drive::trapezoid(3.0, 0.1, 0.1, 0.1);
  const Excitation exc = drive_excitation(asys, drive);

  const Eigen::MatrixXd K(asys.K_phiphi);
  Eigen::MatrixXd kff(d.n_free(), d.n_free());
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d.n_free());
  for (int i = 0; i < d.n_free(); ++i) {
    for (int j = 0; j < d.n_free(); ++j) kff(i, j) = K(d.free_phi[i], d.free_phi[j]);
    for (int c : d.electrode_nodes) rhs(i) -= K(d.free_phi[i], c);
  }
  const Eigen::VectorXd unit_free = kff.fullPivLu().solve(rhs);

  const Eigen::VectorXd z = Eigen::VectorXd::Zero(sys.n_u());
  run(sys, exc, z, z, RunOptions{0.01, 0.4, {}}, [&](std::size_t, const State& s) {
    const double pe = drive.phi_e.value(s.t);
    const Eigen::VectorXd full = s.phi0 + pe * asys.chi;
    for (int c : d.electrode_nodes) ASSERT_NEAR(full(c), pe, 1e-14);
    for (int g : d.ground_nodes) ASSERT_EQ(full(g), 0.0);
    for (int i = 0; i < d.n_free(); ++i) ASSERT_NEAR(full(d.free_phi[i]), pe * unit_free(i), 1e-12);
    ASSERT_LE(s.u.norm(), 1e-300);
  });
}

TEST(Mms, PolynomialsInTheDiscreteSpaceAreExact) {
  const MaterialSet m = build_material(test::unit_params());
  for (auto kind : {ManufacturedKind::Constant, ManufacturedKind::Affine}) {
    MmsOptions o;
    o.kind = kind;
    o.levels = {2, 4};
    const MmsReport r = manufactured_convergence(m, o);
    EXPECT_TRUE(r.passed);
    EXPECT_LE(r.max_error, 1e-10);
  }
}

TEST(Mms, QuadraticConvergesAtSecondOrder) {
  const MaterialSet m = build_material(test::unit_params());
  const MmsReport r = manufactured_convergence(m, MmsOptions{});
  ASSERT_EQ(r.levels.size(), 3u);
  EXPECT_NEAR(r.rate_u, 2.0, 0.3);
  EXPECT_NEAR(r.rate_phi, 2.0, 0.3);
  for (std::size_t i = 1; i < r.levels.size(); ++i) {
    EXPECT_LT(r.levels[i].err_u, r.levels[i - 1].err_u);
    EXPECT_DOUBLE_EQ(r.levels[i].dt, 0.25 * r.levels[i].h);
  }
}

TEST(Mms, FailuresAndConfigErrors) {
  const MaterialSet m = build_material(test::unit_params());
  MmsOptions o;
  o.levels = {4, 4, 8};
  EXPECT_EQ(kind_of([&] { manufactured_convergence(m, o); }), ErrorKind::ConfigError);
  o.levels = {4, 8};
  EXPECT_EQ(kind_of([&] { manufactured_convergence(m, o); }), ErrorKind::ConfigError);
  o.levels = {2, 4, 8};
  o.min_rate = 2.5;
  EXPECT_EQ(kind_of([&] { manufactured_convergence(m, o); }), ErrorKind::RateFailure);
  o.enforce = false;
  EXPECT_FALSE(manufactured_convergence(m, o).passed);
  // A rate above the window fails as well.
  o.min_rate = 1.0;
  o.max_rate = 1.5;
  EXPECT_FALSE(manufactured_convergence(m, o).passed);
}

TEST(Scaling, SupNormsScaleLinearly) {
  auto p = problem(3, 3, test::unit_params(), unit_pulse());
  Eigen::VectorXd u0 = Eigen::VectorXd::LinSpaced(p.sys.n_u(), -0.01, 0.02);
  Eigen::VectorXd u1 = Eigen::VectorXd::LinSpaced(p.sys.n_u(), 0.05, -0.03);
  const ScalingReport r =
      check_apriori_bound(p.sys, p.exc, u0, u1, RunOptions{1e-3, 1.0, {}}, {0.0, 1e-3, 1.0, 2.0, 1e3});
  EXPECT_TRUE(r.passed);
  EXPECT_LE(r.max_rel_dev, 1e-10);
  ASSERT_EQ(r.entries.size(), 5u);
  EXPECT_EQ(r.entries[0].max_rel_dev, 0.0);
  EXPECT_GT(r.entries[2].c_h, 0.0);
  EXPECT_NEAR(r.entries[4].c_h, r.entries[2].c_h, 1e-10 * r.entries[2].c_h);
}

TEST(Coercivity, IdentityMaterialQuotients) {
  auto p = problem(3, 3, identity_like_params(), Drive::zero());
  const CoercivityReport r = check_coercivity(p.asys, p.material, 100, 42);
  EXPECT_EQ(r.samples, 100);
  EXPECT_DOUBLE_EQ(r.lambda_mech, 0.5);
  EXPECT_DOUBLE_EQ(r.lambda_elec, 1.0);
  EXPECT_GE(r.min_quotient_mech, 0.5);
  EXPECT_GE(r.min_quotient_elec, 1.0 - 1e-12);
}

TEST(Coercivity, RigidModeGivesZeroOnBothSides) {
  auto p = problem(2, 2, identity_like_params(), Drive::zero());
  Eigen::VectorXd x = Eigen::VectorXd::Zero(p.asys.dofmap.n_u);
  for (int i = 0; i < x.size(); i += 2) x(i) = 1.0;
  EXPECT_NEAR(x.dot(p.asys.K_uu * x), 0.0, 1e-14);
  EXPECT_NEAR(x.dot(p.asys.L_B * x), 0.0, 1e-14);
}

TEST(Coercivity, InflatedCertificateIsRejected) {
  auto p = problem(3, 3, pzt5a_params(), Drive::zero());
  EXPECT_NO_THROW(check_coercivity(p.asys, p.material, 50));
  MaterialSet fake = p.material;
  fake.lambda_mech *= 50.0;
  EXPECT_EQ(kind_of([&] { check_coercivity(p.asys, fake, 50); }), ErrorKind::CoercivityViolation);
  fake = p.material;
  fake.lambda_elec *= 50.0;
  EXPECT_EQ(kind_of([&] { check_coercivity(p.asys, fake, 50); }), ErrorKind::CoercivityViolation);
  EXPECT_EQ(kind_of([&] { check_coercivity(p.asys, p.material, 0); }), ErrorKind::ConfigError);
}

TEST(Lift, ReconstructedPotentialDoesNotDependOnLift) {
  auto p = problem(3, 3, test::unit_params(), unit_pulse());
  const DofMap& d = p.asys.dofmap;
  const RunOptions o{1e-3, 1.0, {}};
  const LiftReport same = check_lift_independence(p.mesh, p.material, p.drive, p.asys.chi, o);
  EXPECT_LE(same.max_rel_diff_phi, 1e-14);

  const LiftReport ind = check_lift_independence(p.mesh, p.material, p.drive, indicator_lift(d), o);
  EXPECT_TRUE(ind.passed);
  EXPECT_LE(ind.max_rel_diff_phi, 1e-10);
  EXPECT_LE(ind.max_rel_diff_u, 1e-10);

  Eigen::VectorXd wild = indicator_lift(d);
  for (int i : d.free_phi) wild(i) = 7.0 * (i % 3) - 4.0;
  EXPECT_TRUE(check_lift_independence(p.mesh, p.material, p.drive, wild, o).passed);

  Eigen::VectorXd bad = indicator_lift(d);
  bad(d.ground_nodes.front()) = 0.5;
  EXPECT_EQ(kind_of([&] { check_lift_independence(p.mesh, p.material, p.drive, bad, o); }),
            ErrorKind::PreconditionViolated);
  EXPECT_EQ(kind_of([&] {
              check_lift_independence(p.mesh, p.material, p.drive, Eigen::VectorXd::Zero(2), o);
            }),
            ErrorKind::DimensionMismatch);
}

TEST(Structure, RectanglesAndPrism) {
  for (int n : {1, 2, 4}) {
    auto p = problem(n, n, pzt5a_params(), Drive::zero());
    const StructuralReport r = check_structure(p.asys);
    EXPECT_TRUE(r.passed);
    EXPECT_EQ(r.null_space_dim, 3);
    EXPECT_LE(r.max_symmetry_defect, 1e-14);
  }
  const Mesh prism = test::prism_mesh();
  const DofMap d = build_dofmap(prism);
  const StructuralReport r3 = check_structure(assemble(prism, d, build_material(pzt5a_params()), {1}));
  EXPECT_EQ(r3.expected_null_space_dim, 6);
  EXPECT_TRUE(r3.passed);

  auto large = problem(2, 2, pzt5a_params(), Drive::zero());
  EXPECT_EQ(check_structure(large.asys, 4).null_space_dim, -1);
}

TEST(ZeroData, StaysAtRest) {
  auto p = problem(2, 2, pzt5a_params(), Drive::zero());
  const ZeroDataReport r = check_zero_data(p.asys, RunOptions{1e-8, 1e-5, {}});
  EXPECT_EQ(r.steps, 1000u);
  EXPECT_EQ(r.max_norm, 0.0);
  EXPECT_TRUE(r.passed);
}
