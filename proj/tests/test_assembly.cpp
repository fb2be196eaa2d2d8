#include <cmath>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "piezo/assembly.hpp"
#include "piezo/error.hpp"
#include "test_support.hpp"

using namespace piezo;

namespace {

// Nodal interpolant of an affine displacement u = (a x + b z, c x + d z) in
// the interleaved layout.
Eigen::VectorXd affine_u(const Mesh& m, double a, double b, double c, double d) {
  Eigen::VectorXd u(2 * m.node_count());
  for (std::size_t i = 0; i < m.node_count(); ++i) {
    const double x = m.nodes()[i][0], z = m.nodes()[i][1];
    u(2 * i) = a * x + b * z;
    u(2 * i + 1) = c * x + d * z;
  }
  return u;
}

Eigen::VectorXd affine_phi(const Mesh& m, double gx, double gz) {
  Eigen::VectorXd p(m.node_count());
  for (std::size_t i = 0; i < m.node_count(); ++i) p(i) = gx * m.nodes()[i][0] + gz * m.nodes()[i][1];
  return p;
}

struct Fixture {
  Mesh mesh;
  DofMap dofs;
  MaterialSet mat;
  AssembledSystem sys;
};

Fixture make(int nx, int ny, double lx, double ly, const MaterialParams& p, int threads = 1) {
  Mesh mesh = generate_rect(nx, ny, lx, ly);
  DofMap dofs = build_dofmap(mesh);
  MaterialSet mat = build_material(p);
  AssembledSystem sys = assemble(mesh, dofs, mat, {threads});
  return {std::move(mesh), std::move(dofs), std::move(mat), std::move(sys)};
}

double dense_max_abs(const SparseMatrix& a, const SparseMatrix& b) {
  return (Eigen::MatrixXd(a) - Eigen::MatrixXd(b)).cwiseAbs().maxCoeff();
}

}  // namespace

TEST(Assembly, ElementMassMatchesClosedForm) {
  const Mesh m = generate_rect(1, 1, 2.0, 3.0);
  MaterialParams p = test::unit_params();
  p.rho = 7.0;
  const MaterialSet mat = build_material(p);
  const ElementMatrices e = element_matrices(m, 0, mat);
  const double area = m.cell_volume(0);
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      const double scalar = p.rho * area / 12.0 * (a == b ? 2.0 : 1.0);
      for (int c = 0; c < 2; ++c) {
        for (int d = 0; d < 2; ++d) {
          EXPECT_NEAR(e.mass(2 * a + c, 2 * b + d), c == d ? scalar : 0.0, 1e-14);
        }
      }
    }
  }
}

TEST(Assembly, MassTotalsDensityTimesVolume) {
  MaterialParams p = test::unit_params();
  p.rho = 3.5;
  const auto f = make(4, 3, 2.0, 0.5, p);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(f.dofs.n_u);
  EXPECT_NEAR(ones.dot(f.sys.M * ones), p.rho * 1.0 * 2, 1e-12);

  const Mesh prism = test::prism_mesh();
  const DofMap d3 = build_dofmap(prism);
  const AssembledSystem s3 = assemble(prism, d3, build_material(p), {1});
  const Eigen::VectorXd ones3 = Eigen::VectorXd::Ones(d3.n_u);
  EXPECT_NEAR(ones3.dot(s3.M * ones3), p.rho * 0.5 * 3, 1e-12);
}

TEST(Assembly, StrainEnergyOfUniformStrain) {
  const MaterialParams p = pzt5a_params();
  const auto f = make(3, 2, 1.5, 1.0, p);
  const double a = 1e-3, b = -2e-3, c = 0.5e-3, d = 4e-3;
  const Eigen::VectorXd u = affine_u(f.mesh, a, b, c, d);
  Eigen::Vector3d S(a, d, b + c);  // (xx, zz, xz) engineering shear
  Eigen::Matrix3d cr;
  cr << p.c11, p.c13, 0, p.c13, p.c33, 0, 0, 0, p.c44;
  const double area = 1.5;
  const double expected = area * S.dot(cr * S);
  EXPECT_NEAR(u.dot(f.sys.K_uu * u), expected, 1e-12 * expected);

  // Unit-material reference operator gives |S|^2.
  EXPECT_NEAR(u.dot(f.sys.L_B * u), area * S.squaredNorm(), 1e-12 * area * S.squaredNorm());
}

TEST(Assembly, CouplingAndDielectricOfUniformFields) {
  const MaterialParams p = pzt5a_params();
  const auto f = make(2, 3, 1.0, 2.0, p);
  const Eigen::VectorXd u = affine_u(f.mesh, 1e-3, 2e-3, -1e-3, 3e-3);
  const Eigen::Vector3d S(1e-3, 3e-3, 2e-3 - 1e-3);
  const double gx = 0.7, gz = -1.3;
  const Eigen::VectorXd phi = affine_phi(f.mesh, gx, gz);
  Eigen::Matrix<double, 2, 3> e;
  e << 0, 0, p.e15, p.e13, p.e33, 0;
  const Eigen::Vector2d g(gx, gz);
  const double area = 2.0;
  const double coupling = area * g.dot(e * S);
  EXPECT_NEAR(u.dot(f.sys.K_uphi * phi), coupling, 1e-12 * std::abs(coupling));

  const double diel = area * (p.eps11 * gx * gx + p.eps33 * gz * gz);
  EXPECT_NEAR(phi.dot(f.sys.K_phiphi * phi), diel, 1e-12 * diel);
  EXPECT_NEAR(phi.dot(f.sys.L * phi), area * g.squaredNorm(), 1e-12);
}

TEST(Assembly, RayleighDamping) {
  const auto f = make(3, 3, 1.0, 1.0, test::unit_params());
  const SparseMatrix expected = f.mat.alpha * f.sys.M + f.mat.beta * f.sys.K_uu;
  EXPECT_LE(dense_max_abs(f.sys.C_damp, expected), 1e-15);
}

TEST(Assembly, RigidModesAreInKernel) {
  const auto f = make(3, 2, 1.0, 1.0, pzt5a_params());
  const double scale = Eigen::MatrixXd(f.sys.K_uu).cwiseAbs().maxCoeff();
  for (const Eigen::VectorXd& u : std::vector<Eigen::VectorXd>{affine_u(f.mesh, 0, 0, 0, 0) + Eigen::VectorXd::Ones(f.dofs.n_u),
                        affine_u(f.mesh, 0, -1, 1, 0)}) {
    EXPECT_LE((f.sys.K_uu * u).cwiseAbs().maxCoeff(), 1e-12 * scale);
    EXPECT_LE((f.sys.K_uphi.transpose() * u).cwiseAbs().maxCoeff(), 1e-12 * scale);
  }
}

TEST(Assembly, SymmetryAndNullSpaceAcrossMeshes) {
  for (int n : {1, 2, 3, 5}) {
    const auto f = make(n, n + 1, 1.0, 0.7, pzt5a_params());
    EXPECT_LE(symmetry_defect(f.sys.M), 1e-14);
    EXPECT_LE(symmetry_defect(f.sys.K_uu), 1e-14);
    EXPECT_LE(symmetry_defect(f.sys.C_damp), 1e-14);
    EXPECT_LE(symmetry_defect(f.sys.K_phiphi), 1e-14);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(f.sys.K_uu));
    const double top = es.eigenvalues().cwiseAbs().maxCoeff();
    int zero = 0;
    for (double l : es.eigenvalues()) zero += std::abs(l) <= 1e-10 * top ? 1 : 0;
    EXPECT_EQ(zero, 3) << "n = " << n;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> em(Eigen::MatrixXd(f.sys.M));
    EXPECT_GT(em.eigenvalues().minCoeff(), 0.0);
  }
}

TEST(Assembly, TetrahedralNullSpace) {
  const Mesh m = test::prism_mesh();
  const DofMap d = build_dofmap(m);
  const AssembledSystem s = assemble(m, d, build_material(pzt5a_params()), {1});
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(s.K_uu));
  const double top = es.eigenvalues().cwiseAbs().maxCoeff();
  int zero = 0;
  for (double l : es.eigenvalues()) zero += std::abs(l) <= 1e-10 * top ? 1 : 0;
  EXPECT_EQ(zero, 6);
  EXPECT_LE(symmetry_defect(s.K_uu), 1e-14);
}

TEST(Assembly, ThreadCountDoesNotChangeResult) {
  const auto a = make(6, 5, 1.0, 1.0, pzt5a_params(), 1);
  const auto b = make(6, 5, 1.0, 1.0, pzt5a_params(), 4);
  EXPECT_EQ(dense_max_abs(a.sys.K_uu, b.sys.K_uu), 0.0);
  EXPECT_EQ(dense_max_abs(a.sys.K_uphi, b.sys.K_uphi), 0.0);
  EXPECT_EQ(dense_max_abs(a.sys.M, b.sys.M), 0.0);
  EXPECT_EQ((a.sys.chi - b.sys.chi).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Assembly, HarmonicLiftOnRectangleIsLinear) {
  const double ly = 0.4;
  const auto f = make(3, 4, 1.0, ly, pzt5a_params());
  for (std::size_t i = 0; i < f.mesh.node_count(); ++i) {
    EXPECT_NEAR(f.sys.chi(i), f.mesh.nodes()[i][1] / ly, 1e-12);
  }
  const Eigen::VectorXd f_ref = -(f.sys.K_uphi * f.sys.chi);
  const Eigen::VectorXd g_ref = f.sys.K_phiphi * f.sys.chi;
  EXPECT_LE((f.sys.f_unit - f_ref).cwiseAbs().maxCoeff(), 1e-14 * f_ref.cwiseAbs().maxCoeff());
  const double gscale = g_ref.cwiseAbs().maxCoeff();
  EXPECT_LE((f.sys.g_unit - g_ref).cwiseAbs().maxCoeff(), 1e-14 * gscale);
  for (int i : f.dofs.free_phi) EXPECT_LE(std::abs(f.sys.g_unit(i)), 1e-12 * gscale);
}

TEST(Assembly, IndicatorLiftAndReplacement) {
  auto f = make(2, 3, 1.0, 1.0, test::unit_params());
  const Eigen::VectorXd ind = indicator_lift(f.dofs);
  for (int n : f.dofs.electrode_nodes) EXPECT_EQ(ind(n), 1.0);
  EXPECT_EQ(ind.sum(), static_cast<double>(f.dofs.electrode_nodes.size()));
  const LiftVectors lv = lift_vectors(f.sys, ind);
  set_lift(f.sys, lv);
  EXPECT_EQ((f.sys.chi - ind).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_LE((f.sys.g_unit - f.sys.K_phiphi * ind).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(lift_vectors(f.sys, Eigen::VectorXd::Zero(3)), Error);
}

TEST(Assembly, BodyLoadQuadrature) {
  const double lx = 2.0, ly = 1.5;
  const Mesh m = generate_rect(3, 2, lx, ly);
  const DofMap d = build_dofmap(m);
  const LoadVectors l = assemble_body_load(
      m, d,
      [](const Eigen::VectorXd& x) {
        Eigen::VectorXd b(2);
        b << x(0) * x(0), 1.0;
        return b;
      },
      [](const Eigen::VectorXd& x) { return x(0) * x(1); });
  double fx = 0.0, fz = 0.0;
  for (std::size_t i = 0; i < m.node_count(); ++i) {
    fx += l.f(2 * i);
    fz += l.f(2 * i + 1);
  }
  EXPECT_NEAR(fx, lx * lx * lx / 3.0 * ly, 1e-13);
  EXPECT_NEAR(fz, lx * ly, 1e-13);
  EXPECT_NEAR(l.g.sum(), 0.25 * lx * lx * ly * ly, 1e-13);
}

TEST(Assembly, BoundaryLoadDivergenceTheorem) {
  const double lx = 1.3, ly = 0.8;
  const Mesh m = generate_rect(4, 3, lx, ly);
  const DofMap d = build_dofmap(m);
  const LoadVectors l = assemble_boundary_load(
      m, d, [](const Eigen::VectorXd&, const Eigen::VectorXd& n) { return Eigen::VectorXd(n); },
      [](const Eigen::VectorXd&, const Eigen::VectorXd&) { return 1.0; });
  // int n ds = 0; int n_x x ds = int n_z z ds = area; perimeter from s = 1.
  double sx = 0.0, sz = 0.0, mx = 0.0, mz = 0.0;
  for (std::size_t i = 0; i < m.node_count(); ++i) {
    sx += l.f(2 * i);
    sz += l.f(2 * i + 1);
    mx += l.f(2 * i) * m.nodes()[i][0];
    mz += l.f(2 * i + 1) * m.nodes()[i][1];
  }
  EXPECT_NEAR(sx, 0.0, 1e-14);
  EXPECT_NEAR(sz, 0.0, 1e-14);
  EXPECT_NEAR(mx, lx * ly, 1e-14);
  EXPECT_NEAR(mz, lx * ly, 1e-14);
  EXPECT_NEAR(l.g.sum(), 2 * (lx + ly), 1e-14);
}

TEST(Assembly, VoigtNormalMatrixGivesTraction) {
  Eigen::VectorXd n(2);
  n << 0.6, 0.8;
  const Eigen::MatrixXd N = voigt_normal_matrix(n);
  Eigen::Vector3d sigma(1.0, 2.0, 3.0);  // xx, zz, xz
  const Eigen::VectorXd t = N.transpose() * sigma;
  EXPECT_NEAR(t(0), 1.0 * 0.6 + 3.0 * 0.8, 1e-15);
  EXPECT_NEAR(t(1), 3.0 * 0.6 + 2.0 * 0.8, 1e-15);
}

TEST(Assembly, QuadratureIsExactForQuintic) {
  // Reference triangle: int x^a y^b = a! b! / (a + b + 2)!
  const auto& rule = cell_quadrature(2);
  double w = 0.0, q = 0.0;
  for (const auto& qp : rule) {
    const double x = qp.barycentric(1), y = qp.barycentric(2);
    w += qp.weight;
    q += 0.5 * qp.weight * std::pow(x, 3) * std::pow(y, 2);
  }
  EXPECT_NEAR(w, 1.0, 1e-15);
  EXPECT_NEAR(q, 6.0 * 2.0 / 5040.0, 1e-16);
}

TEST(Assembly, DumpWritesTriplets) {
  const auto f = make(1, 1, 1.0, 1.0, test::unit_params());
  const auto dir = test::scratch_dir() / "system";
  dump_system(f.sys, dir.string());
  for (const char* name : {"M.txt", "K_uu.txt", "C_damp.txt", "K_uphi.txt", "K_phiphi.txt",
                           "chi.txt", "f_unit.txt", "g_unit.txt"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / name)) << name;
  }
  EXPECT_EQ(test::read_file(dir / "M.txt"), format_triplets(f.sys.M));
}
