#include "piezo/materials.hpp"

#include <cmath>
#include <sstream>

#include "piezo/error.hpp"

namespace piezo {

namespace {

bool all_finite(const MaterialParams& p) {
  for (double v : {p.c11, p.c12, p.c13, p.c33, p.c44, p.e13, p.e15, p.e33,
                   p.eps11, p.eps33, p.rho, p.alpha, p.beta}) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace

double checked_min_eigenvalue(const Eigen::MatrixXd& sym, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym, Eigen::EigenvaluesOnly);
  const double lambda_min = solver.eigenvalues().minCoeff();
  const double scale = sym.cwiseAbs().maxCoeff();
  if (!(lambda_min > 1e-12 * scale)) {
    std::ostringstream msg;
    msg << what << " is not positive definite (smallest eigenvalue " << lambda_min << ")";
    throw Error(ErrorKind::NonPositiveDefinite, msg.str());
  }
  return lambda_min;
}

MaterialSet build_material(const MaterialParams& p) {
  if (!all_finite(p)) {
    throw Error(ErrorKind::InvalidScalar, "material parameters must be finite");
  }
  if (!(p.rho > 0.0)) throw Error(ErrorKind::InvalidScalar, "rho must be positive");
  if (p.alpha < 0.0) throw Error(ErrorKind::InvalidScalar, "alpha must be nonnegative");
  if (p.beta < 0.0) throw Error(ErrorKind::InvalidScalar, "beta must be nonnegative");

  MaterialSet m;
  m.rho = p.rho;
  m.alpha = p.alpha;
  m.beta = p.beta;

  auto& c = m.c_E;
  c(0, 0) = p.c11; c(0, 1) = p.c12; c(0, 2) = p.c13;
  c(1, 0) = p.c12; c(1, 1) = p.c11; c(1, 2) = p.c13;
  c(2, 0) = p.c13; c(2, 1) = p.c13; c(2, 2) = p.c33;
  c(3, 3) = p.c44;
  c(4, 4) = p.c44;
  c(5, 5) = 0.5 * (p.c11 - p.c12);

  m.e_coup(0, 4) = p.e15;
  m.e_coup(1, 3) = p.e15;
  m.e_coup(2, 0) = p.e13;
  m.e_coup(2, 1) = p.e13;
  m.e_coup(2, 2) = p.e33;

  m.eps_S(0, 0) = p.eps11;
  m.eps_S(1, 1) = p.eps11;
  m.eps_S(2, 2) = p.eps33;

  m.lambda_mech = checked_min_eigenvalue(m.c_E, "elastic stiffness c_E");
  m.lambda_elec = checked_min_eigenvalue(m.eps_S, "permittivity eps_S");
  return m;
}

EigenBounds smallest_eigenvalues(const MaterialSet& m) {
  return {m.lambda_mech, m.lambda_elec};
}

EigenBounds largest_eigenvalues(const MaterialSet& m) {
  Eigen::SelfAdjointEigenSolver<Matrix6d> mech(m.c_E, Eigen::EigenvaluesOnly);
  return {mech.eigenvalues().maxCoeff(), m.eps_S.diagonal().maxCoeff()};
}

MaterialParams identity_like_params() {
  MaterialParams p;
  p.c11 = 1.0;
  p.c33 = 1.0;
  p.c44 = 1.0;
  p.eps11 = 1.0;
  p.eps33 = 1.0;
  p.rho = 1.0;
  return p;
}

MaterialParams pzt5a_params() {
  MaterialParams p;
  p.c11 = 12.1e10;
  p.c12 = 7.54e10;
  p.c13 = 7.52e10;
  p.c33 = 11.1e10;
  p.c44 = 2.11e10;
  p.e13 = -5.4;
  p.e15 = 12.3;
  p.e33 = 15.8;
  p.eps11 = 8.11e-9;
  p.eps33 = 7.35e-9;
  p.rho = 7750.0;
  p.alpha = 0.0;
  p.beta = 0.0;
  return p;
}

}  // namespace piezo
