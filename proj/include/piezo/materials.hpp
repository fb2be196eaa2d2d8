#pragma once

#include <Eigen/Dense>

namespace piezo {

using Matrix6d = Eigen::Matrix<double, 6, 6>;
using Matrix36d = Eigen::Matrix<double, 3, 6>;

/// Independent constants of a transversely isotropic piezoceramic poled
/// along z, plus density and Rayleigh damping coefficients (SI units).
struct MaterialParams {
  double c11 = 0.0;
  double c12 = 0.0;
  double c13 = 0.0;
  double c33 = 0.0;
  double c44 = 0.0;
  double e13 = 0.0;
  double e15 = 0.0;
  double e33 = 0.0;
  double eps11 = 0.0;
  double eps33 = 0.0;
  double rho = 0.0;
  double alpha = 0.0;  // mass-proportional damping [1/s]
  double beta = 0.0;   // stiffness-proportional damping [s]
};

/// Validated material in full 3D Voigt form. Only build_material creates one.
///
/// Voigt order is (xx, yy, zz, yz, xz, xy); the coupling matrix has one row per
/// field direction (x, y, z).
struct MaterialSet {
  double rho = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  Matrix6d c_E = Matrix6d::Zero();
  Matrix36d e_coup = Matrix36d::Zero();
  Eigen::Matrix3d eps_S = Eigen::Matrix3d::Zero();

  // Certificate recorded at construction: smallest eigenvalues of c_E, eps_S.
  double lambda_mech = 0.0;
  double lambda_elec = 0.0;
};

/// Builds the structured matrices and checks positive definiteness of c_E and
/// eps_S. Throws Error(InvalidScalar) or Error(NonPositiveDefinite).
MaterialSet build_material(const MaterialParams& p);

struct EigenBounds {
  double lambda_mech;
  double lambda_elec;
};

EigenBounds smallest_eigenvalues(const MaterialSet& m);
EigenBounds largest_eigenvalues(const MaterialSet& m);

/// Smallest eigenvalue of a symmetric matrix. Throws NonPositiveDefinite when
/// it is not above 1e-12 times the largest entry magnitude.
double checked_min_eigenvalue(const Eigen::MatrixXd& sym, const char* what);

/// Unit constants (c11 = c33 = c44 = 1, eps = 1, no coupling, rho = 1).
MaterialParams identity_like_params();

/// PZT-5A style constants. These are handbook-typical values chosen for the
/// simulator defaults, not measured data.
MaterialParams pzt5a_params();

}  // namespace piezo
