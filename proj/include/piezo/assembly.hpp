#pragma once

#include <functional>
#include <string>

#include <Eigen/Dense>

#include "piezo/linalg.hpp"
#include "piezo/materials.hpp"
#include "piezo/mesh.hpp"

namespace piezo {

/// Constitutive matrices in the Voigt layout used for one spatial dimension.
///
/// In 3D these are the full c_E (6x6), e (3x6) and eps_S (3x3). In 2D the
/// mesh plane is the x-z plane containing the poling axis: strains are
/// (xx, zz, xz), so the blocks are rows/cols {xx, zz, xz} of c_E, rows {x, z}
/// of e restricted to those columns, and diag(eps11, eps33).
struct ConstitutiveBlocks {
  Eigen::MatrixXd elastic;
  Eigen::MatrixXd coupling;
  Eigen::MatrixXd dielectric;
};

ConstitutiveBlocks constitutive_blocks(const MaterialSet& material, int dim);

/// Plane-strain reduction; positive definiteness of the reduced blocks is
/// re-verified (throws NonPositiveDefinite).
ConstitutiveBlocks reduce_2d(const MaterialSet& material);

/// Number of Voigt strain components for a dimension (3 in 2D, 6 in 3D).
constexpr int voigt_size(int dim) { return dim == 2 ? 3 : 6; }

/// Strain-displacement matrix for linear simplices. Columns follow the
/// interleaved nodal displacement layout; shear rows hold the full sum of
/// cross derivatives (engineering shear strain).
Eigen::MatrixXd strain_operator(const Eigen::MatrixXd& shape_gradients);

/// Voigt normal matrix N (voigt_size x dim) with N^T sigma = traction.
Eigen::MatrixXd voigt_normal_matrix(const Eigen::VectorXd& normal);

struct CellGeometry {
  double volume = 0.0;
  Eigen::MatrixXd gradients;  // dim x (dim + 1), constant per cell
  Eigen::MatrixXd strain;     // B, voigt_size x dim * (dim + 1)
};

/// Throws DegenerateCell when the cell volume is below 1e-14 h^dim.
CellGeometry cell_geometry(const Mesh& mesh, std::size_t cell);

struct ElementMatrices {
  Eigen::MatrixXd mass;       // consistent mass, rho included
  Eigen::MatrixXd k_uu;
  Eigen::MatrixXd k_uphi;
  Eigen::MatrixXd k_phiphi;
};

ElementMatrices element_matrices(const Mesh& mesh, std::size_t cell, const MaterialSet& material);

/// Global operators of the semi-discrete weak form plus the reference
/// (unit-material) matrices used for discrete norms.
struct AssembledSystem {
  int dim = 0;
  double rho = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  DofMap dofmap;

  SparseMatrix M;
  SparseMatrix K_uu;
  SparseMatrix C_damp;
  SparseMatrix K_uphi;
  SparseMatrix K_phiphi;

  SparseMatrix L_B;  // K_uu with c_E = I
  SparseMatrix L;    // K_phiphi with eps_S = I

  Eigen::VectorXd chi;
  Eigen::VectorXd f_unit;  // -K_uphi chi
  Eigen::VectorXd g_unit;  // K_phiphi chi
};

struct AssemblyOptions {
  /// Worker threads for element computation; 0 reads PIEZO_THREADS and falls
  /// back to the hardware concurrency. Results do not depend on this value.
  int threads = 0;
};

AssembledSystem assemble(const Mesh& mesh, const DofMap& dofmap, const MaterialSet& material,
                         const AssemblyOptions& options = {});

struct LiftVectors {
  Eigen::VectorXd chi;
  Eigen::VectorXd f_unit;
  Eigen::VectorXd g_unit;
};

/// Discrete harmonic lift: chi = 1 on electrode nodes, 0 on ground nodes and
/// K_phiphi chi = 0 on the free rows.
LiftVectors build_dirichlet_lift(const AssembledSystem& system, const Mesh& mesh,
                                 const DofMap& dofmap);

/// Load vectors for an arbitrary lift with the same traces.
LiftVectors lift_vectors(const AssembledSystem& system, const Eigen::VectorXd& chi);

/// Nodal indicator lift (1 on electrode nodes, 0 elsewhere).
Eigen::VectorXd indicator_lift(const DofMap& dofmap);

/// Replaces the lift stored in the system.
void set_lift(AssembledSystem& system, const LiftVectors& lift);

/// Right-hand-side contributions of volume sources and boundary fluxes.
/// f has n_u entries (mechanical), g has n_phi entries (charge equation).
struct LoadVectors {
  Eigen::VectorXd f;
  Eigen::VectorXd g;
};

using VectorField = std::function<Eigen::VectorXd(const Eigen::VectorXd& x)>;
using ScalarField = std::function<double(const Eigen::VectorXd& x)>;
using BoundaryVectorField =
    std::function<Eigen::VectorXd(const Eigen::VectorXd& x, const Eigen::VectorXd& normal)>;
using BoundaryScalarField =
    std::function<double(const Eigen::VectorXd& x, const Eigen::VectorXd& normal)>;

/// Volume loads: f_i = int b . v_i, g_i = int q w_i. Either field may be empty.
/// Used by the verification studies only.
LoadVectors assemble_body_load(const Mesh& mesh, const DofMap& dofmap, const VectorField& body_force,
                               const ScalarField& charge);

/// Boundary loads over all tagged facets with outward normals:
/// f_i = int t(x, n) . v_i, g_i = int s(x, n) w_i.
LoadVectors assemble_boundary_load(const Mesh& mesh, const DofMap& dofmap,
                                   const BoundaryVectorField& traction,
                                   const BoundaryScalarField& surface_charge);

struct QuadraturePoint {
  Eigen::VectorXd barycentric;  // dim + 1 entries
  double weight;                // fraction of the cell measure
};

/// Cell quadrature: 7-point degree-5 rule on triangles, 4-point degree-2 rule
/// on tetrahedra.
const std::vector<QuadraturePoint>& cell_quadrature(int dim);

/// Writes each block of the system as a sorted triplet file into directory.
void dump_system(const AssembledSystem& system, const std::string& directory);

}  // namespace piezo
