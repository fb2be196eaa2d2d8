#include "piezo/assembly.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <thread>

#include "piezo/error.hpp"

namespace piezo {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

struct CellBlocks {
  ElementMatrices em;
  Eigen::MatrixXd l_b;  // unit-material stiffness
  Eigen::MatrixXd l;    // unit-permittivity Laplacian
};

Eigen::VectorXd point_of(const Mesh& mesh, int node) {
  Eigen::VectorXd x(mesh.dim());
  for (int k = 0; k < mesh.dim(); ++k) x(k) = mesh.nodes()[node][k];
  return x;
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("PIEZO_THREADS")) {
    int v = 0;
    const std::string_view s(env);
    if (std::from_chars(s.data(), s.data() + s.size(), v).ec == std::errc() && v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

CellBlocks compute_cell(const Mesh& mesh, std::size_t cell, const MaterialSet& material,
                        const ConstitutiveBlocks& blocks) {
  const CellGeometry geo = cell_geometry(mesh, cell);
  const int dim = mesh.dim();
  const int k = dim + 1;
  const int nu = dim * k;

  CellBlocks out;
  auto& em = out.em;
  em.mass = Eigen::MatrixXd::Zero(nu, nu);
  const double denom = static_cast<double>((dim + 1) * (dim + 2));
  for (int a = 0; a < k; ++a) {
    for (int b = 0; b < k; ++b) {
      const double m = material.rho * geo.volume * (a == b ? 2.0 : 1.0) / denom;
      for (int c = 0; c < dim; ++c) em.mass(a * dim + c, b * dim + c) = m;
    }
  }
  const Eigen::MatrixXd& B = geo.strain;
  const Eigen::MatrixXd& G = geo.gradients;
  em.k_uu = geo.volume * B.transpose() * blocks.elastic * B;
  em.k_uphi = geo.volume * B.transpose() * blocks.coupling.transpose() * G;
  em.k_phiphi = geo.volume * G.transpose() * blocks.dielectric * G;
  out.l_b = geo.volume * B.transpose() * B;
  out.l = geo.volume * G.transpose() * G;
  return out;
}

SparseMatrix from_triplets(Eigen::Index rows, Eigen::Index cols, const Triplets& t) {
  SparseMatrix m(rows, cols);
  m.setFromTriplets(t.begin(), t.end());
  m.makeCompressed();
  return m;
}

void write_vector(const Eigen::VectorXd& v, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "cannot write '" + path + "'");
  char buf[64];
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const auto res = std::to_chars(buf, buf + sizeof(buf), v(i));
    out << i << ' ' << std::string_view(buf, res.ptr - buf) << '\n';
  }
}

}  // namespace

ConstitutiveBlocks constitutive_blocks(const MaterialSet& material, int dim) {
  if (dim == 3) {
    return {material.c_E, material.e_coup, material.eps_S};
  }
  if (dim != 2) throw Error(ErrorKind::InvalidDimension, "dimension must be 2 or 3");
  constexpr int strain_idx[3] = {0, 2, 4};  // xx, zz, xz
  constexpr int field_idx[2] = {0, 2};      // x, z
  ConstitutiveBlocks b{Eigen::MatrixXd(3, 3), Eigen::MatrixXd(2, 3), Eigen::MatrixXd(2, 2)};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) b.elastic(i, j) = material.c_E(strain_idx[i], strain_idx[j]);
  }
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 3; ++j) b.coupling(i, j) = material.e_coup(field_idx[i], strain_idx[j]);
    for (int j = 0; j < 2; ++j) b.dielectric(i, j) = material.eps_S(field_idx[i], field_idx[j]);
  }
  return b;
}

ConstitutiveBlocks reduce_2d(const MaterialSet& material) {
  ConstitutiveBlocks b = constitutive_blocks(material, 2);
  checked_min_eigenvalue(b.elastic, "reduced elastic block");
  checked_min_eigenvalue(b.dielectric, "reduced dielectric block");
  return b;
}

Eigen::MatrixXd strain_operator(const Eigen::MatrixXd& g) {
  const int dim = static_cast<int>(g.rows());
  const int k = static_cast<int>(g.cols());
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(voigt_size(dim), dim * k);
  for (int a = 0; a < k; ++a) {
    if (dim == 2) {
      const double gx = g(0, a);
      const double gz = g(1, a);
      B(0, 2 * a) = gx;
      B(2, 2 * a) = gz;
      B(1, 2 * a + 1) = gz;
      B(2, 2 * a + 1) = gx;
    } else {
      const double gx = g(0, a);
      const double gy = g(1, a);
      const double gz = g(2, a);
      const int c = 3 * a;
      B(0, c) = gx;
      B(4, c) = gz;
      B(5, c) = gy;
      B(1, c + 1) = gy;
      B(3, c + 1) = gz;
      B(5, c + 1) = gx;
      B(2, c + 2) = gz;
      B(3, c + 2) = gy;
      B(4, c + 2) = gx;
    }
  }
  return B;
}

Eigen::MatrixXd voigt_normal_matrix(const Eigen::VectorXd& n) {
  // Same layout as the strain operator with derivatives replaced by normals.
  Eigen::MatrixXd g(n.size(), 1);
  g.col(0) = n;
  return strain_operator(g);
}

CellGeometry cell_geometry(const Mesh& mesh, std::size_t cell) {
  const int dim = mesh.dim();
  const auto& c = mesh.cells().at(cell);
  const Eigen::VectorXd p0 = point_of(mesh, c[0]);
  Eigen::MatrixXd J(dim, dim);
  double h = 0.0;
  for (int a = 1; a <= dim; ++a) J.col(a - 1) = point_of(mesh, c[a]) - p0;
  for (int a = 0; a <= dim; ++a) {
    for (int b = a + 1; b <= dim; ++b) {
      h = std::max(h, (point_of(mesh, c[a]) - point_of(mesh, c[b])).norm());
    }
  }
  const double det = J.determinant();
  const double volume = det / (dim == 2 ? 2.0 : 6.0);
  if (!(std::abs(volume) > 1e-14 * std::pow(h, dim))) {
    throw Error(ErrorKind::DegenerateCell, "cell " + std::to_string(cell) + " is degenerate");
  }
  CellGeometry geo;
  geo.volume = volume;
  const Eigen::MatrixXd Jinv = J.inverse();
  geo.gradients.resize(dim, dim + 1);
  geo.gradients.rightCols(dim) = Jinv.transpose();
  geo.gradients.col(0) = -geo.gradients.rightCols(dim).rowwise().sum();
  geo.strain = strain_operator(geo.gradients);
  return geo;
}

ElementMatrices element_matrices(const Mesh& mesh, std::size_t cell, const MaterialSet& material) {
  return compute_cell(mesh, cell, material, constitutive_blocks(material, mesh.dim())).em;
}

AssembledSystem assemble(const Mesh& mesh, const DofMap& dofmap, const MaterialSet& material,
                         const AssemblyOptions& options) {
  const int dim = mesh.dim();
  const int k = dim + 1;
  const ConstitutiveBlocks blocks =
      dim == 2 ? reduce_2d(material) : constitutive_blocks(material, 3);
  const std::size_t n_cells = mesh.cell_count();

  // Element work is independent per cell; the global merge below runs in cell
  // order so the result is identical for any thread count.
  std::vector<CellBlocks> cells(n_cells);
  const int threads = std::min<int>(resolve_threads(options.threads), static_cast<int>(n_cells));
  if (threads <= 1) {
    for (std::size_t c = 0; c < n_cells; ++c) cells[c] = compute_cell(mesh, c, material, blocks);
  } else {
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t c = static_cast<std::size_t>(t); c < n_cells; c += threads) {
            cells[c] = compute_cell(mesh, c, material, blocks);
          }
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  Triplets t_m, t_k, t_lb, t_c, t_p, t_l;
  std::vector<int> udof(static_cast<std::size_t>(dim * k));
  for (std::size_t ci = 0; ci < n_cells; ++ci) {
    const auto& nodes = mesh.cells()[ci];
    for (int a = 0; a < k; ++a) {
      for (int c = 0; c < dim; ++c) udof[a * dim + c] = nodes[a] * dim + c;
    }
    const auto& cb = cells[ci];
    for (int i = 0; i < dim * k; ++i) {
      for (int j = 0; j < dim * k; ++j) {
        t_m.emplace_back(udof[i], udof[j], cb.em.mass(i, j));
        t_k.emplace_back(udof[i], udof[j], cb.em.k_uu(i, j));
        t_lb.emplace_back(udof[i], udof[j], cb.l_b(i, j));
      }
      for (int b = 0; b < k; ++b) t_c.emplace_back(udof[i], nodes[b], cb.em.k_uphi(i, b));
    }
    for (int a = 0; a < k; ++a) {
      for (int b = 0; b < k; ++b) {
        t_p.emplace_back(nodes[a], nodes[b], cb.em.k_phiphi(a, b));
        t_l.emplace_back(nodes[a], nodes[b], cb.l(a, b));
      }
    }
  }

  AssembledSystem sys;
  sys.dim = dim;
  sys.rho = material.rho;
  sys.alpha = material.alpha;
  sys.beta = material.beta;
  sys.dofmap = dofmap;
  sys.M = from_triplets(dofmap.n_u, dofmap.n_u, t_m);
  sys.K_uu = from_triplets(dofmap.n_u, dofmap.n_u, t_k);
  sys.L_B = from_triplets(dofmap.n_u, dofmap.n_u, t_lb);
  sys.K_uphi = from_triplets(dofmap.n_u, dofmap.n_phi, t_c);
  sys.K_phiphi = from_triplets(dofmap.n_phi, dofmap.n_phi, t_p);
  sys.L = from_triplets(dofmap.n_phi, dofmap.n_phi, t_l);
  sys.C_damp = material.alpha * sys.M + material.beta * sys.K_uu;
  sys.C_damp.makeCompressed();

  set_lift(sys, build_dirichlet_lift(sys, mesh, dofmap));
  return sys;
}

LiftVectors lift_vectors(const AssembledSystem& system, const Eigen::VectorXd& chi) {
  if (chi.size() != system.dofmap.n_phi) {
    throw Error(ErrorKind::DimensionMismatch, "lift has wrong length");
  }
  return {chi, -(system.K_uphi * chi), system.K_phiphi * chi};
}

LiftVectors build_dirichlet_lift(const AssembledSystem& system, const Mesh& /*mesh*/,
                                 const DofMap& dofmap) {
  Eigen::VectorXd chi = indicator_lift(dofmap);
  if (dofmap.n_free() > 0) {
    const SparseMatrix k_ff = select(system.K_phiphi, dofmap.free_phi, dofmap.free_phi);
    const SparseMatrix k_fc = select(system.K_phiphi, dofmap.free_phi, dofmap.constrained_phi);
    Eigen::VectorXd chi_c(static_cast<Eigen::Index>(dofmap.constrained_phi.size()));
    for (std::size_t i = 0; i < dofmap.constrained_phi.size(); ++i) {
      chi_c(static_cast<Eigen::Index>(i)) = chi(dofmap.constrained_phi[i]);
    }
    Eigen::VectorXd chi_f;
    try {
      chi_f = SpdSolver(k_ff).solve(Eigen::VectorXd(-(k_fc * chi_c)));
    } catch (const Error& e) {
      throw Error(ErrorKind::SingularLift, std::string("harmonic lift solve failed: ") + e.what());
    }
    for (int i = 0; i < dofmap.n_free(); ++i) chi(dofmap.free_phi[i]) = chi_f(i);
  }
  return lift_vectors(system, chi);
}

Eigen::VectorXd indicator_lift(const DofMap& dofmap) {
  Eigen::VectorXd chi = Eigen::VectorXd::Zero(dofmap.n_phi);
  for (int n : dofmap.electrode_nodes) chi(n) = 1.0;
  return chi;
}

void set_lift(AssembledSystem& system, const LiftVectors& lift) {
  system.chi = lift.chi;
  system.f_unit = lift.f_unit;
  system.g_unit = lift.g_unit;
}

const std::vector<QuadraturePoint>& cell_quadrature(int dim) {
  static const std::vector<QuadraturePoint> tri = [] {
    std::vector<QuadraturePoint> q;
    const auto add = [&q](double a, double b, double c, double w) {
      Eigen::VectorXd l(3);
      l << a, b, c;
      q.push_back({l, w});
    };
    const double third = 1.0 / 3.0;
    add(third, third, third, 0.225);
    const double a1 = 0.059715871789770, b1 = 0.470142064105115, w1 = 0.132394152788506;
    add(a1, b1, b1, w1);
    add(b1, a1, b1, w1);
    add(b1, b1, a1, w1);
    const double a2 = 0.797426985353087, b2 = 0.101286507323456, w2 = 0.125939180544827;
    add(a2, b2, b2, w2);
    add(b2, a2, b2, w2);
    add(b2, b2, a2, w2);
    return q;
  }();
  static const std::vector<QuadraturePoint> tet = [] {
    std::vector<QuadraturePoint> q;
    const double a = 0.5854101966249685, b = 0.1381966011250105;
    for (int i = 0; i < 4; ++i) {
      Eigen::VectorXd l = Eigen::VectorXd::Constant(4, b);
      l(i) = a;
      q.push_back({l, 0.25});
    }
    return q;
  }();
  return dim == 2 ? tri : tet;
}

LoadVectors assemble_body_load(const Mesh& mesh, const DofMap& dofmap, const VectorField& body_force,
                               const ScalarField& charge) {
  const int dim = mesh.dim();
  const int k = dim + 1;
  LoadVectors out{Eigen::VectorXd::Zero(dofmap.n_u), Eigen::VectorXd::Zero(dofmap.n_phi)};
  const auto& quad = cell_quadrature(dim);
  for (std::size_t ci = 0; ci < mesh.cell_count(); ++ci) {
    const auto& nodes = mesh.cells()[ci];
    const double vol = mesh.cell_volume(ci);
    for (const auto& qp : quad) {
      Eigen::VectorXd x = Eigen::VectorXd::Zero(dim);
      for (int a = 0; a < k; ++a) x += qp.barycentric(a) * point_of(mesh, nodes[a]);
      const double w = qp.weight * vol;
      if (body_force) {
        const Eigen::VectorXd b = body_force(x);
        for (int a = 0; a < k; ++a) {
          for (int c = 0; c < dim; ++c) out.f(nodes[a] * dim + c) += w * qp.barycentric(a) * b(c);
        }
      }
      if (charge) {
        const double q = charge(x);
        for (int a = 0; a < k; ++a) out.g(nodes[a]) += w * qp.barycentric(a) * q;
      }
    }
  }
  return out;
}

LoadVectors assemble_boundary_load(const Mesh& mesh, const DofMap& dofmap,
                                   const BoundaryVectorField& traction,
                                   const BoundaryScalarField& surface_charge) {
  const int dim = mesh.dim();
  const int nf = dim;
  LoadVectors out{Eigen::VectorXd::Zero(dofmap.n_u), Eigen::VectorXd::Zero(dofmap.n_phi)};

  // Opposite vertex of the owning cell, for orienting normals outward.
  std::map<FacetNodes, int> opposite;
  for (const auto& c : mesh.cells()) {
    for (int skip = 0; skip <= dim; ++skip) {
      FacetNodes f{-1, -1, -1};
      int pos = 0;
      for (int a = 0; a <= dim; ++a) {
        if (a != skip) f[pos++] = c[a];
      }
      std::sort(f.begin(), f.begin() + nf);
      opposite[f] = c[skip];
    }
  }

  struct EdgePoint {
    Eigen::VectorXd bary;
    double weight;
  };
  std::vector<EdgePoint> rule;
  if (dim == 2) {
    const double s = 0.5 * std::sqrt(0.6);
    Eigen::VectorXd p(2);
    p << 0.5 - s, 0.5 + s;
    rule.push_back({p, 5.0 / 18.0});
    p << 0.5 + s, 0.5 - s;
    rule.push_back({p, 5.0 / 18.0});
    p << 0.5, 0.5;
    rule.push_back({p, 8.0 / 18.0});
  } else {
    for (const auto& qp : cell_quadrature(2)) rule.push_back({qp.barycentric, qp.weight});
  }

  for (const auto& facet : mesh.boundary_facets()) {
    FacetNodes key = facet.nodes;
    std::sort(key.begin(), key.begin() + nf);
    const Eigen::VectorXd opp = point_of(mesh, opposite.at(key));
    std::vector<Eigen::VectorXd> p;
    for (int a = 0; a < nf; ++a) p.push_back(point_of(mesh, facet.nodes[a]));
    Eigen::VectorXd normal(dim);
    double measure = 0.0;
    if (dim == 2) {
      const Eigen::VectorXd t = p[1] - p[0];
      measure = t.norm();
      normal << t(1), -t(0);
      normal /= measure;
    } else {
      const Eigen::Vector3d e1 = p[1] - p[0];
      const Eigen::Vector3d e2 = p[2] - p[0];
      const Eigen::Vector3d cr = e1.cross(e2);
      measure = 0.5 * cr.norm();
      normal = cr.normalized();
    }
    if (normal.dot(opp - p[0]) > 0.0) normal = -normal;

    for (const auto& qp : rule) {
      Eigen::VectorXd x = Eigen::VectorXd::Zero(dim);
      for (int a = 0; a < nf; ++a) x += qp.bary(a) * p[a];
      const double w = qp.weight * measure;
      if (traction) {
        const Eigen::VectorXd t = traction(x, normal);
        for (int a = 0; a < nf; ++a) {
          for (int c = 0; c < dim; ++c) out.f(facet.nodes[a] * dim + c) += w * qp.bary(a) * t(c);
        }
      }
      if (surface_charge) {
        const double s = surface_charge(x, normal);
        for (int a = 0; a < nf; ++a) out.g(facet.nodes[a]) += w * qp.bary(a) * s;
      }
    }
  }
  return out;
}

void dump_system(const AssembledSystem& system, const std::string& directory) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create '" + directory + "'");
  const fs::path dir(directory);
  write_triplets(system.M, (dir / "M.txt").string());
  write_triplets(system.K_uu, (dir / "K_uu.txt").string());
  write_triplets(system.C_damp, (dir / "C_damp.txt").string());
  write_triplets(system.K_uphi, (dir / "K_uphi.txt").string());
  write_triplets(system.K_phiphi, (dir / "K_phiphi.txt").string());
  write_vector(system.chi, (dir / "chi.txt").string());
  write_vector(system.f_unit, (dir / "f_unit.txt").string());
  write_vector(system.g_unit, (dir / "g_unit.txt").string());
}

}  // namespace piezo
