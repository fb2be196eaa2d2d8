#include "piezo/verify.hpp"

#include <algorithm>
#include <array>
#include <functional>
#include <limits>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "piezo/error.hpp"

namespace piezo {

namespace {

// ---------------------------------------------------------------------------
// Dormand-Prince 5(4)
// ---------------------------------------------------------------------------

constexpr double kC[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
constexpr double kA[7][6] = {
    {},
    {1.0 / 5},
    {3.0 / 40, 9.0 / 40},
    {44.0 / 45, -56.0 / 15, 32.0 / 9},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
    {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
};
// Fifth-order weights minus embedded fourth-order weights.
constexpr double kE[7] = {71.0 / 57600,      0.0,         -71.0 / 16695, 71.0 / 1920,
                          -17253.0 / 339200, 22.0 / 525, -1.0 / 40};

struct DenseModel {
  int n = 0;
  int nf = 0;
  Eigen::MatrixXd M, C, K, coupling, dielectric;
  Eigen::LLT<Eigen::MatrixXd> mass;
  Eigen::LLT<Eigen::MatrixXd> diel;
  const SemiDiscreteSystem* sys = nullptr;
  const Excitation* exc = nullptr;

  [[nodiscard]] Eigen::VectorXd phi_f(const Eigen::VectorXd& u, double t) const {
    if (nf == 0) return Eigen::VectorXd::Zero(0);
    return diel.solve(coupling.transpose() * u - sys->restrict_phi(exc->g(t)));
  }

  // y = (u, v, gamma, work)
  [[nodiscard]] Eigen::VectorXd rhs(double t, const Eigen::VectorXd& y, Side side) const {
    const auto u = y.segment(0, n);
    const auto v = y.segment(n, n);
    const Eigen::VectorXd phi = phi_f(u, t);
    const Eigen::VectorXd f = exc->f(t);
    Eigen::VectorXd force = f - C * v - K * u;
    if (nf > 0) force -= coupling * phi;
    Eigen::VectorXd dy(2 * n + 2);
    dy.segment(0, n) = v;
    dy.segment(n, n) = mass.solve(force);
    dy(2 * n) = 2.0 * v.dot(C * v);
    double work = 2.0 * f.dot(v);
    if (nf > 0) work -= 2.0 * sys->restrict_phi(exc->g_rate(t, side)).dot(phi);
    dy(2 * n + 1) = work;
    return dy;
  }

  [[nodiscard]] double eta_tilde(const Eigen::VectorXd& y, double t) const {
    const auto u = y.segment(0, n);
    const auto v = y.segment(n, n);
    double e = v.dot(M * v) + u.dot(K * u);
    if (nf > 0) {
      const Eigen::VectorXd phi = phi_f(u, t);
      e += phi.dot(dielectric * phi);
    }
    return e;
  }
};

struct BlockScales {
  double u = 0.0, v = 0.0, energy = 0.0;

  void update(const Eigen::VectorXd& y, int n) {
    u = std::max(u, y.segment(0, n).cwiseAbs().maxCoeff());
    v = std::max(v, y.segment(n, n).cwiseAbs().maxCoeff());
    energy = std::max({energy, std::abs(y(2 * n)), std::abs(y(2 * n + 1))});
  }
};

double error_norm(const Eigen::VectorXd& err, const Eigen::VectorXd& y0, const Eigen::VectorXd& y1,
                  BlockScales s, int n, double rtol, double atol) {
  // A block that starts at zero is measured against the candidate's own size.
  s.update(y1, n);
  double sum = 0.0;
  const auto size = err.size();
  for (Eigen::Index i = 0; i < size; ++i) {
    const double block = i < n ? s.u : (i < 2 * n ? s.v : s.energy);
    double sc = rtol * std::max(std::abs(y0(i)), std::abs(y1(i))) + atol * block;
    if (!(sc > 0.0)) sc = 1e-300;
    const double r = err(i) / sc;
    sum += r * r;
  }
  return std::sqrt(sum / static_cast<double>(size));
}

OracleSample make_sample(const DenseModel& m, const Eigen::VectorXd& y, double t, double eta0) {
  OracleSample s;
  s.t = t;
  s.u = y.segment(0, m.n);
  s.v = y.segment(m.n, m.n);
  s.phi0 = m.nf > 0 ? m.sys->expand_phi(m.phi_f(s.u, t)) : Eigen::VectorXd::Zero(m.sys->n_phi);
  s.eta_tilde = m.eta_tilde(y, t);
  s.gamma = y(2 * m.n);
  s.work = y(2 * m.n + 1);
  s.F_l = s.eta_tilde + s.gamma;
  s.F_r = eta0 + s.work;
  return s;
}

Eigen::MatrixXd dense(const SparseMatrix& a) { return Eigen::MatrixXd(a); }

}  // namespace

OracleRun dense_oracle(const SemiDiscreteSystem& sys, const Excitation& excitation,
                       const Eigen::VectorXd& u0, const Eigen::VectorXd& u1, double t_end,
                       const OracleOptions& options) {
  const int n = sys.n_u();
  if (static_cast<std::size_t>(n) + static_cast<std::size_t>(sys.n_phi) > options.max_dofs) {
    std::ostringstream msg;
    msg << "dense oracle limited to " << options.max_dofs << " DOFs, system has "
        << n + sys.n_phi;
    throw Error(ErrorKind::TooLarge, msg.str());
  }
  if (u0.size() != n || u1.size() != n || excitation.n_u != n || excitation.n_phi != sys.n_phi) {
    throw Error(ErrorKind::DimensionMismatch, "oracle inputs do not match the system size");
  }
  if (!(t_end >= 0.0) || !std::isfinite(t_end)) {
    throw Error(ErrorKind::InvalidScalar, "t_end must be finite and nonnegative");
  }

  DenseModel m;
  m.n = n;
  m.nf = sys.n_free();
  m.M = dense(sys.M);
  m.C = dense(sys.C);
  m.K = dense(sys.K);
  m.coupling = dense(sys.coupling);
  m.dielectric = dense(sys.dielectric);
  m.sys = &sys;
  m.exc = &excitation;
  m.mass.compute(m.M);
  if (m.mass.info() != Eigen::Success) throw Error(ErrorKind::SolveFailure, "mass matrix is not SPD");
  if (m.nf > 0) {
    m.diel.compute(m.dielectric);
    if (m.diel.info() != Eigen::Success) {
      throw Error(ErrorKind::SolveFailure, "dielectric matrix is not SPD");
    }
  }

  // Segment ends: load kinks, requested samples, t_end.
  std::vector<double> cuts;
  for (double b : excitation.breakpoints()) {
    if (b > 0.0 && b < t_end) cuts.push_back(b);
  }
  std::vector<double> samples;
  for (double s : options.sample_times) {
    if (s > 0.0 && s < t_end) samples.push_back(s);
  }
  samples.push_back(t_end);
  cuts.insert(cuts.end(), samples.begin(), samples.end());
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  std::sort(samples.begin(), samples.end());

  Eigen::VectorXd y(2 * n + 2);
  y << u0, u1, 0.0, 0.0;
  const double eta0 = m.eta_tilde(y, 0.0);

  OracleRun out;
  out.rtol = options.rtol;
  out.samples.push_back(make_sample(m, y, 0.0, eta0));
  if (t_end == 0.0) return out;

  BlockScales scales;
  scales.update(y, n);
  scales.energy = std::max(scales.energy, eta0);

  double t = 0.0;
  double h = 0.0;
  std::size_t next_sample = 0;
  std::array<Eigen::VectorXd, 7> k;
  for (double b : cuts) {
    const double a = t;
    const double seg = b - a;
    if (!(seg > 0.0)) continue;
    const auto side_at = [a, b](double s) { return (s - a) < (b - s) ? Side::Right : Side::Left; };
    if (!(h > 0.0)) h = 1e-2 * seg;
    h = std::min(h, seg);
    k[0] = m.rhs(t, y, Side::Right);
    while (t < b) {
      bool last = false;
      const double h_try = h;
      if (t + h >= b - 1e-14 * std::max(1.0, std::abs(b))) {
        h = b - t;
        last = true;
      }
      Eigen::VectorXd stage;
      for (int i = 1; i < 7; ++i) {
        stage = y;
        for (int j = 0; j < i; ++j) {
          if (kA[i][j] != 0.0) stage += (h * kA[i][j]) * k[static_cast<std::size_t>(j)];
        }
        const double ts = (last && kC[i] == 1.0) ? b : t + kC[i] * h;
        k[static_cast<std::size_t>(i)] = m.rhs(ts, stage, side_at(ts));
      }
      // stage now holds the fifth-order solution (row 7 equals the weights).
      Eigen::VectorXd err = Eigen::VectorXd::Zero(y.size());
      for (int i = 0; i < 7; ++i) {
        if (kE[i] != 0.0) err += (h * kE[i]) * k[static_cast<std::size_t>(i)];
      }
      const double en = error_norm(err, y, stage, scales, n, options.rtol, options.atol);
      if (!std::isfinite(en)) {
        throw Error(ErrorKind::NonFiniteState, "oracle state became non-finite");
      }
      if (en <= 1.0) {
        t = last ? b : t + h;
        y = stage;
        k[0] = k[6];
        scales.update(y, n);
        ++out.accepted_steps;
        const double grow = en > 0.0 ? std::min(5.0, 0.9 * std::pow(en, -0.2)) : 5.0;
        if (!last) h *= grow;
        else h = std::max(h_try, h * grow);
      } else {
        ++out.rejected_steps;
        h *= std::max(0.2, 0.9 * std::pow(en, -0.2));
      }
      if (h < 1e-14 * std::max(1.0, std::abs(t)) && t < b) {
        std::ostringstream msg;
        msg << "oracle step size underflow at t = " << t;
        throw Error(ErrorKind::StiffnessFailure, msg.str());
      }
      if (out.accepted_steps + out.rejected_steps > options.max_steps) {
        throw Error(ErrorKind::StiffnessFailure, "oracle exceeded its step budget");
      }
    }
    if (next_sample < samples.size() && samples[next_sample] == b) {
      out.samples.push_back(make_sample(m, y, b, eta0));
      ++next_sample;
    }
  }
  return out;
}

double oracle_identity_residual(const OracleRun& run) {
  double max_fr = 1.0;
  double max_res = 0.0;
  for (const auto& s : run.samples) {
    max_fr = std::max(max_fr, s.F_r);
    max_res = std::max(max_res, std::abs(s.F_l - s.F_r));
  }
  return max_res / max_fr;
}

OracleComparison compare_with_oracle(const SemiDiscreteSystem& sys, const Excitation& excitation,
                                     const Eigen::VectorXd& u0, const Eigen::VectorXd& u1,
                                     const RunOptions& options, const OracleRun& reference) {
  const OracleSample& ref = reference.terminal();
  if (std::abs(ref.t - options.t_end) > 1e-12 * std::max(1.0, options.t_end)) {
    throw Error(ErrorKind::PreconditionViolated, "oracle run does not end at t_end");
  }
  const State s = run(sys, excitation, u0, u1, options);
  const int n = sys.n_u();
  Eigen::VectorXd a(2 * n), b(2 * n);
  a << s.u, s.v;
  b << ref.u, ref.v;
  OracleComparison c;
  const double nb = b.norm();
  c.rel_diff = (a - b).norm() / (nb > 0.0 ? nb : 1.0);
  const double np = ref.phi0.norm();
  c.rel_diff_phi = (s.phi0 - ref.phi0).norm() / (np > 0.0 ? np : 1.0);
  return c;
}

// ---------------------------------------------------------------------------
// Manufactured solutions
// ---------------------------------------------------------------------------

namespace {

/// Polynomial in (x, z) given as coefficient * x^px * z^pz terms.
struct Poly {
  struct Term {
    double c;
    int px;
    int pz;
  };
  std::vector<Term> terms;

  [[nodiscard]] double operator()(double x, double z, int dx = 0, int dz = 0) const {
    double sum = 0.0;
    for (const Term& t : terms) {
      if (t.px < dx || t.pz < dz) continue;
      double c = t.c;
      for (int i = 0; i < dx; ++i) c *= t.px - i;
      for (int i = 0; i < dz; ++i) c *= t.pz - i;
      sum += c * std::pow(x, t.px - dx) * std::pow(z, t.pz - dz);
    }
    return sum;
  }
};

struct Manufactured {
  Poly p1, p2, q;
  // T and its first three derivatives; s and its first derivative.
  std::array<std::function<double(double)>, 4> T;
  std::array<std::function<double(double)>, 2> s;
};

Manufactured manufactured_case(ManufacturedKind kind) {
  Manufactured m;
  const auto zero = [](double) { return 0.0; };
  switch (kind) {
    case ManufacturedKind::Constant:
      m.p1 = {{{0.3, 0, 0}}};
      m.p2 = {{{-0.2, 0, 0}}};
      m.q = {};
      m.T = {[](double) { return 1.0; }, zero, zero, zero};
      m.s = {zero, zero};
      break;
    case ManufacturedKind::Affine:
      m.p1 = {{{0.1, 0, 0}, {0.2, 1, 0}, {-0.3, 0, 1}}};
      m.p2 = {{{-0.1, 0, 0}, {0.3, 1, 0}, {0.1, 0, 1}}};
      m.q = {{{1.0, 0, 1}}};
      m.T = {[](double t) { return 1.0 + t; }, [](double) { return 1.0; }, zero, zero};
      m.s = {[](double t) { return t; }, [](double) { return 1.0; }};
      break;
    case ManufacturedKind::Quadratic:
      m.p1 = {{{1.0, 2, 0}, {1.0, 1, 1}, {-0.5, 0, 2}}};
      m.p2 = {{{0.5, 2, 0}, {-1.0, 1, 1}, {1.0, 0, 2}}};
      m.q = {{{1.0, 0, 1}, {1.0, 1, 1}, {-1.0, 1, 2}}};
      m.T = {[](double t) { return std::cos(t); }, [](double t) { return -std::sin(t); },
             [](double t) { return -std::cos(t); }, [](double t) { return std::sin(t); }};
      m.s = {[](double t) { return std::sin(t); }, [](double t) { return std::cos(t); }};
      break;
  }
  return m;
}

/// Pointwise fields of the manufactured pair for the reduced 2D blocks.
struct MmsFields {
  const Manufactured* m;
  ConstitutiveBlocks blocks;

  // Engineering strain (xx, zz, xz) of P and its x / z derivatives.
  [[nodiscard]] Eigen::Vector3d strain(double x, double z, int dx, int dz) const {
    const Poly& a = m->p1;
    const Poly& b = m->p2;
    return {a(x, z, dx + 1, dz), b(x, z, dx, dz + 1), a(x, z, dx, dz + 1) + b(x, z, dx + 1, dz)};
  }
  [[nodiscard]] Eigen::Vector2d grad_q(double x, double z, int dx, int dz) const {
    return {m->q(x, z, dx + 1, dz), m->q(x, z, dx, dz + 1)};
  }

  static Eigen::Vector2d div_voigt(const Eigen::Vector3d& sx, const Eigen::Vector3d& sz) {
    return {sx(0) + sz(2), sx(2) + sz(1)};
  }

  [[nodiscard]] Eigen::Vector2d div_sigma_el(double x, double z) const {
    return div_voigt(blocks.elastic * strain(x, z, 1, 0), blocks.elastic * strain(x, z, 0, 1));
  }
  [[nodiscard]] Eigen::Vector2d div_sigma_cp(double x, double z) const {
    const Eigen::MatrixXd et = blocks.coupling.transpose();
    return div_voigt(et * grad_q(x, z, 1, 0), et * grad_q(x, z, 0, 1));
  }
  [[nodiscard]] double div_d_u(double x, double z) const {
    return (blocks.coupling * strain(x, z, 1, 0))(0) + (blocks.coupling * strain(x, z, 0, 1))(1);
  }
  [[nodiscard]] double div_d_phi(double x, double z) const {
    return (blocks.dielectric * grad_q(x, z, 1, 0))(0) + (blocks.dielectric * grad_q(x, z, 0, 1))(1);
  }
  [[nodiscard]] Eigen::VectorXd sigma_el(double x, double z) const {
    return blocks.elastic * strain(x, z, 0, 0);
  }
  [[nodiscard]] Eigen::VectorXd sigma_cp(double x, double z) const {
    return blocks.coupling.transpose() * grad_q(x, z, 0, 0);
  }
  [[nodiscard]] Eigen::VectorXd d_u(double x, double z) const {
    return blocks.coupling * strain(x, z, 0, 0);
  }
  [[nodiscard]] Eigen::VectorXd d_phi(double x, double z) const {
    return blocks.dielectric * grad_q(x, z, 0, 0);
  }
  [[nodiscard]] Eigen::Vector2d p(double x, double z) const { return {m->p1(x, z), m->p2(x, z)}; }
};

LoadVectors add(LoadVectors a, const LoadVectors& b) {
  a.f += b.f;
  a.g += b.g;
  return a;
}

double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

MmsLevel run_level(const MaterialSet& material, const Manufactured& mc, int n, const MmsOptions& opt) {
  const Mesh mesh = generate_rect(n, n, 1.0, 1.0);
  const DofMap dofmap = build_dofmap(mesh);
  const AssembledSystem system = assemble(mesh, dofmap, material);
  const SemiDiscreteSystem sys = semi_discrete(system);
  const MmsFields F{&mc, reduce_2d(material)};
  const ScalarField no_charge;
  const BoundaryScalarField no_surface;
  const double rho = material.rho;

  const auto x_of = [](const Eigen::VectorXd& p) { return std::pair{p(0), p(1)}; };

  // theta = T'': inertia.
  LoadVectors inertia = assemble_body_load(
      mesh, dofmap,
      [&](const Eigen::VectorXd& p) -> Eigen::VectorXd {
        auto [x, z] = x_of(p);
        return rho * F.p(x, z);
      },
      no_charge);
  // theta = T': damping.
  LoadVectors damping = add(
      assemble_body_load(
          mesh, dofmap,
          [&](const Eigen::VectorXd& p) -> Eigen::VectorXd {
            auto [x, z] = x_of(p);
            return material.alpha * rho * F.p(x, z) - material.beta * F.div_sigma_el(x, z);
          },
          no_charge),
      assemble_boundary_load(
          mesh, dofmap,
          [&](const Eigen::VectorXd& p, const Eigen::VectorXd& nrm) -> Eigen::VectorXd {
            auto [x, z] = x_of(p);
            return material.beta * (voigt_normal_matrix(nrm).transpose() * F.sigma_el(x, z));
          },
          no_surface));
  // theta = T: elastic stress and charge from strain.
  LoadVectors elastic = add(
      assemble_body_load(
          mesh, dofmap,
          [&](const Eigen::VectorXd& p) -> Eigen::VectorXd {
            auto [x, z] = x_of(p);
            return -F.div_sigma_el(x, z);
          },
          [&](const Eigen::VectorXd& p) {
            auto [x, z] = x_of(p);
            return -F.div_d_u(x, z);
          }),
      assemble_boundary_load(
          mesh, dofmap,
          [&](const Eigen::VectorXd& p, const Eigen::VectorXd& nrm) -> Eigen::VectorXd {
            auto [x, z] = x_of(p);
            return voigt_normal_matrix(nrm).transpose() * F.sigma_el(x, z);
          },
          [&](const Eigen::VectorXd& p, const Eigen::VectorXd& nrm) {
            auto [x, z] = x_of(p);
            return nrm.dot(F.d_u(x, z));
          }));
  // theta = s: potential field minus the lift contribution.
  LoadVectors electric = add(
      assemble_body_load(
          mesh, dofmap,
          [&](const Eigen::VectorXd& p) -> Eigen::VectorXd {
            auto [x, z] = x_of(p);
            return -F.div_sigma_cp(x, z);
          },
          [&](const Eigen::VectorXd& p) {
            auto [x, z] = x_of(p);
            return F.div_d_phi(x, z);
          }),
      assemble_boundary_load(
          mesh, dofmap,
          [&](const Eigen::VectorXd& p, const Eigen::VectorXd& nrm) -> Eigen::VectorXd {
            auto [x, z] = x_of(p);
            return voigt_normal_matrix(nrm).transpose() * F.sigma_cp(x, z);
          },
          [&](const Eigen::VectorXd& p, const Eigen::VectorXd& nrm) {
            auto [x, z] = x_of(p);
            return -nrm.dot(F.d_phi(x, z));
          }));
  electric.f += system.f_unit;
  electric.g += system.g_unit;

  const auto fn = [](std::function<double(double)> v, std::function<double(double)> r) {
    return TimeFunction::analytic(std::move(v), std::move(r));
  };
  Excitation exc;
  exc.n_u = dofmap.n_u;
  exc.n_phi = dofmap.n_phi;
  const Eigen::VectorXd no_g = Eigen::VectorXd::Zero(dofmap.n_phi);
  exc.terms.push_back({fn(mc.T[2], mc.T[3]), inertia.f, no_g});
  exc.terms.push_back({fn(mc.T[1], mc.T[2]), damping.f, no_g});
  exc.terms.push_back({fn(mc.T[0], mc.T[1]), elastic.f, elastic.g});
  exc.terms.push_back({fn(mc.s[0], mc.s[1]), electric.f, electric.g});

  Eigen::VectorXd u0(dofmap.n_u), u1(dofmap.n_u);
  for (std::size_t i = 0; i < mesh.node_count(); ++i) {
    const auto& pt = mesh.nodes()[i];
    const Eigen::Vector2d p = F.p(pt[0], pt[1]);
    u0.segment<2>(static_cast<Eigen::Index>(2 * i)) = mc.T[0](0.0) * p;
    u1.segment<2>(static_cast<Eigen::Index>(2 * i)) = mc.T[1](0.0) * p;
  }

  MmsLevel lvl;
  lvl.n = n;
  lvl.h = 1.0 / n;
  lvl.dt = opt.dt_per_h * lvl.h;
  const State s = run(sys, exc, u0, u1, RunOptions{lvl.dt, opt.t_end, opt.hht});

  const double te = opt.t_end;
  const Eigen::VectorXd phi = s.phi0 + mc.s[0](te) * system.chi;
  double eu = 0.0, ep = 0.0;
  const auto& rule = cell_quadrature(2);
  for (std::size_t c = 0; c < mesh.cell_count(); ++c) {
    const auto& cell = mesh.cells()[c];
    const double vol = std::abs(mesh.cell_volume(c));
    for (const auto& qp : rule) {
      double x = 0.0, z = 0.0, ph = 0.0;
      Eigen::Vector2d uh = Eigen::Vector2d::Zero();
      for (int a = 0; a < 3; ++a) {
        const int node = cell[static_cast<std::size_t>(a)];
        const double w = qp.barycentric(a);
        x += w * mesh.nodes()[static_cast<std::size_t>(node)][0];
        z += w * mesh.nodes()[static_cast<std::size_t>(node)][1];
        uh += w * s.u.segment<2>(2 * node);
        ph += w * phi(node);
      }
      const Eigen::Vector2d du = uh - mc.T[0](te) * F.p(x, z);
      const double dp = ph - mc.s[0](te) * mc.q(x, z);
      eu += qp.weight * vol * du.squaredNorm();
      ep += qp.weight * vol * dp * dp;
    }
  }
  lvl.err_u = std::sqrt(eu);
  lvl.err_phi = std::sqrt(ep);
  return lvl;
}

}  // namespace

MmsReport manufactured_convergence(const MaterialSet& material, const MmsOptions& options) {
  if (options.levels.empty()) throw Error(ErrorKind::ConfigError, "no refinement levels given");
  if (options.kind == ManufacturedKind::Quadratic && options.levels.size() < 3) {
    throw Error(ErrorKind::ConfigError, "convergence study needs at least three levels");
  }
  for (std::size_t i = 0; i < options.levels.size(); ++i) {
    if (options.levels[i] < 1) throw Error(ErrorKind::ConfigError, "refinement level must be positive");
    if (i > 0 && options.levels[i] <= options.levels[i - 1]) {
      throw Error(ErrorKind::ConfigError, "refinement levels must increase");
    }
  }
  const Manufactured mc = manufactured_case(options.kind);
  MmsReport report;
  for (int n : options.levels) {
    report.levels.push_back(run_level(material, mc, n, options));
    report.max_error = std::max({report.max_error, report.levels.back().err_u,
                                 report.levels.back().err_phi});
  }
  if (options.kind == ManufacturedKind::Quadratic) {
    std::vector<double> lh, lu, lp;
    for (const auto& l : report.levels) {
      lh.push_back(std::log(l.h));
      lu.push_back(std::log(l.err_u));
      lp.push_back(std::log(l.err_phi));
    }
    report.rate_u = least_squares_slope(lh, lu);
    report.rate_phi = least_squares_slope(lh, lp);
    const auto in_range = [&](double r) { return r >= options.min_rate && r <= options.max_rate; };
    report.passed = in_range(report.rate_u) && in_range(report.rate_phi);
    if (!report.passed && options.enforce) {
      std::ostringstream msg;
      msg << "observed rates u = " << report.rate_u << ", phi = " << report.rate_phi
          << " outside [" << options.min_rate << ", " << options.max_rate << "]";
      throw Error(ErrorKind::RateFailure, msg.str());
    }
  } else {
    report.passed = report.max_error <= 1e-10;
    if (!report.passed && options.enforce) {
      std::ostringstream msg;
      msg << "solution in the discrete space reproduced with error " << report.max_error;
      throw Error(ErrorKind::RateFailure, msg.str());
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Linearity / a-priori bound
// ---------------------------------------------------------------------------

SupNorms trajectory_sup_norms(const SemiDiscreteSystem& sys, const Excitation& excitation,
                              const Eigen::VectorXd& u0, const Eigen::VectorXd& u1,
                              const RunOptions& options) {
  SupNorms n;
  run(sys, excitation, u0, u1, options, [&](std::size_t, const State& s) {
    n.u = std::max(n.u, s.u.norm());
    n.v = std::max(n.v, s.v.norm());
    n.a = std::max(n.a, s.a.norm());
    n.phi0 = std::max(n.phi0, s.phi0.norm());
  });
  return n;
}

ScalingReport check_apriori_bound(const SemiDiscreteSystem& sys, const Excitation& excitation,
                                  const Eigen::VectorXd& u0, const Eigen::VectorXd& u1,
                                  const RunOptions& options, const std::vector<double>& scale_factors,
                                  double tol) {
  ScalingReport r;
  r.base = trajectory_sup_norms(sys, excitation, u0, u1, options);
  r.input_norm = u0.norm() + u1.norm();
  for (const auto& term : excitation.terms) {
    double m = 0.0;
    if (term.scale.is_table()) {
      for (double v : term.scale.table_values()) m = std::max(m, std::abs(v));
    }
    r.input_norm += m;
  }
  const auto total = [](const SupNorms& s) { return s.u + s.v + s.phi0; };
  const double c_base = r.input_norm > 0.0 ? total(r.base) / r.input_norm : 0.0;
  r.passed = true;
  for (double s : scale_factors) {
    ScalingEntry e;
    e.s = s;
    e.norms = trajectory_sup_norms(sys, excitation.scaled(s), s * u0, s * u1, options);
    if (s == 0.0) {
      e.max_rel_dev = std::max({e.norms.u, e.norms.v, e.norms.a, e.norms.phi0});
      r.passed = r.passed && e.max_rel_dev <= 1e-12;
    } else {
      const auto dev = [&](double got, double base) {
        const double want = std::abs(s) * base;
        return want > 0.0 ? std::abs(got - want) / want : got;
      };
      e.max_rel_dev = std::max({dev(e.norms.u, r.base.u), dev(e.norms.v, r.base.v),
                                dev(e.norms.a, r.base.a), dev(e.norms.phi0, r.base.phi0)});
      if (r.input_norm > 0.0) {
        e.c_h = total(e.norms) / (std::abs(s) * r.input_norm);
        if (c_base > 0.0) e.max_rel_dev = std::max(e.max_rel_dev, std::abs(e.c_h - c_base) / c_base);
      }
      r.passed = r.passed && e.max_rel_dev <= tol;
    }
    r.max_rel_dev = std::max(r.max_rel_dev, e.max_rel_dev);
    r.entries.push_back(e);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Coercivity, lift independence, uniqueness
// ---------------------------------------------------------------------------

CoercivityReport check_coercivity(const AssembledSystem& system, const MaterialSet& material,
                                  int n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw Error(ErrorKind::ConfigError, "coercivity check needs samples >= 1");
  CoercivityReport r;
  r.lambda_mech = material.lambda_mech;
  r.lambda_elec = material.lambda_elec;
  r.samples = n_samples;
  r.min_quotient_mech = std::numeric_limits<double>::infinity();
  r.min_quotient_elec = std::numeric_limits<double>::infinity();

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  const auto& free = system.dofmap.free_phi;
  const auto violated = [](double lhs, double rhs) {
    return lhs < rhs - 1e-12 * std::max(std::abs(lhs), std::abs(rhs)) - 1e-12;
  };
  for (int k = 0; k < n_samples; ++k) {
    Eigen::VectorXd x(system.dofmap.n_u);
    for (auto& c : x) c = dist(rng);
    const double kx = x.dot(system.K_uu * x);
    const double lx = x.dot(system.L_B * x);
    if (lx > 0.0) r.min_quotient_mech = std::min(r.min_quotient_mech, kx / lx);
    if (violated(kx, r.lambda_mech * lx)) {
      std::ostringstream msg;
      msg << "sample " << k << ": x^T K_uu x = " << kx << " < lambda_mech x^T L_B x = "
          << r.lambda_mech * lx;
      throw Error(ErrorKind::CoercivityViolation, msg.str());
    }

    Eigen::VectorXd y = Eigen::VectorXd::Zero(system.dofmap.n_phi);
    for (int i : free) y(i) = dist(rng);
    const double ky = y.dot(system.K_phiphi * y);
    const double ly = y.dot(system.L * y);
    if (ly > 0.0) r.min_quotient_elec = std::min(r.min_quotient_elec, ky / ly);
    if (violated(ky, r.lambda_elec * ly)) {
      std::ostringstream msg;
      msg << "sample " << k << ": y^T K_phiphi y = " << ky << " < lambda_elec y^T L y = "
          << r.lambda_elec * ly;
      throw Error(ErrorKind::CoercivityViolation, msg.str());
    }
  }
  return r;
}

LiftReport check_lift_independence(const Mesh& mesh, const MaterialSet& material, const Drive& drive,
                                   const Eigen::VectorXd& alternative_lift,
                                   const RunOptions& options, double tol) {
  const DofMap dofmap = build_dofmap(mesh);
  if (alternative_lift.size() != dofmap.n_phi) {
    throw Error(ErrorKind::DimensionMismatch, "alternative lift has the wrong size");
  }
  for (int i : dofmap.electrode_nodes) {
    if (alternative_lift(i) != 1.0) {
      throw Error(ErrorKind::PreconditionViolated, "alternative lift must equal 1 on the electrode");
    }
  }
  for (int i : dofmap.ground_nodes) {
    if (alternative_lift(i) != 0.0) {
      throw Error(ErrorKind::PreconditionViolated, "alternative lift must vanish on the ground");
    }
  }
  const AssembledSystem a = assemble(mesh, dofmap, material);
  AssembledSystem b = a;
  set_lift(b, lift_vectors(b, alternative_lift));

  struct Track {
    std::vector<Eigen::VectorXd> u, phi;
  };
  const auto trace = [&](const AssembledSystem& system) {
    const SemiDiscreteSystem sys = semi_discrete(system);
    const Excitation exc = drive_excitation(system, drive);
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(dofmap.n_u);
    Track tr;
    run(sys, exc, zero, zero, options, [&](std::size_t, const State& s) {
      tr.u.push_back(s.u);
      tr.phi.push_back(s.phi0 + drive.phi_e.value(s.t) * system.chi);
    });
    return tr;
  };
  const Track ta = trace(a);
  const Track tb = trace(b);
  double max_u = 0.0, max_phi = 0.0, du = 0.0, dphi = 0.0;
  for (std::size_t k = 0; k < ta.u.size(); ++k) {
    max_u = std::max(max_u, ta.u[k].norm());
    max_phi = std::max(max_phi, ta.phi[k].norm());
    du = std::max(du, (ta.u[k] - tb.u[k]).norm());
    dphi = std::max(dphi, (ta.phi[k] - tb.phi[k]).norm());
  }
  LiftReport r;
  r.max_rel_diff_u = max_u > 0.0 ? du / max_u : du;
  r.max_rel_diff_phi = max_phi > 0.0 ? dphi / max_phi : dphi;
  r.passed = r.max_rel_diff_u <= tol && r.max_rel_diff_phi <= tol;
  return r;
}

StructuralReport check_structure(const AssembledSystem& system, int max_dense_dofs) {
  StructuralReport r;
  r.symmetry_M = symmetry_defect(system.M);
  r.symmetry_K_uu = symmetry_defect(system.K_uu);
  r.symmetry_C_damp = symmetry_defect(system.C_damp);
  r.symmetry_K_phiphi = symmetry_defect(system.K_phiphi);
  r.max_symmetry_defect =
      std::max({r.symmetry_M, r.symmetry_K_uu, r.symmetry_C_damp, r.symmetry_K_phiphi});
  r.expected_null_space_dim = system.dim == 2 ? 3 : 6;
  if (system.dofmap.n_u <= max_dense_dofs) {
    const Eigen::MatrixXd k = dense(system.K_uu);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k, Eigen::EigenvaluesOnly);
    const Eigen::VectorXd& ev = eig.eigenvalues();
    const double cutoff = 1e-10 * ev.cwiseAbs().maxCoeff();
    r.null_space_dim = static_cast<int>((ev.array().abs() <= cutoff).count());
  }
  r.passed = r.max_symmetry_defect <= 1e-14 &&
             (r.null_space_dim < 0 || r.null_space_dim == r.expected_null_space_dim);
  return r;
}

ZeroDataReport check_zero_data(const AssembledSystem& system, const RunOptions& options,
                               double tol) {
  const SemiDiscreteSystem sys = semi_discrete(system);
  const Excitation exc = drive_excitation(system, Drive::zero());
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(system.dofmap.n_u);
  ZeroDataReport r;
  run(sys, exc, zero, zero, options, [&](std::size_t k, const State& s) {
    r.steps = k;
    r.max_norm = std::max({r.max_norm, s.u.norm(), s.v.norm(), s.a.norm(), s.phi0.norm()});
  });
  r.passed = r.max_norm <= tol;
  return r;
}

}  // namespace piezo
