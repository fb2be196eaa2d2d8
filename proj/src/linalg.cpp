#include "piezo/linalg.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <Eigen/SparseCholesky>

#include "piezo/error.hpp"

namespace piezo {

namespace {

using ColMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;

constexpr double kRefineTarget = 1e-12;
constexpr double kAcceptable = 1e-9;
constexpr int kMaxRefinements = 4;

double inf_norm(const SparseMatrix& a) {
  double best = 0.0;
  for (Eigen::Index r = 0; r < a.outerSize(); ++r) {
    double row = 0.0;
    for (SparseMatrix::InnerIterator it(a, r); it; ++it) row += std::abs(it.value());
    best = std::max(best, row);
  }
  return best;
}

template <typename Factor>
Eigen::VectorXd refine(const SparseMatrix& a, const Factor& solve_raw, const Eigen::VectorXd& b) {
  Eigen::VectorXd x = solve_raw(b);
  double err = relative_residual(a, x, b);
  for (int it = 0; it < kMaxRefinements && err > kRefineTarget; ++it) {
    const Eigen::VectorXd r = b - a * x;
    const Eigen::VectorXd candidate = x + solve_raw(r);
    const double cand_err = relative_residual(a, candidate, b);
    if (!(cand_err < err)) break;
    x = candidate;
    err = cand_err;
  }
  if (!x.allFinite() || err > kAcceptable) {
    std::ostringstream msg;
    msg << "linear solve did not converge (relative residual " << err << ")";
    throw Error(ErrorKind::SolveFailure, msg.str());
  }
  return x;
}

}  // namespace

SparseMatrix select(const SparseMatrix& a, const std::vector<int>& rows,
                    const std::vector<int>& cols) {
  std::vector<int> col_pos(static_cast<std::size_t>(a.cols()), -1);
  for (std::size_t j = 0; j < cols.size(); ++j) col_pos[cols[j]] = static_cast<int>(j);
  std::vector<Eigen::Triplet<double>> trips;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (SparseMatrix::InnerIterator it(a, rows[i]); it; ++it) {
      const int j = col_pos[it.col()];
      if (j >= 0) trips.emplace_back(static_cast<int>(i), j, it.value());
    }
  }
  SparseMatrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

double symmetry_defect(const SparseMatrix& a) {
  const double scale = a.nonZeros() == 0 ? 0.0 : a.coeffs().cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  const SparseMatrix at = a.transpose();
  const SparseMatrix diff = a - at;
  const double d = diff.nonZeros() == 0 ? 0.0 : diff.coeffs().cwiseAbs().maxCoeff();
  return d / scale;
}

std::string format_triplets(const SparseMatrix& a) {
  std::ostringstream out;
  char buf[64];
  for (Eigen::Index r = 0; r < a.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(a, r); it; ++it) {
      const auto res = std::to_chars(buf, buf + sizeof(buf), it.value());
      out << it.row() << ' ' << it.col() << ' ' << std::string_view(buf, res.ptr - buf) << '\n';
    }
  }
  return out.str();
}

void write_triplets(const SparseMatrix& a, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "cannot write '" + path + "'");
  out << format_triplets(a);
}

double relative_residual(const SparseMatrix& a, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& b) {
  if (b.size() == 0) return 0.0;
  const double r = (b - a * x).lpNorm<Eigen::Infinity>();
  const double denom = inf_norm(a) * x.lpNorm<Eigen::Infinity>() + b.lpNorm<Eigen::Infinity>();
  return denom == 0.0 ? r : r / denom;
}

struct SpdSolver::Impl {
  SparseMatrix a;
  Eigen::SimplicialLLT<ColMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> llt;
};

SpdSolver::SpdSolver(const SparseMatrix& a) : n_(a.rows()) {
  if (a.rows() != a.cols()) throw Error(ErrorKind::DimensionMismatch, "SpdSolver needs a square matrix");
  auto impl = std::make_shared<Impl>();
  impl->a = a;
  if (n_ > 0) {
    impl->llt.compute(ColMatrix(a));
    if (impl->llt.info() != Eigen::Success) {
      throw Error(ErrorKind::SolveFailure, "Cholesky factorization failed (matrix not SPD)");
    }
  }
  impl_ = std::move(impl);
}

Eigen::VectorXd SpdSolver::solve(const Eigen::VectorXd& b) const {
  if (b.size() != n_) throw Error(ErrorKind::DimensionMismatch, "SpdSolver::solve size mismatch");
  if (n_ == 0) return {};
  const auto& llt = impl_->llt;
  return refine(impl_->a, [&llt](const Eigen::VectorXd& rhs) -> Eigen::VectorXd { return llt.solve(rhs); }, b);
}

Eigen::MatrixXd SpdSolver::solve(const Eigen::MatrixXd& b) const {
  Eigen::MatrixXd x(b.rows(), b.cols());
  for (Eigen::Index j = 0; j < b.cols(); ++j) x.col(j) = solve(Eigen::VectorXd(b.col(j)));
  return x;
}

struct QuasiDefiniteSolver::Impl {
  SparseMatrix scaled;  // D A D with unit diagonal magnitude
  Eigen::VectorXd scale;
  Eigen::SimplicialLDLT<ColMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt;
};

QuasiDefiniteSolver::QuasiDefiniteSolver(const SparseMatrix& a) : n_(a.rows()) {
  if (a.rows() != a.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "QuasiDefiniteSolver needs a square matrix");
  }
  auto impl = std::make_shared<Impl>();
  impl->scale.resize(n_);
  for (Eigen::Index i = 0; i < n_; ++i) {
    const double d = std::abs(a.coeff(i, i));
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw Error(ErrorKind::SolveFailure, "quasi-definite matrix has a zero diagonal entry");
    }
    impl->scale(i) = 1.0 / std::sqrt(d);
  }
  if (n_ > 0) {
    const auto d = impl->scale.asDiagonal();
    impl->scaled = d * a * d;
    impl->ldlt.compute(ColMatrix(impl->scaled));
    if (impl->ldlt.info() != Eigen::Success) {
      throw Error(ErrorKind::SolveFailure, "LDL^T factorization failed");
    }
  }
  impl_ = std::move(impl);
}

Eigen::VectorXd QuasiDefiniteSolver::solve(const Eigen::VectorXd& b) const {
  if (b.size() != n_) {
    throw Error(ErrorKind::DimensionMismatch, "QuasiDefiniteSolver::solve size mismatch");
  }
  if (n_ == 0) return {};
  const auto& impl = *impl_;
  const Eigen::VectorXd y = refine(
      impl.scaled,
      [&impl](const Eigen::VectorXd& rhs) -> Eigen::VectorXd { return impl.ldlt.solve(rhs); },
      Eigen::VectorXd(impl.scale.cwiseProduct(b)));
  return impl.scale.cwiseProduct(y);
}

}  // namespace piezo
