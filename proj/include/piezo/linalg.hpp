#pragma once

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace piezo {

/// Compressed-row storage with sorted column indices.
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

SparseMatrix select(const SparseMatrix& a, const std::vector<int>& rows,
                    const std::vector<int>& cols);

/// max|A - A^T| / max|A| (0 for an all-zero matrix).
double symmetry_defect(const SparseMatrix& a);

/// Writes `row col value` lines sorted by (row, col).
void write_triplets(const SparseMatrix& a, const std::string& path);
std::string format_triplets(const SparseMatrix& a);

/// Sparse Cholesky with AMD ordering and iterative refinement. Throws
/// SolveFailure if the factorization breaks down.
class SpdSolver {
 public:
  SpdSolver() = default;
  explicit SpdSolver(const SparseMatrix& a);

  [[nodiscard]] Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  [[nodiscard]] Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const;
  [[nodiscard]] Eigen::Index size() const noexcept { return n_; }

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
  Eigen::Index n_ = 0;
};

/// LDL^T for symmetric quasi-definite matrices [[A, B], [B^T, -C]] with A and
/// C positive definite. Rows and columns are equilibrated to unit diagonal
/// before factorization; solves are refined against the original matrix.
class QuasiDefiniteSolver {
 public:
  QuasiDefiniteSolver() = default;
  explicit QuasiDefiniteSolver(const SparseMatrix& a);

  [[nodiscard]] Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  [[nodiscard]] Eigen::Index size() const noexcept { return n_; }

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
  Eigen::Index n_ = 0;
};

/// Backward error ||b - A x||_inf / (||A||_inf ||x||_inf + ||b||_inf).
double relative_residual(const SparseMatrix& a, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& b);

}  // namespace piezo
