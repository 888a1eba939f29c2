#include "spreg/moran.hpp"

#include <Eigen/Eigenvalues>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace spreg {

namespace {

void check_full_rank(const Eigen::ColPivHouseholderQR<Eigen::MatrixXd>& qr,
                     Eigen::Index cols) {
  if (qr.rank() < cols) {
    const auto perm = qr.colsPermutation().indices();
    throw std::invalid_argument("design matrix is rank deficient; column " +
                                std::to_string(perm(qr.rank())) +
                                " is linearly dependent on the others");
  }
}

// Lanczos with full reorthogonalization on a dense symmetric operator.
MoranBasis lanczos_top_q(const Eigen::MatrixXd& S, int q, double tol, long max_iter) {
  const Eigen::Index n = S.rows();
  const int m_max = static_cast<int>(std::min<long>(n, max_iter));
  Eigen::MatrixXd V(n, m_max + 1);
  Eigen::VectorXd alpha(m_max), beta(m_max);
  // Deterministic start vector.
  Eigen::VectorXd v = Eigen::VectorXd::Ones(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) += 1e-3 * std::sin(static_cast<double>(i + 1));
  v.normalize();
  V.col(0) = v;
  long iters = 0;
  int m = 0;
  for (; m < m_max; ++m) {
    ++iters;
    Eigen::VectorXd w = S * V.col(m);
    alpha(m) = V.col(m).dot(w);
    w -= alpha(m) * V.col(m);
    if (m > 0) w -= beta(m - 1) * V.col(m - 1);
    // Full reorthogonalization, twice for safety.
    for (int pass = 0; pass < 2; ++pass)
      w -= V.leftCols(m + 1) * (V.leftCols(m + 1).transpose() * w);
    beta(m) = w.norm();
    const bool breakdown = beta(m) < 1e-14;
    const bool check = breakdown || m + 1 >= std::max(2 * q, q + 10);
    if (check || m + 1 == m_max) {
      const int k = m + 1;
      Eigen::MatrixXd T = Eigen::MatrixXd::Zero(k, k);
      for (int i = 0; i < k; ++i) {
        T(i, i) = alpha(i);
        if (i + 1 < k) T(i, i + 1) = T(i + 1, i) = beta(i);
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
      // Residual bound for Ritz pair j: beta_m * |last component|.
      bool converged = k >= q;
      if (converged) {
        for (int j = 0; j < q; ++j) {
          const double res = breakdown ? 0.0 : beta(m) * std::abs(es.eigenvectors()(k - 1, k - 1 - j));
          if (res > tol) {
            converged = false;
            break;
          }
        }
      }
      if (converged || breakdown || m + 1 == m_max) {
        if (!converged && !breakdown)
          throw std::runtime_error("principal_eigs: Lanczos did not converge after " +
                                   std::to_string(iters) + " iterations");
        MoranBasis basis;
        basis.q = q;
        basis.values.resize(q);
        basis.vectors.resize(n, q);
        for (int j = 0; j < q; ++j) {
          basis.values(j) = es.eigenvalues()(k - 1 - j);
          basis.vectors.col(j) = V.leftCols(k) * es.eigenvectors().col(k - 1 - j);
          basis.vectors.col(j).normalize();
        }
        return basis;
      }
    }
    if (breakdown) break;
    V.col(m + 1) = w / beta(m);
  }
  throw std::runtime_error("principal_eigs: Lanczos did not converge after " +
                           std::to_string(iters) + " iterations");
}

}  // namespace

Eigen::MatrixXd projection(const Eigen::MatrixXd& X) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  check_full_rank(qr, X.cols());
  Eigen::HouseholderQR<Eigen::MatrixXd> thin(X);
  Eigen::MatrixXd Qthin =
      thin.householderQ() * Eigen::MatrixXd::Identity(X.rows(), X.cols());
  return Qthin * Qthin.transpose();
}

Eigen::MatrixXd moran_operator(const ArealGraph& graph, const Eigen::MatrixXd& X) {
  const Eigen::MatrixXd P = projection(X);
  const Eigen::MatrixXd R = Eigen::MatrixXd::Identity(graph.n, graph.n) - P;
  return R * graph.adjacency * R;
}

MoranBasis principal_eigs(const Eigen::MatrixXd& S, int q, const Eigen::MatrixXd& residual_to,
                          int dense_cutoff, bool force_iterative) {
  const Eigen::Index n = S.rows();
  if (q < 1 || q > n) throw std::invalid_argument("principal_eigs: need 1 <= q <= n");
  MoranBasis basis;
  if (!force_iterative && n <= dense_cutoff) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    basis.q = q;
    basis.values.resize(q);
    basis.vectors.resize(n, q);
    for (int j = 0; j < q; ++j) {
      basis.values(j) = es.eigenvalues()(n - 1 - j);
      basis.vectors.col(j) = es.eigenvectors().col(n - 1 - j);
    }
  } else {
    basis = lanczos_top_q(S, q, 1e-10, 10L * n);
  }
  basis.residual_to = residual_to;
  return basis;
}

double moran_I(const ArealGraph& graph, const Eigen::MatrixXd& X, const Eigen::VectorXd& v) {
  const Eigen::MatrixXd P = projection(X);
  const Eigen::VectorXd r = v - P * v;
  const double denom = r.squaredNorm();
  if (denom < 1e-12 * std::max(1.0, v.squaredNorm()))
    throw std::invalid_argument("moran_I: v lies in C(X); statistic undefined");
  const double s0 = graph.degrees.sum();  // 1'A1
  return (static_cast<double>(graph.n) / s0) * r.dot(graph.adjacency * r) / denom;
}

void write_basis_csv(const MoranBasis& basis, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_basis_csv: cannot open " + path);
  out.precision(17);
  for (int j = 0; j < basis.q; ++j) out << (j ? "," : "") << basis.values(j);
  out << "\n";
  for (Eigen::Index i = 0; i < basis.vectors.rows(); ++i) {
    for (int j = 0; j < basis.q; ++j) out << (j ? "," : "") << basis.vectors(i, j);
    out << "\n";
  }
}

MoranBasis read_basis_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_basis_csv: cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  if (rows.size() < 2) throw std::runtime_error("read_basis_csv: malformed file");
  MoranBasis basis;
  basis.q = static_cast<int>(rows[0].size());
  basis.values = Eigen::Map<Eigen::VectorXd>(rows[0].data(), basis.q);
  basis.vectors.resize(static_cast<Eigen::Index>(rows.size() - 1), basis.q);
  for (std::size_t i = 1; i < rows.size(); ++i)
    for (int j = 0; j < basis.q; ++j) basis.vectors(static_cast<Eigen::Index>(i - 1), j) = rows[i][static_cast<std::size_t>(j)];
  return basis;
}

}  // namespace spreg
