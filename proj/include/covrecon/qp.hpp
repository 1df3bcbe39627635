#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace covrecon {

template <typename Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

class QpError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class QpInfeasibleError : public QpError {
 public:
  QpInfeasibleError() : QpError("qp: constraint set is empty") {}
};
class QpNotConvexError : public QpError {
 public:
  QpNotConvexError() : QpError("qp: Hessian is not symmetric positive definite") {}
};

/// minimize 0.5 x'Hx + f'x  subject to  A x >= b  (row-wise).
template <typename Scalar>
struct DenseQp {
  MatX<Scalar> H;
  VecX<Scalar> f;
  MatX<Scalar> A;
  VecX<Scalar> b;

  DenseQp() = default;
  DenseQp(MatX<Scalar> hessian, VecX<Scalar> linear)
      : H(std::move(hessian)), f(std::move(linear)), A(0, H.cols()), b(0) {}

  Eigen::Index variables() const { return H.cols(); }
  Eigen::Index rows() const { return A.rows(); }

  void add_row(const VecX<Scalar>& a, Scalar offset) {
    if (a.size() != variables()) throw std::invalid_argument("qp: row length mismatch");
    A.conservativeResize(A.rows() + 1, variables());
    b.conservativeResize(b.size() + 1);
    A.row(A.rows() - 1) = a.transpose();
    b[b.size() - 1] = offset;
  }
};

template <typename Scalar>
struct QpSolution {
  VecX<Scalar> x;
  std::vector<int> active_set;  ///< rows in the final working set, ascending
  VecX<Scalar> multipliers;     ///< one per row, zero off the active set
  Scalar kkt_residual = 0;
  int iterations = 0;
};

namespace detail {

template <typename Scalar>
void check_dimensions(const DenseQp<Scalar>& qp) {
  const auto n = qp.variables();
  if (qp.H.rows() != n || qp.f.size() != n || qp.A.cols() != n || qp.A.rows() != qp.b.size())
    throw std::invalid_argument("qp: inconsistent dimensions");
}

template <typename Scalar>
void check_convex(const DenseQp<Scalar>& qp) {
  const Scalar scale = std::max(Scalar(1), qp.H.cwiseAbs().maxCoeff());
  if ((qp.H - qp.H.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-12) * scale) throw QpNotConvexError();
  Eigen::LLT<MatX<Scalar>> llt(qp.H);
  if (llt.info() != Eigen::Success) throw QpNotConvexError();
}

/// Primal active-set iterations from a feasible start. Blocking and dropping
/// both use the lowest row index on ties/negatives (Bland's rule).
template <typename Scalar>
QpSolution<Scalar> active_set_iterate(const DenseQp<Scalar>& qp, VecX<Scalar> x) {
  const Eigen::Index n = qp.variables();
  const Eigen::Index m = qp.rows();
  std::vector<int> working;
  QpSolution<Scalar> sol;
  sol.multipliers = VecX<Scalar>::Zero(m);
  const int max_iter = 100 + 50 * static_cast<int>(n + m);
  const Scalar scale = std::max<Scalar>(
      {Scalar(1), qp.H.cwiseAbs().maxCoeff(), qp.f.size() ? qp.f.cwiseAbs().maxCoeff() : Scalar(0)});
  bool at_subspace_min = false;
  for (int iter = 0; iter < max_iter; ++iter) {
    const auto w = static_cast<Eigen::Index>(working.size());
    // Null-space step: with A_W' = Y R and Z spanning the rest, the step
    // stays exactly on the working-set rows and vanishes when |W| = n.
    const VecX<Scalar> g = qp.H * x + qp.f;
    MatX<Scalar> AwT(n, w);
    for (Eigen::Index k = 0; k < w; ++k) AwT.col(k) = qp.A.row(working[static_cast<std::size_t>(k)]).transpose();
    const Eigen::HouseholderQR<MatX<Scalar>> qr(AwT);
    const MatX<Scalar> Q = qr.householderQ() * MatX<Scalar>::Identity(n, n);
    const MatX<Scalar> Z = Q.rightCols(n - w);
    VecX<Scalar> p = VecX<Scalar>::Zero(n);
    if (n > w) {
      const MatX<Scalar> reduced = Z.transpose() * qp.H * Z;
      p = -Z * reduced.llt().solve(Z.transpose() * g);
    }
    VecX<Scalar> lambda(w);
    if (w > 0) {
      const MatX<Scalar> R = qr.matrixQR().topLeftCorner(w, w).template triangularView<Eigen::Upper>();
      lambda = R.template triangularView<Eigen::Upper>().solve(Q.leftCols(w).transpose() * (g + qp.H * p));
    }
    sol.iterations = iter + 1;

    // After an unblocked full step x already minimizes over the working set;
    // the re-solved p is rounding noise whatever its size relative to x.
    if (at_subspace_min || p.cwiseAbs().maxCoeff() <= Scalar(1e-13) * (Scalar(1) + x.cwiseAbs().maxCoeff())) {
      at_subspace_min = false;
      x += p;
      int drop = -1;
      int drop_row = 0;
      for (Eigen::Index k = 0; k < w; ++k) {
        if (lambda[k] < -Scalar(1e-12) * scale && (drop < 0 || working[k] < drop_row)) {
          drop = static_cast<int>(k);
          drop_row = working[k];
        }
      }
      if (drop < 0) {
        for (Eigen::Index k = 0; k < w; ++k) sol.multipliers[working[k]] = std::max(Scalar(0), lambda[k]);
        std::sort(working.begin(), working.end());
        sol.active_set = working;
        sol.x = x;
        return sol;
      }
      working.erase(working.begin() + drop);
      continue;
    }

    Scalar alpha = 1;
    int blocking = -1;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (std::find(working.begin(), working.end(), static_cast<int>(i)) != working.end()) continue;
      const Scalar ap = qp.A.row(i).dot(p);
      if (ap >= -Scalar(1e-14) * (Scalar(1) + qp.A.row(i).cwiseAbs().maxCoeff() * p.cwiseAbs().maxCoeff())) continue;
      const Scalar step = std::max(Scalar(0), (qp.b[i] - qp.A.row(i).dot(x)) / ap);
      // Steps equal up to rounding count as ties so the lowest-index rule
      // still applies at degenerate vertices.
      const Scalar tie = Scalar(1e-12) * (Scalar(1) + alpha);
      if (step < alpha - tie || (std::abs(step - alpha) <= tie && (blocking < 0 || i < blocking))) {
        alpha = step;
        blocking = static_cast<int>(i);
      }
    }
    x += alpha * p;
    if (blocking >= 0)
      working.push_back(blocking);
    else
      at_subspace_min = true;
  }
  throw QpError("qp: active-set iteration limit reached");
}

/// Elastic phase 1: min eta + r/2(|x|^2 + eta^2) over {A x + eta >= b, eta >= 0}
/// starting from the trivially feasible (0, max(b)^+). For small r the optimum
/// has eta = 0 exactly whenever the original set is nonempty.
template <typename Scalar>
VecX<Scalar> feasible_point(const DenseQp<Scalar>& qp) {
  const Eigen::Index n = qp.variables();
  const Eigen::Index m = qp.rows();
  const VecX<Scalar> zero = VecX<Scalar>::Zero(n);
  if (m == 0 || ((qp.A * zero - qp.b).array() >= Scalar(0)).all()) return zero;
  const Scalar bmax = qp.b.maxCoeff();
  const Scalar tol = Scalar(1e-9) * (Scalar(1) + qp.b.cwiseAbs().maxCoeff());
  for (Scalar r = Scalar(1e-4); r >= Scalar(1e-10); r *= Scalar(1e-3)) {
    DenseQp<Scalar> aux;
    aux.H = MatX<Scalar>::Identity(n + 1, n + 1) * r;
    aux.f = VecX<Scalar>::Zero(n + 1);
    aux.f[n] = 1;
    aux.A = MatX<Scalar>::Zero(m + 1, n + 1);
    aux.A.topLeftCorner(m, n) = qp.A;
    aux.A.block(0, n, m, 1).setOnes();
    aux.A(m, n) = 1;
    aux.b = VecX<Scalar>::Zero(m + 1);
    aux.b.head(m) = qp.b;
    VecX<Scalar> start = VecX<Scalar>::Zero(n + 1);
    start[n] = std::max(Scalar(0), bmax);
    const QpSolution<Scalar> s = active_set_iterate(aux, start);
    if (s.x[n] <= tol && ((qp.A * s.x.head(n) - qp.b).array() >= -tol).all()) return s.x.head(n);
  }
  throw QpInfeasibleError();
}

}  // namespace detail

/// Max of stationarity, primal violation, dual negativity and
/// complementarity residuals.
template <typename Scalar>
Scalar kkt_residual(const DenseQp<Scalar>& qp, const VecX<Scalar>& x, const VecX<Scalar>& multipliers) {
  detail::check_dimensions(qp);
  if (x.size() != qp.variables() || multipliers.size() != qp.rows())
    throw std::invalid_argument("qp: candidate dimension mismatch");
  Scalar r = (qp.H * x + qp.f - qp.A.transpose() * multipliers).cwiseAbs().maxCoeff();
  if (qp.rows() > 0) {
    const VecX<Scalar> slack = qp.A * x - qp.b;
    r = std::max(r, (-slack).cwiseMax(Scalar(0)).maxCoeff());
    r = std::max(r, (-multipliers).cwiseMax(Scalar(0)).maxCoeff());
    r = std::max(r, multipliers.cwiseProduct(slack).cwiseAbs().maxCoeff());
  }
  return r;
}

/// Global minimizer of a strictly convex QP. `start`, when given, must be
/// feasible and skips phase 1.
template <typename Scalar>
QpSolution<Scalar> solve_qp(const DenseQp<Scalar>& qp, const std::optional<VecX<Scalar>>& start = std::nullopt) {
  detail::check_dimensions(qp);
  detail::check_convex(qp);
  VecX<Scalar> x0;
  if (start) {
    if (start->size() != qp.variables()) throw std::invalid_argument("qp: start dimension mismatch");
    x0 = *start;
  } else {
    x0 = detail::feasible_point(qp);
  }
  QpSolution<Scalar> sol = detail::active_set_iterate(qp, x0);
  sol.kkt_residual = kkt_residual(qp, sol.x, sol.multipliers);
  return sol;
}

using DenseQpd = DenseQp<double>;
using QpSolutiond = QpSolution<double>;

}  // namespace covrecon
