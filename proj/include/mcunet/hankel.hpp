#pragma once

#include <Eigen/Dense>
#include <vector>

#include "mcunet/tensor.hpp"

// Structured-low-rank oracle: Hankel lifting, quarter-power reweighting and
// the classical IRLS recursion it majorizes. Runs on tiny 1D/2D signals and
// exists to validate the math that the learned low-rank branch replaces.

namespace mcu::hankel {

struct Window {
  int h = 1, w = 1;
};

// Rows are every contiguous window position (row-major over the origin),
// columns the window elements (row-major inside the window). Linear in x.
Eigen::MatrixXcd hankel_lift(const Tensor& x, Window win);

// Adjoint of the lift: scatter-add matrix entries back onto the signal grid.
Tensor hankel_lift_adjoint(const Eigen::MatrixXcd& m, int h, int w, Window win);

// Q = [(tau x)^H (tau x) + eps I]^(-1/4), Hermitian positive definite.
Eigen::MatrixXcd q_update(const Tensor& x, Window win, double eps_q);

// Dense J(Q): the block of Hankel-structured D(q_j) stacked over columns of
// Q, so that J(Q) vec(x) = vec(tau(x) Q). Brute-force, for validation.
Eigen::MatrixXcd build_jq(const Eigen::MatrixXcd& q, int h, int w, Window win);

struct Commutation {
  double lhs = 0.0;  // ||tau(x) Q||_F
  double rhs = 0.0;  // ||J(Q) vec(x)||_2 from the explicit stacking
};
Commutation commutation_check(const Tensor& x, const Eigen::MatrixXcd& q, Window win);

// lambda2 * J(Q)^H J(Q) x, evaluated as tau^H(tau(x) Q Q^H).
Tensor jq_normal(const Tensor& x, const Eigen::MatrixXcd& q, Window win, double lambda2);

struct IrlsResult {
  Tensor x;
  std::vector<double> objective;  // ||Ax-y||^2 + lambda2 ||tau(x) Q||_F^2 per iteration
  bool diverged = false;          // norm grew past 1e6x the starting point
};

// Alternates the quarter-power weight refresh with a gradient step on the
// weighted least-squares surrogate.
IrlsResult irls_iterate(const Tensor& x0, const Tensor& y, const Tensor& csm, const Tensor& mask,
                        Window win, double lambda2, double alpha_l, double eps_q, int iters);

}  // namespace mcu::hankel
