#include "mcunet/hankel.hpp"

#include <cmath>
#include <complex>

#include "mcunet/mri_ops.hpp"

namespace mcu::hankel {

namespace {

void check_signal(const Tensor& x, Window win, const char* who) {
  require(x.ndim() == 3 && x.dim(0) == 2, std::string(who) + ": expected [2,H,W] signal");
  require(win.h >= 1 && win.w >= 1 && win.h <= x.dim(1) && win.w <= x.dim(2),
          std::string(who) + ": window does not fit the signal");
}

std::complex<double> at_c(const Tensor& x, int i, int j) {
  return {x.at(0, i, j), x.at(1, i, j)};
}

}  // namespace

Eigen::MatrixXcd hankel_lift(const Tensor& x, Window win) {
  check_signal(x, win, "hankel_lift");
  const int h = x.dim(1), w = x.dim(2);
  const int mh = h - win.h + 1, mw = w - win.w + 1;
  Eigen::MatrixXcd m(static_cast<Eigen::Index>(mh) * mw, static_cast<Eigen::Index>(win.h) * win.w);
  for (int i = 0; i < mh; ++i)
    for (int j = 0; j < mw; ++j)
      for (int di = 0; di < win.h; ++di)
        for (int dj = 0; dj < win.w; ++dj)
          m(i * mw + j, di * win.w + dj) = at_c(x, i + di, j + dj);
  return m;
}

Tensor hankel_lift_adjoint(const Eigen::MatrixXcd& m, int h, int w, Window win) {
  const int mh = h - win.h + 1, mw = w - win.w + 1;
  require(mh >= 1 && mw >= 1, "hankel_lift_adjoint: window does not fit the signal");
  require(m.rows() == static_cast<Eigen::Index>(mh) * mw &&
              m.cols() == static_cast<Eigen::Index>(win.h) * win.w,
          "hankel_lift_adjoint: matrix does not match the lift dimensions");
  Tensor x = Tensor::zeros({2, h, w});
  for (int i = 0; i < mh; ++i)
    for (int j = 0; j < mw; ++j)
      for (int di = 0; di < win.h; ++di)
        for (int dj = 0; dj < win.w; ++dj) {
          const std::complex<double> v = m(i * mw + j, di * win.w + dj);
          x.at(0, i + di, j + dj) += v.real();
          x.at(1, i + di, j + dj) += v.imag();
        }
  return x;
}

Eigen::MatrixXcd q_update(const Tensor& x, Window win, double eps_q) {
  require(eps_q > 0.0, "q_update: eps_q must be positive");
  Eigen::MatrixXcd lift = hankel_lift(x, win);
  Eigen::MatrixXcd g = lift.adjoint() * lift;
  g.diagonal().array() += eps_q;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(g);
  Eigen::VectorXd scale = es.eigenvalues().array().pow(-0.25);
  return es.eigenvectors() * scale.asDiagonal() * es.eigenvectors().adjoint();
}

Eigen::MatrixXcd build_jq(const Eigen::MatrixXcd& q, int h, int w, Window win) {
  const int mh = h - win.h + 1, mw = w - win.w + 1;
  require(mh >= 1 && mw >= 1, "build_jq: window does not fit the signal");
  require(q.rows() == static_cast<Eigen::Index>(win.h) * win.w, "build_jq: Q row count");
  const Eigen::Index rows_per = static_cast<Eigen::Index>(mh) * mw;
  Eigen::MatrixXcd jq = Eigen::MatrixXcd::Zero(rows_per * q.cols(), static_cast<Eigen::Index>(h) * w);
  for (Eigen::Index col = 0; col < q.cols(); ++col)
    for (int i = 0; i < mh; ++i)
      for (int j = 0; j < mw; ++j)
        for (int di = 0; di < win.h; ++di)
          for (int dj = 0; dj < win.w; ++dj)
            jq(col * rows_per + i * mw + j, (i + di) * w + (j + dj)) +=
                q(di * win.w + dj, col);
  return jq;
}

Commutation commutation_check(const Tensor& x, const Eigen::MatrixXcd& q, Window win) {
  check_signal(x, win, "commutation_check");
  const int h = x.dim(1), w = x.dim(2);
  Commutation out;
  out.lhs = (hankel_lift(x, win) * q).norm();

  Eigen::VectorXcd vec(static_cast<Eigen::Index>(h) * w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) vec(i * w + j) = at_c(x, i, j);
  out.rhs = (build_jq(q, h, w, win) * vec).norm();
  return out;
}

Tensor jq_normal(const Tensor& x, const Eigen::MatrixXcd& q, Window win, double lambda2) {
  check_signal(x, win, "jq_normal");
  Eigen::MatrixXcd lifted = hankel_lift(x, win) * (q * q.adjoint());
  Tensor r = hankel_lift_adjoint(lifted, x.dim(1), x.dim(2), win);
  for (std::size_t i = 0; i < r.numel(); ++i) r[i] *= lambda2;
  return r;
}

IrlsResult irls_iterate(const Tensor& x0, const Tensor& y, const Tensor& csm, const Tensor& mask,
                        Window win, double lambda2, double alpha_l, double eps_q, int iters) {
  check_signal(x0, win, "irls_iterate");
  require(iters >= 1, "irls_iterate: iters must be >= 1");
  require(lambda2 >= 0.0, "irls_iterate: lambda2 must be nonnegative");

  IrlsResult out;
  out.x = x0;
  const double baseline = std::max(norm2(x0), 1.0);
  for (int k = 0; k < iters; ++k) {
    Eigen::MatrixXcd q = q_update(out.x, win, eps_q);

    Tensor res = forward_model(out.x, csm, mask);
    for (std::size_t i = 0; i < res.numel(); ++i) res[i] -= y[i];
    const double fit = norm2(res);
    const double reg = (hankel_lift(out.x, win) * q).squaredNorm();
    out.objective.push_back(fit * fit + lambda2 * reg);

    Tensor r = jq_normal(out.x, q, win, lambda2);
    Tensor g = adjoint_model(res, csm, mask);
    for (std::size_t i = 0; i < out.x.numel(); ++i)
      out.x[i] -= alpha_l * (g[i] + 2.0 * r[i]);

    if (norm2(out.x) > 1e6 * baseline) {
      out.diverged = true;
      break;
    }
  }
  return out;
}

}  // namespace mcu::hankel
