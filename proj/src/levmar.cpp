#include "mwres/levmar.hpp"

#include <unsupported/Eigen/LevenbergMarquardt>

#include <algorithm>
#include <cmath>

namespace mwres {

namespace {

struct Functor : Eigen::DenseFunctor<double> {
  Functor(const ResidualFunction& f, int n_params, int n_values, double step)
      : Eigen::DenseFunctor<double>(n_params, n_values), fn(f), diff_step(step) {}

  int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& fvec) const {
    fvec = fn(x);
    return fvec.allFinite() ? 0 : -1;
  }

  int df(const Eigen::VectorXd& x, Eigen::MatrixXd& fjac) const {
    fjac = numeric_jacobian(fn, x, diff_step);
    return fjac.allFinite() ? 0 : -1;
  }

  const ResidualFunction& fn;
  double diff_step;
};

}  // namespace

Eigen::MatrixXd numeric_jacobian(const ResidualFunction& f, const Eigen::VectorXd& x, double step) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd jac(f0.size(), x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = step * std::max(1.0, std::abs(x[j]));
    xp[j] = x[j] + h;
    const Eigen::VectorXd fp = f(xp);
    xp[j] = x[j] - h;
    const Eigen::VectorXd fm = f(xp);
    xp[j] = x[j];
    jac.col(j) = (fp - fm) / (2.0 * h);
  }
  return jac;
}

Eigen::MatrixXd linearized_covariance(const Eigen::MatrixXd& jacobian, double rss) {
  const auto m = jacobian.rows();
  const auto p = jacobian.cols();
  const double s2 = m > p ? rss / static_cast<double>(m - p) : 0.0;
  const Eigen::MatrixXd jtj = jacobian.transpose() * jacobian;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(jtj, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double cutoff = sv.size() > 0 ? sv[0] * 1e-14 : 0.0;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > cutoff) inv[i] = 1.0 / sv[i];
  return s2 * svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

LeastSquaresResult solve_least_squares(const ResidualFunction& residuals, const Eigen::VectorXd& x0,
                                       int n_residuals, const LeastSquaresOptions& options) {
  Functor functor(residuals, static_cast<int>(x0.size()), n_residuals, options.diff_step);
  Eigen::LevenbergMarquardt<Functor> lm(functor);
  lm.setMaxfev(options.max_iterations);
  lm.setXtol(options.step_tolerance);
  lm.setFtol(options.cost_tolerance);
  lm.setGtol(0.0);

  Eigen::VectorXd x = x0;
  const auto status = lm.minimize(x);

  LeastSquaresResult out;
  out.x = x;
  out.status = static_cast<int>(status);
  out.iterations = static_cast<int>(lm.iterations());
  using namespace Eigen::LevenbergMarquardtSpace;
  out.converged = status == RelativeReductionTooSmall || status == RelativeErrorTooSmall ||
                  status == RelativeErrorAndReductionTooSmall || status == CosinusTooSmall ||
                  status == FtolTooSmall || status == XtolTooSmall || status == GtolTooSmall;
  const Eigen::VectorXd r = residuals(x);
  out.rss = r.squaredNorm();
  out.jacobian = numeric_jacobian(residuals, x, options.diff_step);
  out.covariance = linearized_covariance(out.jacobian, out.rss);
  return out;
}

}  // namespace mwres
