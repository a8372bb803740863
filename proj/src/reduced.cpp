#include "kmor/reduced.hpp"

#include <cmath>
#include <sstream>

#include "kmor/errors.hpp"

namespace kmor {

Eigen::VectorXd taylor_preimage(const BalancedReduction& br,
                                const Eigen::VectorXd& a,
                                const Eigen::VectorXd& x_r,
                                const ToleranceConfig& tol) {
  const Eigen::MatrixXd J = br.jacobian_of_pi(a);
  if (J.norm() == 0.0) {
    throw NumericError("taylor_preimage: zero Jacobian at the expansion point");
  }
  return pinv(J, tol) * (x_r - br.reduce(a)) + a;
}

Eigen::VectorXd kernel_property_weights(const BalancedReduction& br,
                                        const Eigen::VectorXd& x_r,
                                        bool clamp_negative) {
  const KernelSpec& k = br.fmap().kernel();
  if (k.family != KernelSpec::Family::Polynomial) {
    throw ConfigError(
        "kernel_property mode requires a polynomial kernel (got " +
        k.describe() + ")");
  }
  const int d = k.degree;
  // s_l = <x_r, M Pi(y_l)> with M = (T_q^T Kc T_q)^{-1}.
  Eigen::VectorXd s =
      br.pi_at_samples().transpose() * (br.metric_matrix() * x_r);
  const double inv_d = 1.0 / static_cast<double>(d);
  for (Eigen::Index l = 0; l < s.size(); ++l) {
    double v = s(l);
    if (clamp_negative && v < 0.0) {
      s(l) = 0.0;
      continue;
    }
    // sign-preserving real d-th root, then power d-1
    const double root = std::copysign(std::pow(std::abs(v), inv_d), v);
    double acc = static_cast<double>(d);
    for (int e = 0; e + 1 < d; ++e) acc *= root;
    s(l) = acc;
  }
  return s;
}

Eigen::MatrixXd kernel_property_jacobian(const BalancedReduction& br,
                                         const Eigen::VectorXd& x_r,
                                         bool clamp_negative) {
  const Eigen::VectorXd w = kernel_property_weights(br, x_r, clamp_negative);
  return br.Tq().transpose() *
         (w.asDiagonal() * br.fmap().samples().matrix());
}

ClosedDynamics::ClosedDynamics(const ReducedSystem& rs) : rs_(rs) {
  if (rs.jmode.kind == JacobianMode::Kind::TaylorInverse) {
    a_ = rs.jmode.expansion_point.size() > 0
             ? rs.jmode.expansion_point
             : Eigen::VectorXd::Zero(rs.br.fmap().dim());
    pi_a_ = rs_.br.reduce(a_);
    const Eigen::MatrixXd J = rs_.br.jacobian_of_pi(a_);
    if (J.norm() == 0.0) {
      throw NumericError("closed dynamics: zero Jacobian at the expansion point");
    }
    j_a_pinv = pinv(J, rs_.tol);
  }
}

void ClosedDynamics::refresh(const Eigen::VectorXd& x_r) {
  if (rs_.jmode.kind != JacobianMode::Kind::TaylorInverse) return;
  const Eigen::VectorXd a = j_a_pinv * (x_r - pi_a_) + a_;
  const Eigen::MatrixXd J = rs_.br.jacobian_of_pi(a);
  if (!J.allFinite() || J.norm() == 0.0) return;  // keep the old expansion
  a_ = a;
  pi_a_ = rs_.br.reduce(a_);
  j_a_pinv = pinv(J, rs_.tol);
}

Eigen::VectorXd ClosedDynamics::rhs(const Eigen::VectorXd& x_r,
                                    const Eigen::VectorXd& u) const {
  // f-hat input is the concatenation (x_r, u); the model appends its
  // own bias coordinate.
  Eigen::VectorXd z(x_r.size() + u.size());
  z << x_r, u;
  const Eigen::VectorXd fh = rs_.fhat.predict(z);

  if (rs_.jmode.kind == JacobianMode::Kind::KernelProperty) {
    const Eigen::VectorXd w =
        kernel_property_weights(rs_.br, x_r, rs_.jmode.clamp_negative);
    // T_q^T diag(w) S f  ==  T_q^T (w .* (S f))
    const Eigen::VectorXd sf = rs_.br.fmap().samples().matrix() * fh;
    return rs_.br.Tq().transpose() * (w.cwiseProduct(sf));
  }
  const Eigen::VectorXd x_star = j_a_pinv * (x_r - pi_a_) + a_;
  return rs_.br.jacobian_of_pi(x_star) * fh;
}

Eigen::VectorXd closed_rhs(const ReducedSystem& rs, const Eigen::VectorXd& x_r,
                           const Eigen::VectorXd& u) {
  return ClosedDynamics(rs).rhs(x_r, u);
}

ReducedTrajectory simulate_reduced(const ReducedSystem& rs,
                                   const Eigen::VectorXd& x_r0,
                                   const std::vector<Signal>& u,
                                   const TimeGrid& grid) {
  grid.validate();
  const int q = rs.br.order();
  if (x_r0.size() != q) {
    throw ConfigError("simulate_reduced: x_r0 has wrong dimension");
  }
  const Eigen::Index m = static_cast<Eigen::Index>(u.size());

  ClosedDynamics dyn(rs);
  const double h = grid.step();
  const long total = static_cast<long>(grid.samples) * grid.substeps;
  const int refresh = rs.jmode.refresh_every;

  ReducedTrajectory out;
  out.grid = grid;
  out.times.resize(grid.samples);
  out.states.resize(q, grid.samples);
  out.inputs.resize(m, grid.samples);
  out.outputs.resize(rs.hhat.coeffs.rows(), grid.samples);

  auto eval_u = [&](double t) {
    Eigen::VectorXd uu(m);
    for (Eigen::Index i = 0; i < m; ++i) uu(i) = u[static_cast<std::size_t>(i)].eval(t);
    return uu;
  };

  Eigen::VectorXd x = x_r0;
  int rec = 0;
  for (long i = 0; i < total; ++i) {
    const double t = i * h;
    const Eigen::VectorXd u0 = eval_u(t);
    const Eigen::VectorXd uh = eval_u(t + 0.5 * h);
    const Eigen::VectorXd u1 = eval_u(t + h);
    const Eigen::VectorXd k1 = dyn.rhs(x, u0);
    const Eigen::VectorXd k2 = dyn.rhs(x + 0.5 * h * k1, uh);
    const Eigen::VectorXd k3 = dyn.rhs(x + 0.5 * h * k2, uh);
    const Eigen::VectorXd k4 = dyn.rhs(x + h * k3, u1);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    const double t1 = (i + 1) * h;
    if (!x.allFinite()) {
      std::ostringstream msg;
      msg << "reduced simulation diverged at t = " << t1;
      throw DivergenceError(msg.str(), t1);
    }
    if (refresh > 0 && (i + 1) % refresh == 0) dyn.refresh(x);
    if ((i + 1) % grid.substeps == 0) {
      out.times(rec) = t1;
      out.states.col(rec) = x;
      out.inputs.col(rec) = eval_u(t1);
      out.outputs.col(rec) = rs.hhat.predict(x);
      ++rec;
    }
  }
  return out;
}

ComparisonMetrics compare(const Eigen::MatrixXd& y,
                          const Eigen::MatrixXd& y_hat) {
  if (y.rows() != y_hat.rows() || y.cols() != y_hat.cols()) {
    throw ConfigError("compare: trajectories are on different grids");
  }
  const Eigen::MatrixXd diff = y - y_hat;
  ComparisonMetrics mtr;
  const double n = static_cast<double>(y.size());
  mtr.rmse = std::sqrt(diff.squaredNorm() / n);
  mtr.max_abs_err = diff.size() > 0 ? diff.cwiseAbs().maxCoeff() : 0.0;
  const double den = y.norm();
  const double num = diff.norm();
  mtr.relative_l2 = den > 0.0
                        ? num / den
                        : (num == 0.0 ? 0.0
                                      : std::numeric_limits<double>::infinity());
  return mtr;
}

}  // namespace kmor
