#include "kmor/systems.hpp"

#include <cmath>
#include <sstream>

#include "kmor/errors.hpp"

namespace kmor {

void TimeGrid::validate() const {
  if (!(t_final > 0.0)) throw ConfigError("time grid: t_final must be > 0");
  if (samples < 1) throw ConfigError("time grid: samples must be >= 1");
  if (substeps < 1) throw ConfigError("time grid: substeps must be >= 1");
}

namespace {

Eigen::VectorXd eval_channels(const std::vector<Signal>& u, double t) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(u.size()));
  for (std::size_t i = 0; i < u.size(); ++i) out(static_cast<Eigen::Index>(i)) = u[i].eval(t);
  return out;
}

void check_finite(const Eigen::VectorXd& x, double t) {
  if (!x.allFinite()) {
    std::ostringstream msg;
    msg << "integration diverged at t = " << t;
    throw DivergenceError(msg.str(), t);
  }
}

// One classical RK4 step from (t, x) with step h.
Eigen::VectorXd rk4_step(const ControlSystem& sys, const Eigen::VectorXd& x,
                         double t, double h, const std::vector<Signal>& u) {
  const Eigen::VectorXd u0 = eval_channels(u, t);
  const Eigen::VectorXd uh = eval_channels(u, t + 0.5 * h);
  const Eigen::VectorXd u1 = eval_channels(u, t + h);
  const Eigen::VectorXd k1 = sys.f(x, u0);
  const Eigen::VectorXd k2 = sys.f(x + 0.5 * h * k1, uh);
  const Eigen::VectorXd k3 = sys.f(x + 0.5 * h * k2, uh);
  const Eigen::VectorXd k4 = sys.f(x + h * k3, u1);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// Integrates from a prepared state, recording every `substeps`-th step.
// `step_offset` counts substeps already taken (for the impulse path).
Trajectory record_run(const ControlSystem& sys, Eigen::VectorXd x,
                      const std::vector<Signal>& u, const TimeGrid& grid,
                      int step_offset) {
  const double h = grid.step();
  const long total = static_cast<long>(grid.samples) * grid.substeps;

  Trajectory out;
  out.grid = grid;
  out.times.resize(grid.samples);
  out.states.resize(sys.n, grid.samples);
  out.inputs.resize(sys.m, grid.samples);
  out.outputs.resize(sys.p, grid.samples);

  int rec = 0;
  if (step_offset > 0 && step_offset % grid.substeps == 0) {
    const double t = step_offset * h;
    out.times(rec) = t;
    out.states.col(rec) = x;
    out.inputs.col(rec) = eval_channels(u, t);
    out.outputs.col(rec) = sys.h(x);
    ++rec;
  }
  for (long i = step_offset; i < total; ++i) {
    const double t = i * h;
    x = rk4_step(sys, x, t, h, u);
    const double t1 = (i + 1) * h;
    check_finite(x, t1);
    if ((i + 1) % grid.substeps == 0) {
      out.times(rec) = t1;
      out.states.col(rec) = x;
      out.inputs.col(rec) = eval_channels(u, t1);
      out.outputs.col(rec) = sys.h(x);
      ++rec;
    }
  }
  return out;
}

}  // namespace

Trajectory integrate(const ControlSystem& sys, const Eigen::VectorXd& x0,
                     const std::vector<Signal>& u, const TimeGrid& grid) {
  grid.validate();
  if (x0.size() != sys.n) throw ConfigError("integrate: x0 has wrong dimension");
  if (static_cast<int>(u.size()) != sys.m) {
    throw ConfigError("integrate: expected one signal per input channel");
  }
  if (!x0.allFinite()) throw ConfigError("integrate: x0 must be finite");
  return record_run(sys, x0, u, grid, 0);
}

Trajectory impulse_response(const ControlSystem& sys, int channel,
                            const TimeGrid& grid) {
  grid.validate();
  if (channel < 0 || channel >= sys.m) {
    throw ConfigError("impulse_response: channel out of range");
  }
  const double eps = grid.step();
  // Pulse substep: constant input e_channel / eps over [0, eps].
  std::vector<Signal> pulse_const;
  pulse_const.reserve(sys.m);
  for (int j = 0; j < sys.m; ++j) {
    pulse_const.push_back(j == channel ? Signal::scaled(Signal::square(0.0), 1.0 / eps)
                                       : Signal::zero());
  }
  Eigen::VectorXd x = Eigen::VectorXd::Zero(sys.n);
  x = rk4_step(sys, x, 0.0, eps, pulse_const);
  check_finite(x, eps);
  // Remaining steps with zero input.
  std::vector<Signal> zero(sys.m, Signal::zero());
  Trajectory traj = record_run(sys, x, zero, grid, 1);
  return traj;
}

Trajectory observability_response(const ControlSystem& sys, int coordinate,
                                  const TimeGrid& grid) {
  grid.validate();
  if (coordinate < 0 || coordinate >= sys.n) {
    throw ConfigError("observability_response: coordinate out of range");
  }
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(sys.n);
  x0(coordinate) = 1.0;
  std::vector<Signal> zero(sys.m, Signal::zero());
  return integrate(sys, x0, zero, grid);
}

void check_equilibrium_at_origin(const ControlSystem& sys) {
  const Eigen::VectorXd f0 =
      sys.f(Eigen::VectorXd::Zero(sys.n), Eigen::VectorXd::Zero(sys.m));
  const Eigen::VectorXd h0 = sys.h(Eigen::VectorXd::Zero(sys.n));
  if (f0.lpNorm<Eigen::Infinity>() != 0.0) {
    throw ConfigError("system '" + sys.name + "': f(0,0) != 0");
  }
  if (h0.lpNorm<Eigen::Infinity>() != 0.0) {
    throw ConfigError("system '" + sys.name + "': h(0) != 0");
  }
}

ControlSystem benchmark_7d() {
  ControlSystem sys;
  sys.n = 7;
  sys.m = 1;
  sys.p = 1;
  sys.name = "benchmark7d";
  sys.f = [](const Eigen::VectorXd& x, const Eigen::VectorXd& uvec) {
    const double u = uvec(0);
    const double x1 = x(0), x2 = x(1), x3 = x(2), x4 = x(3), x5 = x(4),
                 x6 = x(5), x7 = x(6);
    Eigen::VectorXd dx(7);
    dx(0) = -x1 * x1 * x1 + u;
    dx(1) = -x2 * x2 * x2 - x1 * x1 * x2 + 3.0 * x1 * x2 * x2 - u;
    dx(2) = -x3 * x3 * x3 + x5 + u;
    dx(3) = -x4 * x4 * x4 + x1 - x2 + x3 + 2.0 * u;
    dx(4) = x1 * x2 * x3 - x5 * x5 * x5 + u;
    dx(5) = x5 - x6 * x6 * x6 - x5 * x5 * x5 + 2.0 * u;
    dx(6) = -2.0 * x6 * x6 * x6 + 2.0 * x5 - x7 - x5 * x5 * x5 + 4.0 * u;
    return dx;
  };
  sys.h = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd y(1);
    y(0) = x(0) - x(1) * x(1) + x(2) + x(3) * x(2) + x(4) - 2.0 * x(5) +
           2.0 * x(6);
    return y;
  };
  check_equilibrium_at_origin(sys);
  return sys;
}

ControlSystem make_polynomial_system(
    int n, int m, int p, const std::vector<std::vector<MonomialTerm>>& dynamics,
    const std::vector<std::vector<MonomialTerm>>& output, std::string name) {
  if (n < 1 || m < 0 || p < 1) {
    throw ConfigError("polynomial system: need n >= 1, m >= 0, p >= 1");
  }
  if (static_cast<int>(dynamics.size()) != n) {
    throw ConfigError("polynomial system: expected one term list per state");
  }
  if (static_cast<int>(output.size()) != p) {
    throw ConfigError("polynomial system: expected one term list per output");
  }
  auto check_terms = [&](const std::vector<std::vector<MonomialTerm>>& lists,
                         bool with_inputs) {
    for (const auto& terms : lists) {
      for (const auto& t : terms) {
        if (static_cast<int>(t.state_exponents.size()) != n) {
          throw ConfigError("polynomial term: state exponent vector length != n");
        }
        const int mu = static_cast<int>(t.input_exponents.size());
        if (with_inputs ? (mu != m && mu != 0) : (mu != 0)) {
          throw ConfigError("polynomial term: input exponent vector length invalid");
        }
        for (int e : t.state_exponents) {
          if (e < 0) throw ConfigError("polynomial term: negative exponent");
        }
        for (int e : t.input_exponents) {
          if (e < 0) throw ConfigError("polynomial term: negative exponent");
        }
      }
    }
  };
  check_terms(dynamics, true);
  check_terms(output, false);

  auto eval_terms = [](const std::vector<MonomialTerm>& terms,
                       const Eigen::VectorXd& x, const Eigen::VectorXd* u) {
    double acc = 0.0;
    for (const auto& t : terms) {
      double v = t.coef;
      for (std::size_t k = 0; k < t.state_exponents.size(); ++k) {
        for (int e = 0; e < t.state_exponents[k]; ++e) v *= x(static_cast<Eigen::Index>(k));
      }
      if (u != nullptr) {
        for (std::size_t k = 0; k < t.input_exponents.size(); ++k) {
          for (int e = 0; e < t.input_exponents[k]; ++e) v *= (*u)(static_cast<Eigen::Index>(k));
        }
      }
      acc += v;
    }
    return acc;
  };

  ControlSystem sys;
  sys.n = n;
  sys.m = m;
  sys.p = p;
  sys.name = std::move(name);
  sys.f = [dynamics, eval_terms, n](const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& u) {
    Eigen::VectorXd dx(n);
    for (int i = 0; i < n; ++i) dx(i) = eval_terms(dynamics[static_cast<std::size_t>(i)], x, &u);
    return dx;
  };
  sys.h = [output, eval_terms, p](const Eigen::VectorXd& x) {
    Eigen::VectorXd y(p);
    for (int i = 0; i < p; ++i) y(i) = eval_terms(output[static_cast<std::size_t>(i)], x, nullptr);
    return y;
  };
  return sys;
}

}  // namespace kmor
