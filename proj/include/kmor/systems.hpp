#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "kmor/signals.hpp"

namespace kmor {

// Continuous-time control system
//   xdot = f(x, u),  y = h(x)
// with pure evaluators. Registered benchmark systems satisfy
// f(0,0) = 0 and h(0) = 0 (checked at registration).
struct ControlSystem {
  int n = 0;  // state dimension
  int m = 0;  // input dimension
  int p = 0;  // output dimension
  std::string name;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> f;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> h;
};

// Regular partition of [0, t_final]: sample times t_i = (t_final/N) i,
// i = 1..N (the initial instant is not a sample). Each sample interval
// is integrated with `substeps` RK4 steps, so the step h = t_final/(N
// substeps) divides t_final/N exactly by construction.
struct TimeGrid {
  double t_final = 1.0;
  int samples = 100;
  int substeps = 1;

  double sample_dt() const { return t_final / samples; }
  double step() const { return t_final / (static_cast<double>(samples) * substeps); }
  void validate() const;
};

struct Trajectory {
  TimeGrid grid;
  Eigen::VectorXd times;    // N
  Eigen::MatrixXd states;   // n x N
  Eigen::MatrixXd inputs;   // m x N
  Eigen::MatrixXd outputs;  // p x N
};

// Classical fixed-step RK4; the input is evaluated at the stage times
// t, t+h/2, t+h. Throws DivergenceError when a state goes non-finite.
Trajectory integrate(const ControlSystem& sys, const Eigen::VectorXd& x0,
                     const std::vector<Signal>& u, const TimeGrid& grid);

// Impulse excitation delta(t) e_channel realized as a rectangular pulse
// of height 1/eps and width eps = one integration substep, from x0 = 0.
// The pulse substep is integrated separately with the constant input
// 1/eps so the pulse carries unit mass exactly; integration then
// continues with zero input. `channel` is 0-based.
Trajectory impulse_response(const ControlSystem& sys, int channel,
                            const TimeGrid& grid);

// Zero input, x0 = e_coordinate (0-based); records outputs.
Trajectory observability_response(const ControlSystem& sys, int coordinate,
                                  const TimeGrid& grid);

// The 7-state single-input single-output polynomial benchmark.
ControlSystem benchmark_7d();

// Polynomial dynamics assembled from monomial terms: each term is a
// coefficient times products of state and input powers.
struct MonomialTerm {
  double coef = 0.0;
  std::vector<int> state_exponents;  // length n
  std::vector<int> input_exponents;  // length m (empty for output maps)
};

ControlSystem make_polynomial_system(
    int n, int m, int p, const std::vector<std::vector<MonomialTerm>>& dynamics,
    const std::vector<std::vector<MonomialTerm>>& output, std::string name);

// Checks f(0,0) = 0 and h(0) = 0; throws ConfigError otherwise.
void check_equilibrium_at_origin(const ControlSystem& sys);

}  // namespace kmor
