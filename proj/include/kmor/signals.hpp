#pragma once

#include <cstdint>
#include <memory>
#include <vector>

namespace kmor {

// Scalar input signal. Evaluation at any t >= 0 is deterministic,
// including the seeded random variant (value is a hash of the hold
// bucket, not a sequential RNG draw).
//
// Square wave convention: sq(theta) = sign(sin(theta)) with sign(0) := +1.
class Signal {
 public:
  Signal();  // zero signal

  static Signal zero();
  static Signal impulse(double width);  // 1/width on [0, width)
  static Signal square(double freq_hz, double amplitude = 1.0,
                       double phase_rad = 0.0);
  static Signal sine(double freq_hz, double amplitude = 1.0,
                     double phase_rad = 0.0);
  static Signal sum(std::vector<Signal> terms);
  static Signal scaled(Signal inner, double factor);
  static Signal uniform_random(double lo, double hi, double hold_interval,
                               std::uint64_t seed);

  double eval(double t) const;

 private:
  struct Node;
  explicit Signal(std::shared_ptr<const Node> node);
  std::shared_ptr<const Node> node_;
};

// sign(sin(theta)) with sign(0) := +1.
double square_wave(double theta);

}  // namespace kmor
