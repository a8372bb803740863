#include "kmor/signals.hpp"

#include <cmath>
#include <utility>

#include "kmor/errors.hpp"

namespace kmor {

double square_wave(double theta) {
  return std::sin(theta) >= 0.0 ? 1.0 : -1.0;
}

struct Signal::Node {
  enum class Kind { Zero, Impulse, Square, Sine, Sum, Scaled, UniformRandom };
  Kind kind = Kind::Zero;
  double a = 0.0;  // width | freq | lo
  double b = 0.0;  // amplitude | hi
  double c = 0.0;  // phase | hold interval
  double factor = 1.0;
  std::uint64_t seed = 0;
  std::vector<Signal> children;
};

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr double kTwoPi = 6.283185307179586476925286766559;

}  // namespace

Signal::Signal() : node_(std::make_shared<Node>()) {}

Signal::Signal(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

Signal Signal::zero() { return Signal(); }

Signal Signal::impulse(double width) {
  if (!(width > 0.0)) throw ConfigError("impulse signal: width must be > 0");
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::Impulse;
  n->a = width;
  return Signal(n);
}

Signal Signal::square(double freq_hz, double amplitude, double phase_rad) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::Square;
  n->a = freq_hz;
  n->b = amplitude;
  n->c = phase_rad;
  return Signal(n);
}

Signal Signal::sine(double freq_hz, double amplitude, double phase_rad) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::Sine;
  n->a = freq_hz;
  n->b = amplitude;
  n->c = phase_rad;
  return Signal(n);
}

Signal Signal::sum(std::vector<Signal> terms) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::Sum;
  n->children = std::move(terms);
  return Signal(n);
}

Signal Signal::scaled(Signal inner, double factor) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::Scaled;
  n->factor = factor;
  n->children.push_back(std::move(inner));
  return Signal(n);
}

Signal Signal::uniform_random(double lo, double hi, double hold_interval,
                              std::uint64_t seed) {
  if (!(hold_interval > 0.0)) {
    throw ConfigError("uniform_random signal: hold interval must be > 0");
  }
  if (!(hi >= lo)) throw ConfigError("uniform_random signal: need hi >= lo");
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::UniformRandom;
  n->a = lo;
  n->b = hi;
  n->c = hold_interval;
  n->seed = seed;
  return Signal(n);
}

double Signal::eval(double t) const {
  const Node& n = *node_;
  switch (n.kind) {
    case Node::Kind::Zero:
      return 0.0;
    case Node::Kind::Impulse:
      return (t >= 0.0 && t < n.a) ? 1.0 / n.a : 0.0;
    case Node::Kind::Square:
      return n.b * square_wave(kTwoPi * n.a * t + n.c);
    case Node::Kind::Sine:
      return n.b * std::sin(kTwoPi * n.a * t + n.c);
    case Node::Kind::Sum: {
      double acc = 0.0;
      for (const Signal& s : n.children) acc += s.eval(t);
      return acc;
    }
    case Node::Kind::Scaled:
      return n.factor * n.children.front().eval(t);
    case Node::Kind::UniformRandom: {
      const auto bucket = static_cast<std::uint64_t>(std::floor(t / n.c));
      const std::uint64_t h = splitmix64(n.seed ^ splitmix64(bucket));
      const double u01 =
          static_cast<double>(h >> 11) * (1.0 / 9007199254740992.0);
      return n.a + (n.b - n.a) * u01;
    }
  }
  return 0.0;
}

}  // namespace kmor
