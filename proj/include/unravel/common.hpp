#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace unravel {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline constexpr double kPi = 3.14159265358979323846;

// Thrown when a Kraus set / coupling computation leaves the physical domain
// (non-positive log arguments, invalid rates, ...).
struct unphysical_error : std::domain_error {
  using std::domain_error::domain_error;
};

// Thrown by the critical-rate solver when the ratio never crosses the
// critical value on (0, 1].
struct no_root_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when every Kraus outcome has vanishing probability.
struct degenerate_state_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when a requested dense object would exceed the supported size.
struct too_large_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Thrown when a data collapse is under-determined (too few sizes/points).
struct degenerate_collapse_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Thrown for malformed run configuration (CLI exit code 2).
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

enum class Boundary { Open, Periodic };

inline const char* boundary_name(Boundary b) {
  return b == Boundary::Open ? "open" : "periodic";
}

inline Boundary boundary_from_name(const std::string& s) {
  if (s == "open") return Boundary::Open;
  if (s == "periodic") return Boundary::Periodic;
  throw config_error("unknown boundary: " + s);
}

enum class Unraveling { Conventional, SpinOptimized, Heuristic };

inline const char* unraveling_name(Unraveling u) {
  switch (u) {
    case Unraveling::Conventional: return "conventional";
    case Unraveling::SpinOptimized: return "spin_optimized";
    case Unraveling::Heuristic: return "heuristic";
  }
  return "?";
}

inline Unraveling unraveling_from_name(const std::string& s) {
  if (s == "conventional") return Unraveling::Conventional;
  if (s == "spin_optimized") return Unraveling::SpinOptimized;
  if (s == "heuristic") return Unraveling::Heuristic;
  throw config_error("unknown unraveling: " + s);
}

}  // namespace unravel
