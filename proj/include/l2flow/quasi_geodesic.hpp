#pragma once

#include <string>
#include <vector>

#include "l2flow/flow.hpp"
#include "l2flow/geodesic.hpp"

namespace l2flow {

enum class QgDirection { Forward, Backward };

struct QuasiGeodesicOptions {
  double beta = 0.05;
  double c_ap2 = 1.0;      // stand-in for C(n) in the acceleration condition
  int check_times = 20;
  int max_segments = 4096;  // more means S underflowed against the measured A
};

/// Frozen minimizing geodesic used on [t_start, t_start + S).
struct QgSegment {
  double t_start = 0.0;
  double d_start = 0.0;  // d(x, y, t_start)
  Curve curve;
};

/// The three family conditions at one sampled time. Margins are >= 0 when they hold.
struct QgCheck {
  double t = 0.0;
  int segment = 0;
  double d = 0.0;              // shortest x-y curve found at t
  double length = 0.0;         // L(gamma_t, t)
  double length_margin = 0.0;  // d + beta - L
  double speed_min = 0.0;
  double speed_max = 0.0;
  double speed_margin = 0.0;   // relative to d_j: min(v_min - d_j/(1+beta), (1+beta) d_j - v_max) / d_j
  double acceleration = 0.0;
  double acceleration_margin = 0.0;  // (beta d_j^2 - |D gamma'|) / d_j^2
};

struct QuasiGeodesicFamily {
  Vec4 x{}, y{};
  QgDirection direction = QgDirection::Forward;
  double beta = 0.0;
  double t1 = 0.0, t2 = 0.0;  // in the orientation of the trace it was built on
  double A = 0.0;             // max ||g'|| + max ||nabla g'||
  double S = 0.0;
  double S_terms[3] = {0.0, 0.0, 0.0};  // velocity, length and acceleration limits before clamping to t2 - t1
  double d_bar = 0.0;         // min over check times of d(x, y, t)
  bool degenerate = false;    // x == y: constant curve, speed and acceleration checks skipped
  std::vector<QgSegment> segments;
  std::vector<QgCheck> checks;

  double min_margin() const;
  bool holds() const { return min_margin() >= 0.0; }
};

/// S is the largest value meeting the velocity condition A S <= log (1+beta)^2, the length
/// condition (e^{AS} - 1) e^{AT} d(t1) <= beta/2 and the acceleration condition
/// A S (1 + 4 C e^{2AT} d(t1)^2) <= min{beta d_bar^2, 1}/2, clamped to T = t2 - t1.
/// Backward families are built forward on the time-reversed view of the trace.
QuasiGeodesicFamily quasi_geodesic(const FlowTrace& trace, const Vec4& x, const Vec4& y, QgDirection direction,
                                   const QuasiGeodesicOptions& opts = {});

/// max over samples in [t1, t2] of ||g'||_inf and of ||nabla g'||_inf, summed.
double stiffness_constant(const FlowTrace& trace, double t1, double t2);

}  // namespace l2flow
