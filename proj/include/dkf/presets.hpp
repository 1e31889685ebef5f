#pragma once

// The six-sensor target-tracking example: two decoupled position/velocity
// axes observed by three velocity sensors each, plus the three mismatch
// cases used for validation.

#include "dkf/model.hpp"

namespace dkf::presets {

struct CaseModels {
  TrueSystem truth;
  NominalModel nominal;
};

/// blockdiag([[a, 0], [1, a]], [[a, 0], [1, a]]).
inline Matrix tracking_dynamics(double a) {
  Matrix blk(2, 2);
  blk << a, 0.0, 1.0, a;
  Matrix out = Matrix::Zero(4, 4);
  out.topLeftCorner(2, 2) = blk;
  out.bottomRightCorner(2, 2) = blk;
  return out;
}

/// Sensors 1-3 see the first velocity with gains k, sensors 4-6 the second.
inline std::vector<Sensor> tracking_sensors(const double (&gains)[3],
                                            double r) {
  std::vector<Sensor> out;
  for (int axis = 0; axis < 2; ++axis) {
    for (double k : gains) {
      Matrix c = Matrix::Zero(1, 4);
      c(0, 2 * axis + 1) = k;
      out.push_back({c, Matrix::Constant(1, 1, r)});
    }
  }
  return out;
}

inline TrueSystem baseline_truth() {
  TrueSystem ts;
  ts.A = tracking_dynamics(0.0);
  ts.Q = 0.03 * Matrix::Identity(4, 4);
  ts.sensors = tracking_sensors({1.0, 2.0, 3.0}, 0.2);
  ts.x0 = Vector(4);
  ts.x0 << 0.2, 1.0, 0.2, 1.0;
  ts.Sigma0 = 0.1 * Matrix::Identity(4, 4);
  return ts;
}

inline CaseModels baseline() {
  auto ts = baseline_truth();
  return {ts, NominalModel::exact(ts)};
}

/// Stable truth, every nominal parameter off.
inline CaseModels case1() {
  auto ts = baseline_truth();
  ts.A = tracking_dynamics(-0.1);
  NominalModel nm;
  nm.A = ts.A + 0.1 * Matrix::Identity(4, 4);
  nm.Q = 0.05 * Matrix::Identity(4, 4);
  nm.sensors = tracking_sensors({1.1, 2.1, 3.1}, 0.3);
  return {ts, nm};
}

/// Nominal process noise blind to the first position.
inline CaseModels case2() {
  auto ts = baseline_truth();
  auto nm = NominalModel::exact(ts);
  nm.Q = Matrix::Zero(4, 4);
  nm.Q.diagonal() << 0.0, 0.03, 0.03, 0.03;
  return {ts, nm};
}

/// Only noise intensities overestimated.
inline CaseModels case3() {
  auto ts = baseline_truth();
  ts.Sigma0 = Matrix::Identity(4, 4);
  auto nm = NominalModel::exact(ts);
  nm.Q = 0.1 * Matrix::Identity(4, 4);
  nm.sensors[0].R(0, 0) = 0.3;
  nm.sensors[3].R(0, 0) = 0.3;
  return {ts, nm};
}

}  // namespace dkf::presets
