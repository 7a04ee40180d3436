#pragma once

namespace l2flow {

// Sign of the codifferential in grad F, frozen from calibrate_codifferential_sign on
// five band-limited metrics (N=12, eps=0.05, seeds 1..5). A test re-runs the
// calibration and fails if the minimiser changes.
inline constexpr double kCodifferentialSign = 1.0;
inline constexpr bool kCodifferentialCalibrated = true;

// Gauss-Bonnet: integral(|Rm|^2 - 4|Rc|^2 + R^2) = 32 pi^2 chi in dimension 4, so
// F = c0 pi^2 chi + 4 G with c0 = 32. Irrelevant on the torus where chi = 0.
inline constexpr double kGaussBonnetC0 = 32.0;

// lambda_max h^4 of the Hessian of the discrete F at the flat metric, from
// measure_stiffness (N=8 and N=12 agree to 0.1%). A test re-measures it.
inline constexpr double kFlowStiffness = 341.3;

}  // namespace l2flow
