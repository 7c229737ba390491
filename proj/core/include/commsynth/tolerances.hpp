#pragma once

// Every numeric tolerance used by the library lives here.

namespace commsynth::tol {

inline constexpr double kAgentRowSum = 1e-12;
inline constexpr double kJointRowSum = 1e-9;
inline constexpr double kFactorization = 1e-12;

inline constexpr double kLpFeasibility = 1e-8;
inline constexpr double kLpOptimality = 1e-9;
inline constexpr double kLpPivot = 1e-9;
inline constexpr double kLpBound = 1e-9;

inline constexpr double kLogFloor = 1e-12;   // log(max(q, eps)) in smoothed terms
inline constexpr double kZeroMass = 1e-14;   // below this a group counts as unvisited
inline constexpr double kClampNegative = 1e-12;

inline constexpr double kCoupling = 1e-8;
inline constexpr double kPolicyRowSum = 1e-9;
inline constexpr double kThresholdSlack = 1e-9;  // v-row rhs is v_threshold minus this
inline constexpr double kAchievedValue = 1e-6;
inline constexpr double kBoundMargin = 1e-6;

inline constexpr double kFrankWolfeGap = 1e-6;
inline constexpr int kFrankWolfeMaxIterations = 5000;
inline constexpr double kZeroCost = 1e-10;  // d-bar is nonnegative, so this is a global optimum

inline constexpr double kReachResidual = 1e-10;
inline constexpr double kValueIteration = 1e-13;

}  // namespace commsynth::tol
