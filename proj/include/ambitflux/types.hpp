#pragma once

#include <Eigen/Dense>
#include <complex>

namespace ambitflux {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 6.28318530717958647692;

}  // namespace ambitflux
