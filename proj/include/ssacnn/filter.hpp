#pragma once

#include <Eigen/Dense>
#include <vector>

namespace ssacnn {

// One second-order section, direct form II transposed.
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;  // numerator
  double a1 = 0.0, a2 = 0.0;            // denominator (a0 == 1)
};

using SosFilter = std::vector<Biquad>;

// Digital Butterworth band-pass of the given prototype order, designed via
// the bilinear transform with pre-warped edges. The result has 2*order poles
// arranged as `order` biquads.
SosFilter butter_bandpass(int order, double low_hz, double high_hz, double fs);

// Single forward pass through the cascade (zero initial state).
Eigen::VectorXd sosfilt(const SosFilter& sos, const Eigen::VectorXd& x);

// Forward-backward (zero-phase) pass with odd-reflection padding and
// steady-state initial conditions per section. Output length equals input
// length.
Eigen::VectorXd filtfilt(const SosFilter& sos, const Eigen::VectorXd& x);

}  // namespace ssacnn
