#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ssacnn/recording.hpp"

namespace ssacnn {

// One oscillator band: band-limited noise in
// [center - width/2, center + width/2] Hz scaled by gain.
struct SynthBand {
  double center_hz = 6.0;
  double width_hz = 4.0;
  double gain = 1.0;
};

// Two-class multichannel generator. Per subject the signal is the sum over
// bands of sqrt(coupling) * independent band-limited unit-variance sources,
// plus white noise, so the class coupling matrix is the cross-channel
// correlation target inside each band.
struct SynthSpec {
  int subjects_per_class = 16;
  int channels = 16;
  double duration_s = 80.0;
  double fs = 500.0;
  int filter_order = 4;
  std::vector<SynthBand> bands;
  std::array<std::vector<Eigen::MatrixXd>, 2> coupling;  // [class][band], C x C
  double noise_level = 0.3;
  std::uint64_t seed = 1234;

  void validate() const;
};

// C x C matrix with unit diagonal and rho off-diagonal.
Eigen::MatrixXd equicorrelation(int channels, double rho);

// Deterministic per (seed, class, subject index); generation of distinct
// subjects is parallel and thread-count independent.
std::vector<Recording> generate(const SynthSpec& spec);

// Presets used by the acceptance suite.
SynthSpec easy_preset();            // large coupling gap in every band
SynthSpec hard_preset();            // small gap, heavier noise
SynthSpec group1_signal_preset();   // only the dominant band separates classes
SynthSpec preset_by_name(const std::string& name);

}  // namespace ssacnn
