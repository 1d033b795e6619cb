#pragma once

#include <Eigen/Dense>
#include <complex>
#include <span>
#include <vector>

namespace ssacnn {

struct PsdEstimate {
  Eigen::VectorXd freqs;  // nfft/2 + 1 bins, 0 .. fs/2
  Eigen::VectorXd power;  // one-sided density, units^2 / Hz
  int nfft = 0;
  double fs = 0.0;
  std::string window = "hann";
};

// Smallest power of two >= n.
int next_pow2(Eigen::Index n);

// Averaged modified periodogram: per segment subtract the mean, apply a
// periodic Hann window, zero-pad to nfft, and scale |DFT|^2 by 1/(fs*sum w^2);
// interior bins of the one-sided fold carry the usual factor 2. nfft must be
// a power of two and at least every segment length.
PsdEstimate welch_psd(std::span<const Eigen::VectorXd> segments, double fs, int nfft);

// Batch over independent series; parallel and serial paths agree bit for bit.
std::vector<PsdEstimate> welch_psd_batch(std::span<const std::vector<Eigen::VectorXd>> jobs,
                                         double fs, int nfft);
std::vector<PsdEstimate> welch_psd_batch_serial(
    std::span<const std::vector<Eigen::VectorXd>> jobs, double fs, int nfft);

namespace detail {
// In-place iterative radix-2 FFT; size must be a power of two.
void fft_radix2(std::vector<std::complex<double>>& a);
}  // namespace detail

}  // namespace ssacnn
