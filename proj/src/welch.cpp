#include "ssacnn/welch.hpp"

#include <cmath>
#include <numbers>

#include "ssacnn/errors.hpp"
#include "ssacnn/parallel.hpp"

namespace ssacnn {

namespace detail {

void fft_radix2(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0)
    throw SpecError("fft size must be a nonzero power of two");

  // Bit-reversal permutation.
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }

  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

}  // namespace detail

int next_pow2(Eigen::Index n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

PsdEstimate welch_psd(std::span<const Eigen::VectorXd> segments, double fs, int nfft) {
  if (segments.empty()) throw NoDataError("welch_psd: no segments");
  if (!(fs > 0.0)) throw SpecError("welch_psd: fs must be positive");
  if (nfft < 2 || (nfft & (nfft - 1)) != 0)
    throw SpecError("welch_psd: nfft must be a power of two >= 2");
  for (const auto& seg : segments)
    if (seg.size() > nfft)
      throw SpecError("welch_psd: segment longer than nfft");

  const int half = nfft / 2;
  Eigen::VectorXd avg = Eigen::VectorXd::Zero(half + 1);

  std::vector<std::complex<double>> buf(static_cast<std::size_t>(nfft));
  for (const auto& seg : segments) {
    const Eigen::Index m = seg.size();
    if (m < 2) throw SpecError("welch_psd: segment shorter than 2 samples");

    // Periodic Hann window.
    double wsq = 0.0;
    const double mean = seg.mean();
    for (Eigen::Index t = 0; t < m; ++t) {
      const double w =
          0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(t) /
                                static_cast<double>(m)));
      buf[static_cast<std::size_t>(t)] = {(seg[t] - mean) * w, 0.0};
      wsq += w * w;
    }
    for (Eigen::Index t = m; t < nfft; ++t) buf[static_cast<std::size_t>(t)] = {0.0, 0.0};

    detail::fft_radix2(buf);

    const double scale = 1.0 / (fs * wsq);
    for (int k = 0; k <= half; ++k) {
      double p = std::norm(buf[static_cast<std::size_t>(k)]) * scale;
      if (k != 0 && k != half) p *= 2.0;  // one-sided fold
      avg[k] += p;
    }
  }
  avg /= static_cast<double>(segments.size());

  PsdEstimate psd;
  psd.nfft = nfft;
  psd.fs = fs;
  psd.power = avg;
  psd.freqs.resize(half + 1);
  for (int k = 0; k <= half; ++k)
    psd.freqs[k] = fs * static_cast<double>(k) / static_cast<double>(nfft);
  return psd;
}

namespace {

template <typename Loop>
std::vector<PsdEstimate> batch_impl(std::span<const std::vector<Eigen::VectorXd>> jobs,
                                    double fs, int nfft, Loop&& loop) {
  std::vector<PsdEstimate> out(jobs.size());
  loop(static_cast<std::int64_t>(jobs.size()), [&](std::int64_t i) {
    const auto& job = jobs[static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(i)] = welch_psd(job, fs, nfft);
  });
  return out;
}

}  // namespace

std::vector<PsdEstimate> welch_psd_batch(std::span<const std::vector<Eigen::VectorXd>> jobs,
                                         double fs, int nfft) {
  return batch_impl(jobs, fs, nfft, [](std::int64_t n, auto&& fn) { parallel_for(n, fn); });
}

std::vector<PsdEstimate> welch_psd_batch_serial(
    std::span<const std::vector<Eigen::VectorXd>> jobs, double fs, int nfft) {
  return batch_impl(jobs, fs, nfft, [](std::int64_t n, auto&& fn) { serial_for(n, fn); });
}

}  // namespace ssacnn
