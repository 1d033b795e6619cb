#include "ssacnn/filter.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "ssacnn/errors.hpp"

namespace ssacnn {

namespace {

using Complex = std::complex<double>;

// Steady-state state of one section for a unit-step input (lfilter_zi).
std::array<double, 2> section_zi(const Biquad& s) {
  const double det = 1.0 + s.a1 + s.a2;
  const double r0 = s.b1 - s.a1 * s.b0;
  const double r1 = s.b2 - s.a2 * s.b0;
  // Solve [[1+a1, -1], [a2, 1]] z = [r0, r1].
  return {(r0 + r1) / det, ((1.0 + s.a1) * r1 - s.a2 * r0) / det};
}

// Filter `x` through the cascade with initial states zi scaled by `scale`.
void run_cascade(const SosFilter& sos, std::vector<double>& x,
                 const std::vector<std::array<double, 2>>& zi, double scale) {
  for (std::size_t si = 0; si < sos.size(); ++si) {
    const Biquad& s = sos[si];
    double z0 = zi[si][0] * scale;
    double z1 = zi[si][1] * scale;
    for (double& v : x) {
      const double in = v;
      const double out = s.b0 * in + z0;
      z0 = s.b1 * in - s.a1 * out + z1;
      z1 = s.b2 * in - s.a2 * out;
      v = out;
    }
  }
}

}  // namespace

SosFilter butter_bandpass(int order, double low_hz, double high_hz, double fs) {
  if (order < 1) throw SpecError("filter order must be positive");
  if (!(low_hz > 0.0) || !(low_hz < high_hz)) throw SpecError("bad band edges");
  if (!(high_hz < fs / 2.0))
    throw NyquistError("band edge at or above Nyquist frequency");

  const int n = order;
  const double fs2 = 2.0 * fs;

  // Pre-warped analog edges, center and width.
  const double w1 = fs2 * std::tan(std::numbers::pi * low_hz / fs);
  const double w2 = fs2 * std::tan(std::numbers::pi * high_hz / fs);
  const double w0sq = w1 * w2;
  const double bw = w2 - w1;

  // Analog prototype poles on the unit circle, left half-plane.
  std::vector<Complex> analog_poles;
  analog_poles.reserve(2 * static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const double theta = std::numbers::pi * (2.0 * k + n + 1.0) / (2.0 * n);
    const Complex p(std::cos(theta), std::sin(theta));
    // Low-pass -> band-pass: each prototype pole spawns two.
    const Complex b = p * (bw / 2.0);
    const Complex d = std::sqrt(b * b - w0sq);
    analog_poles.push_back(b + d);
    analog_poles.push_back(b - d);
  }

  // Bilinear transform. Gain follows the zpk bookkeeping: n analog zeros at
  // s=0 map to z=1, the n zeros at infinity map to z=-1, and the constant is
  // k = bw^n * Re(fs2^n / prod(fs2 - p)).
  std::vector<Complex> digital_poles;
  digital_poles.reserve(analog_poles.size());
  Complex denom(1.0, 0.0);
  for (const Complex& p : analog_poles) {
    digital_poles.push_back((fs2 + p) / (fs2 - p));
    denom *= (fs2 - p);
  }
  const double gain =
      std::pow(bw, n) * (std::pow(Complex(fs2, 0.0), n) / denom).real();

  // Pair poles into sections: conjugate pairs first, leftover real poles in
  // twos. Every section gets one zero at +1 and one at -1: b = [1, 0, -1].
  std::vector<Complex> cplx;
  std::vector<double> reals;
  for (const Complex& p : digital_poles) {
    if (std::abs(p.imag()) > 1e-12 * std::abs(p.real()) + 1e-300) {
      if (p.imag() > 0.0) cplx.push_back(p);
    } else {
      reals.push_back(p.real());
    }
  }
  // Sections ordered by pole radius, closest to the unit circle last.
  std::sort(cplx.begin(), cplx.end(),
            [](const Complex& a, const Complex& b) { return std::abs(a) < std::abs(b); });
  std::sort(reals.begin(), reals.end(),
            [](double a, double b) { return std::abs(a) < std::abs(b); });

  SosFilter sos;
  for (std::size_t i = 0; i + 1 < reals.size(); i += 2) {
    Biquad s;
    s.b0 = 1.0;
    s.b2 = -1.0;
    s.a1 = -(reals[i] + reals[i + 1]);
    s.a2 = reals[i] * reals[i + 1];
    sos.push_back(s);
  }
  for (const Complex& p : cplx) {
    Biquad s;
    s.b0 = 1.0;
    s.b2 = -1.0;
    s.a1 = -2.0 * p.real();
    s.a2 = std::norm(p);
    sos.push_back(s);
  }
  if (sos.size() != static_cast<std::size_t>(n))
    throw NumericError("butterworth design produced an unexpected section count");

  sos.front().b0 *= gain;
  sos.front().b2 *= gain;
  return sos;
}

Eigen::VectorXd sosfilt(const SosFilter& sos, const Eigen::VectorXd& x) {
  std::vector<double> buf(x.data(), x.data() + x.size());
  const std::vector<std::array<double, 2>> zeros(sos.size(), {0.0, 0.0});
  run_cascade(sos, buf, zeros, 0.0);
  return Eigen::Map<const Eigen::VectorXd>(buf.data(),
                                           static_cast<Eigen::Index>(buf.size()));
}

Eigen::VectorXd filtfilt(const SosFilter& sos, const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size();
  const Eigen::Index pad =
      static_cast<Eigen::Index>(3 * (2 * static_cast<int>(sos.size()) + 1));
  if (n <= pad + 1)
    throw ShapeError("signal too short for zero-phase filtering (needs > " +
                     std::to_string(pad + 1) + " samples)");

  // Odd reflection at both ends.
  std::vector<double> ext(static_cast<std::size_t>(n + 2 * pad));
  for (Eigen::Index i = 0; i < pad; ++i)
    ext[static_cast<std::size_t>(i)] = 2.0 * x[0] - x[pad - i];
  for (Eigen::Index i = 0; i < n; ++i) ext[static_cast<std::size_t>(pad + i)] = x[i];
  for (Eigen::Index i = 0; i < pad; ++i)
    ext[static_cast<std::size_t>(pad + n + i)] = 2.0 * x[n - 1] - x[n - 2 - i];

  // Per-section steady-state states, with DC gain cascaded section to
  // section so a constant input passes through with no transient.
  std::vector<std::array<double, 2>> zi(sos.size());
  double dc = 1.0;
  for (std::size_t si = 0; si < sos.size(); ++si) {
    const auto z = section_zi(sos[si]);
    zi[si] = {z[0] * dc, z[1] * dc};
    const Biquad& s = sos[si];
    dc *= (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
  }

  run_cascade(sos, ext, zi, ext.front());
  std::reverse(ext.begin(), ext.end());
  run_cascade(sos, ext, zi, ext.front());
  std::reverse(ext.begin(), ext.end());

  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = ext[static_cast<std::size_t>(pad + i)];
  return y;
}

}  // namespace ssacnn
