#include "ssacnn/synth.hpp"

#include <cmath>

#include "ssacnn/errors.hpp"
#include "ssacnn/filter.hpp"
#include "ssacnn/parallel.hpp"
#include "ssacnn/rng.hpp"

namespace ssacnn {

Eigen::MatrixXd equicorrelation(int channels, double rho) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Constant(channels, channels, rho);
  m.diagonal().setOnes();
  return m;
}

void SynthSpec::validate() const {
  if (subjects_per_class < 1) throw SpecError("synth: subjects_per_class must be >= 1");
  if (channels < 1) throw SpecError("synth: channels must be >= 1");
  if (!(fs > 0.0) || !(duration_s * fs >= 2.0)) throw SpecError("synth: bad fs/duration");
  if (bands.empty()) throw SpecError("synth: at least one band required");
  if (!(noise_level >= 0.0)) throw SpecError("synth: noise_level must be >= 0");
  for (const SynthBand& b : bands) {
    const double lo = b.center_hz - b.width_hz / 2.0;
    const double hi = b.center_hz + b.width_hz / 2.0;
    if (!(lo > 0.0) || !(hi < fs / 2.0))
      throw SpecError("synth: band outside (0, fs/2)");
  }
  for (int cls = 0; cls < 2; ++cls) {
    const auto& mats = coupling[static_cast<std::size_t>(cls)];
    if (mats.size() != bands.size())
      throw SpecError("synth: need one coupling matrix per band per class");
    for (const Eigen::MatrixXd& m : mats) {
      if (m.rows() != channels || m.cols() != channels)
        throw SpecError("synth: coupling matrix shape mismatch");
      if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw SpecError("synth: coupling matrix not symmetric");
      if ((m.diagonal().array() - 1.0).abs().maxCoeff() > 1e-12)
        throw SpecError("synth: coupling matrix diagonal must be 1");
    }
  }
}

namespace {

// Symmetric PSD square root; rejects matrices with eigenvalues below -1e-10.
Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  if (eig.info() != Eigen::Success) throw NumericError("coupling eigendecomposition failed");
  Eigen::VectorXd evals = eig.eigenvalues();
  if (evals.minCoeff() < -1e-10)
    throw SpecError("synth: coupling matrix is not positive semdefinite");
  for (Eigen::Index i = 0; i < evals.size(); ++i)
    evals[i] = std::sqrt(std::max(evals[i], 0.0));
  return eig.eigenvectors() * evals.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

std::vector<Recording> generate(const SynthSpec& spec) {
  spec.validate();
  const Eigen::Index c = spec.channels;
  const Eigen::Index n = static_cast<Eigen::Index>(std::llround(spec.duration_s * spec.fs));

  std::vector<SosFilter> band_filters;
  std::array<std::vector<Eigen::MatrixXd>, 2> mixing;
  for (std::size_t b = 0; b < spec.bands.size(); ++b) {
    const SynthBand& band = spec.bands[b];
    band_filters.push_back(butter_bandpass(spec.filter_order,
                                           band.center_hz - band.width_hz / 2.0,
                                           band.center_hz + band.width_hz / 2.0, spec.fs));
    for (int cls = 0; cls < 2; ++cls)
      mixing[static_cast<std::size_t>(cls)].push_back(
          symmetric_sqrt(spec.coupling[static_cast<std::size_t>(cls)][b]));
  }

  const int per_class = spec.subjects_per_class;
  std::vector<Recording> out(static_cast<std::size_t>(2 * per_class));

  parallel_for(2 * per_class, [&](std::int64_t u) {
    const int cls = static_cast<int>(u) / per_class;
    const int idx = static_cast<int>(u) % per_class;
    Rng rng(substream_seed(spec.seed, static_cast<std::uint64_t>(u)));

    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(c, n);
    Eigen::MatrixXd sources(c, n);
    for (std::size_t b = 0; b < spec.bands.size(); ++b) {
      for (Eigen::Index ch = 0; ch < c; ++ch) {
        Eigen::VectorXd noise(n);
        for (Eigen::Index t = 0; t < n; ++t) noise[t] = rng.normal();
        Eigen::VectorXd filtered = filtfilt(band_filters[b], noise);
        // Unit-variance sources so the coupling matrix is the in-band
        // correlation target.
        const double mean = filtered.mean();
        const double sd = std::sqrt((filtered.array() - mean).square().sum() /
                                    static_cast<double>(n));
        sources.row(ch) = ((filtered.array() - mean) / sd).transpose();
      }
      x.noalias() +=
          spec.bands[b].gain * (mixing[static_cast<std::size_t>(cls)][b] * sources);
    }
    if (spec.noise_level > 0.0)
      for (Eigen::Index ch = 0; ch < c; ++ch)
        for (Eigen::Index t = 0; t < n; ++t) x(ch, t) += spec.noise_level * rng.normal();

    Recording rec;
    rec.channels = std::move(x);
    rec.fs = spec.fs;
    rec.label = cls == 0 ? ClassLabel::Control : ClassLabel::Dyslexic;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%02d", cls == 0 ? "control" : "dyslexic", idx);
    rec.subject_id = buf;
    out[static_cast<std::size_t>(u)] = std::move(rec);
  });
  return out;
}

SynthSpec easy_preset() {
  SynthSpec spec;
  spec.subjects_per_class = 16;
  spec.channels = 16;
  spec.duration_s = 80.0;
  spec.fs = 500.0;
  // Band centers sit more than fs/L apart so the SSA clusters stay disjoint
  // at the default window of 70 samples.
  spec.bands = {{6.0, 4.0, 1.0}, {21.0, 6.0, 0.8}, {35.0, 6.0, 0.65}};
  spec.noise_level = 0.4;
  spec.seed = 1234;
  for (std::size_t b = 0; b < spec.bands.size(); ++b) {
    spec.coupling[0].push_back(equicorrelation(spec.channels, 0.05));
    spec.coupling[1].push_back(equicorrelation(spec.channels, 0.85));
  }
  return spec;
}

SynthSpec hard_preset() {
  SynthSpec spec = easy_preset();
  spec.noise_level = 0.8;
  spec.coupling[0].clear();
  spec.coupling[1].clear();
  for (std::size_t b = 0; b < spec.bands.size(); ++b) {
    spec.coupling[0].push_back(equicorrelation(spec.channels, 0.25));
    spec.coupling[1].push_back(equicorrelation(spec.channels, 0.5));
  }
  spec.seed = 4321;
  return spec;
}

SynthSpec group1_signal_preset() {
  SynthSpec spec;
  spec.subjects_per_class = 12;
  spec.channels = 12;
  spec.duration_s = 80.0;
  spec.fs = 500.0;
  spec.bands = {{6.0, 4.0, 1.5}, {21.0, 6.0, 0.5}, {35.0, 6.0, 0.4}};
  spec.noise_level = 0.35;
  spec.seed = 99;
  // Only the dominant band separates the classes.
  spec.coupling[0].push_back(equicorrelation(spec.channels, 0.05));
  spec.coupling[1].push_back(equicorrelation(spec.channels, 0.85));
  for (std::size_t b = 1; b < spec.bands.size(); ++b) {
    spec.coupling[0].push_back(equicorrelation(spec.channels, 0.3));
    spec.coupling[1].push_back(equicorrelation(spec.channels, 0.3));
  }
  return spec;
}

SynthSpec preset_by_name(const std::string& name) {
  if (name == "easy") return easy_preset();
  if (name == "hard") return hard_preset();
  if (name == "group1") return group1_signal_preset();
  throw SpecError("unknown synth preset '" + name + "'");
}

}  // namespace ssacnn
