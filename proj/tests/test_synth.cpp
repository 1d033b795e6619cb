#include <doctest.h>

#include "ssacnn/errors.hpp"
#include "ssacnn/features.hpp"
#include "ssacnn/preprocess.hpp"
#include "ssacnn/synth.hpp"
#include "ssacnn/welch.hpp"
#include "test_util.hpp"

using namespace ssacnn;

namespace {

SynthSpec small_spec(double rho, double noise, std::uint64_t seed) {
  SynthSpec spec;
  spec.subjects_per_class = 1;
  spec.channels = 4;
  spec.duration_s = 40.0;
  spec.fs = 250.0;
  spec.bands = {{8.0, 4.0, 1.0}};
  spec.noise_level = noise;
  spec.seed = seed;
  spec.coupling[0] = {equicorrelation(4, rho)};
  spec.coupling[1] = {equicorrelation(4, rho)};
  return spec;
}

// Pearson correlation of in-band PSD bins between channel pairs.
double mean_offdiag_band_corr(const Recording& rec, double lo, double hi) {
  std::vector<PsdEstimate> psds;
  const int nfft = next_pow2(rec.sample_count());
  for (Eigen::Index c = 0; c < rec.channel_count(); ++c) {
    const std::vector<Eigen::VectorXd> segs = {rec.channels.row(c).transpose()};
    psds.push_back(welch_psd(segs, rec.fs, nfft));
  }
  const FeatureMatrix fm = channel_correlation(psds, {{lo, hi}});
  double sum = 0.0;
  int count = 0;
  const Eigen::Index c = rec.channel_count();
  for (Eigen::Index i = 0; i < c; ++i)
    for (Eigen::Index j = i + 1; j < c; ++j) {
      sum += fm.values(i, j);
      ++count;
    }
  return sum / count;
}

}  // namespace

TEST_CASE("same seed generates bitwise-identical recordings") {
  const SynthSpec spec = small_spec(0.4, 0.2, 42);
  const auto a = generate(spec);
  const auto b = generate(spec);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].subject_id == b[i].subject_id);
    CHECK((a[i].channels - b[i].channels).cwiseAbs().maxCoeff() == 0.0);
  }
  // different seed differs
  SynthSpec other = spec;
  other.seed = 43;
  const auto c = generate(other);
  CHECK((a[0].channels - c[0].channels).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("identity coupling with zero noise decorrelates the band") {
  SynthSpec spec = small_spec(0.0, 0.0, 7);
  const auto recs = generate(spec);
  for (const auto& rec : recs) {
    const double r = mean_offdiag_band_corr(rec, 6.0, 10.0);
    CHECK(std::abs(r) < 0.15);
  }
}

TEST_CASE("rank-one coupling makes channels nearly identical in band") {
  SynthSpec spec = small_spec(1.0, 0.0, 8);  // all-ones coupling
  const auto recs = generate(spec);
  for (const auto& rec : recs) {
    const double r = mean_offdiag_band_corr(rec, 6.0, 10.0);
    CHECK(r > 0.9);
  }
}

TEST_CASE("non-PSD coupling is rejected") {
  SynthSpec spec = small_spec(0.0, 0.1, 9);
  // rho = -0.5 on 4 channels has eigenvalue 1 + 3*rho = -0.5
  spec.coupling[0] = {equicorrelation(4, -0.5)};
  CHECK_THROWS_AS(generate(spec), SpecError);

  spec = small_spec(0.0, 0.1, 9);
  spec.coupling[1][0](0, 1) = 0.3;  // asymmetric
  CHECK_THROWS_AS(generate(spec), SpecError);
}

TEST_CASE("generated signals survive preprocessing at preset noise levels") {
  SynthSpec spec = easy_preset();
  spec.subjects_per_class = 1;
  spec.channels = 4;
  spec.duration_s = 20.0;
  spec.coupling[0].assign(spec.bands.size(), equicorrelation(4, 0.05));
  spec.coupling[1].assign(spec.bands.size(), equicorrelation(4, 0.85));
  for (const auto& rec : generate(spec)) {
    CHECK_NOTHROW(normalize_channels(rec));
    CHECK_NOTHROW(bandpass(rec, BandPassSpec{}));
  }
}

TEST_CASE("presets are resolvable and validate") {
  for (const char* name : {"easy", "hard", "group1"}) {
    const SynthSpec spec = preset_by_name(name);
    CHECK_NOTHROW(spec.validate());
  }
  CHECK_THROWS_AS(preset_by_name("nope"), SpecError);
}

TEST_CASE("class separability margin grows with the coupling gap") {
  // three gap settings; measure the best per-group class margin in the
  // pipeline's feature matrices
  std::vector<double> margins;
  for (const double rho_gap : {0.2, 0.5, 0.8}) {
    SynthSpec spec;
    spec.subjects_per_class = 2;
    spec.channels = 6;
    spec.duration_s = 24.0;
    spec.fs = 250.0;
    spec.bands = {{6.0, 4.0, 1.0}};
    spec.noise_level = 0.3;
    spec.seed = 1000 + static_cast<std::uint64_t>(rho_gap * 10);
    spec.coupling[0] = {equicorrelation(6, 0.05)};
    spec.coupling[1] = {equicorrelation(6, 0.05 + rho_gap)};

    std::vector<Recording> pre;
    for (const auto& rec : generate(spec))
      pre.push_back(bandpass(normalize_channels(rec), BandPassSpec{0.5, 40.0, 4}));

    PipelineConfig cfg;
    cfg.fs = 250.0;
    cfg.segment_seconds = 12.0;
    cfg.ssa_window = 40;
    cfg.ssa_components = 12;
    cfg.groups = 3;
    cfg.ensemble_size = 2;
    cfg.sweep_max = 3;
    const FeatureDataset ds = build_features(pre, cfg);

    double best = 0.0;
    for (int g = 0; g < cfg.groups; ++g) {
      double mean[2] = {0.0, 0.0};
      int count[2] = {0, 0};
      for (const auto& s : ds.samples) {
        const auto& v = s.matrices[static_cast<std::size_t>(g)].values;
        double sum = 0.0;
        int pairs = 0;
        for (int i = 0; i < 6; ++i)
          for (int j = i + 1; j < 6; ++j) {
            sum += v(i, j);
            ++pairs;
          }
        const int cls = static_cast<int>(s.label);
        mean[cls] += sum / pairs;
        ++count[cls];
      }
      best = std::max(best, mean[1] / count[1] - mean[0] / count[0]);
    }
    margins.push_back(best);
  }
  CAPTURE(margins[0]);
  CAPTURE(margins[1]);
  CAPTURE(margins[2]);
  CHECK(margins[0] < margins[1]);
  CHECK(margins[1] < margins[2]);
}
