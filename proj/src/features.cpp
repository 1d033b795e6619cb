#include "ssacnn/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "ssacnn/errors.hpp"
#include "ssacnn/parallel.hpp"
#include "ssacnn/preprocess.hpp"
#include "ssacnn/ssa.hpp"

namespace ssacnn {

FeatureMatrix channel_correlation(std::span<const PsdEstimate> psds,
                                  std::optional<std::pair<double, double>> band) {
  if (psds.empty()) throw NoDataError("channel_correlation: no PSDs");
  const Eigen::Index bins = psds.front().freqs.size();
  for (const auto& p : psds)
    if (p.freqs.size() != bins || (p.freqs - psds.front().freqs).cwiseAbs().maxCoeff() != 0.0)
      throw ShapeError("channel_correlation: PSDs do not share a frequency grid");

  Eigen::Index lo = 0, hi = bins - 1;
  if (band) {
    while (lo < bins && psds.front().freqs[lo] < band->first) ++lo;
    while (hi >= 0 && psds.front().freqs[hi] > band->second) --hi;
    if (lo > hi) throw SpecError("channel_correlation: band selects no bins");
  }
  const Eigen::Index m = hi - lo + 1;
  const int c = static_cast<int>(psds.size());

  Eigen::MatrixXd centered(c, m);
  Eigen::VectorXd norms(c);
  FeatureMatrix fm;
  for (int i = 0; i < c; ++i) {
    const auto seg = psds[static_cast<std::size_t>(i)].power.segment(lo, m);
    centered.row(i) = (seg.array() - seg.mean()).transpose();
    norms[i] = centered.row(i).norm();
    if (norms[i] == 0.0) fm.degenerate = true;
  }

  fm.values.resize(c, c);
  for (int i = 0; i < c; ++i) {
    fm.values(i, i) = 1.0;
    for (int j = i + 1; j < c; ++j) {
      double v = 0.0;
      if (norms[i] > 0.0 && norms[j] > 0.0) {
        v = centered.row(i).dot(centered.row(j)) / (norms[i] * norms[j]);
        v = std::clamp(v, -1.0, 1.0);
      }
      fm.values(i, j) = v;
      fm.values(j, i) = v;
    }
  }
  return fm;
}

namespace {

struct SubjectDecompositions {
  // decomposition per (channel, segment), channel-major
  std::vector<SsaDecomposition> per_unit;
  Eigen::Index channels = 0;
  std::size_t segments = 0;

  const SsaDecomposition& at(Eigen::Index channel, std::size_t seg) const {
    return per_unit[static_cast<std::size_t>(channel) * segments + seg];
  }
};

// Mean over a multiset of addends, summed in sorted order so the result does
// not depend on channel order (keeps channel-permutation equivariance exact).
double sorted_mean(std::vector<double>& addends) {
  std::sort(addends.begin(), addends.end());
  double sum = 0.0;
  for (double v : addends) sum += v;
  return sum / static_cast<double>(addends.size());
}

// Grouping shared by all channels of one subject: cluster the
// channel-and-segment-averaged |w-correlation|, weight groups by the
// averaged variance fractions.
ComponentGrouping consensus_grouping(const SubjectDecompositions& dec, int g) {
  const int nc = dec.per_unit.front().retained();
  const std::size_t units = dec.per_unit.size();

  std::vector<Eigen::MatrixXd> abs_w(units);
  std::vector<Eigen::VectorXd> fractions(units);
  parallel_for(static_cast<std::int64_t>(units), [&](std::int64_t u) {
    abs_w[static_cast<std::size_t>(u)] =
        w_correlation(dec.per_unit[static_cast<std::size_t>(u)]).values.cwiseAbs();
    fractions[static_cast<std::size_t>(u)] =
        variance_explained(dec.per_unit[static_cast<std::size_t>(u)]);
  });

  Eigen::MatrixXd mean_abs_w(nc, nc);
  Eigen::VectorXd mean_fraction(nc);
  std::vector<double> addends(units);
  for (int i = 0; i < nc; ++i) {
    for (int j = 0; j < nc; ++j) {
      for (std::size_t u = 0; u < units; ++u) addends[u] = abs_w[u](i, j);
      mean_abs_w(i, j) = sorted_mean(addends);
    }
    for (std::size_t u = 0; u < units; ++u) addends[u] = fractions[u][i];
    mean_fraction[i] = sorted_mean(addends);
  }

  WCorrelationMatrix w;
  w.values = mean_abs_w;
  return group_components(w, mean_fraction, g);
}

std::vector<FeatureMatrix> matrices_for(
    const SubjectDecompositions& dec, std::span<const std::size_t> segment_ids,
    const std::vector<ComponentGrouping>& grouping_per_channel, const std::string& subject,
    double fs, const PipelineConfig& cfg) {
  const Eigen::Index c = dec.channels;
  const int g = cfg.groups;

  Eigen::Index seg_len = dec.per_unit.front().original_length;
  const int nfft = cfg.welch_nfft != 0 ? cfg.welch_nfft : next_pow2(seg_len);

  // PSD per (channel, group), averaging periodograms across segments.
  std::vector<PsdEstimate> psds(static_cast<std::size_t>(c) * static_cast<std::size_t>(g));
  parallel_for(c, [&](std::int64_t ch) {
    const ComponentGrouping& grouping = grouping_per_channel[static_cast<std::size_t>(ch)];
    std::vector<std::vector<Eigen::VectorXd>> grouped(static_cast<std::size_t>(g));
    for (std::size_t s : segment_ids) {
      auto merged = merge_groups(dec.at(ch, s), grouping);
      for (int k = 0; k < g; ++k)
        grouped[static_cast<std::size_t>(k)].push_back(std::move(merged[static_cast<std::size_t>(k)]));
    }
    for (int k = 0; k < g; ++k)
      psds[static_cast<std::size_t>(ch) * g + static_cast<std::size_t>(k)] =
          welch_psd(grouped[static_cast<std::size_t>(k)], fs, nfft);
  });

  std::optional<std::pair<double, double>> band;
  if (cfg.band_restrict) band = {cfg.band_low_hz, cfg.band_high_hz};

  std::vector<FeatureMatrix> out(static_cast<std::size_t>(g));
  for (int k = 0; k < g; ++k) {
    std::vector<PsdEstimate> per_channel(static_cast<std::size_t>(c));
    for (Eigen::Index ch = 0; ch < c; ++ch)
      per_channel[static_cast<std::size_t>(ch)] =
          psds[static_cast<std::size_t>(ch) * g + static_cast<std::size_t>(k)];
    FeatureMatrix fm = channel_correlation(per_channel, band);
    fm.group_index = k;
    fm.subject_id = subject;
    out[static_cast<std::size_t>(k)] = std::move(fm);
  }
  return out;
}

}  // namespace

FeatureDataset build_features(std::span<const Recording> recordings,
                              const PipelineConfig& cfg) {
  cfg.validate();
  if (recordings.empty()) throw NoDataError("build_features: no recordings");

  FeatureDataset ds;
  ds.groups = cfg.groups;
  ds.channels = static_cast<int>(recordings.front().channel_count());
  ds.config_hash = cfg.hash_hex();

  const SsaConfig ssa_cfg{cfg.ssa_window, cfg.ssa_components};

  for (const Recording& rec : recordings) {
    if (rec.channel_count() != ds.channels)
      throw ShapeError("build_features: channel count differs across recordings (" +
                       rec.subject_id + ")");
    const auto segments = segment(rec, cfg.segment_seconds, cfg.segment_overlap);
    if (segments.empty())
      throw EmptySegmentation("build_features: no segments for " + rec.subject_id);

    SubjectDecompositions dec;
    dec.channels = rec.channel_count();
    dec.segments = segments.size();
    dec.per_unit.resize(static_cast<std::size_t>(dec.channels) * dec.segments);

    const std::int64_t units = static_cast<std::int64_t>(dec.per_unit.size());
    try {
      parallel_for(units, [&](std::int64_t u) {
        const Eigen::Index ch = static_cast<Eigen::Index>(u) / static_cast<Eigen::Index>(dec.segments);
        const std::size_t s = static_cast<std::size_t>(u) % dec.segments;
        const Eigen::VectorXd series = segments[s].data.row(ch).transpose();
        dec.per_unit[static_cast<std::size_t>(u)] = ssa_decompose(series, ssa_cfg);
      });
    } catch (const Error& e) {
      throw NumericError("build_features: subject " + rec.subject_id +
                         " failed: " + e.what());
    }

    // Either one shared grouping per subject or an independent grouping per
    // channel (from that channel's segment-averaged w-correlation).
    std::vector<ComponentGrouping> grouping_per_channel(
        static_cast<std::size_t>(dec.channels));
    if (cfg.consensus_grouping) {
      const ComponentGrouping shared = consensus_grouping(dec, cfg.groups);
      std::fill(grouping_per_channel.begin(), grouping_per_channel.end(), shared);
    } else {
      parallel_for(dec.channels, [&](std::int64_t ch) {
        SubjectDecompositions one;
        one.channels = 1;
        one.segments = dec.segments;
        for (std::size_t s = 0; s < dec.segments; ++s)
          one.per_unit.push_back(dec.at(ch, s));
        grouping_per_channel[static_cast<std::size_t>(ch)] =
            consensus_grouping(one, cfg.groups);
      });
    }

    if (cfg.per_segment) {
      for (std::size_t s = 0; s < dec.segments; ++s) {
        SubjectFeatures sf;
        sf.subject_id = rec.subject_id;
        sf.label = rec.label;
        sf.segment_index = static_cast<int>(s);
        const std::size_t ids[] = {s};
        sf.matrices = matrices_for(dec, ids, grouping_per_channel, rec.subject_id,
                                   rec.fs, cfg);
        ds.samples.push_back(std::move(sf));
      }
    } else {
      std::vector<std::size_t> ids(dec.segments);
      for (std::size_t s = 0; s < dec.segments; ++s) ids[s] = s;
      SubjectFeatures sf;
      sf.subject_id = rec.subject_id;
      sf.label = rec.label;
      sf.matrices = matrices_for(dec, ids, grouping_per_channel, rec.subject_id,
                                 rec.fs, cfg);
      ds.samples.push_back(std::move(sf));
    }
  }
  return ds;
}

void save_features(const FeatureDataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["G"] = ds.groups;
  manifest["C"] = ds.channels;
  manifest["config_hash"] = ds.config_hash;
  nlohmann::json samples = nlohmann::json::array();

  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const SubjectFeatures& sf = ds.samples[i];
    std::string name = sf.subject_id;
    if (sf.segment_index >= 0) name += "_seg" + std::to_string(sf.segment_index);
    name += ".f64";

    const int c = ds.channels;
    Eigen::MatrixXd stacked(static_cast<Eigen::Index>(ds.groups) * c, c);
    for (int g = 0; g < ds.groups; ++g)
      stacked.middleRows(static_cast<Eigen::Index>(g) * c, c) =
          sf.matrices[static_cast<std::size_t>(g)].values;
    save_matrix_f64(stacked, dir / name);

    nlohmann::json entry;
    entry["subject_id"] = sf.subject_id;
    entry["label"] = to_string(sf.label);
    entry["segment_index"] = sf.segment_index;
    entry["file"] = name;
    samples.push_back(entry);
  }
  manifest["samples"] = samples;

  std::ofstream out(dir / "manifest.json");
  if (!out) throw IoError("cannot write feature manifest in " + dir.string());
  out << manifest.dump(2) << '\n';
}

FeatureDataset load_features(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw IoError("cannot open feature manifest in " + dir.string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("bad feature manifest: " + std::string(e.what()));
  }

  FeatureDataset ds;
  ds.groups = manifest.at("G").get<int>();
  ds.channels = manifest.at("C").get<int>();
  ds.config_hash = manifest.at("config_hash").get<std::string>();

  for (const auto& entry : manifest.at("samples")) {
    SubjectFeatures sf;
    sf.subject_id = entry.at("subject_id").get<std::string>();
    sf.label = label_from_string(entry.at("label").get<std::string>());
    sf.segment_index = entry.at("segment_index").get<int>();
    const Eigen::MatrixXd stacked =
        load_matrix_f64(dir / entry.at("file").get<std::string>());
    if (stacked.rows() != static_cast<Eigen::Index>(ds.groups) * ds.channels ||
        stacked.cols() != ds.channels)
      throw ShapeError("feature tensor shape mismatch for " + sf.subject_id);
    for (int g = 0; g < ds.groups; ++g) {
      FeatureMatrix fm;
      fm.values = stacked.middleRows(static_cast<Eigen::Index>(g) * ds.channels,
                                     ds.channels);
      fm.group_index = g;
      fm.subject_id = sf.subject_id;
      sf.matrices.push_back(std::move(fm));
    }
    ds.samples.push_back(std::move(sf));
  }
  return ds;
}

}  // namespace ssacnn
