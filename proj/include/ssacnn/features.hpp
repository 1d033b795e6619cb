#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ssacnn/config.hpp"
#include "ssacnn/recording.hpp"
#include "ssacnn/welch.hpp"

namespace ssacnn {

// C x C Pearson correlation of per-channel PSD vectors for one grouped
// component; the classifier's input image.
struct FeatureMatrix {
  Eigen::MatrixXd values;  // symmetric, unit diagonal, entries in [-1, 1]
  int group_index = 0;
  std::string subject_id;
  bool degenerate = false;  // some PSD vector was constant
};

// Pearson correlation between the power vectors of all channel pairs,
// optionally restricted to bins with band.first <= f <= band.second.
// Constant power vectors correlate 0 and set the degenerate flag.
FeatureMatrix channel_correlation(
    std::span<const PsdEstimate> psds,
    std::optional<std::pair<double, double>> band = std::nullopt);

struct SubjectFeatures {
  std::string subject_id;
  ClassLabel label = ClassLabel::Unknown;
  int segment_index = -1;  // -1 for per-subject features
  std::vector<FeatureMatrix> matrices;  // G entries
};

struct FeatureDataset {
  std::vector<SubjectFeatures> samples;
  int groups = 0;    // G
  int channels = 0;  // C
  std::string config_hash;
};

// Full feature build for preprocessed recordings: segment, SSA-decompose
// each (channel, segment), derive the grouping (consensus over channels and
// segments by default), merge, Welch-average per (channel, group) and emit
// one C x C correlation matrix per group. In per_segment mode each segment
// becomes its own sample.
FeatureDataset build_features(std::span<const Recording> recordings,
                              const PipelineConfig& cfg);

// Directory layout: manifest.json plus one raw-f64 tensor (G*C rows of C)
// per sample.
void save_features(const FeatureDataset& ds, const std::filesystem::path& dir);
FeatureDataset load_features(const std::filesystem::path& dir);

}  // namespace ssacnn
