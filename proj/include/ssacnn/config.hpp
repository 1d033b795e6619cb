#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace ssacnn {

// Every stage parameter in one document. Defaults mirror the reference
// pipeline: 500 Hz recordings, [0.5, 40] Hz band, 40 s segments, SSA window
// 70 with 5 grouped components, 4-member voting ensemble under 4-fold
// subject-level cross-validation.
struct PipelineConfig {
  // signal
  double fs = 500.0;  // used by synth and validation; recordings carry their own
  double band_low_hz = 0.5;
  double band_high_hz = 40.0;
  int filter_order = 4;
  double segment_seconds = 40.0;
  double segment_overlap = 0.0;

  // ssa
  int ssa_window = 70;
  int ssa_components = 70;
  int groups = 5;  // G
  bool consensus_grouping = true;

  // welch: 0 selects the next power of two >= segment length
  int welch_nfft = 0;

  // features
  bool band_restrict = true;  // correlate over [band_low, band_high] bins only
  bool per_segment = false;   // one sample per segment instead of per subject

  // cnn
  double learning_rate = 1e-3;
  int epochs = 80;
  int batch_size = 8;
  double dropout_rate = 0.5;

  // eval
  int folds = 4;
  int ensemble_size = 4;  // G', members used for voting
  int sweep_min = 1;
  int sweep_max = 5;

  // run
  std::uint64_t seed = 42;
  int threads = 0;  // 0 = runtime default

  // Cross-field checks; throws SpecError with a message naming the field.
  void validate() const;

  // FNV-1a over the canonical key=value rendering; stamps output artifacts.
  std::uint64_t hash() const;
  std::string hash_hex() const;
  std::string canonical() const;
};

// TOML-style "key = value" document with [section] headers; unknown keys are
// rejected so typos fail loudly.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig parse_config(const std::string& text);
void save_config(const PipelineConfig& cfg, const std::filesystem::path& path);

}  // namespace ssacnn
