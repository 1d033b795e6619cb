#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

namespace ssacnn {

enum class ClassLabel : int { Unknown = -1, Control = 0, Dyslexic = 1 };

std::string to_string(ClassLabel label);
ClassLabel label_from_string(const std::string& s);

// One multichannel recording: C channels by N samples, microvolt-scaled
// arbitrary units. Channels are rows.
struct Recording {
  Eigen::MatrixXd channels;  // C x N
  double fs = 0.0;           // Hz
  std::string subject_id;
  ClassLabel label = ClassLabel::Unknown;
  std::vector<std::string> channel_names;  // empty or size C

  Eigen::Index channel_count() const { return channels.rows(); }
  Eigen::Index sample_count() const { return channels.cols(); }

  // C >= 1, N >= 2, fs > 0; throws ShapeError / SpecError otherwise.
  void validate() const;
};

// A fixed-length window cut from a recording.
struct Segment {
  Eigen::MatrixXd data;  // C x M
  double fs = 0.0;
  std::string parent;  // subject_id of the source recording
  int index = 0;       // ordinal within the source
};

struct BandPassSpec {
  double low_hz = 0.5;
  double high_hz = 40.0;
  int order = 4;

  // 0 < low < high < fs/2; throws NyquistError / SpecError.
  void validate(double fs) const;
};

enum class RecordingFormat { Csv, RawF64 };

// CSV: header row of channel names, one row per sample tick.
// raw-f64: 32-byte header {magic "SSAEEG01", u32 C, u64 N, f64 fs, u32
// reserved}, then C x N little-endian doubles, channel-major. Round-trips
// bit-exactly.
Recording load_recording(const std::filesystem::path& path, RecordingFormat format);
void save_recording(const Recording& rec, const std::filesystem::path& path,
                    RecordingFormat format);

// Small helpers shared by the dataset and checkpoint containers: a bare
// row-major double matrix in the same raw-f64 container (fs field unused,
// written as 0).
Eigen::MatrixXd load_matrix_f64(const std::filesystem::path& path);
void save_matrix_f64(const Eigen::MatrixXd& m, const std::filesystem::path& path);

}  // namespace ssacnn
