#include "ssacnn/preprocess.hpp"

#include <cmath>

#include "ssacnn/errors.hpp"
#include "ssacnn/filter.hpp"
#include "ssacnn/parallel.hpp"

namespace ssacnn {

Recording normalize_channels(const Recording& rec) {
  rec.validate();
  const Eigen::Index n = rec.sample_count();
  Recording out = rec;
  for (Eigen::Index c = 0; c < rec.channel_count(); ++c) {
    const double mean = rec.channels.row(c).mean();
    const double var =
        (rec.channels.row(c).array() - mean).square().sum() / static_cast<double>(n);
    if (var == 0.0)
      throw DegenerateChannelError("channel " + std::to_string(c) +
                                   " has zero variance");
    out.channels.row(c) = (rec.channels.row(c).array() - mean) / std::sqrt(var);
  }
  return out;
}

namespace {

template <typename Loop>
Recording bandpass_impl(const Recording& rec, const BandPassSpec& spec, Loop&& loop) {
  rec.validate();
  spec.validate(rec.fs);
  const SosFilter sos = butter_bandpass(spec.order, spec.low_hz, spec.high_hz, rec.fs);
  Recording out = rec;
  loop(rec.channel_count(), [&](std::int64_t c) {
    out.channels.row(c) = filtfilt(sos, rec.channels.row(c).transpose()).transpose();
  });
  return out;
}

}  // namespace

Recording bandpass(const Recording& rec, const BandPassSpec& spec) {
  return bandpass_impl(rec, spec,
                       [](std::int64_t n, auto&& fn) { parallel_for(n, fn); });
}

Recording bandpass_serial(const Recording& rec, const BandPassSpec& spec) {
  return bandpass_impl(rec, spec,
                       [](std::int64_t n, auto&& fn) { serial_for(n, fn); });
}

std::vector<Segment> segment(const Recording& rec, double seconds,
                             double overlap_fraction) {
  rec.validate();
  if (!(seconds * rec.fs >= 2.0)) throw SpecError("segment must span at least 2 samples");
  if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0))
    throw SpecError("overlap_fraction must lie in [0, 1)");

  const Eigen::Index m = static_cast<Eigen::Index>(std::llround(seconds * rec.fs));
  const Eigen::Index n = rec.sample_count();
  if (m > n)
    throw EmptySegmentation("segment window of " + std::to_string(m) +
                            " samples exceeds recording length " + std::to_string(n));

  Eigen::Index hop = static_cast<Eigen::Index>(
      std::llround(static_cast<double>(m) * (1.0 - overlap_fraction)));
  if (hop < 1) hop = 1;

  std::vector<Segment> out;
  int index = 0;
  for (Eigen::Index start = 0; start + m <= n; start += hop) {
    Segment seg;
    seg.data = rec.channels.middleCols(start, m);
    seg.fs = rec.fs;
    seg.parent = rec.subject_id;
    seg.index = index++;
    out.push_back(std::move(seg));
  }
  return out;
}

}  // namespace ssacnn
