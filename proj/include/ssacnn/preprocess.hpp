#pragma once

#include <vector>

#include "ssacnn/recording.hpp"

namespace ssacnn {

// Per-channel z-score with the population variance (divisor N). Throws
// DegenerateChannelError on a constant channel (dead electrode).
Recording normalize_channels(const Recording& rec);

// Zero-phase Butterworth band-pass applied per channel; output length equals
// input length. Channels run through the OpenMP pool.
Recording bandpass(const Recording& rec, const BandPassSpec& spec);
// Serial reference for the parallel kernel above; results must match bit for
// bit.
Recording bandpass_serial(const Recording& rec, const BandPassSpec& spec);

// Consecutive fixed-length windows. hop = round(M * (1 - overlap_fraction));
// a trailing remainder shorter than M is dropped.
std::vector<Segment> segment(const Recording& rec, double seconds,
                             double overlap_fraction);

}  // namespace ssacnn
