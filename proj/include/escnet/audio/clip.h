#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace escnet::audio {

// Canonical processing rate; every clip is resampled to this on ingest.
constexpr int kCanonicalRate = 44100;
// Window length: 44.1 kHz x 3.84 s.
constexpr int kSegmentSamples = 169344;
// Analysis hop: 10 ms at the canonical rate.
constexpr int kHopSamples = 441;
// Frames per window: kSegmentSamples / kHopSamples.
constexpr int kFramesPerSegment = 384;

struct AudioClip {
    std::vector<float> samples; // mono, amplitudes in [-1, 1]
    int sample_rate = kCanonicalRate;
    int label = -1; // class index, -1 when unlabeled
    std::string source_id;
};

struct Segment {
    std::vector<float> samples; // exactly kSegmentSamples
    std::string source_id;
    int64_t start_sample = 0;
    bool is_noise = false;
};

// Number of distinct window start positions for mixing. Clips shorter than
// one window have a single (padded) start.
int64_t window_start_count(const AudioClip& clip);

// Extracts one window starting at the given sample. A clip shorter than the
// window length yields a symmetrically zero-padded segment (start must be 0).
Segment extract_window(const AudioClip& clip, int64_t start);

// Splits a clip into floor(len / kSegmentSamples) non-overlapping windows,
// ordered by start. A short clip produces one zero-padded window; a trailing
// remainder is discarded.
std::vector<Segment> chunk_segments(const AudioClip& clip);

// L i.i.d. samples uniform in [-a, a] with a itself drawn uniformly from
// [0.1, 1.0]. Deterministic for a given seed.
Segment white_noise_segment(uint64_t seed);

// Full clip of the same uniform noise process, for evaluation inputs.
AudioClip white_noise_clip(uint64_t seed, double seconds);

} // namespace escnet::audio
