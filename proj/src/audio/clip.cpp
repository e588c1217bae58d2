#include "escnet/audio/clip.h"

#include <algorithm>

#include "escnet/core/errors.h"
#include "escnet/core/rng.h"

namespace escnet::audio {

int64_t window_start_count(const AudioClip& clip) {
    const int64_t n = static_cast<int64_t>(clip.samples.size());
    return n >= kSegmentSamples ? n - kSegmentSamples + 1 : 1;
}

Segment extract_window(const AudioClip& clip, int64_t start) {
    if (clip.samples.empty()) throw ArgumentError("extract_window: empty clip");
    if (clip.sample_rate != kCanonicalRate) {
        throw ArgumentError("extract_window: clip must be at 44100 Hz, got " +
                            std::to_string(clip.sample_rate));
    }
    Segment seg;
    seg.source_id = clip.source_id;
    seg.start_sample = start;
    seg.samples.assign(kSegmentSamples, 0.0f);

    const int64_t n = static_cast<int64_t>(clip.samples.size());
    if (n < kSegmentSamples) {
        if (start != 0) throw ArgumentError("extract_window: short clip has a single start at 0");
        // center the available audio in the window
        const int64_t offset = (kSegmentSamples - n) / 2;
        std::copy(clip.samples.begin(), clip.samples.end(), seg.samples.begin() + offset);
        return seg;
    }
    if (start < 0 || start + kSegmentSamples > n) {
        throw ArgumentError("extract_window: start " + std::to_string(start) + " out of range");
    }
    std::copy(clip.samples.begin() + start, clip.samples.begin() + start + kSegmentSamples,
              seg.samples.begin());
    return seg;
}

std::vector<Segment> chunk_segments(const AudioClip& clip) {
    if (clip.samples.empty()) throw ArgumentError("chunk_segments: empty clip");
    if (clip.sample_rate != kCanonicalRate) {
        throw ArgumentError("chunk_segments: clip must be at 44100 Hz, got " +
                            std::to_string(clip.sample_rate));
    }
    std::vector<Segment> out;
    const int64_t n = static_cast<int64_t>(clip.samples.size());
    if (n < kSegmentSamples) {
        out.push_back(extract_window(clip, 0));
        return out;
    }
    for (int64_t start = 0; start + kSegmentSamples <= n; start += kSegmentSamples) {
        out.push_back(extract_window(clip, start));
    }
    return out;
}

Segment white_noise_segment(uint64_t seed) {
    RngStream rng(seed);
    const double amplitude = rng.uniform(0.1, 1.0);
    Segment seg;
    seg.source_id = "noise:" + std::to_string(seed);
    seg.is_noise = true;
    seg.samples.resize(kSegmentSamples);
    for (auto& s : seg.samples) s = static_cast<float>(rng.uniform(-amplitude, amplitude));
    return seg;
}

AudioClip white_noise_clip(uint64_t seed, double seconds) {
    RngStream rng(seed);
    const double amplitude = rng.uniform(0.1, 1.0);
    AudioClip clip;
    clip.sample_rate = kCanonicalRate;
    clip.source_id = "noise-clip:" + std::to_string(seed);
    clip.samples.resize(static_cast<size_t>(seconds * kCanonicalRate));
    for (auto& s : clip.samples) s = static_cast<float>(rng.uniform(-amplitude, amplitude));
    return clip;
}

} // namespace escnet::audio
