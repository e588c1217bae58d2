#pragma once

#include <array>
#include <string>
#include <vector>

#include "escnet/audio/clip.h"

namespace escnet::dsp {

// Canvas shared by the STFT set and the delta set: 3 channels (one per FFT
// size) x 512 frequency rows x 384 time frames, channel-major layout.
constexpr int kFreqRows = 512;
constexpr int kTimeCols = 384;
inline constexpr std::array<int, 3> kFftSizes = {32, 128, 1024};
constexpr double kLogEps = 1e-10;

static_assert(kTimeCols == audio::kFramesPerSegment);

// One window's three network inputs plus its training target.
struct FeatureTriple {
    std::vector<float> waveform;     // audio::kSegmentSamples
    std::vector<float> stft;         // 3 x 512 x 384
    std::vector<float> delta;        // 3 x 512 x 384
    std::vector<float> label_target; // K entries, sums to 1
    bool is_noise = false;
    std::string source_id;
};

// Log-magnitude STFT of one window at the given FFT size: (n_fft/2 + 1)
// rows x 384 columns, log10(|X| + 1e-10), Hann window, frames centered on
// multiples of the 10 ms hop with reflection padding at the edges.
std::vector<float> stft_magnitude(const audio::Segment& segment, int n_fft);

// Bilinear interpolation along the frequency axis only, to kFreqRows rows.
// Input is rows_in x 384 and must have at least two rows.
std::vector<float> rescale_bilinear(const std::vector<float>& values, int rows_in);

// The three STFT resolutions rescaled to the common canvas and stacked in
// ascending FFT-size order.
std::vector<float> stft_stack(const audio::Segment& segment);

// Five-frame regression delta over time, per channel and frequency row,
// with boundary frames replicated. Output shape equals input shape.
std::vector<float> delta_stack(const std::vector<float>& stft);

FeatureTriple featurize(const audio::Segment& segment, std::vector<float> label_target);

} // namespace escnet::dsp
