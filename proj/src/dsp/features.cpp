#include "escnet/dsp/features.h"

#include <algorithm>
#include <cmath>
#include <complex>

#include "escnet/core/errors.h"
#include "escnet/core/fft.h"

namespace escnet::dsp {
namespace {

constexpr double kTau = 6.283185307179586476925286766559;

// Reflection without repeating the edge sample: index -1 maps to 1,
// index L maps to L-2.
inline int64_t reflect_index(int64_t i, int64_t n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * n - 2 - i;
    }
    return i;
}

} // namespace

std::vector<float> stft_magnitude(const audio::Segment& segment, int n_fft) {
    if (std::find(kFftSizes.begin(), kFftSizes.end(), n_fft) == kFftSizes.end()) {
        throw ArgumentError("stft_magnitude: FFT size " + std::to_string(n_fft) +
                            " not in {32, 128, 1024}");
    }
    const int rows = n_fft / 2 + 1;
    const int64_t n_samples = static_cast<int64_t>(segment.samples.size());

    std::vector<double> window(static_cast<size_t>(n_fft));
    for (int i = 0; i < n_fft; ++i) {
        window[static_cast<size_t>(i)] = 0.5 - 0.5 * std::cos(kTau * i / n_fft);
    }

    std::vector<float> out(static_cast<size_t>(rows) * kTimeCols);
    std::vector<double> frame(static_cast<size_t>(n_fft));
    std::vector<double> mags(static_cast<size_t>(rows));
    std::vector<std::complex<double>> scratch;

    for (int t = 0; t < kTimeCols; ++t) {
        const int64_t center = static_cast<int64_t>(t) * audio::kHopSamples;
        for (int k = 0; k < n_fft; ++k) {
            const int64_t idx = reflect_index(center - n_fft / 2 + k, n_samples);
            frame[static_cast<size_t>(k)] =
                static_cast<double>(segment.samples[static_cast<size_t>(idx)]) * window[static_cast<size_t>(k)];
        }
        real_fft_magnitude(frame.data(), static_cast<size_t>(n_fft), scratch, mags.data());
        for (int r = 0; r < rows; ++r) {
            out[static_cast<size_t>(r) * kTimeCols + t] =
                static_cast<float>(std::log10(mags[static_cast<size_t>(r)] + kLogEps));
        }
    }
    return out;
}

std::vector<float> rescale_bilinear(const std::vector<float>& values, int rows_in) {
    if (rows_in < 2) throw ArgumentError("rescale_bilinear: need at least two rows");
    if (values.size() != static_cast<size_t>(rows_in) * kTimeCols) {
        throw ArgumentError("rescale_bilinear: input is not rows_in x 384");
    }
    std::vector<float> out(static_cast<size_t>(kFreqRows) * kTimeCols);
    const double step = static_cast<double>(rows_in - 1) / (kFreqRows - 1);
    for (int i = 0; i < kFreqRows; ++i) {
        const double src = step * i;
        const int i0 = std::min(static_cast<int>(src), rows_in - 2);
        const float frac = static_cast<float>(src - i0);
        const float one_minus = 1.0f - frac;
        const float* row0 = values.data() + static_cast<size_t>(i0) * kTimeCols;
        const float* row1 = row0 + kTimeCols;
        float* dst = out.data() + static_cast<size_t>(i) * kTimeCols;
        for (int t = 0; t < kTimeCols; ++t) {
            dst[t] = one_minus * row0[t] + frac * row1[t];
        }
    }
    return out;
}

std::vector<float> stft_stack(const audio::Segment& segment) {
    std::vector<float> out;
    out.reserve(static_cast<size_t>(3) * kFreqRows * kTimeCols);
    for (const int n_fft : kFftSizes) {
        const auto mag = stft_magnitude(segment, n_fft);
        const auto scaled = rescale_bilinear(mag, n_fft / 2 + 1);
        out.insert(out.end(), scaled.begin(), scaled.end());
    }
    return out;
}

std::vector<float> delta_stack(const std::vector<float>& stft) {
    if (stft.size() != static_cast<size_t>(3) * kFreqRows * kTimeCols) {
        throw ArgumentError("delta_stack: input is not 3 x 512 x 384");
    }
    std::vector<float> out(stft.size());
    // d[t] = (1*(s[t+1]-s[t-1]) + 2*(s[t+2]-s[t-2])) / (2*(1+4))
    constexpr float kNorm = 0.1f;
    const size_t n_rows = static_cast<size_t>(3) * kFreqRows;
    for (size_t row = 0; row < n_rows; ++row) {
        const float* s = stft.data() + row * kTimeCols;
        float* d = out.data() + row * kTimeCols;
        auto at = [&](int t) { return s[std::clamp(t, 0, kTimeCols - 1)]; };
        for (int t = 0; t < 2; ++t) {
            d[t] = ((at(t + 1) - at(t - 1)) + 2.0f * (at(t + 2) - at(t - 2))) * kNorm;
        }
        for (int t = 2; t < kTimeCols - 2; ++t) {
            d[t] = ((s[t + 1] - s[t - 1]) + 2.0f * (s[t + 2] - s[t - 2])) * kNorm;
        }
        for (int t = kTimeCols - 2; t < kTimeCols; ++t) {
            d[t] = ((at(t + 1) - at(t - 1)) + 2.0f * (at(t + 2) - at(t - 2))) * kNorm;
        }
    }
    return out;
}

FeatureTriple featurize(const audio::Segment& segment, std::vector<float> label_target) {
    if (segment.samples.size() != static_cast<size_t>(audio::kSegmentSamples)) {
        throw ArgumentError("featurize: segment must have exactly " +
                            std::to_string(audio::kSegmentSamples) + " samples");
    }
    double sum = 0.0;
    for (const float v : label_target) {
        if (v < 0.0f) throw ArgumentError("featurize: label target entries must be nonnegative");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw ArgumentError("featurize: label target must sum to 1");

    FeatureTriple triple;
    triple.waveform.assign(segment.samples.begin(), segment.samples.end());
    triple.stft = stft_stack(segment);
    triple.delta = delta_stack(triple.stft);
    triple.label_target = std::move(label_target);
    triple.is_noise = segment.is_noise;
    triple.source_id = segment.source_id;
    return triple;
}

} // namespace escnet::dsp
