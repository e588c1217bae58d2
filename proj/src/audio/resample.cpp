#include "escnet/audio/resample.h"

#include <cmath>
#include <numeric>
#include <vector>

#include "escnet/core/errors.h"

namespace escnet::audio {
namespace {

// Kernel half-width in zero crossings of the prototype sinc.
constexpr int kSincCrossings = 16;

double hann(double x) { // x in [-1, 1]
    return 0.5 + 0.5 * std::cos(3.14159265358979323846 * x);
}

} // namespace

AudioClip resample(const AudioClip& clip, int target_rate) {
    if (target_rate <= 0) throw ArgumentError("resample: target rate must be positive");
    if (clip.sample_rate <= 0) throw ArgumentError("resample: clip has invalid sample rate");
    if (clip.sample_rate == target_rate) return clip;

    const int g = std::gcd(clip.sample_rate, target_rate);
    const int64_t up = target_rate / g;    // L
    const int64_t down = clip.sample_rate / g; // M

    // Anti-aliasing lowpass designed at the upsampled rate. Cutoff at the
    // narrower of the two Nyquist bands; gain `up` compensates for the
    // zero-stuffing.
    const double cutoff = 1.0 / static_cast<double>(std::max(up, down));
    const int64_t half_width = kSincCrossings * std::max(up, down);
    std::vector<double> taps(static_cast<size_t>(2 * half_width + 1));
    for (int64_t i = -half_width; i <= half_width; ++i) {
        const double x = cutoff * static_cast<double>(i);
        const double sinc = i == 0 ? 1.0 : std::sin(3.14159265358979323846 * x) / (3.14159265358979323846 * x);
        taps[static_cast<size_t>(i + half_width)] =
            static_cast<double>(up) * cutoff * sinc * hann(static_cast<double>(i) / static_cast<double>(half_width + 1));
    }

    const int64_t n_in = static_cast<int64_t>(clip.samples.size());
    const int64_t n_out = static_cast<int64_t>(
        std::llround(static_cast<double>(n_in) * target_rate / clip.sample_rate));

    AudioClip out;
    out.sample_rate = target_rate;
    out.label = clip.label;
    out.source_id = clip.source_id;
    out.samples.resize(static_cast<size_t>(n_out));

    for (int64_t n = 0; n < n_out; ++n) {
        const int64_t center = n * down; // position in the upsampled stream
        int64_t k_lo = (center - half_width + up - 1) / up;
        int64_t k_hi = (center + half_width) / up;
        if (center < half_width) k_lo = std::min<int64_t>(k_lo, 0);
        k_lo = std::max<int64_t>(k_lo, 0);
        k_hi = std::min<int64_t>(k_hi, n_in - 1);
        double acc = 0.0;
        for (int64_t k = k_lo; k <= k_hi; ++k) {
            const int64_t tap = center - k * up + half_width;
            if (tap < 0 || tap > 2 * half_width) continue;
            acc += static_cast<double>(clip.samples[static_cast<size_t>(k)]) * taps[static_cast<size_t>(tap)];
        }
        out.samples[static_cast<size_t>(n)] = static_cast<float>(acc);
    }
    return out;
}

} // namespace escnet::audio
