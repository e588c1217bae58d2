#include "escnet/audio/synth.h"

#include <algorithm>
#include <cmath>
#include <complex>

#include "escnet/core/errors.h"
#include "escnet/core/fft.h"
#include "escnet/core/rng.h"

namespace escnet::audio {
namespace {

constexpr double kTau = 6.283185307179586476925286766559;

double param(const std::map<std::string, double>& params, const std::string& key, double fallback) {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
}

AudioClip base_clip(double seconds) {
    AudioClip clip;
    clip.sample_rate = kCanonicalRate;
    clip.samples.assign(static_cast<size_t>(seconds * kCanonicalRate), 0.0f);
    return clip;
}

void add_noise_floor(AudioClip& clip, RngStream& rng, double sigma) {
    for (auto& s : clip.samples) s += static_cast<float>(rng.normal() * sigma);
}

void clamp_clip(AudioClip& clip) {
    for (auto& s : clip.samples) s = std::clamp(s, -1.0f, 1.0f);
}

} // namespace

AudioClip synth_tone(uint64_t seed, double seconds, const std::map<std::string, double>& params) {
    RngStream rng(seed);
    const double freq = rng.log_uniform(param(params, "f_lo", 250.0), param(params, "f_hi", 3000.0));
    const double amp = rng.uniform(param(params, "amp_lo", 0.25), param(params, "amp_hi", 0.8));
    const double phase = rng.uniform(0.0, kTau);
    const double noise_sigma = rng.uniform(param(params, "noise_lo", 0.002), param(params, "noise_hi", 0.02));

    AudioClip clip = base_clip(seconds);
    for (size_t i = 0; i < clip.samples.size(); ++i) {
        const double t = static_cast<double>(i) / kCanonicalRate;
        clip.samples[i] = static_cast<float>(amp * std::sin(kTau * freq * t + phase));
    }
    add_noise_floor(clip, rng, noise_sigma);
    clamp_clip(clip);
    return clip;
}

AudioClip synth_chirp(uint64_t seed, double seconds, const std::map<std::string, double>& params) {
    RngStream rng(seed);
    const double f0 = rng.log_uniform(param(params, "f_lo", 200.0), param(params, "f_hi", 1200.0));
    const double ratio = rng.log_uniform(param(params, "ratio_lo", 2.5), param(params, "ratio_hi", 6.0));
    const bool upward = rng.flip();
    const double f_start = upward ? f0 : f0 * ratio;
    const double f_end = upward ? f0 * ratio : f0;
    const double amp = rng.uniform(param(params, "amp_lo", 0.25), param(params, "amp_hi", 0.8));
    const double phase = rng.uniform(0.0, kTau);
    const double noise_sigma = rng.uniform(param(params, "noise_lo", 0.002), param(params, "noise_hi", 0.02));

    AudioClip clip = base_clip(seconds);
    const double slope = (f_end - f_start) / seconds;
    for (size_t i = 0; i < clip.samples.size(); ++i) {
        const double t = static_cast<double>(i) / kCanonicalRate;
        // linear sweep: phase integral of f_start + slope * t
        const double arg = kTau * (f_start * t + 0.5 * slope * t * t) + phase;
        clip.samples[i] = static_cast<float>(amp * std::sin(arg));
    }
    add_noise_floor(clip, rng, noise_sigma);
    clamp_clip(clip);
    return clip;
}

AudioClip synth_click_train(uint64_t seed, double seconds, const std::map<std::string, double>& params) {
    RngStream rng(seed);
    const double period = rng.uniform(param(params, "period_lo", 0.25), param(params, "period_hi", 0.75));
    const double amp = rng.uniform(param(params, "amp_lo", 0.4), param(params, "amp_hi", 0.9));
    const double offset = rng.uniform(0.0, period);
    const double carrier = rng.log_uniform(param(params, "carrier_lo", 800.0), param(params, "carrier_hi", 4000.0));
    const double noise_sigma = rng.uniform(param(params, "noise_lo", 0.002), param(params, "noise_hi", 0.02));
    const double click_len = param(params, "click_seconds", 0.004);
    const double decay_tau = param(params, "click_decay", 0.0012);

    // Every click is the same damped sinusoid, so the waveform repeats at
    // the train period (the autocorrelation carries the period).
    AudioClip clip = base_clip(seconds);
    const int click_samples = static_cast<int>(click_len * kCanonicalRate);
    for (double t0 = offset; t0 < seconds; t0 += period) {
        const int64_t start = static_cast<int64_t>(t0 * kCanonicalRate);
        for (int i = 0; i < click_samples; ++i) {
            const size_t idx = static_cast<size_t>(start + i);
            if (idx >= clip.samples.size()) break;
            const double t = static_cast<double>(i) / kCanonicalRate;
            const double envelope = std::exp(-t / decay_tau);
            clip.samples[idx] += static_cast<float>(amp * envelope * std::sin(kTau * carrier * t));
        }
    }
    add_noise_floor(clip, rng, noise_sigma);
    clamp_clip(clip);
    return clip;
}

AudioClip synth_noise_band(uint64_t seed, double seconds, const std::map<std::string, double>& params) {
    RngStream rng(seed);
    const double f_lo = rng.log_uniform(param(params, "f_lo", 300.0), param(params, "f_hi", 1500.0));
    const double ratio = rng.log_uniform(param(params, "ratio_lo", 1.8), param(params, "ratio_hi", 4.0));
    const double f_hi = std::min(f_lo * ratio, 0.45 * kCanonicalRate);
    const double rms = rng.uniform(param(params, "rms_lo", 0.1), param(params, "rms_hi", 0.4));

    // Shape the band in the frequency domain on a power-of-two grid, then
    // invert and truncate to the clip length.
    const size_t n_samples = static_cast<size_t>(seconds * kCanonicalRate);
    size_t n_fft = 1;
    while (n_fft < n_samples) n_fft <<= 1;
    std::vector<std::complex<double>> spectrum(n_fft, {0.0, 0.0});
    const double bin_hz = static_cast<double>(kCanonicalRate) / static_cast<double>(n_fft);
    const size_t k_lo = static_cast<size_t>(f_lo / bin_hz);
    const size_t k_hi = std::min(static_cast<size_t>(f_hi / bin_hz), n_fft / 2 - 1);
    for (size_t k = std::max<size_t>(k_lo, 1); k <= k_hi; ++k) {
        const double phase = rng.uniform(0.0, kTau);
        spectrum[k] = std::polar(1.0, phase);
        spectrum[n_fft - k] = std::conj(spectrum[k]);
    }
    fft_inplace(spectrum, true);

    AudioClip clip = base_clip(seconds);
    double power = 0.0;
    for (size_t i = 0; i < n_samples; ++i) power += spectrum[i].real() * spectrum[i].real();
    const double scale = power > 0.0 ? rms / std::sqrt(power / static_cast<double>(n_samples)) : 0.0;
    for (size_t i = 0; i < n_samples; ++i) {
        clip.samples[i] = static_cast<float>(spectrum[i].real() * scale);
    }
    clamp_clip(clip);
    return clip;
}

std::vector<AudioClip> synth_dataset(const SynthSpec& spec) {
    using Generator = AudioClip (*)(uint64_t, double, const std::map<std::string, double>&);
    static const std::map<std::string, Generator> generators = {
        {"tone", synth_tone},
        {"chirp", synth_chirp},
        {"click-train", synth_click_train},
        {"noise-band", synth_noise_band},
    };

    // labels follow lexicographic kind order, matching manifest vocabularies
    std::vector<std::string> kinds;
    for (const auto& cls : spec.classes) {
        if (!generators.count(cls.kind)) throw ArgumentError("synth: unknown class kind '" + cls.kind + "'");
        kinds.push_back(cls.kind);
    }
    std::sort(kinds.begin(), kinds.end());
    kinds.erase(std::unique(kinds.begin(), kinds.end()), kinds.end());
    auto label_of = [&](const std::string& kind) {
        return static_cast<int>(std::lower_bound(kinds.begin(), kinds.end(), kind) - kinds.begin());
    };

    std::vector<AudioClip> out;
    uint64_t clip_index = 0;
    for (const auto& cls : spec.classes) {
        const Generator gen = generators.at(cls.kind);
        for (int i = 0; i < cls.count; ++i, ++clip_index) {
            AudioClip clip = gen(derive_seed(spec.seed, clip_index), spec.clip_seconds, cls.params);
            clip.label = label_of(cls.kind);
            clip.source_id = cls.kind + "/" + std::to_string(i);
            out.push_back(std::move(clip));
        }
    }
    return out;
}

} // namespace escnet::audio
