#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "escnet/dsp/features.h"
#include "oracles.h"

using namespace escnet;
using audio::kSegmentSamples;
using dsp::kFreqRows;
using dsp::kTimeCols;

namespace {

// Cosine phase: even at sample 0, so the reflection padding of the first
// centered frame continues the signal smoothly.
audio::Segment sine_segment(double freq, double amplitude = 1.0) {
    audio::Segment seg;
    seg.samples.resize(kSegmentSamples);
    for (int i = 0; i < kSegmentSamples; ++i) {
        seg.samples[static_cast<size_t>(i)] =
            static_cast<float>(amplitude * std::cos(2.0 * M_PI * freq * i / audio::kCanonicalRate));
    }
    return seg;
}

audio::Segment zero_segment() {
    audio::Segment seg;
    seg.samples.assign(kSegmentSamples, 0.0f);
    return seg;
}

} // namespace

TEST_CASE("stft_magnitude: 1024-point transform has shape (513, 384)") {
    auto mags = dsp::stft_magnitude(sine_segment(500.0), 1024);
    CHECK(mags.size() == static_cast<size_t>(513) * 384);
}

TEST_CASE("stft_magnitude: rejects FFT sizes outside the fixed set") {
    CHECK_THROWS_AS(dsp::stft_magnitude(zero_segment(), 64), ArgumentError);
    CHECK_THROWS_AS(dsp::stft_magnitude(zero_segment(), 0), ArgumentError);
}

TEST_CASE("stft_magnitude: all-zero segment sits exactly on the log floor") {
    auto mags = dsp::stft_magnitude(zero_segment(), 128);
    const float floor_value = static_cast<float>(std::log10(dsp::kLogEps));
    for (const float v : mags) CHECK(v == floor_value);
}

TEST_CASE("stft_magnitude: 1 kHz sine peaks at bin 23 in every frame") {
    // round(1000 * 1024 / 44100) = 23
    auto mags = dsp::stft_magnitude(sine_segment(1000.0), 1024);
    const int rows = 513;
    for (int t = 0; t < kTimeCols; ++t) {
        int best_row = 0;
        float best = mags[static_cast<size_t>(t)];
        for (int r = 1; r < rows; ++r) {
            const float v = mags[static_cast<size_t>(r) * kTimeCols + t];
            if (v > best) {
                best = v;
                best_row = r;
            }
        }
        CHECK(best_row == 23);
    }
}

TEST_CASE("stft_magnitude: agrees with a direct DFT oracle on one frame") {
    auto seg = sine_segment(1000.0);
    auto mags = dsp::stft_magnitude(seg, 1024);

    // frame centered at t=64 * hop; same Hann window, direct DFT
    const int t = 64;
    const int center = t * audio::kHopSamples;
    std::vector<double> frame(1024);
    for (int k = 0; k < 1024; ++k) {
        const int idx = center - 512 + k;
        const double w = 0.5 - 0.5 * std::cos(2.0 * M_PI * k / 1024.0);
        frame[static_cast<size_t>(k)] = seg.samples[static_cast<size_t>(idx)] * w;
    }
    // compare linear magnitudes; near-floor bins only need to agree that
    // they are negligible (a relative check there would amplify roundoff)
    for (const int bin : {0, 10, 22, 23, 24, 100, 512}) {
        const double expected = oracle::dft_magnitude(frame, bin);
        const double got = std::pow(10.0, static_cast<double>(mags[static_cast<size_t>(bin) * kTimeCols + t]));
        const double rel = std::abs(got - expected) / std::max({got, expected, 1e-4});
        CHECK(rel < 1e-4);
    }
}

TEST_CASE("stft energy concentrates within two bins of the true frequency") {
    auto mags = dsp::stft_magnitude(sine_segment(1000.0), 1024);
    const int rows = 513, t = 100;
    double total = 0.0, near = 0.0;
    for (int r = 0; r < rows; ++r) {
        const double linear = std::pow(10.0, mags[static_cast<size_t>(r) * kTimeCols + t]);
        total += linear;
        if (std::abs(r - 23) <= 2) near += linear;
    }
    CHECK(near / total >= 0.90);
}

TEST_CASE("rescale_bilinear: 512-row input is unchanged") {
    std::vector<float> in(static_cast<size_t>(kFreqRows) * kTimeCols);
    for (size_t i = 0; i < in.size(); ++i) in[i] = static_cast<float>(std::sin(0.01 * i));
    auto out = dsp::rescale_bilinear(in, kFreqRows);
    CHECK(out == in);
}

TEST_CASE("rescale_bilinear: constants are preserved") {
    const float c = 2.719f;
    for (const int rows : {2, 17, 65, 513}) {
        std::vector<float> in(static_cast<size_t>(rows) * kTimeCols, c);
        auto out = dsp::rescale_bilinear(in, rows);
        REQUIRE(out.size() == static_cast<size_t>(kFreqRows) * kTimeCols);
        for (const float v : out) CHECK(v == doctest::Approx(c));
    }
}

TEST_CASE("rescale_bilinear: two-row ramp interpolates to i/511") {
    std::vector<float> in(2 * kTimeCols);
    for (int t = 0; t < kTimeCols; ++t) {
        in[static_cast<size_t>(t)] = 0.0f;
        in[static_cast<size_t>(kTimeCols + t)] = 1.0f;
    }
    auto out = dsp::rescale_bilinear(in, 2);
    float prev = -1.0f;
    for (int i = 0; i < kFreqRows; ++i) {
        const float v = out[static_cast<size_t>(i) * kTimeCols + 7];
        CHECK(v == doctest::Approx(static_cast<float>(i) / 511.0f).epsilon(1e-5));
        CHECK(v > prev);
        prev = v;
    }
}

TEST_CASE("rescale_bilinear: fewer than two rows rejected") {
    std::vector<float> in(static_cast<size_t>(kTimeCols), 1.0f);
    CHECK_THROWS_AS(dsp::rescale_bilinear(in, 1), ArgumentError);
}

TEST_CASE("stft_stack: shape and floor behaviour") {
    auto stack = dsp::stft_stack(zero_segment());
    REQUIRE(stack.size() == static_cast<size_t>(3) * kFreqRows * kTimeCols);
    const float floor_value = static_cast<float>(std::log10(dsp::kLogEps));
    for (const float v : stack) CHECK(v == doctest::Approx(floor_value));
}

TEST_CASE("stft_stack: higher FFT size gives a sharper frequency ridge") {
    auto stack = dsp::stft_stack(sine_segment(1000.0));
    // ridge width = rows whose time-averaged linear magnitude exceeds half
    // the peak row's
    auto ridge_width = [&](int channel) {
        std::vector<double> profile(kFreqRows, 0.0);
        for (int r = 0; r < kFreqRows; ++r) {
            const float* row = stack.data() +
                               (static_cast<size_t>(channel) * kFreqRows + r) * kTimeCols;
            double acc = 0.0;
            for (int t = 0; t < kTimeCols; ++t) acc += std::pow(10.0, row[t]);
            profile[static_cast<size_t>(r)] = acc / kTimeCols;
        }
        const double peak = *std::max_element(profile.begin(), profile.end());
        int width = 0;
        for (const double p : profile) width += p >= peak / 2 ? 1 : 0;
        return width;
    };
    CHECK(ridge_width(2) < ridge_width(0));
}

TEST_CASE("delta_stack: time-constant input maps to zero") {
    std::vector<float> stft(static_cast<size_t>(3) * kFreqRows * kTimeCols);
    for (int c = 0; c < 3; ++c)
        for (int r = 0; r < kFreqRows; ++r) {
            const float v = static_cast<float>(c + 0.01 * r);
            float* row = stft.data() + (static_cast<size_t>(c) * kFreqRows + r) * kTimeCols;
            for (int t = 0; t < kTimeCols; ++t) row[t] = v;
        }
    auto delta = dsp::delta_stack(stft);
    for (const float v : delta) CHECK(v == 0.0f);
}

TEST_CASE("delta_stack: linear ramp has unit interior slope") {
    std::vector<float> stft(static_cast<size_t>(3) * kFreqRows * kTimeCols, 0.0f);
    // one row carries s[t] = t
    float* row = stft.data() + static_cast<size_t>(100) * kTimeCols;
    for (int t = 0; t < kTimeCols; ++t) row[t] = static_cast<float>(t);
    auto delta = dsp::delta_stack(stft);
    const float* drow = delta.data() + static_cast<size_t>(100) * kTimeCols;
    // closed form: sum n*(s[t+n]-s[t-n]) / 10 = (1*2 + 2*4)/10 = 1 in the interior
    for (int t = 2; t < kTimeCols - 2; ++t) CHECK(drow[t] == doctest::Approx(1.0f));
    CHECK(delta.size() == stft.size());
}

TEST_CASE("featurize: zero segment with one-hot target") {
    std::vector<float> onehot(10, 0.0f);
    onehot[3] = 1.0f;
    auto triple = dsp::featurize(zero_segment(), onehot);
    CHECK(triple.waveform.size() == static_cast<size_t>(kSegmentSamples));
    CHECK(triple.stft.size() == static_cast<size_t>(3) * kFreqRows * kTimeCols);
    CHECK(triple.delta.size() == triple.stft.size());
    for (const float v : triple.delta) CHECK(v == 0.0f);
    CHECK(triple.label_target[3] == 1.0f);
    CHECK_FALSE(triple.is_noise);
}

TEST_CASE("featurize: noise segment with uniform target") {
    auto seg = audio::white_noise_segment(7);
    std::vector<float> uniform(10, 0.1f);
    auto triple = dsp::featurize(seg, uniform);
    CHECK(triple.is_noise);
    for (const float v : triple.label_target) CHECK(v == doctest::Approx(0.1f));
}

TEST_CASE("featurize: invalid label target rejected") {
    std::vector<float> bad(10, 0.2f);
    CHECK_THROWS_AS(dsp::featurize(zero_segment(), bad), ArgumentError);
    std::vector<float> negative(10, 0.0f);
    negative[0] = 1.5f;
    negative[1] = -0.5f;
    CHECK_THROWS_AS(dsp::featurize(zero_segment(), negative), ArgumentError);
}

TEST_CASE("frame-count identity: every window yields exactly 384 frames") {
    for (const int n_fft : dsp::kFftSizes) {
        auto mags = dsp::stft_magnitude(zero_segment(), n_fft);
        CHECK(mags.size() % kTimeCols == 0);
        CHECK(mags.size() / kTimeCols == static_cast<size_t>(n_fft / 2 + 1));
    }
    static_assert(audio::kSegmentSamples / audio::kHopSamples == 384);
}
