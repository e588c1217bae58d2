#pragma once

#include <string>
#include <vector>

#include "escnet/core/errors.h"

namespace escnet::model {

// Shared pooling depth: every stream halves its time axis this many times,
// and the attention pyramid follows (384 -> 24 on the full canvas).
constexpr int kStages = 4;

// Waveform front-end geometry. Kernel lengths follow the reference design;
// the stride product 7*7*9 = 441 lands the 1D stream on exactly one output
// step per 10 ms hop, aligning it with the spectral streams.
constexpr int kWaveKernels[3] = {128, 64, 16};
constexpr int kWaveStrides[3] = {7, 7, 9};

struct ModelConfig {
    int num_classes = 4;

    bool use_waveform = true;
    bool use_stft = true;
    bool use_delta = true;

    bool attention_enabled = true;
    // Apply attention only after the last pooling stage (analysis switch);
    // default applies it after every stage.
    bool attention_final_only = false;

    // Channel widths: [0] = stream front-end output (stage-0 channels),
    // [1..4] = output of each stage's convolution.
    std::vector<int> spectral_channels = {32, 32, 64, 128, 128};
    // 1D convolution widths of the waveform front-end; the last one becomes
    // the frequency extent of the waveform stream's 2D map.
    std::vector<int> waveform_channels = {32, 48, 64};
    int attention_channels = 8;
    int head_hidden = 256;

    // Input canvas. The production feature pipeline emits 512 x 384; tests
    // may shrink this (extents must keep every pooling step exact).
    int freq_bins = 512;
    int time_frames = 384;

    int waveform_samples() const { return time_frames * 441; }

    int attention_depth() const {
        int depth = 0, f = freq_bins;
        while (f > 1) {
            f /= 2;
            ++depth;
        }
        return depth;
    }

    void validate() const {
        if (num_classes < 2) throw ConfigError("model: need at least two classes");
        if (!use_waveform && !use_stft && !use_delta) {
            throw ConfigError("model: at least one input stream must be enabled");
        }
        if (spectral_channels.size() != static_cast<size_t>(kStages) + 1) {
            throw ConfigError("model: spectral_channels needs 5 entries (front-end + 4 stages)");
        }
        if (waveform_channels.size() != 3) {
            throw ConfigError("model: waveform_channels needs 3 entries");
        }
        for (const int c : spectral_channels)
            if (c < 1) throw ConfigError("model: channel widths must be positive");
        for (const int c : waveform_channels)
            if (c < 1) throw ConfigError("model: channel widths must be positive");
        if (attention_channels < 1) throw ConfigError("model: attention_channels must be positive");
        if (head_hidden < 1) throw ConfigError("model: head_hidden must be positive");
        if (freq_bins < 16 || (freq_bins & (freq_bins - 1)) != 0) {
            throw ConfigError("model: freq_bins must be a power of two >= 16");
        }
        if (time_frames < 16 || time_frames % 16 != 0) {
            throw ConfigError("model: time_frames must be a positive multiple of 16");
        }
        if (waveform_channels.back() % 16 != 0) {
            throw ConfigError("model: last waveform width must be divisible by 16 "
                              "(it is pooled as the frequency axis)");
        }
    }
};

} // namespace escnet::model
