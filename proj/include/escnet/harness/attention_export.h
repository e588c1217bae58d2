#pragma once

#include <string>
#include <vector>

#include "escnet/audio/clip.h"
#include "escnet/model/classifier.h"

namespace escnet::harness {

// Attention pyramid of one window: vectors of length 384, 192, 96, 48, 24.
struct WindowAttention {
    int64_t window_start = 0;
    std::vector<std::vector<float>> stages;
};

std::vector<WindowAttention> attention_of_clip(const audio::AudioClip& clip,
                                               model::Classifier<float>& model);

// CSV with one row per 10 ms frame of every window:
// time_s, attention_stage0..attention_stage4, waveform_envelope.
// Coarser stages repeat their value across the frames they cover.
void export_attention(const audio::AudioClip& clip, model::Classifier<float>& model,
                      const std::string& out_path);

} // namespace escnet::harness
