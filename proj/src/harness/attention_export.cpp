#include "escnet/harness/attention_export.h"

#include <cmath>
#include <fstream>

#include "escnet/augment/mixing.h"
#include "escnet/core/errors.h"
#include "escnet/dsp/features.h"

namespace escnet::harness {

std::vector<WindowAttention> attention_of_clip(const audio::AudioClip& clip,
                                               model::Classifier<float>& model) {
    const auto segments = audio::chunk_segments(clip);
    const int k = model.config().num_classes;
    const std::vector<float> placeholder(static_cast<size_t>(k), 1.0f / static_cast<float>(k));

    std::vector<WindowAttention> out;
    nn::GradGuard guard(false);
    for (const auto& segment : segments) {
        auto triple = dsp::featurize(segment, placeholder);
        auto batch = augment::pack_batch({&triple}, k);
        auto result = model.forward(batch.inputs, false, true);
        WindowAttention wa;
        wa.window_start = segment.start_sample;
        for (const auto& stage : result.attention) {
            wa.stages.emplace_back(stage.data().begin(), stage.data().end());
        }
        out.push_back(std::move(wa));
    }
    return out;
}

void export_attention(const audio::AudioClip& clip, model::Classifier<float>& model,
                      const std::string& out_path) {
    const auto windows = attention_of_clip(clip, model);
    const auto segments = audio::chunk_segments(clip);

    std::ofstream out(out_path);
    if (!out) throw ArgumentError("attention: cannot write " + out_path);
    out << "time_s,attention_stage0,attention_stage1,attention_stage2,attention_stage3,"
           "attention_stage4,waveform_envelope\n";

    for (size_t w = 0; w < windows.size(); ++w) {
        const auto& wa = windows[w];
        const auto& samples = segments[w].samples;
        for (int t = 0; t < audio::kFramesPerSegment; ++t) {
            const double time_s =
                (static_cast<double>(wa.window_start) + (t + 0.5) * audio::kHopSamples) /
                audio::kCanonicalRate;
            float envelope = 0.0f;
            for (int i = t * audio::kHopSamples; i < (t + 1) * audio::kHopSamples; ++i) {
                envelope = std::max(envelope, std::abs(samples[static_cast<size_t>(i)]));
            }
            out << time_s;
            for (int s = 0; s < 5; ++s) {
                out << "," << wa.stages[static_cast<size_t>(s)][static_cast<size_t>(t >> s)];
            }
            out << "," << envelope << "\n";
        }
    }
}

} // namespace escnet::harness
