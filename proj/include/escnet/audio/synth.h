#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "escnet/audio/clip.h"

namespace escnet::audio {

// One synthetic class: a generator kind plus parameter-range overrides.
// Kinds: "tone", "chirp", "click-train", "noise-band". Labels are assigned
// by lexicographic kind order so they agree with manifest vocabularies.
struct ClassSpec {
    std::string kind;
    int count = 0;
    std::map<std::string, double> params; // overrides documented per kind
};

struct SynthSpec {
    std::vector<ClassSpec> classes;
    uint64_t seed = 0;
    double clip_seconds = 5.0;
};

std::vector<AudioClip> synth_dataset(const SynthSpec& spec);

// Single-clip generators, used directly by tests and the acceptance probes.
AudioClip synth_tone(uint64_t seed, double seconds, const std::map<std::string, double>& params);
AudioClip synth_chirp(uint64_t seed, double seconds, const std::map<std::string, double>& params);
AudioClip synth_click_train(uint64_t seed, double seconds, const std::map<std::string, double>& params);
AudioClip synth_noise_band(uint64_t seed, double seconds, const std::map<std::string, double>& params);

} // namespace escnet::audio
