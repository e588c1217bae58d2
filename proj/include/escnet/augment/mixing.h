#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "escnet/audio/clip.h"
#include "escnet/core/rng.h"
#include "escnet/dsp/features.h"
#include "escnet/model/classifier.h"

namespace escnet::augment {

// Between-class mixing recipe: two distinct clips, a window start inside
// each, and a convex mixing ratio.
struct MixSpec {
    int clip_a = 0;
    int clip_b = 0;
    int64_t start_a = 0;
    int64_t start_b = 0;
    double ratio = 0.5; // weight of clip_a, in [0, 1]
};

// Draws clip_a != clip_b uniformly, window starts uniformly over the valid
// range of each clip, and the ratio uniformly on [0, 1].
MixSpec sample_mixspec(const std::vector<audio::AudioClip>& dataset, RngStream& rng);

// Featurizes both windows (one-hot targets) and mixes feature tensors and
// label targets with the same ratio. Ratio endpoints reproduce the pure
// sample exactly.
dsp::FeatureTriple mix_training_sample(const MixSpec& spec,
                                       const std::vector<audio::AudioClip>& dataset,
                                       int num_classes);

// One entry of an epoch's sample stream.
struct EpochItem {
    enum class Kind { mixed, plain, noise };
    Kind kind = Kind::mixed;
    MixSpec mix;           // kind == mixed
    int clip = 0;          // kind == plain
    int64_t start = 0;     // kind == plain
    uint64_t noise_seed = 0; // kind == noise
};

struct EpochPlan {
    std::vector<EpochItem> items;
};

// Epoch recipe: ceil(noise_fraction * epoch_size) white-noise samples with
// uniform targets, remainder mixed samples (or plain windows when
// augmentation is off), shuffled. Fresh randomness per call.
EpochPlan build_epoch_plan(const std::vector<audio::AudioClip>& dataset, int epoch_size,
                           double noise_fraction, bool augment, RngStream& rng);

dsp::FeatureTriple materialize(const EpochItem& item,
                               const std::vector<audio::AudioClip>& dataset,
                               int num_classes);

// Arithmetic mean of per-window posteriors.
std::vector<float> fuse_decisions(const std::vector<std::vector<float>>& posteriors);

// Lowest index wins ties.
int argmax_class(const std::vector<float>& probs);

// Packs feature triples into batched model inputs plus the [N, K] target.
struct PackedBatch {
    model::Classifier<float>::Inputs inputs;
    nn::Tensor targets;
};
PackedBatch pack_batch(const std::vector<const dsp::FeatureTriple*>& triples, int num_classes);

// Window the clip, classify every window, fuse (or take the first window
// when fusion is disabled), and return (class, fused posterior).
std::pair<int, std::vector<float>> classify_clip(const audio::AudioClip& clip,
                                                 model::Classifier<float>& model,
                                                 bool fuse = true);

} // namespace escnet::augment
