#include "escnet/augment/mixing.h"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "escnet/core/errors.h"
#include "escnet/core/threading.h"

namespace escnet::augment {
namespace {

std::vector<float> one_hot(int label, int num_classes) {
    if (label < 0 || label >= num_classes) {
        throw ArgumentError("one_hot: label " + std::to_string(label) + " outside [0, " +
                            std::to_string(num_classes) + ")");
    }
    std::vector<float> target(static_cast<size_t>(num_classes), 0.0f);
    target[static_cast<size_t>(label)] = 1.0f;
    return target;
}

std::vector<float> uniform_target(int num_classes) {
    return std::vector<float>(static_cast<size_t>(num_classes),
                              1.0f / static_cast<float>(num_classes));
}

void mix_into(std::vector<float>& a, const std::vector<float>& b, float r) {
    for (size_t i = 0; i < a.size(); ++i) a[i] = r * a[i] + (1.0f - r) * b[i];
}

} // namespace

MixSpec sample_mixspec(const std::vector<audio::AudioClip>& dataset, RngStream& rng) {
    if (dataset.size() < 2) throw ArgumentError("sample_mixspec: need at least two clips");
    MixSpec spec;
    spec.clip_a = static_cast<int>(rng.uniform_index(dataset.size()));
    spec.clip_b = static_cast<int>(rng.uniform_index(dataset.size() - 1));
    if (spec.clip_b >= spec.clip_a) ++spec.clip_b;
    spec.start_a = static_cast<int64_t>(
        rng.uniform_index(static_cast<uint64_t>(audio::window_start_count(dataset[static_cast<size_t>(spec.clip_a)]))));
    spec.start_b = static_cast<int64_t>(
        rng.uniform_index(static_cast<uint64_t>(audio::window_start_count(dataset[static_cast<size_t>(spec.clip_b)]))));
    spec.ratio = rng.uniform();
    return spec;
}

dsp::FeatureTriple mix_training_sample(const MixSpec& spec,
                                       const std::vector<audio::AudioClip>& dataset,
                                       int num_classes) {
    if (spec.clip_a < 0 || spec.clip_b < 0 ||
        spec.clip_a >= static_cast<int>(dataset.size()) ||
        spec.clip_b >= static_cast<int>(dataset.size())) {
        throw ArgumentError("mix_training_sample: clip index out of range");
    }
    if (spec.ratio < 0.0 || spec.ratio > 1.0) {
        throw ArgumentError("mix_training_sample: ratio outside [0, 1]");
    }
    const auto& clip_a = dataset[static_cast<size_t>(spec.clip_a)];
    const auto& clip_b = dataset[static_cast<size_t>(spec.clip_b)];

    // endpoints are pure samples by construction
    if (spec.ratio == 1.0) {
        return dsp::featurize(audio::extract_window(clip_a, spec.start_a), one_hot(clip_a.label, num_classes));
    }
    if (spec.ratio == 0.0) {
        return dsp::featurize(audio::extract_window(clip_b, spec.start_b), one_hot(clip_b.label, num_classes));
    }

    auto sample_a = dsp::featurize(audio::extract_window(clip_a, spec.start_a), one_hot(clip_a.label, num_classes));
    auto sample_b = dsp::featurize(audio::extract_window(clip_b, spec.start_b), one_hot(clip_b.label, num_classes));

    const float r = static_cast<float>(spec.ratio);
    mix_into(sample_a.waveform, sample_b.waveform, r);
    mix_into(sample_a.stft, sample_b.stft, r);
    mix_into(sample_a.delta, sample_b.delta, r);
    mix_into(sample_a.label_target, sample_b.label_target, r);
    sample_a.source_id = clip_a.source_id + "+" + clip_b.source_id;
    return sample_a;
}

EpochPlan build_epoch_plan(const std::vector<audio::AudioClip>& dataset, int epoch_size,
                           double noise_fraction, bool augment, RngStream& rng) {
    if (epoch_size <= 0) throw ConfigError("build_epoch_plan: epoch size must be positive");
    if (noise_fraction < 0.0 || noise_fraction >= 1.0) {
        throw ConfigError("build_epoch_plan: noise fraction must lie in [0, 1)");
    }
    if (dataset.empty()) throw ArgumentError("build_epoch_plan: empty dataset");

    const int n_noise = noise_fraction > 0.0
        ? static_cast<int>(std::ceil(noise_fraction * epoch_size))
        : 0;

    EpochPlan plan;
    plan.items.reserve(static_cast<size_t>(epoch_size));
    for (int i = 0; i < n_noise; ++i) {
        EpochItem item;
        item.kind = EpochItem::Kind::noise;
        item.noise_seed = rng.next_u64();
        plan.items.push_back(item);
    }
    for (int i = n_noise; i < epoch_size; ++i) {
        EpochItem item;
        if (augment) {
            item.kind = EpochItem::Kind::mixed;
            item.mix = sample_mixspec(dataset, rng);
        } else {
            item.kind = EpochItem::Kind::plain;
            item.clip = static_cast<int>(rng.uniform_index(dataset.size()));
            item.start = static_cast<int64_t>(rng.uniform_index(
                static_cast<uint64_t>(audio::window_start_count(dataset[static_cast<size_t>(item.clip)]))));
        }
        plan.items.push_back(item);
    }
    // Fisher-Yates shuffle
    for (size_t i = plan.items.size(); i > 1; --i) {
        const size_t j = rng.uniform_index(i);
        std::swap(plan.items[i - 1], plan.items[j]);
    }
    return plan;
}

dsp::FeatureTriple materialize(const EpochItem& item,
                               const std::vector<audio::AudioClip>& dataset,
                               int num_classes) {
    switch (item.kind) {
        case EpochItem::Kind::noise:
            return dsp::featurize(audio::white_noise_segment(item.noise_seed), uniform_target(num_classes));
        case EpochItem::Kind::plain: {
            const auto& clip = dataset[static_cast<size_t>(item.clip)];
            return dsp::featurize(audio::extract_window(clip, item.start), one_hot(clip.label, num_classes));
        }
        case EpochItem::Kind::mixed:
        default:
            return mix_training_sample(item.mix, dataset, num_classes);
    }
}

std::vector<float> fuse_decisions(const std::vector<std::vector<float>>& posteriors) {
    if (posteriors.empty()) throw ArgumentError("fuse_decisions: no posteriors");
    const size_t k = posteriors.front().size();
    std::vector<double> acc(k, 0.0);
    for (const auto& p : posteriors) {
        if (p.size() != k) throw ArgumentError("fuse_decisions: class-count mismatch");
        for (size_t i = 0; i < k; ++i) acc[i] += p[i];
    }
    std::vector<float> out(k);
    for (size_t i = 0; i < k; ++i) {
        out[i] = static_cast<float>(acc[i] / static_cast<double>(posteriors.size()));
    }
    return out;
}

int argmax_class(const std::vector<float>& probs) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(probs.size()); ++i) {
        if (probs[static_cast<size_t>(i)] > probs[static_cast<size_t>(best)]) best = i;
    }
    return best;
}

PackedBatch pack_batch(const std::vector<const dsp::FeatureTriple*>& triples, int num_classes) {
    if (triples.empty()) throw ArgumentError("pack_batch: empty batch");
    const int n = static_cast<int>(triples.size());
    const int wave_len = static_cast<int>(triples[0]->waveform.size());
    const int spec_len = static_cast<int>(triples[0]->stft.size());

    PackedBatch batch;
    batch.inputs.waveform = nn::Tensor::zeros({n, 1, wave_len});
    batch.inputs.stft = nn::Tensor::zeros({n, 3, dsp::kFreqRows, dsp::kTimeCols});
    batch.inputs.delta = nn::Tensor::zeros({n, 3, dsp::kFreqRows, dsp::kTimeCols});
    batch.targets = nn::Tensor::zeros({n, num_classes});
    for (int i = 0; i < n; ++i) {
        const auto& t = *triples[static_cast<size_t>(i)];
        if (static_cast<int>(t.waveform.size()) != wave_len ||
            static_cast<int>(t.stft.size()) != spec_len ||
            static_cast<int>(t.label_target.size()) != num_classes) {
            throw ShapeError("pack_batch: inconsistent feature shapes");
        }
        std::memcpy(batch.inputs.waveform.data().data() + static_cast<size_t>(i) * wave_len,
                    t.waveform.data(), sizeof(float) * static_cast<size_t>(wave_len));
        std::memcpy(batch.inputs.stft.data().data() + static_cast<size_t>(i) * spec_len,
                    t.stft.data(), sizeof(float) * static_cast<size_t>(spec_len));
        std::memcpy(batch.inputs.delta.data().data() + static_cast<size_t>(i) * spec_len,
                    t.delta.data(), sizeof(float) * static_cast<size_t>(spec_len));
        std::memcpy(batch.targets.data().data() + static_cast<size_t>(i) * num_classes,
                    t.label_target.data(), sizeof(float) * static_cast<size_t>(num_classes));
    }
    return batch;
}

std::pair<int, std::vector<float>> classify_clip(const audio::AudioClip& clip,
                                                 model::Classifier<float>& model,
                                                 bool fuse) {
    const auto segments = audio::chunk_segments(clip);
    const int k = model.config().num_classes;

    std::vector<dsp::FeatureTriple> triples(segments.size());
    const auto placeholder = uniform_target(k);
#pragma omp parallel for schedule(static) num_threads(worker_count()) if (segments.size() > 1)
    for (long i = 0; i < static_cast<long>(segments.size()); ++i) {
        triples[static_cast<size_t>(i)] = dsp::featurize(segments[static_cast<size_t>(i)], placeholder);
    }

    std::vector<std::vector<float>> posteriors;
    {
        nn::GradGuard guard(false);
        std::vector<const dsp::FeatureTriple*> ptrs;
        for (const auto& t : triples) ptrs.push_back(&t);
        auto batch = pack_batch(ptrs, k);
        auto out = model.forward(batch.inputs, false);
        for (size_t i = 0; i < triples.size(); ++i) {
            posteriors.emplace_back(out.posterior.data().begin() + static_cast<long>(i) * k,
                                    out.posterior.data().begin() + static_cast<long>(i + 1) * k);
        }
    }

    const auto fused = fuse ? fuse_decisions(posteriors) : posteriors.front();
    return {argmax_class(fused), fused};
}

} // namespace escnet::augment
