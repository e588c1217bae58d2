#pragma once

// Three-stream classifier: a 1D->2D waveform stream and two spectral
// streams share pooling depth so their time axes stay synchronized, a
// temporal attention pyramid computed from the delta input reweights every
// stream after each pooling stage, and a small dense head classifies the
// merged per-time-step features.

#include <array>
#include <string>
#include <vector>

#include "escnet/model/config.h"
#include "escnet/nn/adam.h"
#include "escnet/nn/layers.h"
#include "escnet/nn/ops.h"

namespace escnet::model {

template <typename T>
class Classifier {
public:
    struct Inputs {
        nn::TensorT<T> waveform; // [N, 1, L]
        nn::TensorT<T> stft;     // [N, 3, F, T]
        nn::TensorT<T> delta;    // [N, 3, F, T]
    };

    struct Output {
        nn::TensorT<T> posterior;                 // [N, K], rows sum to 1
        std::vector<nn::TensorT<T>> attention;    // a[0..4], [N, T/2^s]; empty unless computed
    };

    Classifier(const ModelConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
        cfg_.validate();
        RngStream rng(init_seed);
        const auto& sc = cfg_.spectral_channels;
        const auto& wc = cfg_.waveform_channels;

        stft_front_ = nn::Conv2d<T>::make("stft.front.conv", 3, sc[0], 3, 3, false, rng);
        stft_front_bn_ = nn::BatchNorm<T>::make("stft.front.bn", sc[0]);
        delta_front_ = nn::Conv2d<T>::make("delta.front.conv", 3, sc[0], 3, 3, false, rng);
        delta_front_bn_ = nn::BatchNorm<T>::make("delta.front.bn", sc[0]);

        for (int i = 0; i < 3; ++i) {
            const int c_in = i == 0 ? 1 : wc[i - 1];
            wave_1d_[i] = nn::Conv1d<T>::make("wave.conv1d" + std::to_string(i), c_in, wc[i],
                                              kWaveKernels[i], kWaveStrides[i], rng);
            wave_1d_bn_[i] = nn::BatchNorm<T>::make("wave.conv1d" + std::to_string(i) + ".bn", wc[i]);
        }
        wave_lift_ = nn::Conv2d<T>::make("wave.lift.conv", 1, sc[0], 3, 3, false, rng);
        wave_lift_bn_ = nn::BatchNorm<T>::make("wave.lift.bn", sc[0]);

        for (int s = 0; s < kStages; ++s) {
            stage_conv_[0][s] = nn::Conv2d<T>::make("stft.stage" + std::to_string(s) + ".conv",
                                                    sc[s], sc[s + 1], 3, 3, false, rng);
            stage_bn_[0][s] = nn::BatchNorm<T>::make("stft.stage" + std::to_string(s) + ".bn", sc[s + 1]);
            stage_conv_[1][s] = nn::Conv2d<T>::make("delta.stage" + std::to_string(s) + ".conv",
                                                    sc[s], sc[s + 1], 3, 3, false, rng);
            stage_bn_[1][s] = nn::BatchNorm<T>::make("delta.stage" + std::to_string(s) + ".bn", sc[s + 1]);
            stage_conv_[2][s] = nn::Conv2d<T>::make("wave.stage" + std::to_string(s) + ".conv",
                                                    sc[s], sc[s + 1], 3, 3, false, rng);
            stage_bn_[2][s] = nn::BatchNorm<T>::make("wave.stage" + std::to_string(s) + ".bn", sc[s + 1]);
        }

        // Attention block parameters exist regardless of the enable flag so
        // that toggling attention never changes the parameter table.
        const int depth = cfg_.attention_depth();
        for (int i = 0; i < depth; ++i) {
            const int c_in = i == 0 ? 3 : cfg_.attention_channels;
            attn_conv_.push_back(nn::Conv2d<T>::make("attn.block" + std::to_string(i) + ".conv",
                                                     c_in, cfg_.attention_channels, 3, 3, false, rng));
            attn_bn_.push_back(nn::BatchNorm<T>::make("attn.block" + std::to_string(i) + ".bn",
                                                      cfg_.attention_channels));
        }
        attn_squash_ = nn::Conv2d<T>::make("attn.squash", cfg_.attention_channels, 1, 1, 1, true, rng);

        head_in_dim_ = 0;
        const int f_spec = cfg_.freq_bins >> kStages;
        const int f_wave = wc.back() >> kStages;
        if (cfg_.use_stft) head_in_dim_ += sc.back() * f_spec;
        if (cfg_.use_delta) head_in_dim_ += sc.back() * f_spec;
        if (cfg_.use_waveform) head_in_dim_ += sc.back() * f_wave;
        head_hidden_ = nn::Dense<T>::make("head.hidden", head_in_dim_, cfg_.head_hidden, rng);
        head_out_ = nn::Dense<T>::make("head.out", cfg_.head_hidden, cfg_.num_classes, rng);
    }

    const ModelConfig& config() const { return cfg_; }

    // Temporal attention pyramid from the delta input: collapse the
    // frequency axis to one by repeated conv + [2,1] max pooling, squash to
    // a sigmoid weight per frame, then halve along time once per stage.
    std::vector<nn::TensorT<T>> attention_pyramid(const nn::TensorT<T>& delta, bool training) {
        nn::TensorT<T> x = delta;
        for (size_t i = 0; i < attn_conv_.size(); ++i) {
            x = attn_conv_[i](x);
            x = attn_bn_[i].forward_relu(x, training);
            x = nn::pool2d(x, 2, 1, nn::PoolMode::max);
        }
        x = attn_squash_(x); // [N, 1, 1, T]
        x = nn::sigmoid(x);
        std::vector<nn::TensorT<T>> pyramid;
        pyramid.push_back(nn::reshape(x, {x.dim(0), x.dim(3)}));
        for (int s = 0; s < kStages; ++s) pyramid.push_back(nn::avgpool_pairs(pyramid.back()));
        return pyramid;
    }

    Output forward(const Inputs& in, bool training, bool want_attention = false) {
        check_inputs(in);

        const bool compute_attention = cfg_.attention_enabled || want_attention;
        std::vector<nn::TensorT<T>> attention;
        if (compute_attention) attention = attention_pyramid(in.delta, training);

        // stream order: stft, delta, waveform
        std::vector<int> stream_ids;
        std::vector<nn::TensorT<T>> feats;
        if (cfg_.use_stft) {
            auto x = stft_front_bn_.forward_relu(stft_front_(in.stft), training);
            feats.push_back(x);
            stream_ids.push_back(0);
        }
        if (cfg_.use_delta) {
            auto x = delta_front_bn_.forward_relu(delta_front_(in.delta), training);
            feats.push_back(x);
            stream_ids.push_back(1);
        }
        if (cfg_.use_waveform) {
            auto x = in.waveform;
            for (int i = 0; i < 3; ++i) {
                x = wave_1d_bn_[i].forward_relu(wave_1d_[i](x), training);
            }
            // [N, C, T] -> [N, 1, C, T]: the learned 1D channels become the
            // frequency axis of a single-channel 2D map
            x = nn::reshape(x, {x.dim(0), 1, x.dim(1), x.dim(2)});
            x = wave_lift_bn_.forward_relu(wave_lift_(x), training);
            feats.push_back(x);
            stream_ids.push_back(2);
        }

        check_sync(feats, compute_attention ? &attention[0] : nullptr, 0);

        for (int s = 0; s < kStages; ++s) {
            for (size_t i = 0; i < feats.size(); ++i) {
                auto x = stage_conv_[stream_ids[i]][s](feats[i]);
                x = stage_bn_[stream_ids[i]][s].forward_relu(x, training);
                x = nn::pool2d(x, 2, 2, nn::PoolMode::max);
                if (cfg_.attention_enabled && (!cfg_.attention_final_only || s == kStages - 1)) {
                    x = nn::mul_time(x, attention[static_cast<size_t>(s) + 1]);
                }
                feats[i] = x;
            }
            check_sync(feats, compute_attention ? &attention[static_cast<size_t>(s) + 1] : nullptr, s + 1);
        }

        // merge: per time step, concatenate every stream's (C, F) features
        std::vector<nn::TensorT<T>> columns;
        for (auto& f : feats) {
            columns.push_back(nn::reshape(f, {f.dim(0), f.dim(1) * f.dim(2), f.dim(3)}));
        }
        auto merged = columns.size() == 1 ? columns[0] : nn::concat_channels(columns);
        auto pooled = nn::mean_over_time(merged); // [N, D]
        auto hidden = nn::relu(head_hidden_(pooled));
        auto logits = head_out_(hidden);

        Output out;
        out.posterior = nn::softmax_rows(logits);
        if (want_attention) out.attention = std::move(attention);
        return out;
    }

    std::vector<nn::ParamRef<T>> parameters() const {
        std::vector<nn::ParamRef<T>> out;
        stft_front_.collect(out);
        stft_front_bn_.collect(out);
        delta_front_.collect(out);
        delta_front_bn_.collect(out);
        for (int i = 0; i < 3; ++i) {
            wave_1d_[i].collect(out);
            wave_1d_bn_[i].collect(out);
        }
        wave_lift_.collect(out);
        wave_lift_bn_.collect(out);
        for (int stream = 0; stream < 3; ++stream) {
            for (int s = 0; s < kStages; ++s) {
                stage_conv_[stream][s].collect(out);
                stage_bn_[stream][s].collect(out);
            }
        }
        for (size_t i = 0; i < attn_conv_.size(); ++i) {
            attn_conv_[i].collect(out);
            attn_bn_[i].collect(out);
        }
        attn_squash_.collect(out);
        head_hidden_.collect(out);
        head_out_.collect(out);
        return out;
    }

    std::vector<nn::ParamRef<T>> buffers() const {
        std::vector<nn::ParamRef<T>> out;
        stft_front_bn_.collect_buffers(out);
        delta_front_bn_.collect_buffers(out);
        for (int i = 0; i < 3; ++i) wave_1d_bn_[i].collect_buffers(out);
        wave_lift_bn_.collect_buffers(out);
        for (int stream = 0; stream < 3; ++stream)
            for (int s = 0; s < kStages; ++s) stage_bn_[stream][s].collect_buffers(out);
        for (size_t i = 0; i < attn_bn_.size(); ++i) attn_bn_[i].collect_buffers(out);
        return out;
    }

    // Parameters the active configuration actually trains: ablating a
    // stream keeps its tensors in the table but out of the optimizer.
    std::vector<nn::ParamRef<T>> trainable_parameters() const {
        std::vector<nn::ParamRef<T>> out;
        auto want = [&](const std::string& name) {
            if (name.rfind("stft.", 0) == 0) return cfg_.use_stft;
            if (name.rfind("delta.", 0) == 0) return cfg_.use_delta;
            if (name.rfind("wave.", 0) == 0) return cfg_.use_waveform;
            if (name.rfind("attn.", 0) == 0) return cfg_.attention_enabled;
            return true;
        };
        for (auto& p : parameters()) {
            if (want(p.name)) out.push_back(p);
        }
        return out;
    }

private:
    void check_inputs(const Inputs& in) const {
        // all three tensors are always packed; ablation flags only select
        // which streams consume them
        if (!in.waveform.defined() || in.waveform.rank() != 3 || in.waveform.dim(1) != 1 ||
            in.waveform.dim(2) != cfg_.waveform_samples()) {
            throw ShapeError("classifier: waveform input must be [N,1," +
                             std::to_string(cfg_.waveform_samples()) + "]");
        }
        for (const auto* t : {&in.stft, &in.delta}) {
            if (!t->defined() || t->rank() != 4 || t->dim(1) != 3 || t->dim(2) != cfg_.freq_bins ||
                t->dim(3) != cfg_.time_frames) {
                throw ShapeError("classifier: spectral input must be [N,3," +
                                 std::to_string(cfg_.freq_bins) + "," +
                                 std::to_string(cfg_.time_frames) + "]");
            }
        }
        if (in.waveform.dim(0) != in.stft.dim(0) || in.stft.dim(0) != in.delta.dim(0)) {
            throw ShapeError("classifier: inconsistent batch size across inputs");
        }
    }

    // Temporal synchronization invariant: all enabled streams (and the
    // attention vector, when present) share one time extent at every stage.
    void check_sync(const std::vector<nn::TensorT<T>>& feats,
                    const nn::TensorT<T>* attention, int stage) const {
        const int expected = cfg_.time_frames >> stage;
        for (const auto& f : feats) {
            if (f.dim(3) != expected) {
                throw InvariantError("stream desynchronized at stage " + std::to_string(stage) +
                                     ": T=" + std::to_string(f.dim(3)) +
                                     ", expected " + std::to_string(expected));
            }
        }
        if (attention && attention->dim(1) != expected) {
            throw InvariantError("attention desynchronized at stage " + std::to_string(stage));
        }
    }

    ModelConfig cfg_;

    nn::Conv2d<T> stft_front_, delta_front_;
    nn::BatchNorm<T> stft_front_bn_, delta_front_bn_;
    std::array<nn::Conv1d<T>, 3> wave_1d_;
    std::array<nn::BatchNorm<T>, 3> wave_1d_bn_;
    nn::Conv2d<T> wave_lift_;
    nn::BatchNorm<T> wave_lift_bn_;
    // stage_conv_[stream][stage], stream order: stft, delta, wave
    std::array<std::array<nn::Conv2d<T>, kStages>, 3> stage_conv_;
    std::array<std::array<nn::BatchNorm<T>, kStages>, 3> stage_bn_;
    std::vector<nn::Conv2d<T>> attn_conv_;
    std::vector<nn::BatchNorm<T>> attn_bn_;
    nn::Conv2d<T> attn_squash_;
    nn::Dense<T> head_hidden_, head_out_;
    int head_in_dim_ = 0;
};

} // namespace escnet::model
