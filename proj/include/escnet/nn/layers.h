#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "escnet/core/rng.h"
#include "escnet/nn/ops.h"

namespace escnet::nn {

template <typename T>
struct ParamRef {
    std::string name;
    TensorT<T> tensor;
};

template <typename T>
void fill_normal(TensorT<T>& t, double stddev, RngStream& rng) {
    for (auto& v : t.data()) v = static_cast<T>(rng.normal() * stddev);
}

// He initialization for ReLU stacks: std = sqrt(2 / fan_in).
template <typename T>
void fill_he(TensorT<T>& t, size_t fan_in, RngStream& rng) {
    fill_normal(t, std::sqrt(2.0 / static_cast<double>(fan_in)), rng);
}

template <typename T>
struct Conv2d {
    TensorT<T> w; // [Cout, Cin, kF, kT]
    TensorT<T> b; // undefined when the layer is followed by batch norm
    int stride_f = 1, stride_t = 1;
    Padding pad = Padding::same;
    std::string name;

    static Conv2d make(const std::string& name, int c_in, int c_out, int k_f, int k_t,
                       bool with_bias, RngStream& rng,
                       int stride_f = 1, int stride_t = 1, Padding pad = Padding::same) {
        Conv2d layer;
        layer.name = name;
        layer.w = TensorT<T>::zeros({c_out, c_in, k_f, k_t}, true);
        fill_he(layer.w, static_cast<size_t>(c_in) * k_f * k_t, rng);
        if (with_bias) layer.b = TensorT<T>::zeros({c_out}, true);
        layer.stride_f = stride_f;
        layer.stride_t = stride_t;
        layer.pad = pad;
        return layer;
    }

    TensorT<T> operator()(const TensorT<T>& x) const {
        return conv2d(x, w, b, stride_f, stride_t, pad);
    }

    void collect(std::vector<ParamRef<T>>& out) const {
        out.push_back({name + ".w", w});
        if (b.defined()) out.push_back({name + ".b", b});
    }
};

template <typename T>
struct Conv1d {
    TensorT<T> w; // [Cout, Cin, K]
    TensorT<T> b;
    int stride = 1;
    Padding pad = Padding::same;
    std::string name;

    static Conv1d make(const std::string& name, int c_in, int c_out, int k,
                       int stride, RngStream& rng, bool with_bias = false,
                       Padding pad = Padding::same) {
        Conv1d layer;
        layer.name = name;
        layer.w = TensorT<T>::zeros({c_out, c_in, k}, true);
        fill_he(layer.w, static_cast<size_t>(c_in) * k, rng);
        if (with_bias) layer.b = TensorT<T>::zeros({c_out}, true);
        layer.stride = stride;
        layer.pad = pad;
        return layer;
    }

    TensorT<T> operator()(const TensorT<T>& x) const {
        return conv1d(x, w, b, stride, pad);
    }

    void collect(std::vector<ParamRef<T>>& out) const {
        out.push_back({name + ".w", w});
        if (b.defined()) out.push_back({name + ".b", b});
    }
};

template <typename T>
struct BatchNorm {
    TensorT<T> gamma, beta;
    TensorT<T> running_mean, running_var; // buffers, not trained
    T momentum = T(0.9);
    T eps = T(1e-5);
    std::string name;

    static BatchNorm make(const std::string& name, int channels) {
        BatchNorm layer;
        layer.name = name;
        layer.gamma = TensorT<T>::full({channels}, T(1));
        layer.gamma.set_requires_grad(true);
        layer.beta = TensorT<T>::zeros({channels}, true);
        layer.running_mean = TensorT<T>::zeros({channels});
        layer.running_var = TensorT<T>::full({channels}, T(1));
        return layer;
    }

    TensorT<T> operator()(const TensorT<T>& x, bool training) {
        return batch_norm(x, gamma, beta, running_mean, running_var, training, momentum, eps);
    }

    // fused normalize + relu, the common pattern after every convolution
    TensorT<T> forward_relu(const TensorT<T>& x, bool training) {
        return batch_norm_relu(x, gamma, beta, running_mean, running_var, training, momentum, eps);
    }

    void collect(std::vector<ParamRef<T>>& out) const {
        out.push_back({name + ".gamma", gamma});
        out.push_back({name + ".beta", beta});
    }

    void collect_buffers(std::vector<ParamRef<T>>& out) const {
        out.push_back({name + ".running_mean", running_mean});
        out.push_back({name + ".running_var", running_var});
    }
};

template <typename T>
struct Dense {
    TensorT<T> w; // [D, H]
    TensorT<T> b; // [H]
    std::string name;

    static Dense make(const std::string& name, int d_in, int d_out, RngStream& rng) {
        Dense layer;
        layer.name = name;
        layer.w = TensorT<T>::zeros({d_in, d_out}, true);
        fill_he(layer.w, static_cast<size_t>(d_in), rng);
        layer.b = TensorT<T>::zeros({d_out}, true);
        return layer;
    }

    TensorT<T> operator()(const TensorT<T>& x) const { return dense(x, w, b); }

    void collect(std::vector<ParamRef<T>>& out) const {
        out.push_back({name + ".w", w});
        out.push_back({name + ".b", b});
    }
};

} // namespace escnet::nn
