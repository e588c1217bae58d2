#pragma once

// Reference implementations used as test oracles. Deliberately written as
// plain nested loops, independent of the engine's kernels, so a bug in the
// library cannot hide in the check.

#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "escnet/nn/tensor.h"

namespace oracle {

// Cross-correlation with explicit index arithmetic. x: [N,Ci,F,T],
// w: [Co,Ci,kF,kT]; same/valid padding per the engine's geometry rules.
inline std::vector<double> conv2d_naive(const std::vector<double>& x, int n_batch, int c_in, int f_in, int t_in,
                                        const std::vector<double>& w, int c_out, int k_f, int k_t,
                                        const std::vector<double>& bias,
                                        int stride_f, int stride_t, bool same_pad,
                                        int& f_out, int& t_out) {
    int pad_f = 0, pad_t = 0;
    if (same_pad) {
        f_out = (f_in + stride_f - 1) / stride_f;
        t_out = (t_in + stride_t - 1) / stride_t;
        pad_f = std::max((f_out - 1) * stride_f + k_f - f_in, 0) / 2;
        pad_t = std::max((t_out - 1) * stride_t + k_t - t_in, 0) / 2;
    } else {
        f_out = (f_in - k_f) / stride_f + 1;
        t_out = (t_in - k_t) / stride_t + 1;
    }
    std::vector<double> y(static_cast<size_t>(n_batch) * c_out * f_out * t_out, 0.0);
    for (int b = 0; b < n_batch; ++b)
        for (int co = 0; co < c_out; ++co)
            for (int fo = 0; fo < f_out; ++fo)
                for (int to = 0; to < t_out; ++to) {
                    double acc = bias.empty() ? 0.0 : bias[co];
                    for (int ci = 0; ci < c_in; ++ci)
                        for (int kf = 0; kf < k_f; ++kf)
                            for (int kt = 0; kt < k_t; ++kt) {
                                const int sf = fo * stride_f - pad_f + kf;
                                const int st = to * stride_t - pad_t + kt;
                                if (sf < 0 || sf >= f_in || st < 0 || st >= t_in) continue;
                                acc += x[((static_cast<size_t>(b) * c_in + ci) * f_in + sf) * t_in + st] *
                                       w[((static_cast<size_t>(co) * c_in + ci) * k_f + kf) * k_t + kt];
                            }
                    y[((static_cast<size_t>(b) * c_out + co) * f_out + fo) * t_out + to] = acc;
                }
    return y;
}

inline std::vector<double> conv1d_naive(const std::vector<double>& x, int n_batch, int c_in, int l_in,
                                        const std::vector<double>& w, int c_out, int k_len,
                                        int stride, bool same_pad, int& l_out) {
    int pad = 0;
    if (same_pad) {
        l_out = (l_in + stride - 1) / stride;
        pad = std::max((l_out - 1) * stride + k_len - l_in, 0) / 2;
    } else {
        l_out = (l_in - k_len) / stride + 1;
    }
    std::vector<double> y(static_cast<size_t>(n_batch) * c_out * l_out, 0.0);
    for (int b = 0; b < n_batch; ++b)
        for (int co = 0; co < c_out; ++co)
            for (int to = 0; to < l_out; ++to) {
                double acc = 0.0;
                for (int ci = 0; ci < c_in; ++ci)
                    for (int k = 0; k < k_len; ++k) {
                        const int st = to * stride - pad + k;
                        if (st < 0 || st >= l_in) continue;
                        acc += x[(static_cast<size_t>(b) * c_in + ci) * l_in + st] *
                               w[(static_cast<size_t>(co) * c_in + ci) * k_len + k];
                    }
                y[(static_cast<size_t>(b) * c_out + co) * l_out + to] = acc;
            }
    return y;
}

inline std::vector<double> pool2d_naive(const std::vector<double>& x, int n_batch, int ch, int f_in, int t_in,
                                        int pf, int pt, bool max_mode) {
    const int f_out = f_in / pf, t_out = t_in / pt;
    std::vector<double> y(static_cast<size_t>(n_batch) * ch * f_out * t_out);
    for (int b = 0; b < n_batch; ++b)
        for (int c = 0; c < ch; ++c)
            for (int fo = 0; fo < f_out; ++fo)
                for (int to = 0; to < t_out; ++to) {
                    double best = -1e300, sum = 0.0;
                    for (int df = 0; df < pf; ++df)
                        for (int dt = 0; dt < pt; ++dt) {
                            const double v = x[((static_cast<size_t>(b) * ch + c) * f_in + fo * pf + df) * t_in +
                                               to * pt + dt];
                            best = std::max(best, v);
                            sum += v;
                        }
                    y[((static_cast<size_t>(b) * ch + c) * f_out + fo) * t_out + to] =
                        max_mode ? best : sum / (pf * pt);
                }
    return y;
}

// O(n^2) discrete Fourier transform of a real signal; magnitude of bin k.
inline double dft_magnitude(const std::vector<double>& x, int k) {
    const double n = static_cast<double>(x.size());
    double re = 0.0, im = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double ang = -2.0 * M_PI * k * static_cast<double>(i) / n;
        re += x[i] * std::cos(ang);
        im += x[i] * std::sin(ang);
    }
    return std::sqrt(re * re + im * im);
}

inline int dft_peak_bin(const std::vector<double>& x, int k_lo, int k_hi) {
    int best = k_lo;
    double best_mag = -1.0;
    for (int k = k_lo; k <= k_hi; ++k) {
        const double m = dft_magnitude(x, k);
        if (m > best_mag) {
            best_mag = m;
            best = k;
        }
    }
    return best;
}

// Biased autocorrelation at a given lag.
inline double autocorr(const std::vector<double>& x, size_t lag) {
    double acc = 0.0;
    for (size_t i = 0; i + lag < x.size(); ++i) acc += x[i] * x[i + lag];
    return acc / static_cast<double>(x.size());
}

// Scalar Adam reference: one parameter, explicit update sequence.
struct ScalarAdam {
    double m = 0.0, v = 0.0;
    int64_t t = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    double update(double param, double grad, double lr) {
        ++t;
        m = beta1 * m + (1.0 - beta1) * grad;
        v = beta2 * v + (1.0 - beta2) * grad * grad;
        const double m_hat = m / (1.0 - std::pow(beta1, static_cast<double>(t)));
        const double v_hat = v / (1.0 - std::pow(beta2, static_cast<double>(t)));
        return param - lr * m_hat / (std::sqrt(v_hat) + eps);
    }
};

// Central-difference gradient check. Perturbs every coordinate of every
// listed parameter and compares the numeric derivative against the stored
// analytic gradient. Returns the max relative error, where the relative
// error is |a - n| / max(|a|, |n|, floor).
//
// A coordinate whose loss slice has a ReLU or max-pool kink inside the
// h-ball makes the central difference itself inconsistent (its h and h/10
// estimates disagree); such coordinates are re-estimated at h/10, which is
// the standard refinement for piecewise-smooth losses. The analytic
// gradient still has to match the consistent estimate.
template <typename T>
double gradcheck(std::vector<escnet::nn::TensorT<T>> params,
                 const std::function<escnet::nn::TensorT<T>()>& loss_fn,
                 double h = 1e-5, double floor = 1e-6, double refine_threshold = 1e-3) {
    // Analytic pass.
    for (auto& p : params) p.zero_grad();
    auto loss = loss_fn();
    escnet::nn::backward(loss);
    std::vector<std::vector<T>> analytic;
    analytic.reserve(params.size());
    for (auto& p : params) analytic.push_back(p.grad());

    double worst = 0.0;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        auto& data = params[pi].data();
        for (size_t j = 0; j < data.size(); ++j) {
            const T saved = data[j];
            auto central = [&](double step) {
                data[j] = saved + static_cast<T>(step);
                double up;
                {
                    escnet::nn::GradGuard guard(false);
                    up = static_cast<double>(loss_fn().item());
                }
                data[j] = saved - static_cast<T>(step);
                double down;
                {
                    escnet::nn::GradGuard guard(false);
                    down = static_cast<double>(loss_fn().item());
                }
                data[j] = saved;
                return (up - down) / (2.0 * step);
            };
            const double a = static_cast<double>(analytic[pi][j]);
            auto rel = [&](double numeric) {
                return std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
            };
            double err = rel(central(h));
            for (double step = h / 10.0; err >= refine_threshold && step >= h / 100.0; step /= 10.0) {
                err = std::min(err, rel(central(step)));
            }
            worst = std::max(worst, err);
        }
    }
    return worst;
}

} // namespace oracle
