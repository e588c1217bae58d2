#pragma once

// Differentiable operations over TensorT. Layout conventions:
//   2D feature maps: [N, C, F, T]   (batch, channels, frequency, time)
//   1D feature maps: [N, C, L]
//   kernels:         [Cout, Cin, kF, kT] / [Cout, Cin, K]
//   row vectors:     [N, T]
// Time is the innermost axis; hot loops vectorize along it. Every parallel
// loop assigns each output element to exactly one thread and keeps a fixed
// accumulation order, so results are reproducible for a given binary
// regardless of worker count.

#include <algorithm>
#include <cmath>
#include <cstring>

#include "escnet/core/threading.h"
#include "escnet/nn/tensor.h"

namespace escnet::nn {

enum class Padding { same, valid };

struct ConvGeom {
    int out;
    int pad_lo;
};

inline ConvGeom conv_geometry(int in, int k, int stride, Padding pad) {
    if (stride <= 0) throw ArgumentError("stride must be positive");
    if (k <= 0) throw ArgumentError("kernel extent must be positive");
    if (pad == Padding::valid) {
        if (in < k) throw ShapeError("input extent smaller than kernel in valid-padding conv");
        return {(in - k) / stride + 1, 0};
    }
    const int out = (in + stride - 1) / stride;
    const int pad_total = std::max((out - 1) * stride + k - in, 0);
    return {out, pad_total / 2};
}

namespace detail {

inline bool parallel_worthwhile(size_t work) { return work >= (1u << 15); }

template <typename T>
void accumulate_into(std::vector<T>& dst, const std::vector<T>& src) {
    const size_t n = dst.size();
    const T* s = src.data();
    T* d = dst.data();
#pragma omp parallel for schedule(static) num_threads(worker_count()) \
    if (parallel_worthwhile(n))
    for (long i = 0; i < static_cast<long>(n); ++i) d[i] += s[i];
}

} // namespace detail

// ---------------------------------------------------------------------------
// Elementwise

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError("add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
    auto pa = a.node();
    auto pb = b.node();
    auto out = make_op_node<T>(a.shape(), {pa, pb}, [pa, pb](Node<T>& n) {
        if (pa->requires_grad) {
            pa->ensure_grad();
            detail::accumulate_into(pa->grad, n.grad);
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            detail::accumulate_into(pb->grad, n.grad);
        }
    });
    const T* av = pa->value.data();
    const T* bv = pb->value.data();
    T* ov = out.data().data();
    const long size = static_cast<long>(out.size());
#pragma omp parallel for schedule(static) num_threads(worker_count()) \
    if (detail::parallel_worthwhile(out.size()))
    for (long i = 0; i < size; ++i) ov[i] = av[i] + bv[i];
    return out;
}

template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError("mul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
    auto pa = a.node();
    auto pb = b.node();
    auto out = make_op_node<T>(a.shape(), {pa, pb}, [pa, pb](Node<T>& n) {
        const long size = static_cast<long>(n.size());
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (long i = 0; i < size; ++i) pa->grad[i] += n.grad[i] * pb->value[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (long i = 0; i < size; ++i) pb->grad[i] += n.grad[i] * pa->value[i];
        }
    });
    for (size_t i = 0; i < out.size(); ++i) out.data()[i] = pa->value[i] * pb->value[i];
    return out;
}

template <typename T>
TensorT<T> scale(const TensorT<T>& a, T s) {
    auto pa = a.node();
    auto out = make_op_node<T>(a.shape(), {pa}, [pa, s](Node<T>& n) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (size_t i = 0; i < n.size(); ++i) pa->grad[i] += n.grad[i] * s;
    });
    for (size_t i = 0; i < out.size(); ++i) out.data()[i] = pa->value[i] * s;
    return out;
}

template <typename T>
TensorT<T> relu(const TensorT<T>& x) {
    auto px = x.node();
    auto out = make_op_node<T>(x.shape(), {px}, [px](Node<T>& n) {
        if (!px->requires_grad) return;
        px->ensure_grad();
        const long size = static_cast<long>(n.size());
        const T* g = n.grad.data();
        const T* v = n.value.data();
        T* pg = px->grad.data();
#pragma omp parallel for schedule(static) num_threads(worker_count()) \
    if (detail::parallel_worthwhile(n.size()))
        for (long i = 0; i < size; ++i) pg[i] += v[i] > T(0) ? g[i] : T(0);
    });
    const T* xv = px->value.data();
    T* ov = out.data().data();
    const long size = static_cast<long>(out.size());
#pragma omp parallel for schedule(static) num_threads(worker_count()) \
    if (detail::parallel_worthwhile(out.size()))
    for (long i = 0; i < size; ++i) ov[i] = xv[i] > T(0) ? xv[i] : T(0);
    return out;
}

template <typename T>
TensorT<T> sigmoid(const TensorT<T>& x) {
    auto px = x.node();
    auto out = make_op_node<T>(x.shape(), {px}, [px](Node<T>& n) {
        if (!px->requires_grad) return;
        px->ensure_grad();
        for (size_t i = 0; i < n.size(); ++i) {
            const T y = n.value[i];
            px->grad[i] += n.grad[i] * y * (T(1) - y);
        }
    });
    for (size_t i = 0; i < out.size(); ++i) {
        const T v = px->value[i];
        out.data()[i] = v >= T(0) ? T(1) / (T(1) + std::exp(-v))
                                  : std::exp(v) / (T(1) + std::exp(v));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Shape manipulation

template <typename T>
TensorT<T> reshape(const TensorT<T>& x, Shape shape) {
    if (shape_numel(shape) != x.size()) {
        throw ShapeError("reshape: element count mismatch for " + shape_str(shape));
    }
    auto px = x.node();
    auto out = make_op_node<T>(std::move(shape), {px}, [px](Node<T>& n) {
        if (!px->requires_grad) return;
        px->ensure_grad();
        detail::accumulate_into(px->grad, n.grad);
    });
    std::copy(px->value.begin(), px->value.end(), out.data().begin());
    return out;
}

// Concatenate [N, Di, T] blocks along axis 1.
template <typename T>
TensorT<T> concat_channels(const std::vector<TensorT<T>>& xs) {
    if (xs.empty()) throw ArgumentError("concat_channels: empty input list");
    const int n_batch = xs[0].dim(0);
    const int t_len = xs[0].dim(2);
    int d_total = 0;
    std::vector<std::shared_ptr<Node<T>>> parents;
    for (const auto& x : xs) {
        if (x.rank() != 3 || x.dim(0) != n_batch || x.dim(2) != t_len) {
            throw ShapeError("concat_channels: incompatible block " + shape_str(x.shape()));
        }
        d_total += x.dim(1);
        parents.push_back(x.node());
    }
    auto out = make_op_node<T>({n_batch, d_total, t_len}, parents,
                               [parents, n_batch, d_total, t_len](Node<T>& n) {
        size_t offset = 0;
        for (const auto& p : parents) {
            const size_t d_i = p->value.size() / (static_cast<size_t>(n_batch) * t_len);
            if (p->requires_grad) {
                p->ensure_grad();
                for (int b = 0; b < n_batch; ++b) {
                    const T* src = n.grad.data() + (static_cast<size_t>(b) * d_total + offset) * t_len;
                    T* dst = p->grad.data() + static_cast<size_t>(b) * d_i * t_len;
                    for (size_t i = 0; i < d_i * t_len; ++i) dst[i] += src[i];
                }
            }
            offset += d_i;
        }
    });
    size_t offset = 0;
    for (const auto& p : parents) {
        const size_t d_i = p->value.size() / (static_cast<size_t>(n_batch) * t_len);
        for (int b = 0; b < n_batch; ++b) {
            std::memcpy(out.data().data() + (static_cast<size_t>(b) * d_total + offset) * t_len,
                        p->value.data() + static_cast<size_t>(b) * d_i * t_len,
                        d_i * static_cast<size_t>(t_len) * sizeof(T));
        }
        offset += d_i;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Convolution

// x: [N, Cin, F, T], w: [Cout, Cin, kF, kT], bias: [Cout] or undefined.
template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& bias,
                  int stride_f, int stride_t, Padding pad) {
    if (x.rank() != 4) throw ShapeError("conv2d: input must be [N,C,F,T], got " + shape_str(x.shape()));
    if (w.rank() != 4) throw ShapeError("conv2d: kernel must be [Cout,Cin,kF,kT]");
    const int n_batch = x.dim(0), c_in = x.dim(1), f_in = x.dim(2), t_in = x.dim(3);
    const int c_out = w.dim(0), k_f = w.dim(2), k_t = w.dim(3);
    if (w.dim(1) != c_in) {
        throw ShapeError("conv2d: channel mismatch, input has " + std::to_string(c_in) +
                         ", kernel expects " + std::to_string(w.dim(1)));
    }
    if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != c_out)) {
        throw ShapeError("conv2d: bias must be [Cout]");
    }
    const auto [f_out, pad_f] = conv_geometry(f_in, k_f, stride_f, pad);
    const auto [t_out, pad_t] = conv_geometry(t_in, k_t, stride_t, pad);

    auto px = x.node();
    auto pw = w.node();
    std::vector<std::shared_ptr<Node<T>>> parents = {px, pw};
    auto pb = bias.defined() ? bias.node() : nullptr;
    if (pb) parents.push_back(pb);

    const bool unit_stride = stride_f == 1 && stride_t == 1;

    auto backward = [px, pw, pb, n_batch, c_in, f_in, t_in, c_out, k_f, k_t,
                     f_out, t_out, pad_f, pad_t, stride_f, stride_t, unit_stride](Node<T>& n) {
        const T* dy = n.grad.data();
        const T* xv = px->value.data();
        const T* wv = pw->value.data();
        if (px->requires_grad) {
            px->ensure_grad();
            T* dx = px->grad.data();
            if (unit_stride) {
#pragma omp parallel for schedule(static) collapse(2) num_threads(worker_count()) \
    if (detail::parallel_worthwhile(px->value.size() * c_out))
                for (int b = 0; b < n_batch; ++b) {
                    for (int fi = 0; fi < f_in; ++fi) {
                        for (int ci = 0; ci < c_in; ++ci) {
                            T* drow = dx + ((static_cast<size_t>(b) * c_in + ci) * f_in + fi) * t_in;
                            for (int co = 0; co < c_out; ++co) {
                                for (int kf = 0; kf < k_f; ++kf) {
                                    const int fo = fi + pad_f - kf;
                                    if (fo < 0 || fo >= f_out) continue;
                                    const T* gyrow = dy + ((static_cast<size_t>(b) * c_out + co) * f_out + fo) * t_out;
                                    const T* wrow = wv + ((static_cast<size_t>(co) * c_in + ci) * k_f + kf) * k_t;
                                    for (int kt = 0; kt < k_t; ++kt) {
                                        const int shift = pad_t - kt;
                                        const int t0 = std::max(0, -shift);
                                        const int t1 = std::min(t_in, t_out - shift);
                                        const T kv = wrow[kt];
                                        const T* gy = gyrow + shift;
#pragma omp simd
                                        for (int t = t0; t < t1; ++t) drow[t] += kv * gy[t];
                                    }
                                }
                            }
                        }
                    }
                }
            } else {
#pragma omp parallel for schedule(static) collapse(2) num_threads(worker_count()) \
    if (detail::parallel_worthwhile(px->value.size() * c_out))
                for (int b = 0; b < n_batch; ++b) {
                    for (int ci = 0; ci < c_in; ++ci) {
                        T* dplane = dx + (static_cast<size_t>(b) * c_in + ci) * f_in * t_in;
                        for (int co = 0; co < c_out; ++co) {
                            for (int fo = 0; fo < f_out; ++fo) {
                                for (int to = 0; to < t_out; ++to) {
                                    const T g = dy[((static_cast<size_t>(b) * c_out + co) * f_out + fo) * t_out + to];
                                    for (int kf = 0; kf < k_f; ++kf) {
                                        const int sf = fo * stride_f - pad_f + kf;
                                        if (sf < 0 || sf >= f_in) continue;
                                        for (int kt = 0; kt < k_t; ++kt) {
                                            const int st = to * stride_t - pad_t + kt;
                                            if (st < 0 || st >= t_in) continue;
                                            dplane[sf * t_in + st] +=
                                                g * wv[((static_cast<size_t>(co) * c_in + ci) * k_f + kf) * k_t + kt];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        if (pw->requires_grad) {
            pw->ensure_grad();
            T* dw = pw->grad.data();
            // one thread owns each co slice; the (b, fo) sweep is outermost
            // so every input row is read once per slice
#pragma omp parallel for schedule(static) num_threads(worker_count()) \
    if (detail::parallel_worthwhile(n.size() * c_in * k_f * k_t))
            for (int co = 0; co < c_out; ++co) {
                std::vector<double> acc(static_cast<size_t>(c_in) * k_f * k_t, 0.0);
                for (int b = 0; b < n_batch; ++b) {
                    for (int fo = 0; fo < f_out; ++fo) {
                        const T* gyrow = dy + ((static_cast<size_t>(b) * c_out + co) * f_out + fo) * t_out;
                        for (int ci = 0; ci < c_in; ++ci) {
                            for (int kf = 0; kf < k_f; ++kf) {
                                const int sf = fo * stride_f - pad_f + kf;
                                if (sf < 0 || sf >= f_in) continue;
                                const T* xrow = xv + ((static_cast<size_t>(b) * c_in + ci) * f_in + sf) * t_in;
                                double* arow = acc.data() + (static_cast<size_t>(ci) * k_f + kf) * k_t;
                                if (unit_stride) {
                                    for (int kt = 0; kt < k_t; ++kt) {
                                        const int shift = kt - pad_t;
                                        const int lo = std::max(0, -shift);
                                        const int hi = std::min(t_out, t_in - shift);
                                        const T* xs = xrow + shift;
                                        T row_acc = T(0);
#pragma omp simd reduction(+ : row_acc)
                                        for (int t = lo; t < hi; ++t) row_acc += xs[t] * gyrow[t];
                                        arow[kt] += static_cast<double>(row_acc);
                                    }
                                } else {
                                    for (int kt = 0; kt < k_t; ++kt) {
                                        double row_acc = 0.0;
                                        for (int to = 0; to < t_out; ++to) {
                                            const int st = to * stride_t - pad_t + kt;
                                            if (st < 0 || st >= t_in) continue;
                                            row_acc += static_cast<double>(xrow[st]) * gyrow[to];
                                        }
                                        arow[kt] += row_acc;
                                    }
                                }
                            }
                        }
                    }
                }
                for (size_t i = 0; i < acc.size(); ++i) {
                    dw[static_cast<size_t>(co) * acc.size() + i] += static_cast<T>(acc[i]);
                }
            }
        }
        if (pb && pb->requires_grad) {
            pb->ensure_grad();
            for (int co = 0; co < c_out; ++co) {
                double acc = 0.0;
                for (int b = 0; b < n_batch; ++b) {
                    const T* gyplane = dy + (static_cast<size_t>(b) * c_out + co) * f_out * t_out;
                    for (long i = 0; i < static_cast<long>(f_out) * t_out; ++i) acc += gyplane[i];
                }
                pb->grad[co] += static_cast<T>(acc);
            }
        }
    };

    auto out = make_op_node<T>({n_batch, c_out, f_out, t_out}, std::move(parents), std::move(backward));

    const T* xv = px->value.data();
    const T* wv = pw->value.data();
    T* yv = out.data().data();
    // (b, fo) outermost: the three input rows in play stay cached while
    // every output channel consumes them
#pragma omp parallel for schedule(static) collapse(2) num_threads(worker_count()) \
    if (detail::parallel_worthwhile(out.size() * c_in * k_f * k_t))
    for (int b = 0; b < n_batch; ++b) {
        for (int fo = 0; fo < f_out; ++fo) {
            for (int co = 0; co < c_out; ++co) {
                const T bias_v = pb ? pb->value[co] : T(0);
                T* orow = yv + ((static_cast<size_t>(b) * c_out + co) * f_out + fo) * t_out;
                if (unit_stride) {
                    for (int t = 0; t < t_out; ++t) orow[t] = bias_v;
                    for (int ci = 0; ci < c_in; ++ci) {
                        for (int kf = 0; kf < k_f; ++kf) {
                            const int sf = fo - pad_f + kf;
                            if (sf < 0 || sf >= f_in) continue;
                            const T* xrow = xv + ((static_cast<size_t>(b) * c_in + ci) * f_in + sf) * t_in;
                            const T* wrow = wv + ((static_cast<size_t>(co) * c_in + ci) * k_f + kf) * k_t;
                            for (int kt = 0; kt < k_t; ++kt) {
                                const int shift = kt - pad_t;
                                const int t0 = std::max(0, -shift);
                                const int t1 = std::min(t_out, t_in - shift);
                                const T kv = wrow[kt];
                                const T* xs = xrow + shift;
#pragma omp simd
                                for (int t = t0; t < t1; ++t) orow[t] += kv * xs[t];
                            }
                        }
                    }
                } else {
                    for (int to = 0; to < t_out; ++to) {
                        T acc = bias_v;
                        for (int ci = 0; ci < c_in; ++ci) {
                            for (int kf = 0; kf < k_f; ++kf) {
                                const int sf = fo * stride_f - pad_f + kf;
                                if (sf < 0 || sf >= f_in) continue;
                                for (int kt = 0; kt < k_t; ++kt) {
                                    const int st = to * stride_t - pad_t + kt;
                                    if (st < 0 || st >= t_in) continue;
                                    acc += xv[((static_cast<size_t>(b) * c_in + ci) * f_in + sf) * t_in + st] *
                                           wv[((static_cast<size_t>(co) * c_in + ci) * k_f + kf) * k_t + kt];
                                }
                            }
                        }
                        orow[to] = acc;
                    }
                }
            }
        }
    }
    return out;
}

template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& w, int stride_f, int stride_t, Padding pad) {
    return conv2d(x, w, TensorT<T>(), stride_f, stride_t, pad);
}

// x: [N, Cin, L], w: [Cout, Cin, K].
template <typename T>
TensorT<T> conv1d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& bias,
                  int stride, Padding pad) {
    if (x.rank() != 3) throw ShapeError("conv1d: input must be [N,C,L], got " + shape_str(x.shape()));
    if (w.rank() != 3) throw ShapeError("conv1d: kernel must be [Cout,Cin,K]");
    if (stride <= 0) throw ArgumentError("conv1d: stride must be positive");
    const int n_batch = x.dim(0), c_in = x.dim(1), l_in = x.dim(2);
    const int c_out = w.dim(0), k_len = w.dim(2);
    if (w.dim(1) != c_in) throw ShapeError("conv1d: channel mismatch");
    if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != c_out)) throw ShapeError("conv1d: bias must be [Cout]");
    const auto [l_out, pad_lo] = conv_geometry(l_in, k_len, stride, pad);

    auto px = x.node();
    auto pw = w.node();
    std::vector<std::shared_ptr<Node<T>>> parents = {px, pw};
    auto pb = bias.defined() ? bias.node() : nullptr;
    if (pb) parents.push_back(pb);

    auto backward = [px, pw, pb, n_batch, c_in, l_in, c_out, k_len, l_out, pad_lo, stride](Node<T>& n) {
        const T* dy = n.grad.data();
        const T* xv = px->value.data();
        const T* wv = pw->value.data();
        if (px->requires_grad) {
            px->ensure_grad();
            T* dx = px->grad.data();
#pragma omp parallel for schedule(static) collapse(2) num_threads(worker_count()) \
    if (detail::parallel_worthwhile(n.size() * c_in * k_len))
            for (int b = 0; b < n_batch; ++b) {
                for (int ci = 0; ci < c_in; ++ci) {
                    T* drow = dx + (static_cast<size_t>(b) * c_in + ci) * l_in;
                    for (int co = 0; co < c_out; ++co) {
                        const T* gyrow = dy + (static_cast<size_t>(b) * c_out + co) * l_out;
                        const T* wrow = wv + (static_cast<size_t>(co) * c_in + ci) * k_len;
                        for (int to = 0; to < l_out; ++to) {
                            const int base = to * stride - pad_lo;
                            const int k0 = std::max(0, -base);
                            const int k1 = std::min(k_len, l_in - base);
                            const T g = gyrow[to];
                            T* dseg = drow + base;
#pragma omp simd
                            for (int k = k0; k < k1; ++k) dseg[k] += g * wrow[k];
                        }
                    }
                }
            }
        }
        if (pw->requires_grad) {
            pw->ensure_grad();
            T* dw = pw->grad.data();
#pragma omp parallel for schedule(static) num_threads(worker_count()) \
    if (detail::parallel_worthwhile(n.size() * c_in * k_len))
            for (int co = 0; co < c_out; ++co) {
                std::vector<T> acc(static_cast<size_t>(c_in) * k_len, T(0));
                for (int ci = 0; ci < c_in; ++ci) {
                    T* arow = acc.data() + static_cast<size_t>(ci) * k_len;
                    for (int b = 0; b < n_batch; ++b) {
                        const T* xrow = xv + (static_cast<size_t>(b) * c_in + ci) * l_in;
                        const T* gyrow = dy + (static_cast<size_t>(b) * c_out + co) * l_out;
                        for (int to = 0; to < l_out; ++to) {
                            const int base = to * stride - pad_lo;
                            const int k0 = std::max(0, -base);
                            const int k1 = std::min(k_len, l_in - base);
                            const T g = gyrow[to];
                            const T* xseg = xrow + base;
#pragma omp simd
                            for (int k = k0; k < k1; ++k) arow[k] += g * xseg[k];
                        }
                    }
                }
                for (size_t i = 0; i < acc.size(); ++i) {
                    dw[static_cast<size_t>(co) * acc.size() + i] += acc[i];
                }
            }
        }
        if (pb && pb->requires_grad) {
            pb->ensure_grad();
            for (int co = 0; co < c_out; ++co) {
                double acc = 0.0;
                for (int b = 0; b < n_batch; ++b) {
                    const T* gyrow = dy + (static_cast<size_t>(b) * c_out + co) * l_out;
                    for (int to = 0; to < l_out; ++to) acc += gyrow[to];
                }
                pb->grad[co] += static_cast<T>(acc);
            }
        }
    };

    auto out = make_op_node<T>({n_batch, c_out, l_out}, std::move(parents), std::move(backward));

    const T* xv = px->value.data();
    const T* wv = pw->value.data();
    T* yv = out.data().data();
#pragma omp parallel for schedule(static) collapse(2) num_threads(worker_count()) \
    if (detail::parallel_worthwhile(out.size() * c_in * k_len))
    for (int b = 0; b < n_batch; ++b) {
        for (int co = 0; co < c_out; ++co) {
            T* orow = yv + (static_cast<size_t>(b) * c_out + co) * l_out;
            const T bias_v = pb ? pb->value[co] : T(0);
            for (int to = 0; to < l_out; ++to) {
                const int base = to * stride - pad_lo;
                const int k0 = std::max(0, -base);
                const int k1 = std::min(k_len, l_in - base);
                T acc = bias_v;
                for (int ci = 0; ci < c_in; ++ci) {
                    const T* xseg = xv + (static_cast<size_t>(b) * c_in + ci) * l_in + base;
                    const T* wrow = wv + (static_cast<size_t>(co) * c_in + ci) * k_len;
                    T dot = T(0);
#pragma omp simd reduction(+ : dot)
                    for (int k = k0; k < k1; ++k) dot += xseg[k] * wrow[k];
                    acc += dot;
                }
                orow[to] = acc;
            }
        }
    }
    return out;
}

template <typename T>
TensorT<T> conv1d(const TensorT<T>& x, const TensorT<T>& w, int stride, Padding pad) {
    return conv1d(x, w, TensorT<T>(), stride, pad);
}

// ---------------------------------------------------------------------------
// Pooling

enum class PoolMode { max, avg };

// Non-overlapping pooling over the two spatial axes of [N, C, F, T].
// Extents must divide exactly; max mode routes the gradient to the first
// maximal element of each window.
template <typename T>
TensorT<T> pool2d(const TensorT<T>& x, int pf, int pt, PoolMode mode) {
    if (x.rank() != 4) throw ShapeError("pool2d: input must be [N,C,F,T]");
    if (pf <= 0 || pt <= 0) throw ArgumentError("pool2d: kernel extents must be positive");
    const int n_batch = x.dim(0), ch = x.dim(1), f_in = x.dim(2), t_in = x.dim(3);
    if (f_in % pf != 0 || t_in % pt != 0) {
        throw ShapeError("pool2d: extents " + shape_str(x.shape()) + " not divisible by kernel (" +
                         std::to_string(pf) + "," + std::to_string(pt) + ")");
    }
    const int f_out = f_in / pf, t_out = t_in / pt;
    auto px = x.node();

    auto out = make_op_node<T>({n_batch, ch, f_out, t_out}, {px},
                               [px, mode, pf, pt, n_batch, ch, f_in, t_in, f_out, t_out](Node<T>& n) {
        if (!px->requires_grad) return;
        px->ensure_grad();
        T* dx = px->grad.data();
        const T* dy = n.grad.data();
        const T inv_area = T(1) / static_cast<T>(pf * pt);
#pragma omp parallel for schedule(static) collapse(2) num_threads(worker_count()) \
    if (detail::parallel_worthwhile(px->value.size()))
        for (int b = 0; b < n_batch; ++b) {
            for (int c = 0; c < ch; ++c) {
                const size_t oplane = (static_cast<size_t>(b) * ch + c) * f_out * t_out;
                const size_t iplane = (static_cast<size_t>(b) * ch + c) * f_in * t_in;
                for (int fo = 0; fo < f_out; ++fo) {
                    for (int to = 0; to < t_out; ++to) {
                        const size_t oi = oplane + static_cast<size_t>(fo) * t_out + to;
                        if (mode == PoolMode::max) {
                            dx[n.aux_idx[oi]] += dy[oi];
                        } else {
                            const T g = dy[oi] * inv_area;
                            for (int df = 0; df < pf; ++df) {
                                T* drow = dx + iplane + (static_cast<size_t>(fo) * pf + df) * t_in + static_cast<size_t>(to) * pt;
                                for (int dt = 0; dt < pt; ++dt) drow[dt] += g;
                            }
                        }
                    }
                }
            }
        }
    });

    if (mode == PoolMode::max && out.node()->requires_grad) {
        out.node()->aux_idx.resize(out.size());
    }
    const T* xv = px->value.data();
    T* yv = out.data().data();
    int64_t* am = out.node()->aux_idx.empty() ? nullptr : out.node()->aux_idx.data();
#pragma omp parallel for schedule(static) collapse(2) num_threads(worker_count()) \
    if (detail::parallel_worthwhile(x.size()))
    for (int b = 0; b < n_batch; ++b) {
        for (int c = 0; c < ch; ++c) {
            const size_t oplane = (static_cast<size_t>(b) * ch + c) * f_out * t_out;
            const size_t iplane = (static_cast<size_t>(b) * ch + c) * f_in * t_in;
            for (int fo = 0; fo < f_out; ++fo) {
                for (int to = 0; to < t_out; ++to) {
                    if (mode == PoolMode::max) {
                        T best = xv[iplane + static_cast<size_t>(fo) * pf * t_in + static_cast<size_t>(to) * pt];
                        size_t best_idx = iplane + static_cast<size_t>(fo) * pf * t_in + static_cast<size_t>(to) * pt;
                        for (int df = 0; df < pf; ++df) {
                            const size_t row = iplane + (static_cast<size_t>(fo) * pf + df) * t_in + static_cast<size_t>(to) * pt;
                            for (int dt = 0; dt < pt; ++dt) {
                                if (xv[row + dt] > best) {
                                    best = xv[row + dt];
                                    best_idx = row + dt;
                                }
                            }
                        }
                        yv[oplane + static_cast<size_t>(fo) * t_out + to] = best;
                        if (am) am[oplane + static_cast<size_t>(fo) * t_out + to] = static_cast<int64_t>(best_idx);
                    } else {
                        double acc = 0.0;
                        for (int df = 0; df < pf; ++df) {
                            const T* row = xv + iplane + (static_cast<size_t>(fo) * pf + df) * t_in + static_cast<size_t>(to) * pt;
                            for (int dt = 0; dt < pt; ++dt) acc += row[dt];
                        }
                        yv[oplane + static_cast<size_t>(fo) * t_out + to] = static_cast<T>(acc / (pf * pt));
                    }
                }
            }
        }
    }
    return out;
}

// Pairwise average along the second axis of [N, T]; halves T. Used for the
// attention pyramid.
template <typename T>
TensorT<T> avgpool_pairs(const TensorT<T>& x) {
    if (x.rank() != 2) throw ShapeError("avgpool_pairs: input must be [N,T]");
    const int n_batch = x.dim(0), t_in = x.dim(1);
    if (t_in % 2 != 0) throw ShapeError("avgpool_pairs: T must be even, got " + std::to_string(t_in));
    const int t_out = t_in / 2;
    auto px = x.node();
    auto out = make_op_node<T>({n_batch, t_out}, {px}, [px, n_batch, t_in, t_out](Node<T>& n) {
        if (!px->requires_grad) return;
        px->ensure_grad();
        for (int b = 0; b < n_batch; ++b) {
            for (int t = 0; t < t_out; ++t) {
                const T g = n.grad[static_cast<size_t>(b) * t_out + t] * T(0.5);
                px->grad[static_cast<size_t>(b) * t_in + 2 * t] += g;
                px->grad[static_cast<size_t>(b) * t_in + 2 * t + 1] += g;
            }
        }
    });
    for (int b = 0; b < n_batch; ++b) {
        for (int t = 0; t < t_out; ++t) {
            out.data()[static_cast<size_t>(b) * t_out + t] =
                (px->value[static_cast<size_t>(b) * t_in + 2 * t] +
                 px->value[static_cast<size_t>(b) * t_in + 2 * t + 1]) * T(0.5);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Normalization

// Normalizes over all axes except axis 1 (channels). Rank 4 [N,C,F,T] or
// rank 3 [N,C,L]. In training mode uses batch statistics and updates the
// running estimates in place; in eval mode uses the running estimates.
template <typename T>
TensorT<T> batch_norm(const TensorT<T>& x, const TensorT<T>& gamma, const TensorT<T>& beta,
                      TensorT<T>& running_mean, TensorT<T>& running_var,
                      bool training, T momentum = T(0.9), T eps = T(1e-5)) {
    if (x.rank() != 3 && x.rank() != 4) throw ShapeError("batch_norm: input must be rank 3 or 4");
    const int n_batch = x.dim(0);
    const int ch = x.dim(1);
    const size_t spatial = x.size() / (static_cast<size_t>(n_batch) * ch);
    if (gamma.size() != static_cast<size_t>(ch) || beta.size() != static_cast<size_t>(ch)) {
        throw ShapeError("batch_norm: gamma/beta must have one value per channel");
    }
    if (training && n_batch < 2) {
        throw ConfigError("batch_norm: training mode requires batch size >= 2");
    }

    auto px = x.node();
    auto pg = gamma.node();
    auto pb = beta.node();
    const size_t per_channel = static_cast<size_t>(n_batch) * spatial;

    auto backward = [px, pg, pb, n_batch, ch, spatial, per_channel, training](Node<T>& n) {
        const T* dy = n.grad.data();
        const T* xv = px->value.data();
        const T* mean = n.aux.data();
        const T* inv_std = n.aux.data() + ch;
        const bool need_dx = px->requires_grad;
        if (need_dx) px->ensure_grad();
        if (pg->requires_grad) pg->ensure_grad();
        if (pb->requires_grad) pb->ensure_grad();
#pragma omp parallel for schedule(static) num_threads(worker_count()) \
    if (detail::parallel_worthwhile(n.size()))
        for (int c = 0; c < ch; ++c) {
            double sum_dy = 0.0, sum_dy_xhat = 0.0;
            for (int b = 0; b < n_batch; ++b) {
                const size_t base = (static_cast<size_t>(b) * ch + c) * spatial;
                for (size_t i = 0; i < spatial; ++i) {
                    const double g = dy[base + i];
                    const double xhat = (static_cast<double>(xv[base + i]) - mean[c]) * inv_std[c];
                    sum_dy += g;
                    sum_dy_xhat += g * xhat;
                }
            }
            if (pg->requires_grad) pg->grad[c] += static_cast<T>(sum_dy_xhat);
            if (pb->requires_grad) pb->grad[c] += static_cast<T>(sum_dy);
            if (!need_dx) continue;
            const double g_scale = static_cast<double>(pg->value[c]) * inv_std[c];
            const double mean_dy = sum_dy / static_cast<double>(per_channel);
            const double mean_dy_xhat = sum_dy_xhat / static_cast<double>(per_channel);
            for (int b = 0; b < n_batch; ++b) {
                const size_t base = (static_cast<size_t>(b) * ch + c) * spatial;
                T* dxrow = px->grad.data() + base;
                const T* xrow = xv + base;
                if (training) {
                    for (size_t i = 0; i < spatial; ++i) {
                        const double xhat = (static_cast<double>(xrow[i]) - mean[c]) * inv_std[c];
                        dxrow[i] += static_cast<T>(g_scale * (dy[base + i] - mean_dy - xhat * mean_dy_xhat));
                    }
                } else {
                    for (size_t i = 0; i < spatial; ++i) {
                        dxrow[i] += static_cast<T>(g_scale * dy[base + i]);
                    }
                }
            }
        }
    };

    auto out = make_op_node<T>(x.shape(), {px, pg, pb}, std::move(backward));
    out.node()->aux.resize(2 * static_cast<size_t>(ch));

    T* mean_save = out.node()->aux.data();
    T* inv_std_save = out.node()->aux.data() + ch;
    const T* xv = px->value.data();
    T* yv = out.data().data();
    T* rm = running_mean.data().data();
    T* rv = running_var.data().data();
#pragma omp parallel for schedule(static) num_threads(worker_count()) \
    if (detail::parallel_worthwhile(x.size()))
    for (int c = 0; c < ch; ++c) {
        double mu, var;
        if (training) {
            double sum = 0.0, sum_sq = 0.0;
            for (int b = 0; b < n_batch; ++b) {
                const T* row = xv + (static_cast<size_t>(b) * ch + c) * spatial;
                double s = 0.0, s2 = 0.0;
#pragma omp simd reduction(+ : s, s2)
                for (long i = 0; i < static_cast<long>(spatial); ++i) {
                    const double v = row[i];
                    s += v;
                    s2 += v * v;
                }
                sum += s;
                sum_sq += s2;
            }
            mu = sum / static_cast<double>(per_channel);
            var = std::max(sum_sq / static_cast<double>(per_channel) - mu * mu, 0.0);
            rm[c] = momentum * rm[c] + (T(1) - momentum) * static_cast<T>(mu);
            rv[c] = momentum * rv[c] + (T(1) - momentum) * static_cast<T>(var);
        } else {
            mu = rm[c];
            var = rv[c];
        }
        const double inv_std = 1.0 / std::sqrt(var + static_cast<double>(eps));
        mean_save[c] = static_cast<T>(mu);
        inv_std_save[c] = static_cast<T>(inv_std);
        const double g = pg->value[c], bta = pb->value[c];
        for (int b = 0; b < n_batch; ++b) {
            const size_t base = (static_cast<size_t>(b) * ch + c) * spatial;
            const T* xrow = xv + base;
            T* yrow = yv + base;
#pragma omp simd
            for (long i = 0; i < static_cast<long>(spatial); ++i) {
                yrow[i] = static_cast<T>((static_cast<double>(xrow[i]) - mu) * inv_std * g + bta);
            }
        }
    }
    return out;
}

// Fused batch_norm followed by relu: one output tensor instead of two.
// Semantically identical to relu(batch_norm(...)); the backward masks the
// incoming gradient with the relu gate and recomputes the normalized values
// from the still-alive parent.
template <typename T>
TensorT<T> batch_norm_relu(const TensorT<T>& x, const TensorT<T>& gamma, const TensorT<T>& beta,
                           TensorT<T>& running_mean, TensorT<T>& running_var,
                           bool training, T momentum = T(0.9), T eps = T(1e-5)) {
    if (x.rank() != 3 && x.rank() != 4) throw ShapeError("batch_norm_relu: input must be rank 3 or 4");
    const int n_batch = x.dim(0);
    const int ch = x.dim(1);
    const size_t spatial = x.size() / (static_cast<size_t>(n_batch) * ch);
    if (gamma.size() != static_cast<size_t>(ch) || beta.size() != static_cast<size_t>(ch)) {
        throw ShapeError("batch_norm_relu: gamma/beta must have one value per channel");
    }
    if (training && n_batch < 2) {
        throw ConfigError("batch_norm_relu: training mode requires batch size >= 2");
    }

    auto px = x.node();
    auto pg = gamma.node();
    auto pb = beta.node();
    const size_t per_channel = static_cast<size_t>(n_batch) * spatial;

    auto backward = [px, pg, pb, n_batch, ch, spatial, per_channel, training](Node<T>& n) {
        const T* dy = n.grad.data();
        const T* yv = n.value.data();
        const T* xv = px->value.data();
        const T* mean = n.aux.data();
        const T* inv_std = n.aux.data() + ch;
        const bool need_dx = px->requires_grad;
        if (need_dx) px->ensure_grad();
        if (pg->requires_grad) pg->ensure_grad();
        if (pb->requires_grad) pb->ensure_grad();
#pragma omp parallel for schedule(static) num_threads(worker_count()) \
    if (detail::parallel_worthwhile(n.size()))
        for (int c = 0; c < ch; ++c) {
            double sum_dz = 0.0, sum_dz_xhat = 0.0;
            for (int b = 0; b < n_batch; ++b) {
                const size_t base = (static_cast<size_t>(b) * ch + c) * spatial;
                for (size_t i = 0; i < spatial; ++i) {
                    if (yv[base + i] <= T(0)) continue; // relu gate
                    const double g = dy[base + i];
                    const double xhat = (static_cast<double>(xv[base + i]) - mean[c]) * inv_std[c];
                    sum_dz += g;
                    sum_dz_xhat += g * xhat;
                }
            }
            if (pg->requires_grad) pg->grad[c] += static_cast<T>(sum_dz_xhat);
            if (pb->requires_grad) pb->grad[c] += static_cast<T>(sum_dz);
            if (!need_dx) continue;
            const double g_scale = static_cast<double>(pg->value[c]) * inv_std[c];
            const double mean_dz = sum_dz / static_cast<double>(per_channel);
            const double mean_dz_xhat = sum_dz_xhat / static_cast<double>(per_channel);
            for (int b = 0; b < n_batch; ++b) {
                const size_t base = (static_cast<size_t>(b) * ch + c) * spatial;
                T* dxrow = px->grad.data() + base;
                const T* xrow = xv + base;
                if (training) {
                    for (size_t i = 0; i < spatial; ++i) {
                        const double gate = yv[base + i] > T(0) ? dy[base + i] : T(0);
                        const double xhat = (static_cast<double>(xrow[i]) - mean[c]) * inv_std[c];
                        dxrow[i] += static_cast<T>(g_scale * (gate - mean_dz - xhat * mean_dz_xhat));
                    }
                } else {
                    for (size_t i = 0; i < spatial; ++i) {
                        if (yv[base + i] > T(0)) dxrow[i] += static_cast<T>(g_scale * dy[base + i]);
                    }
                }
            }
        }
    };

    auto out = make_op_node<T>(x.shape(), {px, pg, pb}, std::move(backward));
    out.node()->aux.resize(2 * static_cast<size_t>(ch));

    T* mean_save = out.node()->aux.data();
    T* inv_std_save = out.node()->aux.data() + ch;
    const T* xv = px->value.data();
    T* yv = out.data().data();
    T* rm = running_mean.data().data();
    T* rv = running_var.data().data();
#pragma omp parallel for schedule(static) num_threads(worker_count()) \
    if (detail::parallel_worthwhile(x.size()))
    for (int c = 0; c < ch; ++c) {
        double mu, var;
        if (training) {
            double sum = 0.0, sum_sq = 0.0;
            for (int b = 0; b < n_batch; ++b) {
                const T* row = xv + (static_cast<size_t>(b) * ch + c) * spatial;
                double s = 0.0, s2 = 0.0;
#pragma omp simd reduction(+ : s, s2)
                for (long i = 0; i < static_cast<long>(spatial); ++i) {
                    const double v = row[i];
                    s += v;
                    s2 += v * v;
                }
                sum += s;
                sum_sq += s2;
            }
            mu = sum / static_cast<double>(per_channel);
            var = std::max(sum_sq / static_cast<double>(per_channel) - mu * mu, 0.0);
            rm[c] = momentum * rm[c] + (T(1) - momentum) * static_cast<T>(mu);
            rv[c] = momentum * rv[c] + (T(1) - momentum) * static_cast<T>(var);
        } else {
            mu = rm[c];
            var = rv[c];
        }
        const double inv_std = 1.0 / std::sqrt(var + static_cast<double>(eps));
        mean_save[c] = static_cast<T>(mu);
        inv_std_save[c] = static_cast<T>(inv_std);
        const T scale = static_cast<T>(inv_std * pg->value[c]);
        const T shift = static_cast<T>(pb->value[c] - mu * inv_std * pg->value[c]);
        for (int b = 0; b < n_batch; ++b) {
            const size_t base = (static_cast<size_t>(b) * ch + c) * spatial;
            const T* xrow = xv + base;
            T* yrow = yv + base;
#pragma omp simd
            for (long i = 0; i < static_cast<long>(spatial); ++i) {
                const T z = xrow[i] * scale + shift;
                yrow[i] = z > T(0) ? z : T(0);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Attention application and head

// out[n,c,f,t] = x[n,c,f,t] * a[n,t]
template <typename T>
TensorT<T> mul_time(const TensorT<T>& x, const TensorT<T>& a) {
    if (x.rank() != 4) throw ShapeError("mul_time: feature must be [N,C,F,T]");
    if (a.rank() != 2 || a.dim(0) != x.dim(0) || a.dim(1) != x.dim(3)) {
        throw ShapeError("mul_time: attention " + shape_str(a.shape()) +
                         " does not match feature time axis " + shape_str(x.shape()));
    }
    const int n_batch = x.dim(0), ch = x.dim(1), f_len = x.dim(2), t_len = x.dim(3);
    auto px = x.node();
    auto pa = a.node();
    auto out = make_op_node<T>(x.shape(), {px, pa}, [px, pa, n_batch, ch, f_len, t_len](Node<T>& n) {
        const T* dy = n.grad.data();
        if (px->requires_grad) {
            px->ensure_grad();
            T* dx = px->grad.data();
#pragma omp parallel for schedule(static) collapse(2) num_threads(worker_count()) \
    if (detail::parallel_worthwhile(n.size()))
            for (int b = 0; b < n_batch; ++b) {
                for (int c = 0; c < ch; ++c) {
                    const T* arow = pa->value.data() + static_cast<size_t>(b) * t_len;
                    for (int f = 0; f < f_len; ++f) {
                        const size_t base = ((static_cast<size_t>(b) * ch + c) * f_len + f) * t_len;
#pragma omp simd
                        for (int t = 0; t < t_len; ++t) dx[base + t] += dy[base + t] * arow[t];
                    }
                }
            }
        }
        if (pa->requires_grad) {
            pa->ensure_grad();
            T* da = pa->grad.data();
            const T* xv = px->value.data();
#pragma omp parallel for schedule(static) num_threads(worker_count()) \
    if (detail::parallel_worthwhile(n.size()))
            for (int b = 0; b < n_batch; ++b) {
                T* darow = da + static_cast<size_t>(b) * t_len;
                for (int c = 0; c < ch; ++c) {
                    for (int f = 0; f < f_len; ++f) {
                        const size_t base = ((static_cast<size_t>(b) * ch + c) * f_len + f) * t_len;
#pragma omp simd
                        for (int t = 0; t < t_len; ++t) darow[t] += dy[base + t] * xv[base + t];
                    }
                }
            }
        }
    });
    const T* xv = px->value.data();
    const T* av = pa->value.data();
    T* yv = out.data().data();
#pragma omp parallel for schedule(static) collapse(2) num_threads(worker_count()) \
    if (detail::parallel_worthwhile(out.size()))
    for (int b = 0; b < n_batch; ++b) {
        for (int c = 0; c < ch; ++c) {
            const T* arow = av + static_cast<size_t>(b) * t_len;
            for (int f = 0; f < f_len; ++f) {
                const size_t base = ((static_cast<size_t>(b) * ch + c) * f_len + f) * t_len;
#pragma omp simd
                for (int t = 0; t < t_len; ++t) yv[base + t] = xv[base + t] * arow[t];
            }
        }
    }
    return out;
}

// [N, D, T] -> [N, D], arithmetic mean over time.
template <typename T>
TensorT<T> mean_over_time(const TensorT<T>& x) {
    if (x.rank() != 3) throw ShapeError("mean_over_time: input must be [N,D,T]");
    const int n_batch = x.dim(0), d_len = x.dim(1), t_len = x.dim(2);
    auto px = x.node();
    auto out = make_op_node<T>({n_batch, d_len}, {px}, [px, n_batch, d_len, t_len](Node<T>& n) {
        if (!px->requires_grad) return;
        px->ensure_grad();
        const T inv = T(1) / static_cast<T>(t_len);
        for (int b = 0; b < n_batch; ++b) {
            for (int d = 0; d < d_len; ++d) {
                const T g = n.grad[static_cast<size_t>(b) * d_len + d] * inv;
                T* row = px->grad.data() + (static_cast<size_t>(b) * d_len + d) * t_len;
                for (int t = 0; t < t_len; ++t) row[t] += g;
            }
        }
    });
    for (int b = 0; b < n_batch; ++b) {
        for (int d = 0; d < d_len; ++d) {
            const T* row = px->value.data() + (static_cast<size_t>(b) * d_len + d) * t_len;
            double acc = 0.0;
            for (int t = 0; t < t_len; ++t) acc += row[t];
            out.data()[static_cast<size_t>(b) * d_len + d] = static_cast<T>(acc / t_len);
        }
    }
    return out;
}

// x: [N, D], w: [D, H], b: [H].
template <typename T>
TensorT<T> dense(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b) {
    if (x.rank() != 2 || w.rank() != 2 || b.rank() != 1) throw ShapeError("dense: expects [N,D], [D,H], [H]");
    const int n_batch = x.dim(0), d_len = x.dim(1), h_len = w.dim(1);
    if (w.dim(0) != d_len || b.dim(0) != h_len) throw ShapeError("dense: dimension mismatch");
    auto px = x.node();
    auto pw = w.node();
    auto pb = b.node();
    auto out = make_op_node<T>({n_batch, h_len}, {px, pw, pb}, [px, pw, pb, n_batch, d_len, h_len](Node<T>& n) {
        const T* dy = n.grad.data();
        if (px->requires_grad) {
            px->ensure_grad();
            for (int bi = 0; bi < n_batch; ++bi) {
                const T* gyrow = dy + static_cast<size_t>(bi) * h_len;
                T* dxrow = px->grad.data() + static_cast<size_t>(bi) * d_len;
                for (int d = 0; d < d_len; ++d) {
                    const T* wrow = pw->value.data() + static_cast<size_t>(d) * h_len;
                    double acc = 0.0;
#pragma omp simd reduction(+ : acc)
                    for (int h = 0; h < h_len; ++h)
                        acc += static_cast<double>(gyrow[h]) * static_cast<double>(wrow[h]);
                    dxrow[d] += static_cast<T>(acc);
                }
            }
        }
        if (pw->requires_grad) {
            pw->ensure_grad();
            for (int bi = 0; bi < n_batch; ++bi) {
                const T* gyrow = dy + static_cast<size_t>(bi) * h_len;
                const T* xrow = px->value.data() + static_cast<size_t>(bi) * d_len;
                for (int d = 0; d < d_len; ++d) {
                    T* dwrow = pw->grad.data() + static_cast<size_t>(d) * h_len;
                    const T xv = xrow[d];
#pragma omp simd
                    for (int h = 0; h < h_len; ++h) dwrow[h] += xv * gyrow[h];
                }
            }
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (int bi = 0; bi < n_batch; ++bi) {
                const T* gyrow = dy + static_cast<size_t>(bi) * h_len;
                for (int h = 0; h < h_len; ++h) pb->grad[h] += gyrow[h];
            }
        }
    });
    for (int bi = 0; bi < n_batch; ++bi) {
        const T* xrow = px->value.data() + static_cast<size_t>(bi) * d_len;
        T* yrow = out.data().data() + static_cast<size_t>(bi) * h_len;
        for (int h = 0; h < h_len; ++h) yrow[h] = pb->value[h];
        for (int d = 0; d < d_len; ++d) {
            const T xv = xrow[d];
            const T* wrow = pw->value.data() + static_cast<size_t>(d) * h_len;
#pragma omp simd
            for (int h = 0; h < h_len; ++h) yrow[h] += xv * wrow[h];
        }
    }
    return out;
}

// Row-wise softmax over the last axis of [N, K]. Max-shifted for stability.
template <typename T>
TensorT<T> softmax_rows(const TensorT<T>& x) {
    if (x.rank() != 2) throw ShapeError("softmax_rows: input must be [N,K]");
    const int n_batch = x.dim(0), k = x.dim(1);
    auto px = x.node();
    auto out = make_op_node<T>(x.shape(), {px}, [px, n_batch, k](Node<T>& n) {
        if (!px->requires_grad) return;
        px->ensure_grad();
        for (int b = 0; b < n_batch; ++b) {
            const T* y = n.value.data() + static_cast<size_t>(b) * k;
            const T* gy = n.grad.data() + static_cast<size_t>(b) * k;
            T* gx = px->grad.data() + static_cast<size_t>(b) * k;
            double dot = 0.0;
            for (int i = 0; i < k; ++i) dot += static_cast<double>(gy[i]) * y[i];
            for (int i = 0; i < k; ++i) gx[i] += y[i] * (gy[i] - static_cast<T>(dot));
        }
    });
    for (int b = 0; b < n_batch; ++b) {
        const T* xrow = px->value.data() + static_cast<size_t>(b) * k;
        T* yrow = out.data().data() + static_cast<size_t>(b) * k;
        T mx = xrow[0];
        for (int i = 1; i < k; ++i) mx = std::max(mx, xrow[i]);
        double sum = 0.0;
        for (int i = 0; i < k; ++i) {
            yrow[i] = std::exp(xrow[i] - mx);
            sum += yrow[i];
        }
        const T inv = static_cast<T>(1.0 / sum);
        for (int i = 0; i < k; ++i) yrow[i] *= inv;
    }
    return out;
}

// Mean absolute error over every element of pred vs target; the canonical
// loss for posterior-vs-distribution training. Subgradient at equal
// entries is zero.
template <typename T>
TensorT<T> mae_loss(const TensorT<T>& pred, const TensorT<T>& target) {
    if (pred.shape() != target.shape()) {
        throw ShapeError("mae_loss: shape mismatch " + shape_str(pred.shape()) + " vs " + shape_str(target.shape()));
    }
    auto pp = pred.node();
    auto pt = target.node();
    const size_t total = pred.size();
    auto out = make_op_node<T>({1}, {pp, pt}, [pp, pt, total](Node<T>& n) {
        const T g = n.grad[0] / static_cast<T>(total);
        if (pp->requires_grad) {
            pp->ensure_grad();
            for (size_t i = 0; i < total; ++i) {
                const T d = pp->value[i] - pt->value[i];
                pp->grad[i] += d > T(0) ? g : (d < T(0) ? -g : T(0));
            }
        }
        if (pt->requires_grad) {
            pt->ensure_grad();
            for (size_t i = 0; i < total; ++i) {
                const T d = pp->value[i] - pt->value[i];
                pt->grad[i] += d > T(0) ? -g : (d < T(0) ? g : T(0));
            }
        }
    });
    double acc = 0.0;
    for (size_t i = 0; i < total; ++i) acc += std::abs(static_cast<double>(pp->value[i]) - pt->value[i]);
    out.data()[0] = static_cast<T>(acc / static_cast<double>(total));
    return out;
}

template <typename T>
TensorT<T> sum_all(const TensorT<T>& x) {
    auto px = x.node();
    auto out = make_op_node<T>({1}, {px}, [px](Node<T>& n) {
        if (!px->requires_grad) return;
        px->ensure_grad();
        const T g = n.grad[0];
        for (auto& v : px->grad) v += g;
    });
    double acc = 0.0;
    for (const T v : px->value) acc += v;
    out.data()[0] = static_cast<T>(acc);
    return out;
}

} // namespace escnet::nn
