#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "escnet/core/errors.h"

namespace escnet {

// Iterative radix-2 Cooley-Tukey transform. All sizes used by the feature
// pipeline (32, 128, 1024) and the synthesizer are powers of two, so a
// general mixed-radix plan is not needed. Twiddles are generated in double
// regardless of the element type.
template <typename T>
void fft_inplace(std::vector<std::complex<T>>& a, bool inverse = false) {
    const size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0) {
        throw ArgumentError("fft size must be a nonzero power of two");
    }

    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }

    // explicit real/imag arithmetic; std::complex operator* lowers to a
    // NaN-checking libcall that dominates the runtime otherwise
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * 3.14159265358979323846 / static_cast<double>(len);
        const T wlen_re = static_cast<T>(std::cos(ang));
        const T wlen_im = static_cast<T>(std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            T w_re = T(1), w_im = T(0);
            for (size_t k = 0; k < len / 2; ++k) {
                const T u_re = a[i + k].real(), u_im = a[i + k].imag();
                const T x_re = a[i + k + len / 2].real(), x_im = a[i + k + len / 2].imag();
                const T v_re = x_re * w_re - x_im * w_im;
                const T v_im = x_re * w_im + x_im * w_re;
                a[i + k] = {u_re + v_re, u_im + v_im};
                a[i + k + len / 2] = {u_re - v_re, u_im - v_im};
                const T nw_re = w_re * wlen_re - w_im * wlen_im;
                w_im = w_re * wlen_im + w_im * wlen_re;
                w_re = nw_re;
            }
        }
    }

    if (inverse) {
        const T inv_n = T(1) / static_cast<T>(n);
        for (auto& x : a) x *= inv_n;
    }
}

// Magnitudes of the non-negative-frequency bins (n/2 + 1 values) of a real
// frame. The frame is copied into a scratch buffer supplied by the caller
// so per-frame calls do not allocate.
template <typename T>
void real_fft_magnitude(const T* frame, size_t n, std::vector<std::complex<T>>& scratch,
                        T* out_mag) {
    scratch.assign(n, std::complex<T>(T(0), T(0)));
    for (size_t i = 0; i < n; ++i) scratch[i] = std::complex<T>(frame[i], T(0));
    fft_inplace(scratch);
    for (size_t k = 0; k <= n / 2; ++k) {
        const T re = scratch[k].real(), im = scratch[k].imag();
        out_mag[k] = std::sqrt(re * re + im * im);
    }
}

} // namespace escnet
