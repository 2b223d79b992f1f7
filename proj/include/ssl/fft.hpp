#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

namespace ssl {

namespace detail {

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 Cooley-Tukey. Twiddles in double, data in T.
template <typename T>
void fft_pow2(std::vector<std::complex<T>>& a) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * M_PI / double(len);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1, 0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u(a[i + k].real(), a[i + k].imag());
                const std::complex<double> v =
                    std::complex<double>(a[i + k + len / 2].real(), a[i + k + len / 2].imag()) * w;
                a[i + k] = std::complex<T>(T((u + v).real()), T((u + v).imag()));
                a[i + k + len / 2] = std::complex<T>(T((u - v).real()), T((u - v).imag()));
                w *= wlen;
            }
        }
    }
}

} // namespace detail

// Forward transform of a real frame; returns the half spectrum,
// bins 0..n/2 inclusive (n/2+1 values). Power-of-two lengths go through
// the fast path, anything else through the direct sum.
template <typename T>
std::vector<std::complex<T>> real_dft_half(const std::vector<T>& x) {
    const std::size_t n = x.size();
    const std::size_t half = n / 2 + 1;
    std::vector<std::complex<T>> out(half);
    if (detail::is_pow2(n)) {
        std::vector<std::complex<T>> a(n);
        for (std::size_t i = 0; i < n; ++i) a[i] = std::complex<T>(x[i], 0);
        detail::fft_pow2(a);
        for (std::size_t k = 0; k < half; ++k) out[k] = a[k];
        return out;
    }
    for (std::size_t k = 0; k < half; ++k) {
        double re = 0, im = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double ang = -2.0 * M_PI * double(k) * double(i) / double(n);
            re += double(x[i]) * std::cos(ang);
            im += double(x[i]) * std::sin(ang);
        }
        out[k] = std::complex<T>(T(re), T(im));
    }
    return out;
}

} // namespace ssl
