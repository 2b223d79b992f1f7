#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

namespace ssl {

// Dense complex matrix, row major. Small and unclever on purpose: the
// solvers below index it hard and the compiler does the rest.
template <typename T>
struct CMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::complex<T>> data;

    CMatrix() = default;
    CMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c) {}

    std::complex<T>& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    const std::complex<T>& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    static CMatrix identity(std::size_t n) {
        CMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = std::complex<T>(1, 0);
        return m;
    }
};

template <typename T>
CMatrix<T> matmul(const CMatrix<T>& a, const CMatrix<T>& b) {
    CMatrix<T> c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t k = 0; k < a.cols; ++k) {
            const std::complex<T> aik = a(i, k);
            if (aik == std::complex<T>(0, 0)) continue;
            const std::complex<T>* brow = &b.data[k * b.cols];
            std::complex<T>* crow = &c.data[i * c.cols];
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

template <typename T>
CMatrix<T> adjoint(const CMatrix<T>& a) {
    CMatrix<T> c(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) c(j, i) = std::conj(a(i, j));
    return c;
}

template <typename T>
T frobenius_norm(const CMatrix<T>& a) {
    double s = 0;
    for (const auto& z : a.data) s += double(z.real()) * z.real() + double(z.imag()) * z.imag();
    return T(std::sqrt(s));
}

template <typename T>
CMatrix<T> subtract(const CMatrix<T>& a, const CMatrix<T>& b) {
    CMatrix<T> c(a.rows, a.cols);
    for (std::size_t i = 0; i < a.data.size(); ++i) c.data[i] = a.data[i] - b.data[i];
    return c;
}

template <typename To, typename From>
CMatrix<To> convert(const CMatrix<From>& a) {
    CMatrix<To> c(a.rows, a.cols);
    for (std::size_t i = 0; i < a.data.size(); ++i)
        c.data[i] = std::complex<To>(To(a.data[i].real()), To(a.data[i].imag()));
    return c;
}

} // namespace ssl
