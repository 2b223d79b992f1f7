#include "ssl/eig.hpp"

#include "ssl/types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ssl {

std::vector<double> hermitian_eigenvalues(const CMatrix<double>& input, CMatrix<double>* vectors) {
    if (input.rows != input.cols) throw ValidationError("eigendecomposition needs a square matrix");
    const std::size_t n = input.rows;
    CMatrix<double> a = input;
    CMatrix<double> v = CMatrix<double>::identity(n);

    double scale = 0;
    for (const auto& z : a.data) scale = std::max(scale, std::abs(z));
    const double stop = 1e-14 * (scale > 0 ? scale : 1.0);

    for (int sweep = 0; sweep < 60; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const cdouble apq = a(p, q);
                const double mag = std::abs(apq);
                if (mag <= stop) continue;
                rotated = true;

                // phase e^{i phi} of the off-diagonal entry, then a real
                // Jacobi rotation on the phase-aligned 2x2 block
                const cdouble ph = apq / mag;
                const double app = a(p, p).real();
                const double aqq = a(q, q).real();
                const double tau = (aqq - app) / (2.0 * mag);
                const double t = (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;

                // J has columns (p,q): J(p,p)=c, J(q,p)=-s*conj(ph), J(p,q)=s*ph, J(q,q)=c
                // update A <- J^H A J column pair first, then row pair
                for (std::size_t i = 0; i < n; ++i) {
                    const cdouble aip = a(i, p);
                    const cdouble aiq = a(i, q);
                    a(i, p) = c * aip - s * std::conj(ph) * aiq;
                    a(i, q) = s * ph * aip + c * aiq;
                }
                for (std::size_t j = 0; j < n; ++j) {
                    const cdouble apj = a(p, j);
                    const cdouble aqj = a(q, j);
                    a(p, j) = c * apj - s * ph * aqj;
                    a(q, j) = s * std::conj(ph) * apj + c * aqj;
                }
                // keep the diagonal exactly real against round-off drift
                a(p, p) = cdouble(a(p, p).real(), 0);
                a(q, q) = cdouble(a(q, q).real(), 0);
                for (std::size_t i = 0; i < n; ++i) {
                    const cdouble vip = v(i, p);
                    const cdouble viq = v(i, q);
                    v(i, p) = c * vip - s * std::conj(ph) * viq;
                    v(i, q) = s * ph * vip + c * viq;
                }
            }
        }
        if (!rotated) break;
    }

    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) values[i] = a(i, i).real();

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t(0));
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return values[x] > values[y]; });

    std::vector<double> sorted(n);
    for (std::size_t i = 0; i < n; ++i) sorted[i] = values[order[i]];
    if (vectors) {
        *vectors = CMatrix<double>(n, n);
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t i = 0; i < n; ++i) (*vectors)(i, j) = v(i, order[j]);
    }
    return sorted;
}

} // namespace ssl
