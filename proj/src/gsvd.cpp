#include "ssl/gsvd.hpp"

#include "ssl/eig.hpp"
#include "ssl/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ssl {

void SolverConfig::validate() const {
    if (!(tolerance_scale > 0)) throw ValidationError("tolerance_scale must be positive");
}

// ---------------------------------------------------------------------------
// inverse by Gaussian elimination on the augmented system
// ---------------------------------------------------------------------------

template <typename T>
CMatrix<T> mat_inverse(const CMatrix<T>& k, Pivoting pivoting, std::size_t bin_label) {
    if (k.rows != k.cols) throw ValidationError("mat_inverse needs a square matrix");
    const std::size_t n = k.rows;
    CMatrix<T> a = k;
    CMatrix<T> inv = CMatrix<T>::identity(n);

    T scale = 0;
    for (const auto& z : a.data) scale = std::max(scale, T(std::abs(z)));
    const T pivot_floor = scale * std::numeric_limits<T>::epsilon() * T(n);

    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        if (pivoting == Pivoting::partial) {
            for (std::size_t row = col + 1; row < n; ++row)
                if (std::abs(a(row, col)) > std::abs(a(pivot, col))) pivot = row;
        }
        if (!(std::abs(a(pivot, col)) > pivot_floor))
            throw NumericalError("noise matrix is singular at bin " + std::to_string(bin_label));
        if (pivot != col) {
            for (std::size_t j = 0; j < n; ++j) {
                std::swap(a(col, j), a(pivot, j));
                std::swap(inv(col, j), inv(pivot, j));
            }
        }
        const std::complex<T> d = std::complex<T>(1, 0) / a(col, col);
        for (std::size_t j = 0; j < n; ++j) {
            a(col, j) *= d;
            inv(col, j) *= d;
        }
        for (std::size_t row = 0; row < n; ++row) {
            if (row == col) continue;
            const std::complex<T> f = a(row, col);
            if (f == std::complex<T>(0, 0)) continue;
            for (std::size_t j = 0; j < n; ++j) {
                a(row, j) -= f * a(col, j);
                inv(row, j) -= f * inv(col, j);
            }
        }
    }
    return inv;
}

// ---------------------------------------------------------------------------
// Householder bidiagonalization with phase cleanup
// ---------------------------------------------------------------------------

namespace {

template <typename T>
std::complex<T> unit_phase(const std::complex<T>& z) {
    const T m = std::abs(z);
    return m > 0 ? z / m : std::complex<T>(1, 0);
}

// reflector applied from the left to rows [row0, n) of m, all columns:
// m <- m - tau * v * (v^H m)
template <typename T>
void reflect_rows(CMatrix<T>& m, std::size_t row0, const std::vector<std::complex<T>>& v, T tau) {
    const std::size_t n = m.rows;
    const std::size_t cols = m.cols;
    std::vector<std::complex<T>> w(cols, std::complex<T>(0, 0));
    for (std::size_t i = row0; i < n; ++i) {
        const std::complex<T> vi = std::conj(v[i - row0]);
        const std::complex<T>* row = &m.data[i * cols];
        for (std::size_t j = 0; j < cols; ++j) w[j] += vi * row[j];
    }
    for (std::size_t i = row0; i < n; ++i) {
        const std::complex<T> tv = tau * v[i - row0];
        std::complex<T>* row = &m.data[i * cols];
        for (std::size_t j = 0; j < cols; ++j) row[j] -= tv * w[j];
    }
}

// reflector applied from the right to columns [col0, n) of m, rows [row0, n):
// m <- m - tau * (m v) * v^H
template <typename T>
void reflect_cols(CMatrix<T>& m, std::size_t row0, std::size_t col0,
                  const std::vector<std::complex<T>>& v, T tau) {
    const std::size_t n = m.rows;
    const std::size_t cols = m.cols;
    for (std::size_t i = row0; i < n; ++i) {
        std::complex<T>* row = &m.data[i * cols];
        std::complex<T> u(0, 0);
        for (std::size_t j = col0; j < cols; ++j) u += row[j] * v[j - col0];
        u *= tau;
        for (std::size_t j = col0; j < cols; ++j) row[j] -= u * std::conj(v[j - col0]);
    }
}

} // namespace

template <typename T>
Bidiagonal<T> bidiagonalize(const CMatrix<T>& input) {
    if (input.rows != input.cols) throw ValidationError("bidiagonalize needs a square matrix");
    const std::size_t n = input.rows;
    CMatrix<T> a = input;
    CMatrix<T> left = CMatrix<T>::identity(n);
    CMatrix<T> right_h = CMatrix<T>::identity(n);
    std::vector<std::complex<T>> v;

    for (std::size_t p = 0; p < n; ++p) {
        // eliminate below the diagonal in column p
        T norm2 = 0;
        for (std::size_t i = p; i < n; ++i) norm2 += std::norm(a(i, p));
        const T sigma = std::sqrt(norm2);
        if (sigma > 0 && p + 1 < n) {
            const std::complex<T> x0 = a(p, p);
            const std::complex<T> ph = unit_phase(x0);
            const T tau = T(1) / (sigma * (sigma + std::abs(x0)));
            v.assign(n - p, std::complex<T>(0, 0));
            v[0] = x0 + ph * sigma;
            for (std::size_t i = p + 1; i < n; ++i) v[i - p] = a(i, p);
            reflect_rows(a, p, v, tau);
            reflect_rows(left, p, v, tau);
            // the reflector maps the column to a single entry; write it
            // exactly rather than keeping the rounded zeros
            a(p, p) = -ph * sigma;
            for (std::size_t i = p + 1; i < n; ++i) a(i, p) = std::complex<T>(0, 0);
        }
        // eliminate right of the superdiagonal in row p
        if (p + 2 < n) {
            T rnorm2 = 0;
            for (std::size_t j = p + 1; j < n; ++j) rnorm2 += std::norm(a(p, j));
            const T rsigma = std::sqrt(rnorm2);
            if (rsigma > 0) {
                const std::complex<T> r0 = a(p, p + 1);
                const std::complex<T> ph = unit_phase(r0);
                const T tau = T(1) / (rsigma * (rsigma + std::abs(r0)));
                v.assign(n - p - 1, std::complex<T>(0, 0));
                v[0] = std::conj(r0) + std::conj(ph) * rsigma;
                for (std::size_t j = p + 2; j < n; ++j) v[j - p - 1] = std::conj(a(p, j));
                reflect_cols(a, p, p + 1, v, tau);
                reflect_rows(right_h, p + 1, v, tau);
                a(p, p + 1) = -ph * rsigma;
                for (std::size_t j = p + 2; j < n; ++j) a(p, j) = std::complex<T>(0, 0);
            }
        }
    }

    // absorb the remaining unit phases into the accumulated factors so the
    // bidiagonal entries are real and non-negative
    Bidiagonal<T> out;
    out.diag.assign(n, T(0));
    out.super.assign(n, T(0));
    std::complex<T> dr(1, 0); // right phase applied to the current column
    for (std::size_t j = 0; j < n; ++j) {
        const std::complex<T> bd = a(j, j) * dr;
        const std::complex<T> dl = std::conj(unit_phase(bd));
        out.diag[j] = std::abs(bd);
        std::complex<T> next_dr(1, 0);
        if (j + 1 < n) {
            const std::complex<T> bs = dl * a(j, j + 1);
            next_dr = std::conj(unit_phase(bs));
            out.super[j + 1] = std::abs(bs);
        }
        for (std::size_t c = 0; c < n; ++c) left(j, c) *= dl;
        for (std::size_t c = 0; c < n; ++c) right_h(j, c) *= std::conj(dr);
        dr = next_dr;
    }
    out.left = std::move(left);
    out.right_h = std::move(right_h);
    return out;
}

template <typename T>
T compute_tolerance(const Bidiagonal<T>& b, T scale) {
    T worst = 0;
    for (std::size_t j = 0; j < b.diag.size(); ++j)
        worst = std::max(worst, std::abs(b.diag[j]) + std::abs(b.super[j]));
    return scale * std::numeric_limits<T>::epsilon() * worst;
}

// ---------------------------------------------------------------------------
// implicit-shift QR on the real bidiagonal, rotations folded into row
// accumulators
// ---------------------------------------------------------------------------

namespace {

template <typename T>
inline void rotate_rows(CMatrix<T>& m, std::size_t r1, std::size_t r2, T c, T s) {
    std::complex<T>* a = &m.data[r1 * m.cols];
    std::complex<T>* b = &m.data[r2 * m.cols];
    for (std::size_t j = 0; j < m.cols; ++j) {
        const std::complex<T> x = a[j];
        const std::complex<T> y = b[j];
        a[j] = c * x + s * y;
        b[j] = c * y - s * x;
    }
}

template <typename T>
inline T sign_copy(T magnitude, T sign_from) {
    return sign_from >= 0 ? std::abs(magnitude) : -std::abs(magnitude);
}

} // namespace

template <typename T>
QrOutcome qr_iterate(std::vector<T>& d, std::vector<T>& sup, CMatrix<T>& e_acc,
                     CMatrix<T>& er_acc, T eps, std::uint32_t max_sweeps) {
    const std::size_t n = d.size();
    QrOutcome out;
    if (n == 0) return out;
    std::uint32_t passes = 0;
    const std::uint32_t pass_cap = max_sweeps * 4 + 64;

    for (std::size_t k = n; k-- > 0;) {
        for (;;) {
            if (++passes > pass_cap) {
                out.converged = false;
                return out;
            }
            // look for a place to split the active block [l, k]
            std::size_t l = k;
            bool needs_cancel = false;
            for (;; --l) {
                if (std::abs(sup[l]) <= eps) break; // sup[0] == 0 catches l == 0
                if (std::abs(d[l - 1]) <= eps) {
                    needs_cancel = true;
                    break;
                }
            }
            if (needs_cancel) {
                // d[l-1] vanished: rotate sup[l..k] away against row l-1
                T c = 0, s = 1;
                const std::size_t nm = l - 1;
                for (std::size_t i = l; i <= k; ++i) {
                    const T f = s * sup[i];
                    sup[i] = c * sup[i];
                    if (std::abs(f) <= eps) break;
                    const T g = d[i];
                    const T h = std::hypot(f, g);
                    d[i] = h;
                    const T inv = T(1) / h;
                    c = g * inv;
                    s = -f * inv;
                    rotate_rows(e_acc, nm, i, c, s);
                }
            }
            T z = d[k];
            if (l == k) {
                if (z < 0) {
                    d[k] = -z;
                    std::complex<T>* row = &er_acc.data[k * er_acc.cols];
                    for (std::size_t j = 0; j < er_acc.cols; ++j) row[j] = -row[j];
                }
                break;
            }
            if (out.iterations >= max_sweeps) {
                out.converged = false;
                return out;
            }

            // shift from the trailing 2x2, then chase the bulge down
            T x = d[l];
            const std::size_t nm = k - 1;
            T y = d[nm];
            T g = sup[nm];
            T h = sup[k];
            const T denom = 2 * h * y;
            T f = denom != 0 ? ((y - z) * (y + z) + (g - h) * (g + h)) / denom : T(0);
            g = std::hypot(f, T(1));
            f = x != 0 ? ((x - z) * (x + z) + h * (y / (f + sign_copy(g, f)) - h)) / x : T(0);
            T c = 1, s = 1;
            for (std::size_t j = l; j <= nm; ++j) {
                const std::size_t i = j + 1;
                g = sup[i];
                y = d[i];
                h = s * g;
                g = c * g;
                z = std::hypot(f, h);
                sup[j] = z;
                if (z != 0) {
                    c = f / z;
                    s = h / z;
                } else {
                    c = 1;
                    s = 0;
                }
                f = x * c + g * s;
                g = g * c - x * s;
                h = y * s;
                y *= c;
                rotate_rows(er_acc, j, i, c, s);
                z = std::hypot(f, h);
                d[j] = z;
                if (z != 0) {
                    const T inv = T(1) / z;
                    c = f * inv;
                    s = h * inv;
                }
                f = c * g + s * y;
                x = c * y - s * g;
                rotate_rows(e_acc, j, i, c, s);
            }
            sup[l] = 0;
            sup[k] = f;
            d[k] = x;
            ++out.iterations;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// ordering and the final factor assembly
// ---------------------------------------------------------------------------

template <typename T>
std::vector<std::size_t> descending_permutation(const std::vector<T>& values) {
    std::vector<std::size_t> perm(values.size());
    std::iota(perm.begin(), perm.end(), std::size_t(0));
    std::stable_sort(perm.begin(), perm.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    return perm;
}

template <typename T>
void permute_rows(CMatrix<T>& m, const std::vector<std::size_t>& perm) {
    CMatrix<T> out(m.rows, m.cols);
    for (std::size_t i = 0; i < m.rows; ++i)
        std::copy_n(&m.data[perm[i] * m.cols], m.cols, &out.data[i * m.cols]);
    m = std::move(out);
}

template <typename T>
void permute_columns(CMatrix<T>& m, const std::vector<std::size_t>& perm) {
    CMatrix<T> out(m.rows, m.cols);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) out(i, j) = m(i, perm[j]);
    m = std::move(out);
}

template <typename T>
void sort_descending(std::vector<T>& values, CMatrix<T>& e, CMatrix<T>& e_r) {
    const auto perm = descending_permutation(values);
    std::vector<T> sorted(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) sorted[i] = values[perm[i]];
    values = std::move(sorted);
    permute_columns(e, perm);
    permute_rows(e_r, perm);
}

template <typename T>
void back_transform(const Bidiagonal<T>& factors, const CMatrix<T>& e_acc,
                    const CMatrix<T>& er_acc, CMatrix<T>& e_out, CMatrix<T>& er_out) {
    e_out = adjoint(matmul(e_acc, factors.left));
    er_out = matmul(er_acc, factors.right_h);
}

// ---------------------------------------------------------------------------
// deterministic bases for degenerate singular value groups
// ---------------------------------------------------------------------------

namespace {

// values closer than this (relative to the largest) are treated as tied;
// values below this fraction of the largest are treated as zero
constexpr double kDegenerateGap = 1e-5;

double col_dot_norm2(const CMatrix<double>& m, std::size_t col) {
    double s = 0;
    for (std::size_t i = 0; i < m.rows; ++i) s += std::norm(m(i, col));
    return s;
}

void subtract_projections(std::vector<cdouble>& c, const CMatrix<double>& basis,
                          std::size_t basis_cols) {
    for (std::size_t k = 0; k < basis_cols; ++k) {
        cdouble dot(0, 0);
        for (std::size_t i = 0; i < c.size(); ++i) dot += std::conj(basis(i, k)) * c[i];
        for (std::size_t i = 0; i < c.size(); ++i) c[i] -= dot * basis(i, k);
    }
}

// Orthonormal set of `need` vectors built from candidates visited in fixed
// index order, orthogonalized against `exclude` (if any) and against the
// vectors already taken. Candidates that collapse under projection are
// passed over; relaxation passes guarantee completion. The fixed visiting
// order is what makes two independent runs agree: there is no data-dependent
// pivot choice that round-off could flip.
template <typename MakeFn>
CMatrix<double> pick_orthonormal(std::size_t n, std::size_t need, const CMatrix<double>* exclude,
                                 MakeFn&& make) {
    CMatrix<double> out(n, need);
    std::size_t taken = 0;
    std::vector<char> used(n, 0);
    std::vector<cdouble> c(n);
    const double thresholds[3] = {0.05, 1e-8, 0.0};
    for (double threshold : thresholds) {
        for (std::size_t j = 0; j < n && taken < need; ++j) {
            if (used[j]) continue;
            make(j, c);
            double norm0 = 0;
            for (const auto& zc : c) norm0 += std::norm(zc);
            norm0 = std::sqrt(norm0);
            if (!(norm0 > 1e-140)) continue;
            for (int pass = 0; pass < 2; ++pass) {
                if (exclude) subtract_projections(c, *exclude, exclude->cols);
                subtract_projections(c, out, taken);
            }
            double nrm = 0;
            for (const auto& zc : c) nrm += std::norm(zc);
            nrm = std::sqrt(nrm);
            if (!(nrm > threshold * norm0) || !(nrm > 0)) continue;
            const double inv = 1.0 / nrm;
            for (std::size_t i = 0; i < n; ++i) out(i, taken) = c[i] * inv;
            used[j] = 1;
            ++taken;
        }
        if (taken == need) break;
    }
    return out;
}

// One step of subspace iteration with A A^H sharpens the span of the kept
// left vectors before the complement is built against it.
CMatrix<double> refine_leading(const CMatrix<double>& a, const CMatrix<double>& lead) {
    CMatrix<double> s = matmul(a, matmul(adjoint(a), lead));
    for (std::size_t j = 0; j < s.cols; ++j) {
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t k = 0; k < j; ++k) {
                cdouble dot(0, 0);
                for (std::size_t i = 0; i < s.rows; ++i) dot += std::conj(s(i, k)) * s(i, j);
                for (std::size_t i = 0; i < s.rows; ++i) s(i, j) -= dot * s(i, k);
            }
        }
        double nrm = std::sqrt(col_dot_norm2(s, j));
        if (!(nrm > 1e-200)) {
            // refinement collapsed this direction; keep the original vector
            for (std::size_t i = 0; i < s.rows; ++i) s(i, j) = lead(i, j);
            for (std::size_t k = 0; k < j; ++k) {
                cdouble dot(0, 0);
                for (std::size_t i = 0; i < s.rows; ++i) dot += std::conj(s(i, k)) * s(i, j);
                for (std::size_t i = 0; i < s.rows; ++i) s(i, j) -= dot * s(i, k);
            }
            nrm = std::sqrt(col_dot_norm2(s, j));
            if (!(nrm > 0)) continue;
        }
        const double inv = 1.0 / nrm;
        for (std::size_t i = 0; i < s.rows; ++i) s(i, j) *= inv;
    }
    return s;
}

} // namespace

template <typename T>
void canonicalize_subspaces(const CMatrix<T>& a, std::vector<T>& values, CMatrix<T>& e,
                            CMatrix<T>& e_r) {
    const std::size_t n = values.size();
    if (n == 0 || e.rows != n || e.cols != n || e_r.rows != n) return;
    const double smax = values[0] > 0 ? double(values[0]) : 0.0;

    // trailing block of vanishing values: replace its basis with the
    // canonical complement of the kept span
    std::size_t z = 0;
    while (z < n && double(values[n - 1 - z]) <= kDegenerateGap * smax) ++z;
    if (z > 0) {
        const std::size_t lead = n - z;
        CMatrix<double> basis(n, lead);
        if (lead > 0) {
            CMatrix<double> v(n, lead);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < lead; ++j)
                    v(i, j) = cdouble(e(i, j).real(), e(i, j).imag());
            basis = refine_leading(convert<double>(a), v);
        }
        const CMatrix<double> comp =
            pick_orthonormal(n, z, lead > 0 ? &basis : nullptr,
                             [](std::size_t j, std::vector<cdouble>& c) {
                                 std::fill(c.begin(), c.end(), cdouble(0, 0));
                                 c[j] = cdouble(1, 0);
                             });
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < z; ++j)
                e(i, lead + j) = std::complex<T>(T(comp(i, j).real()), T(comp(i, j).imag()));
    }

    // runs of tied nonzero values: rebuild each group's basis from fixed
    // projections and rotate the matching right-factor rows along, which
    // keeps the product E diag E_r intact up to the group's value spread
    const std::size_t lead_end = n - z;
    for (std::size_t i = 0; i < lead_end;) {
        std::size_t end = i;
        while (end + 1 < lead_end &&
               double(values[end]) - double(values[end + 1]) <= kDegenerateGap * smax)
            ++end;
        if (end > i) {
            const std::size_t kdim = end - i + 1;
            CMatrix<double> cgroup(n, kdim);
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t j = 0; j < kdim; ++j)
                    cgroup(r, j) = cdouble(e(r, i + j).real(), e(r, i + j).imag());
            const CMatrix<double> b = pick_orthonormal(
                n, kdim, nullptr, [&](std::size_t j, std::vector<cdouble>& c) {
                    // candidate = projector of the group applied to delta_j
                    for (std::size_t r = 0; r < n; ++r) {
                        cdouble acc(0, 0);
                        for (std::size_t kk = 0; kk < kdim; ++kk)
                            acc += cgroup(r, kk) * std::conj(cgroup(j, kk));
                        c[r] = acc;
                    }
                });
            const CMatrix<double> w = matmul(adjoint(cgroup), b); // kdim x kdim
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t j = 0; j < kdim; ++j)
                    e(r, i + j) = std::complex<T>(T(b(r, j).real()), T(b(r, j).imag()));
            // rows <- W^H rows
            CMatrix<double> rows(kdim, e_r.cols);
            for (std::size_t j = 0; j < kdim; ++j)
                for (std::size_t ccol = 0; ccol < e_r.cols; ++ccol)
                    rows(j, ccol) = cdouble(e_r(i + j, ccol).real(), e_r(i + j, ccol).imag());
            const CMatrix<double> mixed = matmul(adjoint(w), rows);
            for (std::size_t j = 0; j < kdim; ++j)
                for (std::size_t ccol = 0; ccol < e_r.cols; ++ccol)
                    e_r(i + j, ccol) =
                        std::complex<T>(T(mixed(j, ccol).real()), T(mixed(j, ccol).imag()));
        }
        i = end + 1;
    }

    // phase: make the largest entry of each left vector real positive,
    // compensating in the right factor so the product is unchanged
    for (std::size_t jcol = 0; jcol < n; ++jcol) {
        std::size_t pivot = 0;
        double best = -1;
        for (std::size_t i = 0; i < n; ++i) {
            const double m = std::abs(cdouble(e(i, jcol).real(), e(i, jcol).imag()));
            if (m > best) {
                best = m;
                pivot = i;
            }
        }
        if (!(best > 0)) continue;
        const cdouble val(e(pivot, jcol).real(), e(pivot, jcol).imag());
        const cdouble ph = val / std::abs(val);
        const std::complex<T> down(T(ph.real()), T(ph.imag()));
        const std::complex<T> up = std::conj(down);
        for (std::size_t i = 0; i < n; ++i) e(i, jcol) *= up;
        for (std::size_t ccol = 0; ccol < e_r.cols; ++ccol) e_r(jcol, ccol) *= down;
    }
}

// ---------------------------------------------------------------------------
// composed solves
// ---------------------------------------------------------------------------

namespace {

template <typename T>
T reconstruction_residual(const CMatrix<T>& a, const std::vector<T>& values, const CMatrix<T>& e,
                          const CMatrix<T>& e_r) {
    const std::size_t n = a.rows;
    CMatrix<T> scaled = e;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) scaled(i, j) *= values[j];
    const CMatrix<T> recon = matmul(scaled, e_r);
    const T ref = frobenius_norm(a);
    const T err = frobenius_norm(subtract(a, recon));
    if (ref > 0) return err / ref;
    return err;
}

} // namespace

template <typename T>
GsvdBinResult<T> gsvd_matrix(const CMatrix<T>& kinv, const CMatrix<T>& r,
                             const SolverConfig& cfg) {
    cfg.validate();
    if (kinv.rows != r.rows || kinv.cols != r.cols || r.rows != r.cols)
        throw ValidationError("gsvd_matrix dimension mismatch");
    const std::size_t n = r.rows;
    const CMatrix<T> a = matmul(kinv, r);

    GsvdBinResult<T> out;
    Bidiagonal<T> bd = bidiagonalize(a);
    const T eps = compute_tolerance(bd, T(cfg.tolerance_scale));
    CMatrix<T> e_acc = CMatrix<T>::identity(n);
    CMatrix<T> er_acc = CMatrix<T>::identity(n);
    const std::uint32_t budget =
        cfg.max_qr_sweeps ? cfg.max_qr_sweeps : 30u * std::uint32_t(n);
    const QrOutcome qr = qr_iterate(bd.diag, bd.super, e_acc, er_acc, eps, budget);
    out.iterations = qr.iterations;
    out.converged = qr.converged;

    const auto perm = descending_permutation(bd.diag);
    out.singular_values.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.singular_values[i] = bd.diag[perm[i]];
    permute_rows(e_acc, perm);
    permute_rows(er_acc, perm);
    back_transform(bd, e_acc, er_acc, out.e, out.e_r);
    if (cfg.canonical_subspaces && out.converged)
        canonicalize_subspaces(a, out.singular_values, out.e, out.e_r);
    if (cfg.compute_residual)
        out.recon_residual = reconstruction_residual(a, out.singular_values, out.e, out.e_r);
    return out;
}

JacobiSvdResult jacobi_svd(const CMatrix<double>& a) {
    if (a.rows != a.cols) throw ValidationError("jacobi_svd needs a square matrix");
    const std::size_t n = a.rows;
    JacobiSvdResult out;
    CMatrix<double> w = a;
    CMatrix<double> v = CMatrix<double>::identity(n);

    std::vector<double> cn(n);
    out.converged = false;
    for (std::uint32_t sweep = 0; sweep < 60 && !out.converged; ++sweep) {
        out.sweeps = sweep + 1;
        double cn_max = 0;
        for (std::size_t j = 0; j < n; ++j) {
            cn[j] = col_dot_norm2(w, j);
            cn_max = std::max(cn_max, cn[j]);
        }
        // columns this far below the dominant one carry no information worth
        // rotating; their vectors are rebuilt deterministically afterwards
        const double drop = 1e-20 * cn_max;
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (cn[p] <= drop || cn[q] <= drop) continue;
                cdouble apq(0, 0);
                for (std::size_t i = 0; i < n; ++i) apq += std::conj(w(i, p)) * w(i, q);
                const double mag = std::abs(apq);
                if (mag * mag <= 1e-28 * cn[p] * cn[q]) continue;
                rotated = true;
                const cdouble ph = apq / mag;
                const double tau = (cn[q] - cn[p]) / (2.0 * mag);
                const double t =
                    (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                const cdouble phc = std::conj(ph);
                for (std::size_t i = 0; i < n; ++i) {
                    const cdouble wp = w(i, p);
                    const cdouble wq = w(i, q);
                    w(i, p) = c * wp - s * phc * wq;
                    w(i, q) = s * wp + c * phc * wq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const cdouble vp = v(i, p);
                    const cdouble vq = v(i, q);
                    v(i, p) = c * vp - s * phc * vq;
                    v(i, q) = s * vp + c * phc * vq;
                }
                const double old_p = cn[p];
                cn[p] = c * c * old_p - 2.0 * c * s * mag + s * s * cn[q];
                cn[q] = s * s * old_p + 2.0 * c * s * mag + c * c * cn[q];
            }
        }
        if (!rotated) out.converged = true;
    }

    out.singular_values.resize(n);
    out.u = CMatrix<double>(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        const double nrm = std::sqrt(col_dot_norm2(w, j));
        out.singular_values[j] = nrm;
        if (nrm > 0) {
            const double inv = 1.0 / nrm;
            for (std::size_t i = 0; i < n; ++i) out.u(i, j) = w(i, j) * inv;
        }
    }
    const auto perm = descending_permutation(out.singular_values);
    std::vector<double> sorted(n);
    for (std::size_t i = 0; i < n; ++i) sorted[i] = out.singular_values[perm[i]];
    out.singular_values = std::move(sorted);
    permute_columns(out.u, perm);
    out.v_h = adjoint(v);
    permute_rows(out.v_h, perm);
    return out;
}

GsvdBinResult<double> gsvd_reference_matrix(const CMatrix<double>& kinv, const CMatrix<double>& r,
                                            const SolverConfig& cfg) {
    cfg.validate();
    if (kinv.rows != r.rows || kinv.cols != r.cols || r.rows != r.cols)
        throw ValidationError("gsvd_reference_matrix dimension mismatch");
    const CMatrix<double> a = matmul(kinv, r);
    const JacobiSvdResult jac = jacobi_svd(a);

    GsvdBinResult<double> out;
    out.singular_values = jac.singular_values;
    out.e = jac.u;
    out.e_r = jac.v_h;
    out.iterations = jac.sweeps;
    out.converged = jac.converged;
    if (cfg.canonical_subspaces)
        canonicalize_subspaces(a, out.singular_values, out.e, out.e_r);
    if (cfg.compute_residual)
        out.recon_residual = reconstruction_residual(a, out.singular_values, out.e, out.e_r);
    return out;
}

// ---------------------------------------------------------------------------
// noise model
// ---------------------------------------------------------------------------

NoiseModel NoiseModel::identity(std::uint32_t m, std::size_t bins) {
    NoiseModel n;
    n.k.m = m;
    n.k.bins.assign(bins, CMatrix<float>::identity(m));
    return n;
}

NoiseModel NoiseModel::from_file(const std::string& path) {
    NoiseModel n;
    n.k = load_correlation(path);
    n.check_positive_definite();
    return n;
}

void NoiseModel::check_positive_definite() const {
    k.validate();
    for (std::size_t b = 0; b < k.bins.size(); ++b) {
        const auto& kb = k.bins[b];
        double scale = 0, herm = 0;
        for (std::size_t i = 0; i < kb.rows; ++i)
            for (std::size_t j = 0; j < kb.cols; ++j) {
                scale = std::max(scale, double(std::abs(kb(i, j))));
                herm = std::max(herm, double(std::abs(kb(i, j) - std::conj(kb(j, i)))));
            }
        if (herm > 1e-5 * scale + 1e-30)
            throw NumericalError("noise model is not Hermitian at bin " + std::to_string(b));
        const auto eig = hermitian_eigenvalues(convert<double>(kb));
        if (eig.empty() || !(eig.back() > 0))
            throw NumericalError("noise model is not positive definite at bin " +
                                 std::to_string(b) + " (min eigenvalue " +
                                 std::to_string(eig.empty() ? 0.0 : eig.back()) + ")");
    }
}

void NoiseModel::prepare_inverses(Pivoting pivoting) const {
    if (prepared_ && prepared_pivoting_ == pivoting) return;
    inv_f_.clear();
    inv_d_.clear();
    inv_f_.reserve(k.bins.size());
    inv_d_.reserve(k.bins.size());
    for (std::size_t b = 0; b < k.bins.size(); ++b) {
        inv_f_.push_back(mat_inverse<float>(k.bins[b], pivoting, b));
        inv_d_.push_back(mat_inverse<double>(convert<double>(k.bins[b]), pivoting, b));
    }
    prepared_ = true;
    prepared_pivoting_ = pivoting;
}

const CMatrix<float>& NoiseModel::inverse(std::size_t bin) const {
    if (!prepared_ || bin >= inv_f_.size())
        throw ValidationError("noise model inverses not prepared");
    return inv_f_[bin];
}

const CMatrix<double>& NoiseModel::inverse_double(std::size_t bin) const {
    if (!prepared_ || bin >= inv_d_.size())
        throw ValidationError("noise model inverses not prepared");
    return inv_d_[bin];
}

// ---------------------------------------------------------------------------
// batched drivers
// ---------------------------------------------------------------------------

namespace {

GsvdBinResult<float> narrow_result(const GsvdBinResult<double>& d) {
    GsvdBinResult<float> f;
    f.singular_values.assign(d.singular_values.begin(), d.singular_values.end());
    f.e = convert<float>(d.e);
    f.e_r = convert<float>(d.e_r);
    f.iterations = d.iterations;
    f.converged = d.converged;
    f.recon_residual = float(d.recon_residual);
    return f;
}

void check_batch_inputs(const NoiseModel& noise, const CorrelationSet& r) {
    r.validate();
    noise.k.validate();
    if (noise.k.m != r.m)
        throw ValidationError("noise model channel count does not match correlation set");
    if (noise.k.bins.size() != r.bins.size())
        throw ValidationError("noise model bin count does not match correlation set");
}

} // namespace

GsvdBatch<float> gsvd(const NoiseModel& noise, const CorrelationSet& r, const SolverConfig& cfg,
                      unsigned threads) {
    cfg.validate();
    check_batch_inputs(noise, r);
    noise.prepare_inverses(cfg.pivoting);
    GsvdBatch<float> out;
    out.bins.resize(r.bins.size());
    parallel_for(r.bins.size(), threads, [&](std::size_t b) {
        out.bins[b] = gsvd_matrix<float>(noise.inverse(b), r.bins[b], cfg);
        if (!out.bins[b].converged) {
            // keep the flag but salvage the values from the slow exact path
            const std::uint32_t itried = out.bins[b].iterations;
            auto ref =
                gsvd_reference_matrix(noise.inverse_double(b), convert<double>(r.bins[b]), cfg);
            out.bins[b] = narrow_result(ref);
            out.bins[b].converged = false;
            out.bins[b].iterations = itried;
        }
    });
    return out;
}

GsvdBatch<double> gsvd_reference(const NoiseModel& noise, const CorrelationSet& r,
                                 const SolverConfig& cfg, unsigned threads) {
    cfg.validate();
    check_batch_inputs(noise, r);
    noise.prepare_inverses(cfg.pivoting);
    GsvdBatch<double> out;
    out.bins.resize(r.bins.size());
    parallel_for(r.bins.size(), threads, [&](std::size_t b) {
        out.bins[b] =
            gsvd_reference_matrix(noise.inverse_double(b), convert<double>(r.bins[b]), cfg);
    });
    return out;
}

// ---------------------------------------------------------------------------

template CMatrix<float> mat_inverse<float>(const CMatrix<float>&, Pivoting, std::size_t);
template CMatrix<double> mat_inverse<double>(const CMatrix<double>&, Pivoting, std::size_t);
template struct Bidiagonal<float>;
template struct Bidiagonal<double>;
template Bidiagonal<float> bidiagonalize<float>(const CMatrix<float>&);
template Bidiagonal<double> bidiagonalize<double>(const CMatrix<double>&);
template float compute_tolerance<float>(const Bidiagonal<float>&, float);
template double compute_tolerance<double>(const Bidiagonal<double>&, double);
template QrOutcome qr_iterate<float>(std::vector<float>&, std::vector<float>&, CMatrix<float>&,
                                     CMatrix<float>&, float, std::uint32_t);
template QrOutcome qr_iterate<double>(std::vector<double>&, std::vector<double>&, CMatrix<double>&,
                                      CMatrix<double>&, double, std::uint32_t);
template std::vector<std::size_t> descending_permutation<float>(const std::vector<float>&);
template std::vector<std::size_t> descending_permutation<double>(const std::vector<double>&);
template void permute_rows<float>(CMatrix<float>&, const std::vector<std::size_t>&);
template void permute_rows<double>(CMatrix<double>&, const std::vector<std::size_t>&);
template void permute_columns<float>(CMatrix<float>&, const std::vector<std::size_t>&);
template void permute_columns<double>(CMatrix<double>&, const std::vector<std::size_t>&);
template void sort_descending<float>(std::vector<float>&, CMatrix<float>&, CMatrix<float>&);
template void sort_descending<double>(std::vector<double>&, CMatrix<double>&, CMatrix<double>&);
template void back_transform<float>(const Bidiagonal<float>&, const CMatrix<float>&,
                                    const CMatrix<float>&, CMatrix<float>&, CMatrix<float>&);
template void back_transform<double>(const Bidiagonal<double>&, const CMatrix<double>&,
                                     const CMatrix<double>&, CMatrix<double>&, CMatrix<double>&);
template void canonicalize_subspaces<float>(const CMatrix<float>&, std::vector<float>&,
                                            CMatrix<float>&, CMatrix<float>&);
template void canonicalize_subspaces<double>(const CMatrix<double>&, std::vector<double>&,
                                             CMatrix<double>&, CMatrix<double>&);
template GsvdBinResult<float> gsvd_matrix<float>(const CMatrix<float>&, const CMatrix<float>&,
                                                 const SolverConfig&);
template GsvdBinResult<double> gsvd_matrix<double>(const CMatrix<double>&, const CMatrix<double>&,
                                                   const SolverConfig&);

} // namespace ssl
