#pragma once

#include "ssl/correlation.hpp"
#include "ssl/mat.hpp"
#include "ssl/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ssl {

enum class Pivoting { none, partial };

struct SolverConfig {
    std::uint32_t max_qr_sweeps = 0; // 0 selects the default budget of 30*M
    float tolerance_scale = 1.0f;
    Pivoting pivoting = Pivoting::partial;
    bool compute_residual = false;
    // Deterministic handling of tied / vanishing singular values, so that
    // independently computed decompositions of the same matrix agree on the
    // subspace bases and not just on the values. Leave on unless comparing
    // against raw textbook output.
    bool canonical_subspaces = true;

    void validate() const;
};

// Per-bin noise correlation K with lazily built inverses. K is treated as
// time-invariant: loaded once, inverted once, reused for every frame.
struct NoiseModel {
    CorrelationSet k;

    static NoiseModel identity(std::uint32_t m, std::size_t bins);
    static NoiseModel from_file(const std::string& path);

    // Throws NumericalError unless every bin is Hermitian positive definite
    // (checked against a double-precision eigenvalue oracle).
    void check_positive_definite() const;

    void prepare_inverses(Pivoting pivoting) const;
    const CMatrix<float>& inverse(std::size_t bin) const;
    const CMatrix<double>& inverse_double(std::size_t bin) const;

  private:
    mutable std::vector<CMatrix<float>> inv_f_;
    mutable std::vector<CMatrix<double>> inv_d_;
    mutable bool prepared_ = false;
    mutable Pivoting prepared_pivoting_ = Pivoting::partial;
};

template <typename T>
struct GsvdBinResult {
    std::vector<T> singular_values; // non-increasing
    CMatrix<T> e;                   // left singular vectors as columns
    CMatrix<T> e_r;                 // right factor; row i pairs with value i
    std::uint32_t iterations = 0;
    bool converged = true;
    T recon_residual = T(-1); // relative Frobenius residual; < 0 if not computed
};

template <typename T>
struct GsvdBatch {
    std::vector<GsvdBinResult<T>> bins;
};

// ---- stage-level building blocks (single matrix) ----

// Gaussian elimination inverse. Throws NumericalError naming bin_label when a
// pivot collapses.
template <typename T>
CMatrix<T> mat_inverse(const CMatrix<T>& k, Pivoting pivoting, std::size_t bin_label = 0);

// Householder reduction to real bidiagonal form, diagonal phases absorbed so
// that diag and superdiag are real and non-negative. Satisfies
// B = left * A * right_h^H, i.e. A = left^H * B * right_h.
template <typename T>
struct Bidiagonal {
    std::vector<T> diag;  // diag[j] = B(j,j)
    std::vector<T> super; // super[j] = B(j-1,j); super[0] = 0
    CMatrix<T> left;
    CMatrix<T> right_h;
};

template <typename T>
Bidiagonal<T> bidiagonalize(const CMatrix<T>& a);

// epsilon = scale * machine_eps * max over columns of (|diag| + |superdiag|).
template <typename T>
T compute_tolerance(const Bidiagonal<T>& b, T scale);

struct QrOutcome {
    std::uint32_t iterations = 0;
    bool converged = true;
};

// Implicit-shift QR sweeps driving every superdiagonal below eps. Rotations
// accumulate by row operations into e_acc and er_acc, both of which the
// caller initializes to identity; on return, for the original matrix A,
//   A = (e_acc * left)^H * diag(d) * (er_acc * right_h)
// which back_transform() evaluates. Non-convergence within the sweep budget
// is reported, not thrown.
template <typename T>
QrOutcome qr_iterate(std::vector<T>& diag, std::vector<T>& super, CMatrix<T>& e_acc,
                     CMatrix<T>& er_acc, T eps, std::uint32_t max_sweeps);

// Stable ordering helpers shared by the solver paths.
template <typename T>
std::vector<std::size_t> descending_permutation(const std::vector<T>& values);
template <typename T>
void permute_rows(CMatrix<T>& m, const std::vector<std::size_t>& perm);
template <typename T>
void permute_columns(CMatrix<T>& m, const std::vector<std::size_t>& perm);

// Convenience form working on the final factors: sorts values descending,
// permuting the columns of e and the rows of e_r along.
template <typename T>
void sort_descending(std::vector<T>& values, CMatrix<T>& e, CMatrix<T>& e_r);

// Fold the retained Householder/phase factors back into the accumulated
// rotations, producing the final unitary factors.
template <typename T>
void back_transform(const Bidiagonal<T>& factors, const CMatrix<T>& e_acc,
                    const CMatrix<T>& er_acc, CMatrix<T>& e_out, CMatrix<T>& er_out);

// Deterministic post-pass: replaces the basis of every degenerate group of
// singular values (ties within 1e-5 of the largest value, and the trailing
// near-zero block) with a canonical one derived from fixed-order projections
// of the standard basis, then fixes each column's phase. Without it the
// vectors spanning such groups are arbitrary to within a unitary mix, and
// any consumer that is not invariant under that mix (the power spectrum
// denominator here) cannot be compared across solver paths.
template <typename T>
void canonicalize_subspaces(const CMatrix<T>& a, std::vector<T>& values, CMatrix<T>& e,
                            CMatrix<T>& e_r);

// ---- composed per-bin and batched solves ----

template <typename T>
GsvdBinResult<T> gsvd_matrix(const CMatrix<T>& kinv, const CMatrix<T>& r,
                             const SolverConfig& cfg);

struct JacobiSvdResult {
    std::vector<double> singular_values;
    CMatrix<double> u;
    CMatrix<double> v_h;
    std::uint32_t sweeps = 0;
    bool converged = true;
};

// One-sided Jacobi in double precision: the slow, simple ground truth.
JacobiSvdResult jacobi_svd(const CMatrix<double>& a);

GsvdBinResult<double> gsvd_reference_matrix(const CMatrix<double>& kinv,
                                            const CMatrix<double>& r, const SolverConfig& cfg);

// Batched solves across bins. Per-bin state is fully isolated, so thread
// count changes neither values nor bit patterns; threads = 1 reproduces the
// sequential path exactly.
GsvdBatch<float> gsvd(const NoiseModel& noise, const CorrelationSet& r, const SolverConfig& cfg,
                      unsigned threads);
GsvdBatch<double> gsvd_reference(const NoiseModel& noise, const CorrelationSet& r,
                                 const SolverConfig& cfg, unsigned threads);

} // namespace ssl
