#include "ssl/gsvd.hpp"

#include "ssl/eig.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <random>

namespace {

// defect of the factorization against the jacobi oracle run on the same
// matrix widened to double
template <typename T>
void check_against_oracle(const ssl::CMatrix<T>& a, const ssl::GsvdBinResult<T>& got,
                          double sigma_tol, double recon_tol, double unitary_tol) {
    const auto oracle_svd = ssl::jacobi_svd(ssl::convert<double>(a));
    REQUIRE(got.singular_values.size() == a.rows);
    const double smax = std::max(1e-300, oracle_svd.singular_values[0]);
    for (std::size_t i = 0; i < a.rows; ++i) {
        CHECK(std::abs(double(got.singular_values[i]) - oracle_svd.singular_values[i]) <=
              sigma_tol * smax);
        if (i > 0) CHECK(got.singular_values[i - 1] >= got.singular_values[i]);
    }
    CHECK(oracle::recon_error(a, got.singular_values, got.e, got.e_r) <= recon_tol);
    CHECK(oracle::unitary_defect(got.e) <= unitary_tol);
    CHECK(oracle::unitary_defect(ssl::adjoint(got.e_r)) <= unitary_tol);
}

} // namespace

// ---------------------------------------------------------------------------
// inverse
// ---------------------------------------------------------------------------

TEST_CASE("inverse reproduces the identity") {
    std::mt19937_64 rng(101);
    for (std::size_t n : {1, 2, 5, 8}) {
        auto k = oracle::random_hermitian_psd<double>(n, rng);
        for (std::size_t i = 0; i < n; ++i) k(i, i) += 0.5; // keep it well conditioned
        const auto inv = ssl::mat_inverse<double>(k, ssl::Pivoting::partial, 0);
        const auto prod = ssl::matmul(k, inv);
        CHECK(oracle::max_abs_diff(prod, ssl::CMatrix<double>::identity(n)) <= 1e-12);
    }
}

TEST_CASE("single precision inverse is close") {
    std::mt19937_64 rng(102);
    auto kd = oracle::random_hermitian_psd<double>(6, rng);
    for (std::size_t i = 0; i < 6; ++i) kd(i, i) += 0.5;
    const auto kf = ssl::convert<float>(kd);
    const auto inv = ssl::mat_inverse<float>(kf, ssl::Pivoting::partial, 0);
    const auto prod = ssl::matmul(kf, inv);
    CHECK(oracle::max_abs_diff(prod, ssl::CMatrix<float>::identity(6)) <= 1e-4);
}

TEST_CASE("singular matrix raises a numerical error naming the bin") {
    ssl::CMatrix<float> k(3, 3); // all zeros
    try {
        ssl::mat_inverse<float>(k, ssl::Pivoting::partial, 7);
        FAIL("expected a numerical error");
    } catch (const ssl::NumericalError& e) {
        CHECK(std::string(e.what()).find("7") != std::string::npos);
    }
}

TEST_CASE("pivot-free elimination fails where row exchange succeeds") {
    // zero leading entry: pivot-free elimination must give up
    ssl::CMatrix<double> k(2, 2);
    k(0, 1) = 1.0;
    k(1, 0) = 1.0;
    CHECK_THROWS_AS(ssl::mat_inverse<double>(k, ssl::Pivoting::none, 0), ssl::NumericalError);
    const auto inv = ssl::mat_inverse<double>(k, ssl::Pivoting::partial, 0);
    const auto prod = ssl::matmul(k, inv);
    CHECK(oracle::max_abs_diff(prod, ssl::CMatrix<double>::identity(2)) <= 1e-14);
}

// ---------------------------------------------------------------------------
// bidiagonal reduction
// ---------------------------------------------------------------------------

TEST_CASE("bidiagonalization factors reproduce the input") {
    std::mt19937_64 rng(111);
    for (std::size_t n : {1, 2, 3, 4, 8, 16}) {
        const auto a = oracle::random_complex<double>(n, rng);
        const auto bd = ssl::bidiagonalize(a);
        REQUIRE(bd.diag.size() == n);
        REQUIRE(bd.super.size() == n);
        CHECK(bd.super[0] == 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(bd.diag[i] >= 0.0);
            CHECK(bd.super[i] >= 0.0);
        }
        CHECK(oracle::unitary_defect(bd.left) <= 1e-12 * double(n));
        CHECK(oracle::unitary_defect(bd.right_h) <= 1e-12 * double(n));
        // rebuild B from the band and check A = L^H B W
        ssl::CMatrix<double> b(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            b(i, i) = bd.diag[i];
            if (i + 1 < n) b(i, i + 1) = bd.super[i + 1];
        }
        const auto back = ssl::matmul(ssl::adjoint(bd.left), ssl::matmul(b, bd.right_h));
        CHECK(oracle::max_abs_diff(back, a) <= 1e-12 * (1.0 + ssl::frobenius_norm(a)));
    }
}

TEST_CASE("tolerance uses the largest diag plus superdiag column sum") {
    ssl::Bidiagonal<float> b;
    b.diag = {3.0f, 1.0f};
    b.super = {0.0f, 0.5f};
    const float eps = ssl::compute_tolerance(b, 1.0f);
    CHECK(eps == 3.0f * std::numeric_limits<float>::epsilon());
    CHECK(ssl::compute_tolerance(b, 2.0f) == 2.0f * eps);
}

// ---------------------------------------------------------------------------
// complete factorization against independent references
// ---------------------------------------------------------------------------

TEST_CASE("two by two closed form") {
    std::mt19937_64 rng(121);
    for (int trial = 0; trial < 50; ++trial) {
        const auto a = oracle::random_complex<double>(2, rng);
        const auto want = oracle::svd2(a);
        const auto got = ssl::gsvd_matrix<double>(ssl::CMatrix<double>::identity(2), a,
                                                  ssl::SolverConfig{});
        REQUIRE(got.converged);
        CHECK(got.singular_values[0] == doctest::Approx(want[0]).epsilon(1e-10));
        CHECK(got.singular_values[1] == doctest::Approx(want[1]).epsilon(1e-10).scale(want[0]));
    }
}

TEST_CASE("double precision factorization matches the jacobi oracle") {
    std::mt19937_64 rng(122);
    for (std::size_t n : {1, 2, 3, 4, 8, 16}) {
        for (int trial = 0; trial < 5; ++trial) {
            const auto a = oracle::random_complex<double>(n, rng);
            const auto got =
                ssl::gsvd_matrix<double>(ssl::CMatrix<double>::identity(n), a, ssl::SolverConfig{});
            REQUIRE(got.converged);
            CHECK(got.iterations <= 30 * n);
            check_against_oracle(a, got, 1e-12, 1e-12, 1e-12 * double(n));
        }
    }
}

TEST_CASE("single precision factorization matches the jacobi oracle") {
    std::mt19937_64 rng(123);
    for (std::size_t n : {2, 4, 8, 16}) {
        for (int trial = 0; trial < 5; ++trial) {
            const auto a = oracle::random_complex<float>(n, rng);
            const auto got =
                ssl::gsvd_matrix<float>(ssl::CMatrix<float>::identity(n), a, ssl::SolverConfig{});
            REQUIRE(got.converged);
            check_against_oracle(a, got, 1e-5, 1e-4, 1e-4 * double(n));
        }
    }
}

TEST_CASE("rank one matrix") {
    std::mt19937_64 rng(124);
    const auto a = oracle::random_rank<double>(5, 1, rng);
    const auto got =
        ssl::gsvd_matrix<double>(ssl::CMatrix<double>::identity(5), a, ssl::SolverConfig{});
    // all but the first value vanish
    for (std::size_t i = 1; i < 5; ++i)
        CHECK(got.singular_values[i] <= 1e-12 * got.singular_values[0]);
    CHECK(oracle::recon_error(a, got.singular_values, got.e, got.e_r) <= 1e-12);
    CHECK(oracle::unitary_defect(got.e) <= 1e-10);
}

TEST_CASE("exactly repeated values keep a clean basis") {
    ssl::CMatrix<double> a = ssl::CMatrix<double>::identity(3);
    for (auto& z : a.data) z *= 2.0;
    const auto got = ssl::gsvd_matrix<double>(ssl::CMatrix<double>::identity(3), a,
                                              ssl::SolverConfig{});
    for (double v : {got.singular_values[0], got.singular_values[1], got.singular_values[2]})
        CHECK(v == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(oracle::unitary_defect(got.e) <= 1e-12);
    CHECK(oracle::recon_error(a, got.singular_values, got.e, got.e_r) <= 1e-12);
}

TEST_CASE("zero matrix factorizes to zeros with an orthonormal basis") {
    ssl::CMatrix<double> a(4, 4);
    const auto got =
        ssl::gsvd_matrix<double>(ssl::CMatrix<double>::identity(4), a, ssl::SolverConfig{});
    for (double v : got.singular_values) CHECK(v == 0.0);
    CHECK(oracle::unitary_defect(got.e) <= 1e-14);
}

TEST_CASE("prewhitening by the noise inverse is applied") {
    // K = 2 I means the product K^-1 R halves every value
    std::mt19937_64 rng(125);
    const auto r = oracle::random_hermitian_psd<double>(4, rng);
    ssl::CMatrix<double> k(4, 4);
    for (std::size_t i = 0; i < 4; ++i) k(i, i) = 2.0;
    const auto kinv = ssl::mat_inverse<double>(k, ssl::Pivoting::partial, 0);
    const auto whitened = ssl::gsvd_matrix<double>(kinv, r, ssl::SolverConfig{});
    const auto plain = ssl::gsvd_matrix<double>(ssl::CMatrix<double>::identity(4), r,
                                                ssl::SolverConfig{});
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(whitened.singular_values[i] ==
              doctest::Approx(plain.singular_values[i] / 2.0).epsilon(1e-12));
}

TEST_CASE("sweep budget of one flags non convergence") {
    std::mt19937_64 rng(126);
    const auto a = oracle::random_complex<float>(12, rng);
    ssl::SolverConfig cfg;
    cfg.max_qr_sweeps = 1;
    const auto got = ssl::gsvd_matrix<float>(ssl::CMatrix<float>::identity(12), a, cfg);
    CHECK(!got.converged);
}

TEST_CASE("requested residual is reported") {
    std::mt19937_64 rng(127);
    const auto a = oracle::random_complex<double>(5, rng);
    ssl::SolverConfig cfg;
    cfg.compute_residual = true;
    const auto got = ssl::gsvd_matrix<double>(ssl::CMatrix<double>::identity(5), a, cfg);
    CHECK(got.recon_residual >= 0.0);
    CHECK(got.recon_residual <= 1e-12);
}

// ---------------------------------------------------------------------------
// degenerate spans are rebuilt the same way by both paths
// ---------------------------------------------------------------------------

TEST_CASE("both paths agree on the basis of a vanished block") {
    std::mt19937_64 rng(131);
    for (int trial = 0; trial < 5; ++trial) {
        // exact low rank input, identical in both precisions
        auto af = oracle::random_rank<float>(6, 2, rng);
        const auto ad = ssl::convert<double>(af);
        const auto got_f =
            ssl::gsvd_matrix<float>(ssl::CMatrix<float>::identity(6), af, ssl::SolverConfig{});
        const auto got_d =
            ssl::gsvd_matrix<double>(ssl::CMatrix<double>::identity(6), ad, ssl::SolverConfig{});
        REQUIRE(got_f.converged);
        REQUIRE(got_d.converged);
        // the trailing columns span the same canonical complement
        for (std::size_t j = 2; j < 6; ++j)
            for (std::size_t i = 0; i < 6; ++i)
                CHECK(std::abs(ssl::cdouble(got_f.e(i, j).real(), got_f.e(i, j).imag()) -
                               got_d.e(i, j)) <= 2e-4);
        CHECK(oracle::unitary_defect(got_f.e) <= 1e-4 * 6);
    }
}

TEST_CASE("jacobi oracle factors cleanly") {
    std::mt19937_64 rng(132);
    for (std::size_t n : {1, 2, 5, 10}) {
        const auto a = oracle::random_complex<double>(n, rng);
        const auto svd = ssl::jacobi_svd(a);
        CHECK(svd.converged);
        // U diag V_h rebuilds A
        ssl::CMatrix<double> scaled = svd.u;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) scaled(i, j) *= svd.singular_values[j];
        const auto recon = ssl::matmul(scaled, svd.v_h);
        CHECK(oracle::max_abs_diff(recon, a) <= 1e-12 * (1.0 + ssl::frobenius_norm(a)));
        CHECK(oracle::unitary_defect(svd.v_h) <= 1e-12 * double(n));
        for (std::size_t i = 1; i < n; ++i)
            CHECK(svd.singular_values[i - 1] >= svd.singular_values[i]);
    }
}

TEST_CASE("jacobi singular values match the eigenvalues of the gram matrix") {
    std::mt19937_64 rng(133);
    const auto a = oracle::random_complex<double>(7, rng);
    const auto svd = ssl::jacobi_svd(a);
    const auto gram = ssl::matmul(ssl::adjoint(a), a);
    const auto ev = ssl::hermitian_eigenvalues(gram);
    for (std::size_t i = 0; i < 7; ++i)
        CHECK(svd.singular_values[i] * svd.singular_values[i] ==
              doctest::Approx(ev[i]).epsilon(1e-9).scale(ev[0]));
}

// ---------------------------------------------------------------------------
// noise model and batching
// ---------------------------------------------------------------------------

TEST_CASE("identity noise model is positive definite and prepared lazily") {
    const auto n = ssl::NoiseModel::identity(4, 3);
    n.check_positive_definite();
    CHECK_THROWS_AS(n.inverse(0), ssl::ValidationError); // not prepared yet
    n.prepare_inverses(ssl::Pivoting::partial);
    CHECK(oracle::max_abs_diff(n.inverse(1), ssl::CMatrix<float>::identity(4)) == 0.0);
    CHECK(oracle::max_abs_diff(n.inverse_double(2), ssl::CMatrix<double>::identity(4)) == 0.0);
}

TEST_CASE("indefinite noise model is rejected") {
    ssl::NoiseModel n;
    n.k.m = 2;
    ssl::CMatrix<float> k(2, 2);
    k(0, 0) = 1.0f;
    k(0, 1) = 3.0f;
    k(1, 0) = 3.0f;
    k(1, 1) = 1.0f; // eigenvalues 4 and -2
    n.k.bins.push_back(k);
    CHECK_THROWS_AS(n.check_positive_definite(), ssl::NumericalError);
}

TEST_CASE("batched and sequential dispatch produce identical bits") {
    const std::uint32_t m = 6;
    const std::size_t bins = 9;
    std::mt19937_64 rng(141);
    ssl::NoiseModel noise;
    noise.k.m = m;
    ssl::CorrelationSet r;
    r.m = m;
    for (std::size_t b = 0; b < bins; ++b) {
        auto k = oracle::random_hermitian_psd<float>(m, rng);
        for (std::size_t i = 0; i < m; ++i) k(i, i) += 0.5f;
        noise.k.bins.push_back(k);
        r.bins.push_back(oracle::random_hermitian_psd<float>(m, rng));
    }
    const auto seq = ssl::gsvd(noise, r, ssl::SolverConfig{}, 1);
    const auto par = ssl::gsvd(noise, r, ssl::SolverConfig{}, 4);
    REQUIRE(seq.bins.size() == bins);
    REQUIRE(par.bins.size() == bins);
    for (std::size_t b = 0; b < bins; ++b) {
        for (std::size_t i = 0; i < m; ++i)
            CHECK(seq.bins[b].singular_values[i] == par.bins[b].singular_values[i]);
        CHECK(oracle::max_abs_diff(seq.bins[b].e, par.bins[b].e) == 0.0);
        CHECK(oracle::max_abs_diff(seq.bins[b].e_r, par.bins[b].e_r) == 0.0);
    }
}

TEST_CASE("batch narrows to the exact path when the budget is too small") {
    const std::uint32_t m = 10;
    std::mt19937_64 rng(142);
    ssl::NoiseModel noise = ssl::NoiseModel::identity(m, 2);
    ssl::CorrelationSet r;
    r.m = m;
    r.bins.push_back(oracle::random_hermitian_psd<float>(m, rng));
    r.bins.push_back(oracle::random_hermitian_psd<float>(m, rng));
    ssl::SolverConfig cfg;
    cfg.max_qr_sweeps = 1;
    const auto batch = ssl::gsvd(noise, r, cfg, 1);
    for (std::size_t b = 0; b < 2; ++b) {
        const auto& bin = batch.bins[b];
        CHECK(!bin.converged); // the flag survives the fallback
        const auto ad = ssl::convert<double>(r.bins[b]);
        const auto want = ssl::jacobi_svd(ad);
        for (std::size_t i = 0; i < m; ++i)
            CHECK(std::abs(double(bin.singular_values[i]) - want.singular_values[i]) <=
                  1e-5 * want.singular_values[0]);
    }
}

TEST_CASE("batch rejects mismatched shapes") {
    const auto noise = ssl::NoiseModel::identity(4, 3);
    ssl::CorrelationSet r;
    r.m = 4;
    r.bins.assign(2, ssl::CMatrix<float>::identity(4)); // bin count differs
    CHECK_THROWS_AS(ssl::gsvd(noise, r, ssl::SolverConfig{}, 1), ssl::ValidationError);
}

TEST_CASE("float and double paths agree on singular values") {
    const std::uint32_t m = 8;
    const std::size_t bins = 5;
    ssl::NoiseModel noise;
    noise.k.m = m;
    ssl::CorrelationSet r;
    r.m = m;
    std::mt19937_64 rng(143);
    for (std::size_t b = 0; b < bins; ++b) {
        auto k = oracle::random_hermitian_psd<float>(m, rng);
        for (std::size_t i = 0; i < m; ++i) k(i, i) += 0.5f;
        noise.k.bins.push_back(k);
        r.bins.push_back(oracle::random_hermitian_psd<float>(m, rng));
    }
    const auto fast = ssl::gsvd(noise, r, ssl::SolverConfig{}, 1);
    const auto exact = ssl::gsvd_reference(noise, r, ssl::SolverConfig{}, 1);
    for (std::size_t b = 0; b < bins; ++b) {
        const double smax = exact.bins[b].singular_values[0];
        for (std::size_t i = 0; i < m; ++i)
            CHECK(std::abs(double(fast.bins[b].singular_values[i]) -
                           exact.bins[b].singular_values[i]) <= 2e-5 * smax);
    }
}
