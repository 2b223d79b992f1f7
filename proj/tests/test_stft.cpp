#include "ssl/stft.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

namespace {

ssl::SampleBlock random_block(std::size_t channels, std::size_t samples, std::uint64_t seed) {
    ssl::SampleBlock block;
    block.sample_rate = 16000;
    block.channels.resize(channels);
    std::mt19937_64 rng(seed);
    for (auto& ch : block.channels) {
        ch.resize(samples);
        for (auto& v : ch) v = float(ssl::gaussian(rng));
    }
    return block;
}

} // namespace

TEST_CASE("hann window matches the periodic formula") {
    const auto w = ssl::make_window(ssl::WindowKind::hann, 8);
    REQUIRE(w.size() == 8);
    for (std::size_t n = 0; n < 8; ++n) {
        const double want = 0.5 - 0.5 * std::cos(2.0 * M_PI * double(n) / 8.0);
        CHECK(double(w[n]) == doctest::Approx(want).epsilon(1e-6));
    }
    CHECK(w[0] == doctest::Approx(0.0));
}

TEST_CASE("rectangular window is all ones") {
    const auto w = ssl::make_window(ssl::WindowKind::rectangular, 5);
    for (float v : w) CHECK(v == 1.0f);
}

TEST_CASE("frame count formula") {
    ssl::StftConfig cfg;
    cfg.frame_length = 512;
    cfg.shift = 160;
    CHECK(ssl::stft_frame_count(random_block(1, 511, 1), cfg) == 0);
    CHECK(ssl::stft_frame_count(random_block(1, 512, 1), cfg) == 1);
    CHECK(ssl::stft_frame_count(random_block(1, 671, 1), cfg) == 1);
    CHECK(ssl::stft_frame_count(random_block(1, 672, 1), cfg) == 2);
    CHECK(ssl::stft_frame_count(random_block(1, 512 + 160 * 9, 1), cfg) == 10);
}

TEST_CASE("frame spectra match the direct transform") {
    ssl::StftConfig cfg; // defaults: 512/160, hann, band 16..88
    const auto block = random_block(3, 1200, 42);
    const auto window = ssl::make_window(cfg.window, cfg.frame_length);

    for (std::size_t frame = 0; frame < 2; ++frame) {
        const auto spectrum = ssl::stft_frame(block, cfg, window, frame);
        CHECK(spectrum.frame_index == frame);
        REQUIRE(spectrum.spectra.size() == 3);
        for (std::size_t ch = 0; ch < 3; ++ch) {
            REQUIRE(spectrum.spectra[ch].size() == cfg.bin_count());
            // windowed samples for the direct transform
            std::vector<double> x(cfg.frame_length);
            for (std::size_t n = 0; n < cfg.frame_length; ++n)
                x[n] = double(block.channels[ch][frame * cfg.shift + n]) * double(window[n]);
            const auto want = oracle::dft_real(x);
            double scale = 0;
            for (const auto& v : want) scale = std::max(scale, std::abs(v));
            for (std::uint32_t b = cfg.bin_min; b <= cfg.bin_max; ++b) {
                const ssl::cfloat got = spectrum.spectra[ch][b - cfg.bin_min];
                CHECK(std::abs(ssl::cdouble(got.real(), got.imag()) - want[b]) <=
                      1e-4 * scale + 1e-6);
            }
        }
    }
}

TEST_CASE("streaming visits every frame in order") {
    ssl::StftConfig cfg;
    const auto block = random_block(2, 512 + 160 * 4, 7);
    std::size_t count = 0;
    ssl::stft_stream(block, cfg, [&](const ssl::SpectrumFrame& f) {
        CHECK(f.frame_index == count);
        CHECK(f.spectra.size() == 2);
        ++count;
    });
    CHECK(count == 5);
}

TEST_CASE("stft config validation") {
    ssl::StftConfig cfg;
    cfg.shift = 0;
    CHECK_THROWS_AS(cfg.validate(), ssl::ValidationError);
    cfg = ssl::StftConfig{};
    cfg.shift = cfg.frame_length + 1;
    CHECK_THROWS_AS(cfg.validate(), ssl::ValidationError);
    cfg = ssl::StftConfig{};
    cfg.bin_max = cfg.frame_length; // past the half spectrum
    CHECK_THROWS_AS(cfg.validate(), ssl::ValidationError);
    cfg = ssl::StftConfig{};
    cfg.bin_min = 50;
    cfg.bin_max = 40;
    CHECK_THROWS_AS(cfg.validate(), ssl::ValidationError);
}
