#include "ssl/wav.hpp"

#include <doctest.h>

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

namespace {

std::string temp_path(const std::string& name) { return "/tmp/ssl_wavtest_" + name; }

void put16(std::vector<unsigned char>& b, std::uint16_t v) {
    b.push_back(v & 0xff);
    b.push_back((v >> 8) & 0xff);
}
void put32(std::vector<unsigned char>& b, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xff);
}

// minimal 16-bit pcm file with the given interleaved samples
void write_pcm16(const std::string& path, std::uint16_t channels, std::uint32_t rate,
                 const std::vector<std::int16_t>& samples) {
    std::vector<unsigned char> b;
    const std::uint32_t data_bytes = std::uint32_t(samples.size() * 2);
    b.insert(b.end(), {'R', 'I', 'F', 'F'});
    put32(b, 36 + data_bytes);
    b.insert(b.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
    put32(b, 16);
    put16(b, 1); // pcm
    put16(b, channels);
    put32(b, rate);
    put32(b, rate * channels * 2);
    put16(b, channels * 2);
    put16(b, 16);
    b.insert(b.end(), {'d', 'a', 't', 'a'});
    put32(b, data_bytes);
    for (std::int16_t s : samples) put16(b, std::uint16_t(s));
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(b.data()), std::streamsize(b.size()));
}

} // namespace

TEST_CASE("float wav round trip is bit exact") {
    ssl::SampleBlock block;
    block.sample_rate = 16000;
    block.channels = {{0.0f, 1.0f, -1.0f, 0.25f, -0.333333f, 1e-30f},
                      {0.5f, -0.5f, 0.125f, 2.0f, -3.0f, 1e-7f}};
    const auto path = temp_path("roundtrip.wav");
    ssl::write_wav(path, block);
    const ssl::SampleBlock back = ssl::read_wav(path);
    REQUIRE(back.channel_count() == 2);
    REQUIRE(back.frame_count() == 6);
    CHECK(back.sample_rate == 16000);
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t i = 0; i < 6; ++i) CHECK(back.channels[c][i] == block.channels[c][i]);
    std::remove(path.c_str());
}

TEST_CASE("pcm16 samples are scaled by 1/32768") {
    const auto path = temp_path("pcm16.wav");
    write_pcm16(path, 2, 8000, {0, 16384, -32768, 32767, 100, -100});
    const ssl::SampleBlock block = ssl::read_wav(path);
    REQUIRE(block.channel_count() == 2);
    REQUIRE(block.frame_count() == 3);
    CHECK(block.sample_rate == 8000);
    CHECK(block.channels[0][0] == doctest::Approx(0.0));
    CHECK(block.channels[1][0] == doctest::Approx(16384.0 / 32768.0));
    CHECK(block.channels[0][1] == doctest::Approx(-1.0));
    CHECK(block.channels[1][1] == doctest::Approx(32767.0 / 32768.0));
    CHECK(block.channels[0][2] == doctest::Approx(100.0 / 32768.0));
    CHECK(block.channels[1][2] == doctest::Approx(-100.0 / 32768.0));
    std::remove(path.c_str());
}

TEST_CASE("missing file raises io error") {
    CHECK_THROWS_AS(ssl::read_wav("/tmp/ssl_wavtest_does_not_exist.wav"), ssl::IoError);
}

TEST_CASE("garbage header raises io error") {
    const auto path = temp_path("garbage.wav");
    std::ofstream out(path, std::ios::binary);
    out << "this is not audio at all, not even close";
    out.close();
    CHECK_THROWS_AS(ssl::read_wav(path), ssl::IoError);
    std::remove(path.c_str());
}

TEST_CASE("channel length mismatch fails validation") {
    ssl::SampleBlock block;
    block.channels = {{0.0f, 1.0f}, {0.0f}};
    CHECK_THROWS_AS(block.validate(), ssl::ValidationError);
}
