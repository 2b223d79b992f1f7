#include "ssl/wav.hpp"

#include <cstring>
#include <fstream>
#include <limits>

namespace ssl {

void SampleBlock::validate() const {
    if (channels.empty()) throw ValidationError("sample block has no channels");
    if (sample_rate == 0) throw ValidationError("sample rate must be positive");
    const std::size_t n = channels[0].size();
    for (std::size_t m = 1; m < channels.size(); ++m)
        if (channels[m].size() != n)
            throw ValidationError("sample block channels differ in length");
}

namespace {

std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
           std::uint32_t(b[3]) << 24;
}

std::uint16_t read_u16(std::istream& in) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    return std::uint16_t(b[0] | b[1] << 8);
}

void write_u32(std::ostream& out, std::uint32_t v) {
    const char b[4] = {char(v & 0xff), char(v >> 8 & 0xff), char(v >> 16 & 0xff), char(v >> 24 & 0xff)};
    out.write(b, 4);
}

void write_u16(std::ostream& out, std::uint16_t v) {
    const char b[2] = {char(v & 0xff), char(v >> 8 & 0xff)};
    out.write(b, 2);
}

} // namespace

SampleBlock read_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);

    char tag[4];
    in.read(tag, 4);
    if (!in || std::memcmp(tag, "RIFF", 4) != 0) throw IoError(path + ": not a RIFF file");
    read_u32(in); // riff size, unused
    in.read(tag, 4);
    if (!in || std::memcmp(tag, "WAVE", 4) != 0) throw IoError(path + ": not a WAVE file");

    std::uint16_t format = 0, num_channels = 0, bits = 0;
    std::uint32_t rate = 0;
    bool have_fmt = false;
    SampleBlock block;

    while (in.read(tag, 4)) {
        const std::uint32_t size = read_u32(in);
        if (std::memcmp(tag, "fmt ", 4) == 0) {
            format = read_u16(in);
            num_channels = read_u16(in);
            rate = read_u32(in);
            read_u32(in); // byte rate
            read_u16(in); // block align
            bits = read_u16(in);
            if (size > 16) in.seekg(size - 16, std::ios::cur);
            if (format == 0xfffe) {
                // WAVE_FORMAT_EXTENSIBLE carries the real format in the
                // extension; common writers use it for >2 channels. We only
                // looked at the first 16 bytes above, so re-read the subformat.
                in.seekg(-(std::streamoff(size) - 16), std::ios::cur);
                read_u16(in);           // cbSize
                read_u16(in);           // valid bits
                read_u32(in);           // channel mask
                format = read_u16(in);  // first two bytes of the subformat GUID
                in.seekg(size - 16 - 10, std::ios::cur);
            }
            have_fmt = true;
        } else if (std::memcmp(tag, "data", 4) == 0) {
            if (!have_fmt) throw IoError(path + ": data chunk before fmt chunk");
            if (num_channels == 0 || rate == 0) throw IoError(path + ": bad fmt chunk");
            const bool is_float = format == 3;
            const bool is_pcm = format == 1;
            if (!is_float && !is_pcm) throw IoError(path + ": unsupported WAV format code");
            if (is_float && bits != 32) throw IoError(path + ": only 32-bit float supported");
            if (is_pcm && bits != 16 && bits != 24 && bits != 32)
                throw IoError(path + ": only 16/24/32-bit PCM supported");

            const std::uint32_t bytes_per_sample = bits / 8;
            const std::uint32_t stride = bytes_per_sample * num_channels;
            const std::uint32_t frames = size / stride;
            block.sample_rate = rate;
            block.channels.assign(num_channels, std::vector<float>(frames));

            std::vector<char> raw(size);
            in.read(raw.data(), size);
            if (!in) throw IoError(path + ": truncated data chunk");

            const unsigned char* p = reinterpret_cast<const unsigned char*>(raw.data());
            for (std::uint32_t f = 0; f < frames; ++f) {
                for (std::uint16_t m = 0; m < num_channels; ++m) {
                    const unsigned char* s = p + f * stride + m * bytes_per_sample;
                    float v;
                    if (is_float) {
                        std::uint32_t u = std::uint32_t(s[0]) | std::uint32_t(s[1]) << 8 |
                                          std::uint32_t(s[2]) << 16 | std::uint32_t(s[3]) << 24;
                        std::memcpy(&v, &u, 4);
                    } else if (bits == 16) {
                        std::int16_t u = std::int16_t(s[0] | s[1] << 8);
                        v = float(u) / 32768.0f;
                    } else if (bits == 24) {
                        std::int32_t u = std::int32_t(std::uint32_t(s[0]) << 8 |
                                                      std::uint32_t(s[1]) << 16 |
                                                      std::uint32_t(s[2]) << 24) >> 8;
                        v = float(u) / 8388608.0f;
                    } else {
                        std::int32_t u = std::int32_t(std::uint32_t(s[0]) | std::uint32_t(s[1]) << 8 |
                                                      std::uint32_t(s[2]) << 16 |
                                                      std::uint32_t(s[3]) << 24);
                        v = float(double(u) / 2147483648.0);
                    }
                    block.channels[m][f] = v;
                }
            }
            return block;
        } else {
            // skip unknown chunk; chunks are word aligned
            in.seekg(size + (size & 1), std::ios::cur);
        }
    }
    throw IoError(path + ": no data chunk found");
}

void write_wav(const std::string& path, const SampleBlock& block) {
    block.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");

    const std::uint16_t num_channels = std::uint16_t(block.channel_count());
    const std::uint32_t frames = std::uint32_t(block.frame_count());
    const std::uint32_t data_size = frames * num_channels * 4;

    out.write("RIFF", 4);
    write_u32(out, 36 + data_size);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    write_u32(out, 16);
    write_u16(out, 3); // IEEE float
    write_u16(out, num_channels);
    write_u32(out, block.sample_rate);
    write_u32(out, block.sample_rate * num_channels * 4);
    write_u16(out, std::uint16_t(num_channels * 4));
    write_u16(out, 32);
    out.write("data", 4);
    write_u32(out, data_size);

    for (std::uint32_t f = 0; f < frames; ++f) {
        for (std::uint16_t m = 0; m < num_channels; ++m) {
            std::uint32_t u;
            std::memcpy(&u, &block.channels[m][f], 4);
            write_u32(out, u);
        }
    }
    if (!out) throw IoError("short write to " + path);
}

} // namespace ssl
