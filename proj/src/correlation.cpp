#include "ssl/correlation.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace ssl {

void CorrelationSet::validate() const {
    if (m < 1) throw ValidationError("correlation set has no channels");
    if (bins.empty()) throw ValidationError("correlation set has no bins");
    for (const auto& mat : bins) {
        if (mat.rows != m || mat.cols != m)
            throw ValidationError("correlation matrix dimension mismatch");
        for (const auto& z : mat.data)
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
                throw ValidationError("non-finite correlation entry");
    }
}

CorrelationSet instantaneous_correlation(const SpectrumFrame& frame) {
    const std::size_t m = frame.channel_count();
    if (m == 0) throw ValidationError("empty spectrum frame");
    const std::size_t bins = frame.spectra[0].size();

    for (const auto& ch : frame.spectra) {
        if (ch.size() != bins) throw ValidationError("ragged spectrum frame");
        for (const auto& z : ch)
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
                throw ValidationError("non-finite spectrum value");
    }

    CorrelationSet out;
    out.m = std::uint32_t(m);
    out.frame_index = frame.frame_index;
    out.bins.assign(bins, CMatrix<float>(m, m));
    for (std::size_t b = 0; b < bins; ++b) {
        auto& r = out.bins[b];
        for (std::size_t i = 0; i < m; ++i) {
            const cfloat xi = frame.spectra[i][b];
            // diagonal computed as a pure magnitude so it is exactly real
            r(i, i) = cfloat(xi.real() * xi.real() + xi.imag() * xi.imag(), 0.0f);
            for (std::size_t j = i + 1; j < m; ++j) {
                const cfloat v = xi * std::conj(frame.spectra[j][b]);
                r(i, j) = v;
                r(j, i) = std::conj(v);
            }
        }
    }
    return out;
}

CorrelationWindow::CorrelationWindow(std::uint32_t t, std::uint32_t rebuild_interval)
    : t_(t), rebuild_interval_(rebuild_interval) {
    if (t_ < 1) throw ValidationError("correlation window length must be >= 1");
    if (rebuild_interval_ < 1) rebuild_interval_ = 1;
    ring_.resize(t_);
}

void CorrelationWindow::accumulate(const SpectrumFrame& frame, double sign) {
    const std::size_t m = frame.channel_count();
    const std::size_t bins = frame.spectra[0].size();
    for (std::size_t b = 0; b < bins; ++b) {
        auto& acc = sum_[b];
        for (std::size_t i = 0; i < m; ++i) {
            const cdouble xi(frame.spectra[i][b].real(), frame.spectra[i][b].imag());
            for (std::size_t j = 0; j < m; ++j) {
                const cdouble xj(frame.spectra[j][b].real(), frame.spectra[j][b].imag());
                acc(i, j) += sign * (xi * std::conj(xj));
            }
        }
    }
}

void CorrelationWindow::rebuild() {
    for (auto& acc : sum_) std::fill(acc.data.begin(), acc.data.end(), cdouble(0, 0));
    const std::uint64_t have = std::min<std::uint64_t>(pushed_, t_);
    // oldest first, so the rebuilt sum is independent of where the ring head is
    for (std::uint64_t k = 0; k < have; ++k) {
        const std::uint64_t idx = (pushed_ - have + k) % t_;
        accumulate(ring_[idx], 1.0);
    }
    since_rebuild_ = 0;
}

void CorrelationWindow::push(const SpectrumFrame& frame) {
    const std::size_t m = frame.channel_count();
    if (m == 0) throw ValidationError("empty spectrum frame");
    const std::size_t bins = frame.spectra[0].size();
    for (const auto& ch : frame.spectra) {
        if (ch.size() != bins) throw ValidationError("ragged spectrum frame");
        for (const auto& z : ch)
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
                throw ValidationError("non-finite spectrum value");
    }

    if (sum_.empty()) {
        sum_.assign(bins, CMatrix<double>(m, m));
    } else if (sum_.size() != bins || sum_[0].rows != m) {
        throw ValidationError("spectrum frame shape changed mid-stream");
    }

    const std::uint64_t slot = pushed_ % t_;
    if (pushed_ >= t_) accumulate(ring_[slot], -1.0);
    ring_[slot] = frame;
    accumulate(frame, 1.0);
    last_frame_index_ = frame.frame_index;
    ++pushed_;
    if (++since_rebuild_ >= rebuild_interval_) rebuild();
}

CorrelationSet CorrelationWindow::normalized() const {
    if (!filled())
        throw ValidationError("correlation window underfilled: " + std::to_string(pushed_) +
                              " of " + std::to_string(t_) + " frames");
    CorrelationSet out;
    out.m = std::uint32_t(sum_[0].rows);
    out.frame_index = last_frame_index_;
    out.bins.reserve(sum_.size());
    const double inv_t = 1.0 / double(t_);
    for (const auto& acc : sum_) {
        CMatrix<float> r(acc.rows, acc.cols);
        for (std::size_t i = 0; i < acc.data.size(); ++i) {
            const cdouble v = acc.data[i] * inv_t;
            r.data[i] = cfloat(float(v.real()), float(v.imag()));
        }
        out.bins.push_back(std::move(r));
    }
    return out;
}

namespace {
constexpr char kMagic[4] = {'S', 'S', 'L', 'C'};

void write_u32le(std::ostream& out, std::uint32_t v) {
    const char b[4] = {char(v & 0xff), char(v >> 8 & 0xff), char(v >> 16 & 0xff), char(v >> 24 & 0xff)};
    out.write(b, 4);
}

std::uint32_t read_u32le(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
           std::uint32_t(b[3]) << 24;
}
} // namespace

void save_correlation(const std::string& path, const CorrelationSet& set, std::uint32_t t) {
    set.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(kMagic, 4);
    write_u32le(out, set.m);
    write_u32le(out, std::uint32_t(set.bins.size()));
    write_u32le(out, t);
    std::vector<float> buf;
    for (const auto& mat : set.bins) {
        buf.resize(mat.data.size() * 2);
        for (std::size_t i = 0; i < mat.data.size(); ++i) {
            buf[2 * i] = mat.data[i].real();
            buf[2 * i + 1] = mat.data[i].imag();
        }
        out.write(reinterpret_cast<const char*>(buf.data()),
                  std::streamsize(buf.size() * sizeof(float)));
    }
    if (!out) throw IoError("short write to " + path);
}

CorrelationSet load_correlation(const std::string& path, std::uint32_t* t_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError(path + ": not a correlation tensor file");
    CorrelationSet set;
    set.m = read_u32le(in);
    const std::uint32_t bins = read_u32le(in);
    const std::uint32_t t = read_u32le(in);
    if (t_out) *t_out = t;
    if (set.m < 1 || set.m > 4096 || bins < 1 || bins > 1u << 20)
        throw IoError(path + ": implausible header");
    set.bins.assign(bins, CMatrix<float>(set.m, set.m));
    std::vector<float> buf(std::size_t(set.m) * set.m * 2);
    for (auto& mat : set.bins) {
        in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size() * sizeof(float)));
        if (!in) throw IoError(path + ": truncated payload");
        for (std::size_t i = 0; i < mat.data.size(); ++i)
            mat.data[i] = cfloat(buf[2 * i], buf[2 * i + 1]);
    }
    set.validate();
    return set;
}

} // namespace ssl
