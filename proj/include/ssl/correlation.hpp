#pragma once

#include "ssl/mat.hpp"
#include "ssl/types.hpp"

#include <string>
#include <vector>

namespace ssl {

// Per-bin stack of M x M matrices for one frame. Bin b corresponds to the
// b-th retained bin of whatever band the producer was configured with; the
// association with absolute bin indices is positional throughout.
struct CorrelationSet {
    std::uint32_t m = 0;
    std::uint32_t frame_index = 0;
    std::vector<CMatrix<float>> bins;

    std::size_t bin_count() const { return bins.size(); }
    void validate() const;
};

// Outer product X.X^H per bin: the single-frame correlation estimate.
CorrelationSet instantaneous_correlation(const SpectrumFrame& frame);

// Sliding mean of the last T instantaneous estimates. Spectra are kept in a
// ring and their outer products tracked in a running sum (double precision),
// with a periodic full rebuild so add/subtract drift cannot accumulate.
class CorrelationWindow {
  public:
    explicit CorrelationWindow(std::uint32_t t, std::uint32_t rebuild_interval = 1000);

    void push(const SpectrumFrame& frame);
    bool filled() const { return pushed_ >= t_; }
    std::uint32_t capacity() const { return t_; }

    // Mean over the T most recent frames. Throws if the window is not full.
    CorrelationSet normalized() const;

  private:
    void accumulate(const SpectrumFrame& frame, double sign);
    void rebuild();

    std::uint32_t t_;
    std::uint32_t rebuild_interval_;
    std::uint64_t pushed_ = 0;
    std::uint64_t since_rebuild_ = 0;
    std::uint32_t last_frame_index_ = 0;
    std::vector<SpectrumFrame> ring_;
    std::vector<CMatrix<double>> sum_;
};

// Binary tensor dump shared by correlation snapshots and noise models:
// magic "SSLC", then m, bin count and window length as u32, then per bin a
// row-major complex float payload.
void save_correlation(const std::string& path, const CorrelationSet& set, std::uint32_t t);
CorrelationSet load_correlation(const std::string& path, std::uint32_t* t_out = nullptr);

} // namespace ssl
