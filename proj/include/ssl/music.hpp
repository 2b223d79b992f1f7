#pragma once

// Spatial spectrum computation and directional peak search. The noise
// subspace produced by the factorization stage is projected against steering
// vectors on a direction grid; sources show up as sharp maxima of the
// bin-averaged power.

#include "ssl/gsvd.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace ssl {

struct Direction {
    double azimuth_deg = 0;
    double elevation_deg = 0;
};

// unit propagation vector for a direction (x toward azimuth 0, z up)
std::array<double, 3> direction_unit(const Direction& d);

// great-circle angle between two directions, in degrees
double angular_distance_deg(const Direction& a, const Direction& b);

// Steering vectors for every (direction, bin) pair, stored flat as
// [direction][bin][mic] single-precision complex. Both solver paths consume
// the same stored values, so the spectra they produce differ only by
// arithmetic precision.
struct SteeringField {
    std::uint32_t m = 0;
    std::uint32_t bin_min = 0;
    std::uint32_t bin_max = 0;
    std::vector<Direction> directions;
    std::vector<cfloat> vectors;

    std::size_t bin_count() const { return std::size_t(bin_max) - bin_min + 1; }
    const cfloat* at(std::size_t dir, std::size_t bin) const {
        return &vectors[(dir * bin_count() + bin) * m];
    }
    cfloat* at(std::size_t dir, std::size_t bin) {
        return &vectors[(dir * bin_count() + bin) * m];
    }
    void validate() const;
};

void save_steering(const SteeringField& field, const std::string& path);
SteeringField load_steering(const std::string& path);

struct MusicConfig {
    std::uint32_t num_sources = 1;
    // guards the division when a steering vector falls inside the signal span
    float denominator_floor = 1e-12f;
    // sum squared projections instead of magnitudes in the denominator
    bool squared_denominator = false;
    // estimates weaker than this multiple of the grid-mean power are flagged
    float low_power_ratio = 1.25f;

    void validate() const;
};

// power over the direction grid for one analysis frame; `power` is the
// per-direction sum over bins, `bin_power` keeps the per-bin terms when the
// caller asks for them
struct MusicSpectrum {
    std::uint64_t frame_index = 0;
    std::vector<double> power;
    std::vector<std::vector<double>> bin_power;
};

// Projects every steering vector onto the noise span of every bin and sums
// the per-bin power over bins. Arithmetic runs in T; the summed grid values
// are accumulated and stored in double.
template <typename T>
MusicSpectrum calc_average_power(const GsvdBatch<T>& basis, const SteeringField& steering,
                                 const MusicConfig& cfg, bool keep_bins = false,
                                 unsigned threads = 1);

// neighbor lists under a fixed angular radius, built once per grid
struct DirectionTopology {
    std::vector<std::vector<std::uint32_t>> neighbors;
    static DirectionTopology build(const std::vector<Direction>& directions,
                                   double radius_deg = 10.0);
};

struct SourceEstimate {
    std::uint32_t direction_index = 0;
    Direction direction;
    double power = 0;
    bool low_power = false;
};

// Local maxima of the summed power (at least as large as every neighbor;
// equal-valued plateaus resolve to the lowest index), strongest first,
// truncated to the configured source count.
std::vector<SourceEstimate> peak_search(const std::vector<double>& power,
                                        const std::vector<Direction>& directions,
                                        const DirectionTopology& topology,
                                        const MusicConfig& cfg);

} // namespace ssl
