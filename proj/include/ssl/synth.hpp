#pragma once

// Synthetic scene generation: microphone array geometries, direction grids,
// steering vector construction, deterministic multichannel test signals, and
// noise statistics captured from a scene's noise-only part.

#include "ssl/gsvd.hpp"
#include "ssl/music.hpp"
#include "ssl/stft.hpp"
#include "ssl/types.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace ssl {

constexpr double kSpeedOfSound = 343.0; // m/s

struct ArrayGeometry {
    std::vector<std::array<double, 3>> mics; // meters

    // evenly spaced ring in the horizontal plane, first mic on the x axis
    static ArrayGeometry circular(std::uint32_t count, double radius);
    // Fibonacci-lattice shell, near-uniform coverage for any count
    static ArrayGeometry spherical(std::uint32_t count, double radius);
    // {"mics": [[x, y, z], ...]}
    static ArrayGeometry from_json_file(const std::string& path);

    std::uint32_t channel_count() const { return std::uint32_t(mics.size()); }
    void validate() const;
};

// horizontal ring of directions at elevation zero, azimuth step `step_deg`
std::vector<Direction> azimuth_grid(double step_deg = 5.0);
// Fibonacci lattice over the full sphere
std::vector<Direction> sphere_grid(std::size_t count = 2522);

// Far-field steering vectors for every direction and analysis bin. Delays
// come from projecting mic positions on the propagation direction; entries
// are computed in double and stored single so that every consumer sees
// identical values.
SteeringField make_steering(const ArrayGeometry& geometry, const StftConfig& stft,
                            std::uint32_t sample_rate, const std::vector<Direction>& directions,
                            double speed_of_sound = kSpeedOfSound);

enum class SourceKind {
    tone,     // pure sinusoid with exact fractional-delay arrival
    white,    // wideband noise delayed in the frequency domain
    multitone // independent bin-centre components in the analysis band
};

SourceKind source_kind_from_name(const std::string& name);
std::string source_kind_name(SourceKind kind);

struct SourceSpec {
    Direction direction;
    SourceKind kind = SourceKind::tone;
    double frequency_hz = 1000.0; // tone only
    double level_db = 0.0;        // rms relative to full scale
    bool noise_role = false;      // belongs to the noise field, not the targets
};

struct SceneSpec {
    std::vector<SourceSpec> sources;
    double duration_s = 1.0;
    std::uint64_t seed = 0;
    bool has_diffuse = false;
    double diffuse_level_db = -40.0; // per-mic uncorrelated floor

    void validate() const;
};

// Renders the scene to multichannel audio. Deterministic for a fixed scene:
// the generator streams are derived from the seed and the source index.
// Multitone sources require a rectangular window with shift equal to the
// frame length so synthesis frames line up with analysis frames; the
// duration is floored to a whole number of frames in that case.
SampleBlock synthesize_scene(const ArrayGeometry& geometry, const SceneSpec& scene,
                             const StftConfig& stft, std::uint32_t sample_rate = 16000);

// Mean correlation over every analysis frame of the scene's noise-only part
// (sources marked noise_role plus the diffuse floor). The result is checked
// for positive definiteness before it is returned.
NoiseModel capture_noise_model(const ArrayGeometry& geometry, const SceneSpec& scene,
                               const StftConfig& stft, std::uint32_t sample_rate = 16000);

} // namespace ssl
