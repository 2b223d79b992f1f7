#pragma once

// End-to-end localization driver: configuration loading with environment
// overrides, and the streaming loop that turns multichannel audio into
// per-frame direction estimates.

#include "ssl/correlation.hpp"
#include "ssl/gsvd.hpp"
#include "ssl/music.hpp"
#include "ssl/synth.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>

namespace ssl {

enum class SolvePath { batched, naive, reference };

struct PipelineConfig {
    StftConfig stft;
    std::uint32_t window_frames = 50;
    SolverConfig solver;
    MusicConfig music;
    std::string precision = "single"; // single | double
    std::string path = "batched";     // batched | naive | reference
    unsigned threads = 0;             // 0 = all hardware threads
    std::uint64_t seed = 0;
    std::uint32_t sample_rate = 16000; // used when synthesizing or building steering

    std::string input;       // wav consumed by locate
    std::string noise_model; // correlation tensor path; empty = identity
    std::string steering;    // steering field path; empty = build from geometry

    std::string grid = "azimuth"; // azimuth | sphere
    double grid_step_deg = 5.0;
    std::size_t sphere_count = 2522;

    bool has_geometry_file = false;
    std::string geometry_file;
    bool has_geometry_preset = false;
    std::string geometry_kind = "circular";
    std::uint32_t geometry_count = 8;
    double geometry_radius = 0.05;

    bool has_scene = false;
    SceneSpec scene;

    // json file, then SSL_* environment overrides on top
    static PipelineConfig from_file(const std::string& path);
    static PipelineConfig from_json_text(const std::string& text);
    void apply_env_overrides();
    void validate() const;

    // double precision always goes through the exact path
    SolvePath resolved_path() const;
    unsigned resolved_threads() const;
    ArrayGeometry resolve_geometry(std::uint32_t fallback_channels) const;
    std::vector<Direction> resolve_grid() const;
};

struct FrameEstimates {
    std::uint64_t frame_index = 0;
    std::vector<SourceEstimate> estimates;
};

// Streams the audio through the correlation window and, once it is full,
// factorizes every bin, scans the grid and hands the per-frame estimates to
// the sink. Returns the number of frames emitted.
std::size_t run_locate(const SampleBlock& audio, const StftConfig& stft,
                       std::uint32_t window_frames, const NoiseModel& noise,
                       const SteeringField& steering, const SolverConfig& solver,
                       const MusicConfig& music, SolvePath path, unsigned threads,
                       const std::function<void(const FrameEstimates&)>& sink);

// File-level wrapper used by the command line tool: reads the configured
// input, builds or loads the noise model and steering field, and writes one
// json line per emitted frame. Output depends only on the inputs, so a rerun
// with identical inputs produces identical bytes.
std::size_t run_locate_to_stream(const PipelineConfig& cfg, std::ostream& out);

} // namespace ssl
