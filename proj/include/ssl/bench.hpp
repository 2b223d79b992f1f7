#pragma once

// Measurement harness: cross-path agreement metrics, wall-clock stage
// timings for the streaming pipeline, and a sequential-versus-parallel
// comparison of the batched factorization.

#include "ssl/pipeline.hpp"

#include <random>

namespace ssl {

// Runs the single-precision batched path and the double-precision exact path
// over the same audio and pools every per-bin grid value into one error
// figure. A frame counts as consistent when both paths rank the same
// directions in the same order.
struct AccuracyReport {
    std::size_t frames = 0;
    double rmse = 0;
    double max_abs_diff = 0;
    double consistency_pct = 0;
    double elapsed_s = 0;
};

AccuracyReport run_accuracy(const SampleBlock& audio, const StftConfig& stft,
                            std::uint32_t window_frames, const NoiseModel& noise,
                            const SteeringField& steering, const SolverConfig& solver,
                            const MusicConfig& music, unsigned threads,
                            std::size_t max_frames = std::size_t(-1));

struct StageTiming {
    double audio_s = 0;
    double correlation_s = 0; // transform + window upkeep + normalization
    double factorization_s = 0;
    double spectrum_s = 0;
    double peaks_s = 0;
    double total_s = 0;
    double realtime_factor = 0; // total_s / audio_s
    std::size_t frames = 0;
};

// Full pass over the audio with per-stage clocks; repeated `repeats` times
// after one warmup pass, reporting the repeat with the median total.
StageTiming run_pipeline_timing(const SampleBlock& audio, const StftConfig& stft,
                                std::uint32_t window_frames, const NoiseModel& noise,
                                const SteeringField& steering, const SolverConfig& solver,
                                const MusicConfig& music, SolvePath path, unsigned threads,
                                int repeats = 5);

struct FactorizationBench {
    std::uint32_t m = 0;
    std::size_t bins = 0;
    unsigned threads = 0;
    double naive_s = 0;   // one thread, plain loop over bins
    double batched_s = 0; // worker pool across bins
    double speedup = 0;
};

// Times the same randomized batch both ways; medians over `repeats` runs.
FactorizationBench run_factorization_bench(std::uint32_t m, std::size_t bins, unsigned threads,
                                           int repeats = 5, std::uint64_t seed = 1234);

// deterministic random inputs shared by benchmarks and stress tests
CMatrix<float> random_psd(std::uint32_t m, std::mt19937_64& rng, float ridge = 0.0f);
NoiseModel random_noise_model(std::uint32_t m, std::size_t bins, std::uint64_t seed);
CorrelationSet random_correlation(std::uint32_t m, std::size_t bins, std::uint64_t seed);

} // namespace ssl
