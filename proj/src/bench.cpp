#include "ssl/bench.hpp"

#include "ssl/parallel.hpp"
#include "ssl/rng.hpp"
#include "ssl/stft.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace ssl {

namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point start) {
    return std::chrono::duration<double>(clock_type::now() - start).count();
}

bool same_picks(const std::vector<SourceEstimate>& a, const std::vector<SourceEstimate>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].direction_index != b[i].direction_index) return false;
    return true;
}

} // namespace

// ---------------------------------------------------------------------------
// agreement between the two solver paths
// ---------------------------------------------------------------------------

AccuracyReport run_accuracy(const SampleBlock& audio, const StftConfig& stft,
                            std::uint32_t window_frames, const NoiseModel& noise,
                            const SteeringField& steering, const SolverConfig& solver,
                            const MusicConfig& music, unsigned threads, std::size_t max_frames) {
    const auto start = clock_type::now();
    steering.validate();
    noise.prepare_inverses(solver.pivoting);
    const DirectionTopology topo = DirectionTopology::build(steering.directions);
    CorrelationWindow window(window_frames);

    AccuracyReport rep;
    double sq_sum = 0;
    std::size_t value_count = 0;
    std::size_t consistent = 0;
    stft_stream(audio, stft, [&](const SpectrumFrame& frame) {
        window.push(frame);
        if (!window.filled() || rep.frames >= max_frames) return;
        const CorrelationSet r = window.normalized();

        const GsvdBatch<float> fast = gsvd(noise, r, solver, threads);
        const MusicSpectrum spec_f = calc_average_power<float>(fast, steering, music, true, threads);
        const GsvdBatch<double> exact = gsvd_reference(noise, r, solver, threads);
        const MusicSpectrum spec_d =
            calc_average_power<double>(exact, steering, music, true, threads);

        for (std::size_t b = 0; b < spec_f.bin_power.size(); ++b) {
            const auto& pf = spec_f.bin_power[b];
            const auto& pd = spec_d.bin_power[b];
            for (std::size_t d = 0; d < pf.size(); ++d) {
                const double diff = pf[d] - pd[d];
                sq_sum += diff * diff;
                rep.max_abs_diff = std::max(rep.max_abs_diff, std::abs(diff));
                ++value_count;
            }
        }
        const auto peaks_f = peak_search(spec_f.power, steering.directions, topo, music);
        const auto peaks_d = peak_search(spec_d.power, steering.directions, topo, music);
        if (same_picks(peaks_f, peaks_d)) ++consistent;
        ++rep.frames;
    });

    if (value_count > 0) rep.rmse = std::sqrt(sq_sum / double(value_count));
    if (rep.frames > 0) rep.consistency_pct = 100.0 * double(consistent) / double(rep.frames);
    rep.elapsed_s = seconds_since(start);
    return rep;
}

// ---------------------------------------------------------------------------
// stage clocks
// ---------------------------------------------------------------------------

namespace {

StageTiming time_one_pass(const SampleBlock& audio, const StftConfig& stft,
                          std::uint32_t window_frames, const NoiseModel& noise,
                          const SteeringField& steering, const SolverConfig& solver,
                          const MusicConfig& music, SolvePath path, unsigned threads,
                          const DirectionTopology& topo) {
    StageTiming t;
    CorrelationWindow window(window_frames);
    const std::size_t samples = audio.frame_count();
    t.audio_s = double(samples) / double(audio.sample_rate);

    const auto total_start = clock_type::now();
    stft_stream(audio, stft, [&](const SpectrumFrame& frame) {
        auto mark = clock_type::now();
        window.push(frame);
        const bool ready = window.filled();
        CorrelationSet r;
        if (ready) r = window.normalized();
        t.correlation_s += seconds_since(mark);
        if (!ready) return;

        MusicSpectrum spectrum;
        mark = clock_type::now();
        if (path == SolvePath::reference) {
            const GsvdBatch<double> basis = gsvd_reference(noise, r, solver, threads);
            t.factorization_s += seconds_since(mark);
            mark = clock_type::now();
            spectrum = calc_average_power<double>(basis, steering, music, false, threads);
        } else {
            const unsigned tc = path == SolvePath::naive ? 1 : threads;
            const GsvdBatch<float> basis = gsvd(noise, r, solver, tc);
            t.factorization_s += seconds_since(mark);
            mark = clock_type::now();
            spectrum = calc_average_power<float>(basis, steering, music, false, tc);
        }
        t.spectrum_s += seconds_since(mark);

        mark = clock_type::now();
        const auto peaks = peak_search(spectrum.power, steering.directions, topo, music);
        (void)peaks;
        t.peaks_s += seconds_since(mark);
        ++t.frames;
    });
    t.total_s = seconds_since(total_start);
    if (t.audio_s > 0) t.realtime_factor = t.total_s / t.audio_s;
    return t;
}

} // namespace

StageTiming run_pipeline_timing(const SampleBlock& audio, const StftConfig& stft,
                                std::uint32_t window_frames, const NoiseModel& noise,
                                const SteeringField& steering, const SolverConfig& solver,
                                const MusicConfig& music, SolvePath path, unsigned threads,
                                int repeats) {
    if (repeats < 1) throw ValidationError("timing needs at least one repeat");
    steering.validate();
    noise.prepare_inverses(solver.pivoting);
    const DirectionTopology topo = DirectionTopology::build(steering.directions);

    // warmup pass exercises caches and the thread pool path once
    time_one_pass(audio, stft, window_frames, noise, steering, solver, music, path, threads, topo);

    std::vector<StageTiming> runs;
    for (int i = 0; i < repeats; ++i)
        runs.push_back(time_one_pass(audio, stft, window_frames, noise, steering, solver, music,
                                     path, threads, topo));
    std::sort(runs.begin(), runs.end(),
              [](const StageTiming& a, const StageTiming& b) { return a.total_s < b.total_s; });
    return runs[runs.size() / 2];
}

// ---------------------------------------------------------------------------
// batched versus naive factorization
// ---------------------------------------------------------------------------

CMatrix<float> random_psd(std::uint32_t m, std::mt19937_64& rng, float ridge) {
    CMatrix<double> a(m, m);
    for (auto& z : a.data) z = cdouble(gaussian(rng), gaussian(rng));
    CMatrix<double> p = matmul(a, adjoint(a));
    const double inv = 1.0 / double(m);
    for (auto& z : p.data) z *= inv;
    CMatrix<float> out(m, m);
    for (std::size_t i = 0; i < p.data.size(); ++i)
        out.data[i] = cfloat(float(p.data[i].real()), float(p.data[i].imag()));
    for (std::uint32_t i = 0; i < m; ++i) out(i, i) += ridge;
    // exact symmetry of the stored values
    for (std::uint32_t i = 0; i < m; ++i)
        for (std::uint32_t j = i + 1; j < m; ++j) out(j, i) = std::conj(out(i, j));
    return out;
}

NoiseModel random_noise_model(std::uint32_t m, std::size_t bins, std::uint64_t seed) {
    NoiseModel n;
    n.k.m = m;
    for (std::size_t b = 0; b < bins; ++b) {
        std::mt19937_64 rng(mix_seed(seed, 0x4b00 + b));
        n.k.bins.push_back(random_psd(m, rng, 0.5f));
    }
    return n;
}

CorrelationSet random_correlation(std::uint32_t m, std::size_t bins, std::uint64_t seed) {
    CorrelationSet r;
    r.m = m;
    for (std::size_t b = 0; b < bins; ++b) {
        std::mt19937_64 rng(mix_seed(seed, 0x5200 + b));
        r.bins.push_back(random_psd(m, rng, 0.0f));
    }
    return r;
}

FactorizationBench run_factorization_bench(std::uint32_t m, std::size_t bins, unsigned threads,
                                           int repeats, std::uint64_t seed) {
    if (repeats < 1) throw ValidationError("benchmark needs at least one repeat");
    FactorizationBench out;
    out.m = m;
    out.bins = bins;
    out.threads = threads != 0 ? threads : default_thread_count();

    const NoiseModel noise = random_noise_model(m, bins, seed);
    const CorrelationSet r = random_correlation(m, bins, seed + 1);
    SolverConfig cfg;
    noise.prepare_inverses(cfg.pivoting); // shared setup, excluded from both timings

    // warmup
    gsvd(noise, r, cfg, out.threads);

    std::vector<double> naive_runs, batched_runs;
    for (int i = 0; i < repeats; ++i) {
        auto mark = clock_type::now();
        const auto a = gsvd(noise, r, cfg, 1);
        naive_runs.push_back(seconds_since(mark));
        mark = clock_type::now();
        const auto b = gsvd(noise, r, cfg, out.threads);
        batched_runs.push_back(seconds_since(mark));
        if (a.bins.size() != b.bins.size())
            throw NumericalError("benchmark paths disagree on bin count");
    }
    std::sort(naive_runs.begin(), naive_runs.end());
    std::sort(batched_runs.begin(), batched_runs.end());
    out.naive_s = naive_runs[naive_runs.size() / 2];
    out.batched_s = batched_runs[batched_runs.size() / 2];
    if (out.batched_s > 0) out.speedup = out.naive_s / out.batched_s;
    return out;
}

} // namespace ssl
