// Command line front end: scene synthesis, localization, benchmarks and
// input verification, sharing one json configuration format.

#include "ssl/bench.hpp"
#include "ssl/parallel.hpp"
#include "ssl/pipeline.hpp"
#include "ssl/stft.hpp"
#include "ssl/wav.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>

namespace {

using ssl::PipelineConfig;

std::ostream& resolve_out(const std::string& path, std::ofstream& file) {
    if (path.empty() || path == "-") return std::cout;
    file.open(path, std::ios::binary);
    if (!file) throw ssl::IoError("cannot open " + path + " for writing");
    return file;
}

struct Overrides {
    CLI::Option* precision = nullptr;
    CLI::Option* path = nullptr;
    CLI::Option* threads = nullptr;
    CLI::Option* seed = nullptr;
    CLI::Option* input = nullptr;
    std::string precision_v, path_v, input_v;
    unsigned threads_v = 0;
    std::uint64_t seed_v = 0;

    void add_to(CLI::App* cmd, bool with_input) {
        precision = cmd->add_option("--precision", precision_v, "single or double");
        path = cmd->add_option("--path", path_v, "batched, naive or reference");
        threads = cmd->add_option("--threads", threads_v, "worker count, 0 = all cores");
        seed = cmd->add_option("--seed", seed_v, "generator seed override");
        if (with_input) input = cmd->add_option("--input", input_v, "input wav path");
    }

    void apply(PipelineConfig& cfg) const {
        if (precision && precision->count()) cfg.precision = precision_v;
        if (path && path->count()) cfg.path = path_v;
        if (threads && threads->count()) cfg.threads = threads_v;
        if (seed && seed->count()) {
            cfg.seed = seed_v;
            cfg.scene.seed = seed_v;
        }
        if (input && input->count()) cfg.input = input_v;
    }
};

PipelineConfig load_config(const std::string& path) {
    if (path.empty()) {
        PipelineConfig cfg;
        cfg.apply_env_overrides();
        return cfg;
    }
    return PipelineConfig::from_file(path);
}

int run_locate_cmd(const std::string& config_path, const Overrides& ov, const std::string& out_path) {
    PipelineConfig cfg = load_config(config_path);
    ov.apply(cfg);
    std::ofstream file;
    std::ostream& out = resolve_out(out_path, file);
    const std::size_t frames = ssl::run_locate_to_stream(cfg, out);
    std::cerr << "emitted " << frames << " frames\n";
    return 0;
}

int run_synth_cmd(const std::string& config_path, const Overrides& ov, const std::string& out_path,
                  const std::string& noise_out, const std::string& steering_out) {
    PipelineConfig cfg = load_config(config_path);
    ov.apply(cfg);
    cfg.validate();
    if (!cfg.has_scene) throw ssl::ValidationError("synth needs a scene in the config");
    const ssl::ArrayGeometry geom = cfg.resolve_geometry(cfg.geometry_count);

    if (!out_path.empty()) {
        const ssl::SampleBlock block =
            ssl::synthesize_scene(geom, cfg.scene, cfg.stft, cfg.sample_rate);
        ssl::write_wav(out_path, block);
        std::cerr << "wrote " << block.frame_count() << " samples x " << block.channel_count()
                  << " channels to " << out_path << "\n";
    }
    if (!noise_out.empty()) {
        const ssl::NoiseModel model =
            ssl::capture_noise_model(geom, cfg.scene, cfg.stft, cfg.sample_rate);
        ssl::save_correlation(noise_out, model.k, 0);
        std::cerr << "wrote noise model to " << noise_out << "\n";
    }
    if (!steering_out.empty()) {
        const ssl::SteeringField field =
            ssl::make_steering(geom, cfg.stft, cfg.sample_rate, cfg.resolve_grid());
        ssl::save_steering(field, steering_out);
        std::cerr << "wrote steering field (" << field.directions.size() << " directions) to "
                  << steering_out << "\n";
    }
    if (out_path.empty() && noise_out.empty() && steering_out.empty())
        throw ssl::ValidationError("synth has nothing to do: pass --out, --noise-out or --steering-out");
    return 0;
}

// builds the workload described by the config (or a small default scene)
void bench_inputs(const PipelineConfig& cfg, ssl::SampleBlock& audio, ssl::NoiseModel& noise,
                  ssl::SteeringField& steering) {
    PipelineConfig work = cfg;
    if (!work.has_scene) {
        work.has_scene = true;
        work.scene.duration_s = 2.0;
        work.scene.seed = work.seed;
        work.scene.has_diffuse = true;
        work.scene.diffuse_level_db = -30.0;
        ssl::SourceSpec src;
        src.direction = {40.0, 0.0};
        src.kind = ssl::SourceKind::white;
        src.level_db = 0.0;
        work.scene.sources.push_back(src);
    }
    const ssl::ArrayGeometry geom = work.resolve_geometry(work.geometry_count);
    audio = ssl::synthesize_scene(geom, work.scene, work.stft, work.sample_rate);
    noise = work.noise_model.empty()
                ? ssl::NoiseModel::identity(geom.channel_count(), work.stft.bin_count())
                : ssl::NoiseModel::from_file(work.noise_model);
    steering = work.steering.empty()
                   ? ssl::make_steering(geom, work.stft, work.sample_rate, work.resolve_grid())
                   : ssl::load_steering(work.steering);
}

int run_bench_cmd(const std::string& config_path, const Overrides& ov, const std::string& mode,
                  const std::string& out_path, std::uint32_t m, std::size_t bins, int repeats) {
    PipelineConfig cfg = load_config(config_path);
    ov.apply(cfg);
    cfg.validate();
    std::ofstream file;
    std::ostream& out = resolve_out(out_path, file);
    nlohmann::json rep;

    if (mode == "factorization") {
        const auto r = ssl::run_factorization_bench(m, bins, cfg.resolved_threads(), repeats,
                                                    cfg.seed + 1234);
        rep["mode"] = "factorization";
        rep["m"] = r.m;
        rep["bins"] = r.bins;
        rep["threads"] = r.threads;
        rep["naive_s"] = r.naive_s;
        rep["batched_s"] = r.batched_s;
        rep["speedup"] = r.speedup;
    } else if (mode == "timing") {
        ssl::SampleBlock audio;
        ssl::NoiseModel noise;
        ssl::SteeringField steering;
        bench_inputs(cfg, audio, noise, steering);
        const auto t = ssl::run_pipeline_timing(audio, cfg.stft, cfg.window_frames, noise, steering,
                                                cfg.solver, cfg.music, cfg.resolved_path(),
                                                cfg.resolved_threads(), repeats);
        rep["mode"] = "timing";
        rep["path"] = cfg.path;
        rep["threads"] = cfg.resolved_threads();
        rep["frames"] = t.frames;
        rep["audio_s"] = t.audio_s;
        rep["correlation_s"] = t.correlation_s;
        rep["factorization_s"] = t.factorization_s;
        rep["spectrum_s"] = t.spectrum_s;
        rep["peaks_s"] = t.peaks_s;
        rep["total_s"] = t.total_s;
        rep["realtime_factor"] = t.realtime_factor;
    } else if (mode == "accuracy") {
        ssl::SampleBlock audio;
        ssl::NoiseModel noise;
        ssl::SteeringField steering;
        bench_inputs(cfg, audio, noise, steering);
        const auto a = ssl::run_accuracy(audio, cfg.stft, cfg.window_frames, noise, steering,
                                         cfg.solver, cfg.music, cfg.resolved_threads());
        rep["mode"] = "accuracy";
        rep["frames"] = a.frames;
        rep["rmse"] = a.rmse;
        rep["max_abs_diff"] = a.max_abs_diff;
        rep["consistency_pct"] = a.consistency_pct;
        rep["elapsed_s"] = a.elapsed_s;
    } else {
        throw ssl::ValidationError("unknown bench mode: " + mode);
    }
    out << rep.dump(2) << '\n';
    return 0;
}

int run_verify_cmd(const std::string& config_path, const Overrides& ov) {
    PipelineConfig cfg = load_config(config_path);
    ov.apply(cfg);
    cfg.validate();
    std::cout << "config: ok\n";
    if (!cfg.input.empty()) {
        const ssl::SampleBlock block = ssl::read_wav(cfg.input);
        block.validate();
        std::cout << "input: " << block.channel_count() << " channels, " << block.frame_count()
                  << " samples at " << block.sample_rate << " Hz\n";
    }
    if (!cfg.noise_model.empty()) {
        const ssl::NoiseModel model = ssl::NoiseModel::from_file(cfg.noise_model);
        std::cout << "noise model: " << model.k.m << " channels, " << model.k.bins.size()
                  << " bins, positive definite\n";
    }
    if (!cfg.steering.empty()) {
        const ssl::SteeringField field = ssl::load_steering(cfg.steering);
        std::cout << "steering: " << field.m << " channels, " << field.directions.size()
                  << " directions, bins " << field.bin_min << ".." << field.bin_max << "\n";
    }
    if (cfg.has_geometry_file) {
        const ssl::ArrayGeometry geom = ssl::ArrayGeometry::from_json_file(cfg.geometry_file);
        std::cout << "geometry: " << geom.channel_count() << " microphones\n";
    }
    std::cout << "verify: all inputs ok\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"noise-robust sound source localization toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_path, noise_out, steering_out;
    std::string bench_mode = "timing";
    std::uint32_t bench_m = 60;
    std::size_t bench_bins = 73;
    int bench_repeats = 5;

    auto* locate = app.add_subcommand("locate", "stream direction estimates from a wav file");
    locate->add_option("--config", config_path, "json configuration file");
    locate->add_option("--out", out_path, "output path, - for stdout");
    Overrides locate_ov;
    locate_ov.add_to(locate, true);

    auto* synth = app.add_subcommand("synth", "render a synthetic scene");
    synth->add_option("--config", config_path, "json configuration file")->required();
    synth->add_option("--out", out_path, "output wav path");
    synth->add_option("--noise-out", noise_out, "write the captured noise model here");
    synth->add_option("--steering-out", steering_out, "write the steering field here");
    Overrides synth_ov;
    synth_ov.add_to(synth, false);

    auto* bench = app.add_subcommand("bench", "timing and agreement measurements");
    bench->add_option("--config", config_path, "json configuration file");
    bench->add_option("--mode", bench_mode, "timing, accuracy or factorization");
    bench->add_option("--out", out_path, "report path, - for stdout");
    bench->add_option("--m", bench_m, "channel count for factorization mode");
    bench->add_option("--bins", bench_bins, "bin count for factorization mode");
    bench->add_option("--repeats", bench_repeats, "measurement repeats");
    Overrides bench_ov;
    bench_ov.add_to(bench, false);

    auto* verify = app.add_subcommand("verify", "validate a config and its referenced files");
    verify->add_option("--config", config_path, "json configuration file");
    Overrides verify_ov;
    verify_ov.add_to(verify, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (app.got_subcommand(locate)) return run_locate_cmd(config_path, locate_ov, out_path);
        if (app.got_subcommand(synth))
            return run_synth_cmd(config_path, synth_ov, out_path, noise_out, steering_out);
        if (app.got_subcommand(bench))
            return run_bench_cmd(config_path, bench_ov, bench_mode, out_path, bench_m, bench_bins,
                                 bench_repeats);
        if (app.got_subcommand(verify)) return run_verify_cmd(config_path, verify_ov);
    } catch (const ssl::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const ssl::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    } catch (const ssl::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
