#include "ssl/pipeline.hpp"

#include "ssl/parallel.hpp"
#include "ssl/stft.hpp"
#include "ssl/wav.hpp"

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

namespace ssl {

namespace {

using nlohmann::json;

void parse_stft(const json& doc, StftConfig& stft) {
    if (doc.contains("frame_length")) stft.frame_length = doc.at("frame_length").get<std::uint32_t>();
    if (doc.contains("shift")) stft.shift = doc.at("shift").get<std::uint32_t>();
    if (doc.contains("window")) stft.window = window_from_name(doc.at("window").get<std::string>());
    if (doc.contains("bin_min")) stft.bin_min = doc.at("bin_min").get<std::uint32_t>();
    if (doc.contains("bin_max")) stft.bin_max = doc.at("bin_max").get<std::uint32_t>();
}

void parse_solver(const json& doc, SolverConfig& solver) {
    if (doc.contains("max_qr_sweeps")) solver.max_qr_sweeps = doc.at("max_qr_sweeps").get<std::uint32_t>();
    if (doc.contains("tolerance_scale")) solver.tolerance_scale = doc.at("tolerance_scale").get<float>();
    if (doc.contains("pivoting")) {
        const auto name = doc.at("pivoting").get<std::string>();
        if (name == "partial") solver.pivoting = Pivoting::partial;
        else if (name == "none") solver.pivoting = Pivoting::none;
        else throw ValidationError("unknown pivoting mode: " + name);
    }
    if (doc.contains("compute_residual")) solver.compute_residual = doc.at("compute_residual").get<bool>();
    if (doc.contains("canonical_subspaces"))
        solver.canonical_subspaces = doc.at("canonical_subspaces").get<bool>();
}

void parse_music(const json& doc, MusicConfig& music) {
    if (doc.contains("num_sources")) music.num_sources = doc.at("num_sources").get<std::uint32_t>();
    if (doc.contains("denominator_floor"))
        music.denominator_floor = doc.at("denominator_floor").get<float>();
    if (doc.contains("squared_denominator"))
        music.squared_denominator = doc.at("squared_denominator").get<bool>();
    if (doc.contains("low_power_ratio")) music.low_power_ratio = doc.at("low_power_ratio").get<float>();
}

void parse_scene(const json& doc, SceneSpec& scene) {
    if (doc.contains("duration_s")) scene.duration_s = doc.at("duration_s").get<double>();
    if (doc.contains("diffuse_level_db")) {
        scene.has_diffuse = true;
        scene.diffuse_level_db = doc.at("diffuse_level_db").get<double>();
    }
    if (doc.contains("sources")) {
        for (const auto& s : doc.at("sources")) {
            SourceSpec src;
            if (s.contains("azimuth_deg")) src.direction.azimuth_deg = s.at("azimuth_deg").get<double>();
            if (s.contains("elevation_deg"))
                src.direction.elevation_deg = s.at("elevation_deg").get<double>();
            if (s.contains("kind")) src.kind = source_kind_from_name(s.at("kind").get<std::string>());
            if (s.contains("frequency_hz")) src.frequency_hz = s.at("frequency_hz").get<double>();
            if (s.contains("level_db")) src.level_db = s.at("level_db").get<double>();
            if (s.contains("noise_role")) src.noise_role = s.at("noise_role").get<bool>();
            scene.sources.push_back(src);
        }
    }
}

} // namespace

PipelineConfig PipelineConfig::from_json_text(const std::string& text) {
    PipelineConfig cfg;
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config is not valid json: ") + e.what());
    }
    try {
        if (doc.contains("stft")) parse_stft(doc.at("stft"), cfg.stft);
        if (doc.contains("window_frames")) cfg.window_frames = doc.at("window_frames").get<std::uint32_t>();
        if (doc.contains("solver")) parse_solver(doc.at("solver"), cfg.solver);
        if (doc.contains("music")) parse_music(doc.at("music"), cfg.music);
        if (doc.contains("precision")) cfg.precision = doc.at("precision").get<std::string>();
        if (doc.contains("path")) cfg.path = doc.at("path").get<std::string>();
        if (doc.contains("threads")) cfg.threads = doc.at("threads").get<unsigned>();
        if (doc.contains("seed")) cfg.seed = doc.at("seed").get<std::uint64_t>();
        if (doc.contains("sample_rate")) cfg.sample_rate = doc.at("sample_rate").get<std::uint32_t>();
        if (doc.contains("input")) cfg.input = doc.at("input").get<std::string>();
        if (doc.contains("noise_model")) cfg.noise_model = doc.at("noise_model").get<std::string>();
        if (doc.contains("steering")) cfg.steering = doc.at("steering").get<std::string>();
        if (doc.contains("grid")) cfg.grid = doc.at("grid").get<std::string>();
        if (doc.contains("grid_step_deg")) cfg.grid_step_deg = doc.at("grid_step_deg").get<double>();
        if (doc.contains("sphere_count")) cfg.sphere_count = doc.at("sphere_count").get<std::size_t>();
        if (doc.contains("geometry")) {
            const auto& g = doc.at("geometry");
            if (g.is_string()) {
                cfg.has_geometry_file = true;
                cfg.geometry_file = g.get<std::string>();
            } else {
                cfg.has_geometry_preset = true;
                if (g.contains("kind")) cfg.geometry_kind = g.at("kind").get<std::string>();
                if (g.contains("count")) cfg.geometry_count = g.at("count").get<std::uint32_t>();
                if (g.contains("radius")) cfg.geometry_radius = g.at("radius").get<double>();
            }
        }
        if (doc.contains("scene")) {
            cfg.has_scene = true;
            parse_scene(doc.at("scene"), cfg.scene);
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad config value: ") + e.what());
    }
    cfg.scene.seed = cfg.seed;
    return cfg;
}

PipelineConfig PipelineConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    PipelineConfig cfg = from_json_text(buf.str());
    cfg.apply_env_overrides();
    return cfg;
}

void PipelineConfig::apply_env_overrides() {
    const auto text = [](const char* name) -> std::optional<std::string> {
        const char* v = std::getenv(name);
        if (v == nullptr || *v == '\0') return std::nullopt;
        return std::string(v);
    };
    const auto number = [&](const char* name) -> std::optional<std::uint64_t> {
        const auto v = text(name);
        if (!v) return std::nullopt;
        try {
            std::size_t pos = 0;
            const std::uint64_t parsed = std::stoull(*v, &pos);
            if (pos != v->size()) throw std::invalid_argument("trailing characters");
            return parsed;
        } catch (const std::exception&) {
            throw ValidationError(std::string(name) + " is not a valid integer: " + *v);
        }
    };
    if (auto v = text("SSL_PRECISION")) precision = *v;
    if (auto v = text("SSL_PATH")) path = *v;
    if (auto v = number("SSL_THREADS")) threads = unsigned(*v);
    if (auto v = number("SSL_WINDOW_FRAMES")) window_frames = std::uint32_t(*v);
    if (auto v = number("SSL_NUM_SOURCES")) music.num_sources = std::uint32_t(*v);
    if (auto v = number("SSL_SEED")) {
        seed = *v;
        scene.seed = *v;
    }
    if (auto v = text("SSL_NOISE_MODEL")) noise_model = *v;
    if (auto v = text("SSL_STEERING")) steering = *v;
}

void PipelineConfig::validate() const {
    stft.validate();
    solver.validate();
    music.validate();
    if (window_frames == 0) throw ValidationError("window_frames must be at least 1");
    if (sample_rate == 0) throw ValidationError("sample_rate must be positive");
    if (precision != "single" && precision != "double")
        throw ValidationError("precision must be single or double");
    if (path != "batched" && path != "naive" && path != "reference")
        throw ValidationError("path must be batched, naive or reference");
    if (grid != "azimuth" && grid != "sphere")
        throw ValidationError("grid must be azimuth or sphere");
    if (!(grid_step_deg > 0)) throw ValidationError("grid_step_deg must be positive");
    if (sphere_count == 0) throw ValidationError("sphere_count must be at least 1");
    if (has_geometry_preset && geometry_kind != "circular" && geometry_kind != "spherical")
        throw ValidationError("geometry kind must be circular or spherical");
    if (has_scene) scene.validate();
}

SolvePath PipelineConfig::resolved_path() const {
    if (precision == "double" || path == "reference") return SolvePath::reference;
    if (path == "naive") return SolvePath::naive;
    return SolvePath::batched;
}

unsigned PipelineConfig::resolved_threads() const {
    return threads != 0 ? threads : default_thread_count();
}

ArrayGeometry PipelineConfig::resolve_geometry(std::uint32_t fallback_channels) const {
    if (has_geometry_file) return ArrayGeometry::from_json_file(geometry_file);
    if (has_geometry_preset) {
        if (geometry_kind == "spherical")
            return ArrayGeometry::spherical(geometry_count, geometry_radius);
        return ArrayGeometry::circular(geometry_count, geometry_radius);
    }
    if (fallback_channels == 0)
        throw ValidationError("no geometry configured and no channel count to fall back on");
    return ArrayGeometry::circular(fallback_channels, geometry_radius);
}

std::vector<Direction> PipelineConfig::resolve_grid() const {
    if (grid == "sphere") return sphere_grid(sphere_count);
    return azimuth_grid(grid_step_deg);
}

// ---------------------------------------------------------------------------

std::size_t run_locate(const SampleBlock& audio, const StftConfig& stft,
                       std::uint32_t window_frames, const NoiseModel& noise,
                       const SteeringField& steering, const SolverConfig& solver,
                       const MusicConfig& music, SolvePath path, unsigned threads,
                       const std::function<void(const FrameEstimates&)>& sink) {
    steering.validate();
    if (window_frames == 0) throw ValidationError("window_frames must be at least 1");
    if (noise.k.m != steering.m)
        throw ValidationError("noise model channel count does not match steering field");
    if (noise.k.bins.size() != stft.bin_count())
        throw ValidationError("noise model bin count does not match the analysis band");

    const DirectionTopology topo = DirectionTopology::build(steering.directions);
    noise.prepare_inverses(solver.pivoting);
    CorrelationWindow window(window_frames);

    std::size_t emitted = 0;
    stft_stream(audio, stft, [&](const SpectrumFrame& frame) {
        window.push(frame);
        if (!window.filled()) return;
        const CorrelationSet r = window.normalized();
        MusicSpectrum spectrum;
        if (path == SolvePath::reference) {
            const GsvdBatch<double> basis = gsvd_reference(noise, r, solver, threads);
            spectrum = calc_average_power<double>(basis, steering, music, false, threads);
        } else {
            const unsigned t = path == SolvePath::naive ? 1 : threads;
            const GsvdBatch<float> basis = gsvd(noise, r, solver, t);
            spectrum = calc_average_power<float>(basis, steering, music, false, t);
        }
        FrameEstimates fe;
        fe.frame_index = frame.frame_index;
        fe.estimates = peak_search(spectrum.power, steering.directions, topo, music);
        sink(fe);
        ++emitted;
    });
    return emitted;
}

std::size_t run_locate_to_stream(const PipelineConfig& cfg, std::ostream& out) {
    cfg.validate();
    if (cfg.input.empty()) throw ValidationError("locate needs an input wav path");
    const SampleBlock audio = read_wav(cfg.input);
    const auto m = std::uint32_t(audio.channel_count());

    const NoiseModel noise = cfg.noise_model.empty()
                                 ? NoiseModel::identity(m, cfg.stft.bin_count())
                                 : NoiseModel::from_file(cfg.noise_model);
    SteeringField steering;
    if (!cfg.steering.empty()) {
        steering = load_steering(cfg.steering);
    } else {
        steering = make_steering(cfg.resolve_geometry(m), cfg.stft, audio.sample_rate,
                                 cfg.resolve_grid());
    }

    std::size_t count = run_locate(
        audio, cfg.stft, cfg.window_frames, noise, steering, cfg.solver, cfg.music,
        cfg.resolved_path(), cfg.resolved_threads(), [&](const FrameEstimates& fe) {
            nlohmann::json line;
            line["frame"] = fe.frame_index;
            auto arr = nlohmann::json::array();
            for (const auto& est : fe.estimates) {
                nlohmann::json e;
                e["azimuth_deg"] = est.direction.azimuth_deg;
                e["elevation_deg"] = est.direction.elevation_deg;
                e["power"] = est.power;
                e["low_power"] = est.low_power;
                e["direction"] = est.direction_index;
                arr.push_back(std::move(e));
            }
            line["estimates"] = std::move(arr);
            out << line.dump() << '\n';
        });
    out.flush();
    return count;
}

} // namespace ssl
