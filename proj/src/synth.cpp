#include "ssl/synth.hpp"

#include "ssl/fft.hpp"
#include "ssl/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

namespace ssl {

namespace {

cdouble steer_entry(const std::array<double, 3>& mic, const std::array<double, 3>& u, double f,
                    double c) {
    const double tau = -(u[0] * mic[0] + u[1] * mic[1] + u[2] * mic[2]) / c;
    const double ang = -2.0 * M_PI * f * tau;
    return {std::cos(ang), std::sin(ang)};
}

// inverse of the forward half-spectrum transform, power-of-two lengths only
std::vector<double> irfft_pow2(const std::vector<cdouble>& half, std::size_t n) {
    std::vector<cdouble> full(n);
    full[0] = std::conj(half[0]);
    full[n / 2] = std::conj(half[n / 2]);
    for (std::size_t k = 1; k < n / 2; ++k) {
        full[k] = std::conj(half[k]);
        full[n - k] = half[k];
    }
    detail::fft_pow2(full);
    std::vector<double> x(n);
    const double inv = 1.0 / double(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = full[i].real() * inv;
    return x;
}

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

} // namespace

// ---------------------------------------------------------------------------
// geometry and grids
// ---------------------------------------------------------------------------

void ArrayGeometry::validate() const {
    if (mics.empty()) throw ValidationError("array geometry has no microphones");
    for (const auto& p : mics)
        if (!std::isfinite(p[0]) || !std::isfinite(p[1]) || !std::isfinite(p[2]))
            throw ValidationError("array geometry has a non-finite coordinate");
}

ArrayGeometry ArrayGeometry::circular(std::uint32_t count, double radius) {
    if (count == 0) throw ValidationError("circular geometry needs at least one microphone");
    ArrayGeometry g;
    for (std::uint32_t i = 0; i < count; ++i) {
        const double ang = 2.0 * M_PI * double(i) / double(count);
        g.mics.push_back({radius * std::cos(ang), radius * std::sin(ang), 0.0});
    }
    return g;
}

ArrayGeometry ArrayGeometry::spherical(std::uint32_t count, double radius) {
    if (count == 0) throw ValidationError("spherical geometry needs at least one microphone");
    ArrayGeometry g;
    const double ga = M_PI * (3.0 - std::sqrt(5.0));
    for (std::uint32_t i = 0; i < count; ++i) {
        const double z = 1.0 - 2.0 * (double(i) + 0.5) / double(count);
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double az = double(i) * ga;
        g.mics.push_back({radius * r * std::cos(az), radius * r * std::sin(az), radius * z});
    }
    return g;
}

ArrayGeometry ArrayGeometry::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("bad geometry file " + path + ": " + e.what());
    }
    ArrayGeometry g;
    try {
        for (const auto& p : doc.at("mics"))
            g.mics.push_back({p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()});
    } catch (const nlohmann::json::exception& e) {
        throw IoError("bad geometry file " + path + ": " + e.what());
    }
    g.validate();
    return g;
}

std::vector<Direction> azimuth_grid(double step_deg) {
    if (!(step_deg > 0)) throw ValidationError("azimuth grid step must be positive");
    std::vector<Direction> out;
    const std::size_t count = std::size_t(std::floor(360.0 / step_deg + 1e-9));
    for (std::size_t i = 0; i < count; ++i) out.push_back({double(i) * step_deg, 0.0});
    return out;
}

std::vector<Direction> sphere_grid(std::size_t count) {
    if (count == 0) throw ValidationError("sphere grid needs at least one direction");
    std::vector<Direction> out;
    const double ga = M_PI * (3.0 - std::sqrt(5.0));
    for (std::size_t i = 0; i < count; ++i) {
        const double z = 1.0 - 2.0 * (double(i) + 0.5) / double(count);
        double az = std::fmod(double(i) * ga, 2.0 * M_PI);
        if (az < 0) az += 2.0 * M_PI;
        out.push_back({az * 180.0 / M_PI, std::asin(std::clamp(z, -1.0, 1.0)) * 180.0 / M_PI});
    }
    return out;
}

SteeringField make_steering(const ArrayGeometry& geometry, const StftConfig& stft,
                            std::uint32_t sample_rate, const std::vector<Direction>& directions,
                            double speed_of_sound) {
    geometry.validate();
    stft.validate();
    if (directions.empty()) throw ValidationError("steering needs at least one direction");
    if (!(speed_of_sound > 0)) throw ValidationError("speed of sound must be positive");

    SteeringField field;
    field.m = geometry.channel_count();
    field.bin_min = stft.bin_min;
    field.bin_max = stft.bin_max;
    field.directions = directions;
    field.vectors.resize(directions.size() * field.bin_count() * field.m);
    for (std::size_t d = 0; d < directions.size(); ++d) {
        const auto u = direction_unit(directions[d]);
        for (std::uint32_t bin = stft.bin_min; bin <= stft.bin_max; ++bin) {
            const double f = double(bin) * double(sample_rate) / double(stft.frame_length);
            cfloat* h = field.at(d, bin - stft.bin_min);
            for (std::size_t mic = 0; mic < field.m; ++mic) {
                const cdouble v = steer_entry(geometry.mics[mic], u, f, speed_of_sound);
                h[mic] = cfloat(float(v.real()), float(v.imag()));
            }
        }
    }
    return field;
}

// ---------------------------------------------------------------------------
// scene rendering
// ---------------------------------------------------------------------------

SourceKind source_kind_from_name(const std::string& name) {
    if (name == "tone") return SourceKind::tone;
    if (name == "white") return SourceKind::white;
    if (name == "multitone") return SourceKind::multitone;
    throw ValidationError("unknown source kind: " + name);
}

std::string source_kind_name(SourceKind kind) {
    switch (kind) {
    case SourceKind::tone: return "tone";
    case SourceKind::white: return "white";
    case SourceKind::multitone: return "multitone";
    }
    return "tone";
}

void SceneSpec::validate() const {
    if (!(duration_s > 0)) throw ValidationError("scene duration must be positive");
    for (const auto& s : sources) {
        if (s.kind == SourceKind::tone && !(s.frequency_hz > 0))
            throw ValidationError("tone source needs a positive frequency");
        if (!std::isfinite(s.level_db)) throw ValidationError("source level must be finite");
    }
}

namespace {

void add_tone(std::vector<std::vector<double>>& acc, const ArrayGeometry& geom,
              const SourceSpec& src, std::uint32_t sr, std::mt19937_64& rng) {
    const double amp = std::sqrt(2.0) * std::pow(10.0, src.level_db / 20.0);
    const double phi0 = 2.0 * M_PI * uniform01(rng);
    const auto u = direction_unit(src.direction);
    const double w = 2.0 * M_PI * src.frequency_hz;
    for (std::size_t mic = 0; mic < acc.size(); ++mic) {
        const auto& p = geom.mics[mic];
        const double tau = -(u[0] * p[0] + u[1] * p[1] + u[2] * p[2]) / kSpeedOfSound;
        auto& chan = acc[mic];
        for (std::size_t n = 0; n < chan.size(); ++n)
            chan[n] += amp * std::cos(w * (double(n) / double(sr) - tau) + phi0);
    }
}

void add_white(std::vector<std::vector<double>>& acc, const ArrayGeometry& geom,
               const SourceSpec& src, std::uint32_t sr, std::mt19937_64& rng) {
    const std::size_t total = acc[0].size();
    const std::size_t nfft = next_pow2(total);
    const double sigma = std::pow(10.0, src.level_db / 20.0);
    // per-bin spectral deviation that renders to unit-variance time samples
    const double scale = sigma * std::sqrt(double(nfft));
    std::vector<cdouble> base(nfft / 2 + 1, cdouble(0, 0));
    for (std::size_t k = 1; k < nfft / 2; ++k) {
        const double re = gaussian(rng);
        const double im = gaussian(rng);
        base[k] = cdouble(re * scale * M_SQRT1_2, im * scale * M_SQRT1_2);
    }
    const auto u = direction_unit(src.direction);
    std::vector<cdouble> spectrum(nfft / 2 + 1);
    for (std::size_t mic = 0; mic < acc.size(); ++mic) {
        const auto& p = geom.mics[mic];
        const double tau = -(u[0] * p[0] + u[1] * p[1] + u[2] * p[2]) / kSpeedOfSound;
        spectrum[0] = cdouble(0, 0);
        spectrum[nfft / 2] = cdouble(0, 0);
        for (std::size_t k = 1; k < nfft / 2; ++k) {
            const double f = double(k) * double(sr) / double(nfft);
            const double ang = -2.0 * M_PI * f * tau;
            spectrum[k] = base[k] * cdouble(std::cos(ang), std::sin(ang));
        }
        const auto x = irfft_pow2(spectrum, nfft);
        auto& chan = acc[mic];
        for (std::size_t n = 0; n < chan.size(); ++n) chan[n] += x[n];
    }
}

void add_multitone(std::vector<std::vector<double>>& acc, const ArrayGeometry& geom,
                   const SourceSpec& src, const StftConfig& stft, std::uint32_t sr,
                   std::mt19937_64& rng) {
    const std::size_t total = acc[0].size();
    const std::size_t frame = stft.frame_length;
    const std::size_t frames = total / frame;
    const std::size_t bcount = stft.bin_count();
    const double sigma = std::pow(10.0, src.level_db / 20.0);
    // calibrated so the rendered time signal has rms sigma
    const double scale = sigma * double(frame) / std::sqrt(2.0 * double(bcount));
    const auto u = direction_unit(src.direction);
    const std::size_t m = acc.size();

    // per-mic phases reproduce the stored steering values exactly: computed
    // in double, rounded to single, then widened again
    std::vector<cdouble> phases(bcount * m);
    for (std::uint32_t bin = stft.bin_min; bin <= stft.bin_max; ++bin) {
        const double f = double(bin) * double(sr) / double(frame);
        for (std::size_t mic = 0; mic < m; ++mic) {
            const cdouble v = steer_entry(geom.mics[mic], u, f, kSpeedOfSound);
            const cfloat vf(float(v.real()), float(v.imag()));
            phases[(bin - stft.bin_min) * m + mic] = cdouble(vf.real(), vf.imag());
        }
    }

    std::vector<std::vector<cdouble>> spectrum(m);
    for (auto& s : spectrum) s.assign(frame / 2 + 1, cdouble(0, 0));
    for (std::size_t fr = 0; fr < frames; ++fr) {
        for (auto& s : spectrum) std::fill(s.begin(), s.end(), cdouble(0, 0));
        for (std::uint32_t bin = stft.bin_min; bin <= stft.bin_max; ++bin) {
            const double re = gaussian(rng);
            const double im = gaussian(rng);
            const cdouble amp(re * scale * M_SQRT1_2, im * scale * M_SQRT1_2);
            const cdouble* ph = &phases[(bin - stft.bin_min) * m];
            for (std::size_t mic = 0; mic < m; ++mic) spectrum[mic][bin] = amp * ph[mic];
        }
        for (std::size_t mic = 0; mic < m; ++mic) {
            const auto x = irfft_pow2(spectrum[mic], frame);
            double* dst = &acc[mic][fr * frame];
            for (std::size_t n = 0; n < frame; ++n) dst[n] += x[n];
        }
    }
}

} // namespace

SampleBlock synthesize_scene(const ArrayGeometry& geometry, const SceneSpec& scene,
                             const StftConfig& stft, std::uint32_t sample_rate) {
    geometry.validate();
    scene.validate();
    stft.validate();
    if (sample_rate == 0) throw ValidationError("sample rate must be positive");

    const std::uint32_t m = geometry.channel_count();
    std::size_t total = std::size_t(std::llround(scene.duration_s * double(sample_rate)));
    const bool any_multi =
        std::any_of(scene.sources.begin(), scene.sources.end(),
                    [](const SourceSpec& s) { return s.kind == SourceKind::multitone; });
    if (any_multi) {
        if (stft.window != WindowKind::rectangular || stft.shift != stft.frame_length)
            throw ValidationError(
                "multitone sources need a rectangular window with shift equal to frame_length");
        total = (total / stft.frame_length) * stft.frame_length;
        if (total == 0) total = stft.frame_length;
    }
    if (total == 0) throw ValidationError("scene duration is too short for one sample");
    for (const auto& s : scene.sources)
        if (s.kind == SourceKind::tone && s.frequency_hz >= double(sample_rate) / 2.0)
            throw ValidationError("tone frequency exceeds the Nyquist limit");

    std::vector<std::vector<double>> acc(m, std::vector<double>(total, 0.0));
    for (std::size_t i = 0; i < scene.sources.size(); ++i) {
        const auto& src = scene.sources[i];
        std::mt19937_64 rng(mix_seed(scene.seed, i));
        switch (src.kind) {
        case SourceKind::tone: add_tone(acc, geometry, src, sample_rate, rng); break;
        case SourceKind::white: add_white(acc, geometry, src, sample_rate, rng); break;
        case SourceKind::multitone:
            add_multitone(acc, geometry, src, stft, sample_rate, rng);
            break;
        }
    }
    if (scene.has_diffuse) {
        const double sigma = std::pow(10.0, scene.diffuse_level_db / 20.0);
        for (std::uint32_t mic = 0; mic < m; ++mic) {
            std::mt19937_64 rng(mix_seed(scene.seed, 0x10000ull + mic));
            auto& chan = acc[mic];
            for (std::size_t n = 0; n < total; ++n) chan[n] += sigma * gaussian(rng);
        }
    }

    SampleBlock block;
    block.sample_rate = sample_rate;
    block.channels.resize(m);
    for (std::uint32_t mic = 0; mic < m; ++mic) {
        block.channels[mic].resize(total);
        for (std::size_t n = 0; n < total; ++n) block.channels[mic][n] = float(acc[mic][n]);
    }
    return block;
}

NoiseModel capture_noise_model(const ArrayGeometry& geometry, const SceneSpec& scene,
                               const StftConfig& stft, std::uint32_t sample_rate) {
    SceneSpec noise_scene = scene;
    noise_scene.sources.clear();
    for (const auto& s : scene.sources)
        if (s.noise_role) noise_scene.sources.push_back(s);
    if (noise_scene.sources.empty() && !scene.has_diffuse)
        throw ValidationError("noise capture needs noise-role sources or a diffuse floor");

    const SampleBlock block = synthesize_scene(geometry, noise_scene, stft, sample_rate);
    const std::uint32_t m = geometry.channel_count();
    const std::size_t bins = stft.bin_count();
    std::vector<CMatrix<double>> acc(bins, CMatrix<double>(m, m));
    std::size_t frames = 0;
    stft_stream(block, stft, [&](const SpectrumFrame& fr) {
        for (std::size_t b = 0; b < bins; ++b) {
            auto& a = acc[b];
            for (std::size_t i = 0; i < m; ++i) {
                const cfloat xi = fr.spectra[i][b];
                const cdouble zi(xi.real(), xi.imag());
                for (std::size_t j = 0; j < m; ++j) {
                    const cfloat xj = fr.spectra[j][b];
                    a(i, j) += zi * std::conj(cdouble(xj.real(), xj.imag()));
                }
            }
        }
        ++frames;
    });
    if (frames == 0) throw ValidationError("noise capture scene is shorter than one frame");

    NoiseModel model;
    model.k.m = m;
    model.k.bins.reserve(bins);
    const double inv = 1.0 / double(frames);
    for (std::size_t b = 0; b < bins; ++b) {
        CMatrix<float> kb(m, m);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j)
                kb(i, j) = cfloat(float(acc[b](i, j).real() * inv),
                                  float(acc[b](i, j).imag() * inv));
        model.k.bins.push_back(std::move(kb));
    }
    model.check_positive_definite();
    return model;
}

} // namespace ssl
