#include "ssl/music.hpp"

#include "ssl/parallel.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

namespace ssl {

std::array<double, 3> direction_unit(const Direction& d) {
    const double az = d.azimuth_deg * std::numbers::pi / 180.0;
    const double el = d.elevation_deg * std::numbers::pi / 180.0;
    return {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
}

double angular_distance_deg(const Direction& a, const Direction& b) {
    const auto ua = direction_unit(a);
    const auto ub = direction_unit(b);
    double dot = ua[0] * ub[0] + ua[1] * ub[1] + ua[2] * ub[2];
    dot = std::clamp(dot, -1.0, 1.0);
    return std::acos(dot) * 180.0 / std::numbers::pi;
}

void SteeringField::validate() const {
    if (m == 0) throw ValidationError("steering field has no channels");
    if (bin_max < bin_min) throw ValidationError("steering field bin range is inverted");
    if (directions.empty()) throw ValidationError("steering field has no directions");
    if (vectors.size() != directions.size() * bin_count() * m)
        throw ValidationError("steering field payload size mismatch");
}

void MusicConfig::validate() const {
    if (num_sources == 0) throw ValidationError("num_sources must be at least 1");
    if (!(denominator_floor > 0)) throw ValidationError("denominator_floor must be positive");
    if (!(low_power_ratio >= 0)) throw ValidationError("low_power_ratio must be non-negative");
}

// ---------------------------------------------------------------------------
// steering field io: one json header line, then raw float32 pairs
// ---------------------------------------------------------------------------

void save_steering(const SteeringField& field, const std::string& path) {
    field.validate();
    nlohmann::json header;
    header["m"] = field.m;
    header["bin_min"] = field.bin_min;
    header["bin_max"] = field.bin_max;
    auto dirs = nlohmann::json::array();
    for (const auto& d : field.directions)
        dirs.push_back(nlohmann::json::array({d.azimuth_deg, d.elevation_deg}));
    header["directions"] = std::move(dirs);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << header.dump() << '\n';
    std::vector<float> payload;
    payload.reserve(field.vectors.size() * 2);
    for (const auto& z : field.vectors) {
        payload.push_back(z.real());
        payload.push_back(z.imag());
    }
    out.write(reinterpret_cast<const char*>(payload.data()),
              std::streamsize(payload.size() * sizeof(float)));
    if (!out) throw IoError("short write to " + path);
}

SteeringField load_steering(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError("missing header line in " + path);

    SteeringField field;
    try {
        const auto header = nlohmann::json::parse(line);
        field.m = header.at("m").get<std::uint32_t>();
        field.bin_min = header.at("bin_min").get<std::uint32_t>();
        field.bin_max = header.at("bin_max").get<std::uint32_t>();
        for (const auto& d : header.at("directions")) {
            Direction dir;
            dir.azimuth_deg = d.at(0).get<double>();
            dir.elevation_deg = d.at(1).get<double>();
            field.directions.push_back(dir);
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError("bad steering header in " + path + ": " + e.what());
    }
    if (field.m == 0 || field.bin_max < field.bin_min || field.directions.empty())
        throw IoError("bad steering header in " + path);

    const std::size_t count = field.directions.size() * field.bin_count() * field.m;
    std::vector<float> payload(count * 2);
    in.read(reinterpret_cast<char*>(payload.data()), std::streamsize(payload.size() * sizeof(float)));
    if (std::size_t(in.gcount()) != payload.size() * sizeof(float))
        throw IoError("truncated steering payload in " + path);
    field.vectors.resize(count);
    for (std::size_t i = 0; i < count; ++i)
        field.vectors[i] = cfloat(payload[2 * i], payload[2 * i + 1]);
    field.validate();
    return field;
}

// ---------------------------------------------------------------------------
// spatial spectrum
// ---------------------------------------------------------------------------

template <typename T>
MusicSpectrum calc_average_power(const GsvdBatch<T>& basis, const SteeringField& steering,
                                 const MusicConfig& cfg, bool keep_bins, unsigned threads) {
    cfg.validate();
    steering.validate();
    const std::size_t bins = basis.bins.size();
    if (bins != steering.bin_count())
        throw ValidationError("steering field bin count does not match factorization");
    const std::size_t m = steering.m;
    const std::size_t ns = cfg.num_sources;
    if (ns >= m) throw ValidationError("num_sources must be smaller than the channel count");
    for (const auto& bin : basis.bins)
        if (bin.e.rows != m || bin.e.cols != m)
            throw ValidationError("factorization channel count does not match steering field");

    // gather the noise columns of each bin contiguously: [bin][vector][mic]
    const std::size_t nn = m - ns;
    std::vector<std::complex<T>> noise(bins * nn * m);
    for (std::size_t b = 0; b < bins; ++b) {
        const auto& e = basis.bins[b].e;
        for (std::size_t i = 0; i < nn; ++i)
            for (std::size_t mic = 0; mic < m; ++mic)
                noise[(b * nn + i) * m + mic] = e(mic, ns + i);
    }

    const std::size_t dirs = steering.directions.size();
    MusicSpectrum spectrum;
    spectrum.power.assign(dirs, 0.0);
    if (keep_bins) spectrum.bin_power.assign(bins, std::vector<double>(dirs, 0.0));

    const T floor = T(cfg.denominator_floor);
    parallel_for(dirs, threads, [&](std::size_t d) {
        for (std::size_t b = 0; b < bins; ++b) {
            const cfloat* h = steering.at(d, b);
            T num = 0;
            for (std::size_t mic = 0; mic < m; ++mic)
                num += T(h[mic].real()) * T(h[mic].real()) + T(h[mic].imag()) * T(h[mic].imag());
            T den = 0;
            const std::complex<T>* nv = &noise[b * nn * m];
            for (std::size_t i = 0; i < nn; ++i, nv += m) {
                std::complex<T> dot(0, 0);
                for (std::size_t mic = 0; mic < m; ++mic)
                    dot += std::conj(std::complex<T>(h[mic].real(), h[mic].imag())) * nv[mic];
                const T mag = std::abs(dot);
                den += cfg.squared_denominator ? mag * mag : mag;
            }
            if (den < floor) den = floor;
            const T p = num / den;
            spectrum.power[d] += double(p);
            if (keep_bins) spectrum.bin_power[b][d] = double(p);
        }
    });
    return spectrum;
}

template MusicSpectrum calc_average_power<float>(const GsvdBatch<float>&, const SteeringField&,
                                                 const MusicConfig&, bool, unsigned);
template MusicSpectrum calc_average_power<double>(const GsvdBatch<double>&, const SteeringField&,
                                                  const MusicConfig&, bool, unsigned);

// ---------------------------------------------------------------------------
// peak search
// ---------------------------------------------------------------------------

DirectionTopology DirectionTopology::build(const std::vector<Direction>& directions,
                                           double radius_deg) {
    DirectionTopology topo;
    const std::size_t n = directions.size();
    topo.neighbors.resize(n);
    std::vector<std::array<double, 3>> units(n);
    for (std::size_t i = 0; i < n; ++i) units[i] = direction_unit(directions[i]);
    const double cos_radius = std::cos(radius_deg * std::numbers::pi / 180.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dot = units[i][0] * units[j][0] + units[i][1] * units[j][1] +
                               units[i][2] * units[j][2];
            if (dot >= cos_radius) {
                topo.neighbors[i].push_back(std::uint32_t(j));
                topo.neighbors[j].push_back(std::uint32_t(i));
            }
        }
    }
    return topo;
}

std::vector<SourceEstimate> peak_search(const std::vector<double>& power,
                                        const std::vector<Direction>& directions,
                                        const DirectionTopology& topology,
                                        const MusicConfig& cfg) {
    cfg.validate();
    if (power.size() != directions.size() || topology.neighbors.size() != power.size())
        throw ValidationError("peak_search input sizes do not match");

    double mean = 0;
    for (double p : power) mean += p;
    if (!power.empty()) mean /= double(power.size());

    std::vector<std::uint32_t> peaks;
    for (std::size_t d = 0; d < power.size(); ++d) {
        bool is_peak = true;
        for (std::uint32_t n : topology.neighbors[d]) {
            if (power[d] < power[n]) {
                is_peak = false;
                break;
            }
        }
        if (is_peak) peaks.push_back(std::uint32_t(d));
    }
    std::stable_sort(peaks.begin(), peaks.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (power[a] != power[b]) return power[a] > power[b];
        return a < b;
    });
    if (peaks.size() > cfg.num_sources) peaks.resize(cfg.num_sources);

    std::vector<SourceEstimate> out;
    for (std::uint32_t d : peaks) {
        SourceEstimate est;
        est.direction_index = d;
        est.direction = directions[d];
        est.power = power[d];
        est.low_power = power[d] < double(cfg.low_power_ratio) * mean;
        out.push_back(est);
    }
    return out;
}

} // namespace ssl
