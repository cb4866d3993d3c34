#include "fdelab/io.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace fdelab::io {

namespace {

constexpr std::array<char, 4> kMagic{'F', 'D', 'E', '1'};

class Writer {
public:
    template <class T>
    void put(T value) {
        static_assert(std::is_trivially_copyable_v<T> && sizeof(T) <= 8);
        std::uint64_t bits = 0;
        std::memcpy(&bits, &value, sizeof(T));
        for (std::size_t i = 0; i < sizeof(T); ++i) bytes_.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
    }
    void raw(const char* data, std::size_t n) { bytes_.insert(bytes_.end(), data, data + n); }
    const std::vector<char>& bytes() const { return bytes_; }

private:
    std::vector<char> bytes_;
};

class Reader {
public:
    explicit Reader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}

    template <class T>
    T get() {
        need(sizeof(T));
        std::uint64_t bits = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i)
            bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += sizeof(T);
        T value;
        std::memcpy(&value, &bits, sizeof(T));
        return value;
    }
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw Error(ErrorCode::TruncatedFile, "field dump is truncated");
    }
    bool starts_with_magic() const {
        return bytes_.size() >= kMagic.size() && std::equal(kMagic.begin(), kMagic.end(), bytes_.begin());
    }
    void skip(std::size_t n) { pos_ += n; }

private:
    std::vector<char> bytes_;
    std::size_t pos_ = 0;
};

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, mode);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
    return out;
}

// Shortest round-trip representation; NaN becomes an empty cell.
std::string cell(double v) {
    if (std::isnan(v)) return {};
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
}

}  // namespace

void write_field(const std::filesystem::path& path, const Field& field, double time) {
    const auto& d = field.grid()->descriptor();
    Writer w;
    w.raw(kMagic.data(), kMagic.size());
    w.put(static_cast<std::uint32_t>(d.shape));
    w.put(static_cast<std::int32_t>(d.dim));
    w.put(d.a);
    w.put(d.b);
    w.put(static_cast<std::uint64_t>(d.n));
    w.put(static_cast<std::uint64_t>(d.n_theta));
    w.put(time);
    w.put(static_cast<std::uint64_t>(field.size()));
    for (double v : field.values()) w.put(v);
    auto out = open_out(path, std::ios::binary);
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

FieldDump read_field(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
    Reader r(std::vector<char>(std::istreambuf_iterator<char>(in), {}));
    if (!r.starts_with_magic()) {
        r.need(kMagic.size());
        throw Error(ErrorCode::BadMagic, "not a field dump: " + path.string());
    }
    r.skip(kMagic.size());
    FieldDump dump;
    const auto shape = r.get<std::uint32_t>();
    if (shape > static_cast<std::uint32_t>(Shape::Polar2d))
        throw Error(ErrorCode::DescriptorMismatch, "unknown grid shape in field dump");
    dump.grid.shape = static_cast<Shape>(shape);
    dump.grid.dim = r.get<std::int32_t>();
    dump.grid.a = r.get<double>();
    dump.grid.b = r.get<double>();
    dump.grid.n = r.get<std::uint64_t>();
    dump.grid.n_theta = r.get<std::uint64_t>();
    dump.time = r.get<double>();
    const auto count = r.get<std::uint64_t>();
    r.need(count * sizeof(double));
    dump.values.resize(count);
    for (auto& v : dump.values) v = r.get<double>();
    return dump;
}

Field read_field(const std::filesystem::path& path, const GridPtr& grid, double* time) {
    FieldDump dump = read_field(path);
    if (!(dump.grid == grid->descriptor()) || dump.values.size() != grid->size())
        throw Error(ErrorCode::DescriptorMismatch, "field dump was written on a different grid");
    if (time) *time = dump.time;
    return Field(grid, std::move(dump.values));
}

void write_monitors_csv(const std::filesystem::path& path, const Trajectory& traj) {
    auto out = open_out(path);
    out << "t,J,R,h10,lm,linf\n";
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        const auto& m = traj.monitors[k];
        out << cell(traj.times[k]) << ',' << cell(m.J) << ',' << cell(m.R) << ',' << cell(m.h10_norm) << ','
            << cell(m.lm_norm) << ',' << cell(m.linf_norm) << '\n';
    }
}

void write_rescaled_csv(const std::filesystem::path& path, const RescaledTrajectory& traj) {
    auto out = open_out(path);
    out << "s,J,R,h10,lm,linf,dissipation,Jprime_hminus1\n";
    for (std::size_t k = 0; k < traj.s_times.size(); ++k) {
        const auto& m = traj.monitors[k];
        const double diss = k > 0 && k - 1 < traj.dissipation.size() ? traj.dissipation[k - 1]
                                                                      : std::numeric_limits<double>::quiet_NaN();
        const double jp = k < traj.jprime_hminus1.size() ? traj.jprime_hminus1[k]
                                                         : std::numeric_limits<double>::quiet_NaN();
        out << cell(traj.s_times[k]) << ',' << cell(m.J) << ',' << cell(m.R) << ',' << cell(m.h10_norm) << ','
            << cell(m.lm_norm) << ',' << cell(m.linf_norm) << ',' << cell(diss) << ',' << cell(jp) << '\n';
    }
}

void write_field_csv(const std::filesystem::path& path, const Field& field) {
    auto out = open_out(path);
    out << "index,r,theta,value\n";
    const auto& g = field.grid();
    for (std::size_t k = 0; k < field.size(); ++k)
        out << k << ',' << cell(g->radius_of(k)) << ',' << cell(g->theta_of(k)) << ',' << cell(field[k]) << '\n';
}

nlohmann::json to_json(const GridDescriptor& g) {
    nlohmann::json j{{"shape", std::string(to_string(g.shape))}, {"dim", g.dim}, {"a", g.a}, {"b", g.b}, {"n", g.n}};
    if (g.shape == Shape::Polar2d) j["n_theta"] = g.n_theta;
    return j;
}

GridDescriptor grid_from_json(const nlohmann::json& j) {
    GridDescriptor g;
    g.shape = shape_from_string(j.at("shape").get<std::string>());
    g.dim = j.at("dim").get<int>();
    g.a = j.at("a").get<double>();
    g.b = j.at("b").get<double>();
    g.n = j.at("n").get<std::size_t>();
    g.n_theta = j.value("n_theta", std::size_t{1});
    return g;
}

nlohmann::json to_json(const EnergyReport& r) {
    return {{"J", r.J}, {"R", r.R}, {"h10", r.h10_norm}, {"lm", r.lm_norm}, {"linf", r.linf_norm}};
}

nlohmann::json to_json(const ExtinctionEstimate& e) {
    nlohmann::json j{{"t_star", e.t_star},
                     {"method", std::string(to_string(e.method))},
                     {"fit_exponent", e.fit_exponent},
                     {"fit_residual", e.fit_residual},
                     {"window_points", e.window_points},
                     {"lower_bound", e.lower_bound}};
    j["upper_bound"] = std::isfinite(e.upper_bound) ? nlohmann::json(e.upper_bound) : nlohmann::json(nullptr);
    return j;
}

nlohmann::json to_json(const ProfileResult& r) {
    nlohmann::json j{{"method", std::string(to_string(r.method))},
                     {"residual", r.residual},
                     {"energy", r.energy},
                     {"rayleigh", r.rayleigh},
                     {"is_radial", r.is_radial},
                     {"angular_variance", r.angular_variance},
                     {"iterations", r.iterations},
                     {"max", r.phi.max()},
                     {"min", r.phi.min()},
                     {"grid", to_json(r.phi.grid()->descriptor())}};
    j["discrete_residual"] = std::isnan(r.discrete_residual) ? nlohmann::json(nullptr) : nlohmann::json(r.discrete_residual);
    if (r.method == ProfileMethod::Shooting) j["boundary_mismatch"] = r.boundary_mismatch;
    return j;
}

nlohmann::json to_json(const ProbeReport& r) {
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& s : r.samples) {
        samples.push_back({{"initial_deviation", s.initial_deviation},
                           {"sup_deviation", s.sup_deviation},
                           {"phase_scale", s.phase_scale},
                           {"initial_energy", s.initial_energy},
                           {"terminal_energy", s.terminal_energy},
                           {"terminal_rayleigh", s.terminal_rayleigh},
                           {"terminal_residual", s.terminal_residual},
                           {"converged", s.converged},
                           {"shape_residual", s.shape_residual},
                           {"extinction_time", s.extinction_time},
                           {"horizon_reached", s.horizon_reached}});
    }
    return {{"verdict", std::string(to_string(r.verdict))},
            {"phi_energy", r.phi_energy},
            {"phi_h10", r.phi_h10},
            {"delta", r.delta_abs},
            {"epsilon", r.epsilon_abs},
            {"min_terminal_energy", r.min_terminal_energy()},
            {"samples", samples}};
}

nlohmann::json to_json(const CertificateReport& r) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : r.entries)
        entries.push_back({{"mode", e.mode},
                           {"amplitude", e.amplitude},
                           {"phase_scale", e.phase_scale},
                           {"energy", e.energy},
                           {"gap", e.gap}});
    return {{"found", r.found},
            {"best_gap", r.best_gap},
            {"best_mode", r.best_mode},
            {"best_amplitude", r.best_amplitude},
            {"entries", entries}};
}

nlohmann::json to_json(const LojasiewiczFit& r) {
    return {{"theta", r.theta},          {"omega", r.omega},   {"slope", r.slope},
            {"intercept", r.intercept},  {"rms", r.rms_residual}, {"points", r.points},
            {"in_range", r.in_range},    {"theta_clamped", r.theta_clamped}};
}

void write_profile(const std::filesystem::path& stem, const ProfileResult& r) {
    auto bin = stem;
    bin += ".bin";
    auto sidecar = stem;
    sidecar += ".json";
    write_field(bin, r.phi);
    write_json(sidecar, to_json(r));
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

}  // namespace fdelab::io
