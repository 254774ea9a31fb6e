#include "rbe2d/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>

namespace rbe2d {

namespace {

constexpr char kMagic[8] = {'R', 'B', 'E', '2', 'D', 'T', 'R', 'J'};

template <typename T>
T to_le(T v)
{
    if constexpr (std::endian::native == std::endian::big) {
        unsigned char b[sizeof(T)];
        std::memcpy(b, &v, sizeof(T));
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i)
            std::swap(b[i], b[sizeof(T) - 1 - i]);
        std::memcpy(&v, b, sizeof(T));
    }
    return v;
}

template <typename T>
void put(std::ostream& o, T v)
{
    v = to_le(v);
    o.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

class Reader {
public:
    Reader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}

    template <typename T>
    T get(const char* what)
    {
        T v;
        in_.read(reinterpret_cast<char*>(&v), sizeof(T));
        if (in_.gcount() != std::streamsize(sizeof(T)))
            throw ValidationError(path_ + ": truncated " + what);
        return to_le(v);
    }

    bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

private:
    std::istream& in_;
    std::string path_;
};

constexpr int kEnergyFields = 8;

}  // namespace

TrajectoryWriter::TrajectoryWriter(const std::string& path, const ExperimentConfig& resolved,
                                   const ParticleSystem& system)
    : out_(path, std::ios::binary | std::ios::trunc), path_(path), n_(system.size())
{
    if (!out_)
        throw ValidationError(path + ": cannot open trajectory for writing");
    const std::string text = emit_config(resolved);
    out_.write(kMagic, sizeof kMagic);
    put<std::uint32_t>(out_, kTrajectoryVersion);
    put<std::uint64_t>(out_, fnv1a64(text));
    put<std::uint64_t>(out_, resolved.run.seed);
    put<std::uint64_t>(out_, text.size());
    out_.write(text.data(), std::streamsize(text.size()));
    put<std::uint64_t>(out_, std::uint64_t(n_));
    for (Eigen::Index i = 0; i < n_; ++i)
        put<std::int32_t>(out_, system.species(i));
    for (Eigen::Index i = 0; i < n_; ++i)
        put<double>(out_, system.charges(i));
    out_.flush();
}

void TrajectoryWriter::write(const TrajectoryFrame& f)
{
    if (f.positions.cols() != n_ || f.velocities.cols() != n_)
        throw ValidationError(path_ + ": frame particle count does not match header");
    const std::uint64_t payload = 8 * (4 + 6 * std::uint64_t(n_) + kEnergyFields);
    put<std::uint64_t>(out_, payload);
    put<std::int64_t>(out_, f.step);
    put<double>(out_, f.time);
    put<std::uint64_t>(out_, std::uint64_t(n_));
    put<double>(out_, f.temperature);
    for (Eigen::Index i = 0; i < 3 * n_; ++i)
        put<double>(out_, f.positions.data()[i]);
    for (Eigen::Index i = 0; i < 3 * n_; ++i)
        put<double>(out_, f.velocities.data()[i]);
    const EnergyBreakdown& e = f.energy;
    for (double v : {e.real, e.fourier, e.self, e.ibc, e.elc, e.lj, e.wall, e.total()})
        put<double>(out_, v);
    if (!out_)
        throw ValidationError(path_ + ": write failed");
    ++frames_;
}

void TrajectoryWriter::close()
{
    if (out_.is_open())
        out_.close();
}

Trajectory read_trajectory(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ValidationError(path + ": cannot open trajectory");
    Reader rd(in, path);
    char magic[8];
    in.read(magic, 8);
    if (in.gcount() != 8 || std::memcmp(magic, kMagic, 8) != 0)
        throw ValidationError(path + ": not a trajectory file");
    Trajectory t;
    t.header.version = rd.get<std::uint32_t>("header");
    if (t.header.version != kTrajectoryVersion)
        throw ValidationError(path + ": unsupported trajectory version " + std::to_string(t.header.version));
    t.header.config_hash = rd.get<std::uint64_t>("header");
    t.header.seed = rd.get<std::uint64_t>("header");
    const auto len = rd.get<std::uint64_t>("header");
    if (len > (1u << 30))
        throw ValidationError(path + ": corrupt header");
    t.header.config_text.resize(len);
    in.read(t.header.config_text.data(), std::streamsize(len));
    if (std::uint64_t(in.gcount()) != len)
        throw ValidationError(path + ": truncated header");
    if (fnv1a64(t.header.config_text) != t.header.config_hash)
        throw ValidationError(path + ": configuration hash mismatch");
    const auto n = Eigen::Index(rd.get<std::uint64_t>("header"));
    t.header.species.resize(n);
    t.header.charges.resize(n);
    for (Eigen::Index i = 0; i < n; ++i)
        t.header.species(i) = rd.get<std::int32_t>("header");
    for (Eigen::Index i = 0; i < n; ++i)
        t.header.charges(i) = rd.get<double>("header");

    const std::uint64_t expected = 8 * (4 + 6 * std::uint64_t(n) + kEnergyFields);
    while (!rd.at_end()) {
        if (rd.get<std::uint64_t>("frame") != expected)
            throw ValidationError(path + ": frame length does not match particle count");
        TrajectoryFrame f;
        f.step = rd.get<std::int64_t>("frame");
        f.time = rd.get<double>("frame");
        if (Eigen::Index(rd.get<std::uint64_t>("frame")) != n)
            throw ValidationError(path + ": frame particle count does not match header");
        f.temperature = rd.get<double>("frame");
        f.positions.resize(3, n);
        f.velocities.resize(3, n);
        for (Eigen::Index i = 0; i < 3 * n; ++i)
            f.positions.data()[i] = rd.get<double>("frame");
        for (Eigen::Index i = 0; i < 3 * n; ++i)
            f.velocities.data()[i] = rd.get<double>("frame");
        EnergyBreakdown& e = f.energy;
        for (double* v : {&e.real, &e.fourier, &e.self, &e.ibc, &e.elc, &e.lj, &e.wall})
            *v = rd.get<double>("frame");
        rd.get<double>("frame");
        e.method = "stored";
        t.frames.push_back(std::move(f));
    }
    return t;
}

nlohmann::json to_json(const EnergyBreakdown& e)
{
    return {{"method", e.method}, {"real", e.real}, {"fourier", e.fourier}, {"self", e.self}, {"ibc", e.ibc},
            {"elc", e.elc},       {"lj", e.lj},     {"wall", e.wall},       {"coulomb", e.coulomb()},
            {"total", e.total()}};
}

nlohmann::json to_json(const RunSummary& s)
{
    const RunConfig& r = s.resolved;
    return {{"schema_version", kSchemaVersion},
            {"steps", s.steps},
            {"frames", s.frames},
            {"mean_temperature", s.mean_temperature},
            {"mean_temperature_equil", s.mean_temperature_equil},
            {"wall_seconds", s.wall_seconds},
            {"neighbor_rebuilds", s.neighbor_rebuilds},
            {"sampler_acceptance", s.sampler_acceptance},
            {"resolved",
             {{"alpha", r.splitting.alpha},
              {"Lz", r.geometry.Lz},
              {"M", r.dielectric.M},
              {"r_cut", r.splitting.r_cut},
              {"batch_size", r.splitting.batch_size}}}};
}

nlohmann::json error_json(const std::string& kind, const std::string& message)
{
    return {{"schema_version", kSchemaVersion}, {"error", {{"kind", kind}, {"message", message}}}};
}

void write_csv(std::ostream& out, const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows)
{
    for (std::size_t i = 0; i < header.size(); ++i)
        out << (i ? "," : "") << header[i];
    out << "\n";
    char buf[32];
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.16e", row[i]);
            out << (i ? "," : "") << buf;
        }
        out << "\n";
    }
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows)
{
    std::ofstream out(path);
    if (!out)
        throw ValidationError(path + ": cannot open for writing");
    write_csv(out, header, rows);
}

}  // namespace rbe2d
