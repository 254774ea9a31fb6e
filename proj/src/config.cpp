#include "rbe2d/config.hpp"

#include <yaml-cpp/yaml.h>

#include <array>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace rbe2d {

long ExperimentConfig::particle_count() const
{
    long n = 0;
    for (const auto& s : species)
        n += s.count;
    return n;
}

double ExperimentConfig::net_charge() const
{
    double q = 0.0;
    for (const auto& s : species)
        q += double(s.count) * s.charge;
    return q;
}

void ExperimentConfig::validate() const
{
    if (species.empty())
        throw ValidationError("species: at least one species is required");
    double scale = 1.0;
    for (const auto& s : species) {
        if (s.count < 0)
            throw ValidationError("species." + s.name + ".count: must be non-negative");
        if (!(s.mass > 0))
            throw ValidationError("species." + s.name + ".mass: must be positive");
        scale += double(s.count) * std::abs(s.charge);
    }
    if (particle_count() < 1)
        throw ValidationError("species: no particles");
    if (std::abs(net_charge()) > 1e-12 * scale)
        throw ValidationError("species: system is not charge neutral (net charge " + std::to_string(net_charge()) + ")");
    if (!(min_separation >= 0))
        throw ValidationError("system.min_separation: must be non-negative");
    run.validate();
}

namespace {

struct Ctx {
    std::string origin;

    [[noreturn]] void fail(const YAML::Node& n, const std::string& key, const std::string& msg) const
    {
        std::ostringstream os;
        os << origin;
        if (n.Mark().line >= 0)
            os << ":" << n.Mark().line + 1;
        os << ": " << key << ": " << msg;
        throw ValidationError(os.str());
    }

    void allow(const YAML::Node& map, const std::string& path, std::initializer_list<const char*> keys) const
    {
        if (!map.IsMap())
            fail(map, path.empty() ? "<root>" : path, "expected a mapping");
        std::set<std::string> ok(keys.begin(), keys.end());
        for (const auto& kv : map) {
            const auto k = kv.first.as<std::string>();
            if (!ok.count(k))
                fail(kv.first, path.empty() ? k : path + "." + k, "unknown key");
        }
    }

    template <typename T>
    void read(const YAML::Node& map, const char* key, const std::string& path, T& out) const
    {
        const YAML::Node v = map[key];
        if (!v)
            return;
        try {
            out = v.as<T>();
        } catch (const YAML::Exception&) {
            fail(v, path + "." + key, "cannot convert '" + v.Scalar() + "'");
        }
    }

    /// Numeric value or the word "auto", which stores `sentinel`.
    template <typename T>
    void read_auto(const YAML::Node& map, const char* key, const std::string& path, T& out, T sentinel) const
    {
        const YAML::Node v = map[key];
        if (v && v.IsScalar() && v.Scalar() == "auto")
            out = sentinel;
        else
            read(map, key, path, out);
    }

    template <typename E>
    void read_enum(const YAML::Node& map, const char* key, const std::string& path, E& out,
                   std::initializer_list<std::pair<const char*, E>> names) const
    {
        const YAML::Node v = map[key];
        if (!v)
            return;
        const std::string s = v.IsScalar() ? v.Scalar() : "";
        for (const auto& [n, e] : names)
            if (s == n) {
                out = e;
                return;
            }
        std::string allowed;
        for (const auto& [n, e] : names)
            allowed += (allowed.empty() ? "" : ", ") + std::string(n);
        fail(v, path + "." + key, "expected one of " + allowed);
    }
};

const std::initializer_list<std::pair<const char*, ThermostatKind>> kThermostats{
    {"none", ThermostatKind::None}, {"langevin", ThermostatKind::Langevin}, {"nose-hoover", ThermostatKind::NoseHoover}};
const std::initializer_list<std::pair<const char*, ForceMode>> kModes{{"deterministic", ForceMode::Deterministic},
                                                                      {"rbe", ForceMode::RBE}};
const std::initializer_list<std::pair<const char*, ImageConvention>> kConventions{
    {"physical-mirror", ImageConvention::PhysicalMirror}, {"as-written", ImageConvention::AsWritten}};

template <typename E>
const char* name_of(E e, std::initializer_list<std::pair<const char*, E>> names)
{
    for (const auto& [n, v] : names)
        if (v == e)
            return n;
    return "?";
}

void apply(const Ctx& c, const YAML::Node& root, ExperimentConfig& cfg)
{
    c.allow(root, "", {"preset", "system", "dielectric", "electrostatics", "run", "thermostat", "output"});
    RunConfig& r = cfg.run;

    if (const YAML::Node s = root["system"]) {
        c.allow(s, "system", {"Lx", "Ly", "H", "Lz", "bjerrum", "species", "lj", "wall", "min_separation"});
        c.read(s, "Lx", "system", r.geometry.Lx);
        c.read(s, "Ly", "system", r.geometry.Ly);
        c.read(s, "H", "system", r.geometry.H);
        c.read_auto(s, "Lz", "system", r.geometry.Lz, 0.0);
        c.read(s, "bjerrum", "system", r.bjerrum);
        c.read(s, "min_separation", "system", cfg.min_separation);
        if (const YAML::Node lj = s["lj"]) {
            c.allow(lj, "system.lj", {"epsilon", "sigma"});
            c.read(lj, "epsilon", "system.lj", r.lj.epsilon);
            c.read(lj, "sigma", "system.lj", r.lj.sigma);
        }
        if (const YAML::Node w = s["wall"]) {
            c.allow(w, "system.wall", {"epsilon", "sigma"});
            c.read(w, "epsilon", "system.wall", r.wall.epsilon);
            c.read(w, "sigma", "system.wall", r.wall.sigma);
        }
        if (const YAML::Node sp = s["species"]) {
            if (!sp.IsSequence())
                c.fail(sp, "system.species", "expected a list");
            cfg.species.clear();
            for (std::size_t i = 0; i < sp.size(); ++i) {
                const std::string path = "system.species[" + std::to_string(i) + "]";
                c.allow(sp[i], path, {"name", "count", "charge", "mass"});
                SpeciesSpec spec;
                spec.name = "species" + std::to_string(i);
                c.read(sp[i], "name", path, spec.name);
                c.read(sp[i], "count", path, spec.count);
                c.read(sp[i], "charge", path, spec.charge);
                c.read(sp[i], "mass", path, spec.mass);
                cfg.species.push_back(spec);
            }
        }
    }

    if (const YAML::Node d = root["dielectric"]) {
        c.allow(d, "dielectric", {"gamma_top", "gamma_bot", "eps_top", "eps_c", "eps_bot", "M", "convention"});
        const bool by_eps = d["eps_top"] || d["eps_c"] || d["eps_bot"];
        if (by_eps && (d["gamma_top"] || d["gamma_bot"]))
            c.fail(d, "dielectric", "give either contrasts or permittivities, not both");
        DielectricSpec& spec = r.dielectric;
        c.read_enum(d, "convention", "dielectric", spec.convention, kConventions);
        c.read_auto(d, "M", "dielectric", r.M_request, -1);
        try {
            if (by_eps) {
                double et = spec.eps_top, ec = spec.eps_c, eb = spec.eps_bot;
                c.read(d, "eps_top", "dielectric", et);
                c.read(d, "eps_c", "dielectric", ec);
                c.read(d, "eps_bot", "dielectric", eb);
                spec = DielectricSpec::from_permittivities(et, ec, eb, 0, spec.convention);
            } else {
                double gt = spec.gamma_top, gb = spec.gamma_bot;
                c.read(d, "gamma_top", "dielectric", gt);
                c.read(d, "gamma_bot", "dielectric", gb);
                spec = DielectricSpec::from_contrasts(gt, gb, 0, spec.convention);
            }
        } catch (const ValidationError& e) {
            c.fail(d, "dielectric", e.what());
        }
    }

    if (const YAML::Node e = root["electrostatics"]) {
        c.allow(e, "electrostatics",
                {"alpha", "alpha_multiplier", "r_cut", "tolerance", "batch_size", "force_mode", "skin_fraction"});
        c.read_auto(e, "alpha", "electrostatics", r.splitting.alpha, 0.0);
        c.read(e, "alpha_multiplier", "electrostatics", r.alpha_multiplier);
        c.read(e, "r_cut", "electrostatics", r.splitting.r_cut);
        c.read(e, "tolerance", "electrostatics", r.splitting.tolerance);
        c.read(e, "batch_size", "electrostatics", r.splitting.batch_size);
        c.read(e, "skin_fraction", "electrostatics", r.skin_fraction);
        c.read_enum(e, "force_mode", "electrostatics", r.force_mode, kModes);
    }

    if (const YAML::Node n = root["run"]) {
        c.allow(n, "run", {"dt", "n_equil", "n_prod", "sample_every", "seed", "frame_energies"});
        c.read(n, "dt", "run", r.dt);
        c.read(n, "n_equil", "run", r.n_equil);
        c.read(n, "n_prod", "run", r.n_prod);
        c.read(n, "sample_every", "run", r.sample_every);
        c.read(n, "seed", "run", r.seed);
        c.read(n, "frame_energies", "run", r.frame_energies);
    }

    if (const YAML::Node t = root["thermostat"]) {
        c.allow(t, "thermostat", {"kind", "temperature", "friction", "tau", "kB"});
        c.read_enum(t, "kind", "thermostat", r.thermostat.kind, kThermostats);
        c.read(t, "temperature", "thermostat", r.thermostat.temperature);
        c.read(t, "friction", "thermostat", r.thermostat.friction);
        c.read(t, "tau", "thermostat", r.thermostat.tau);
        c.read(t, "kB", "thermostat", r.thermostat.kB);
    }

    if (const YAML::Node o = root["output"]) {
        c.allow(o, "output", {"dir"});
        c.read(o, "dir", "output", cfg.output_dir);
    }
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin)
{
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ValidationError(origin + ":" + std::to_string(e.mark.line + 1) + ": syntax error: " + e.msg);
    }
    if (!root || root.IsNull())
        throw ValidationError(origin + ": empty configuration");
    const Ctx ctx{origin};
    ExperimentConfig cfg;
    if (root.IsMap() && root["preset"]) {
        std::string name;
        ctx.read(root, "preset", "", name);
        try {
            cfg = preset(name);
        } catch (const ValidationError& e) {
            ctx.fail(root["preset"], "preset", e.what());
        }
    }
    apply(ctx, root, cfg);
    cfg.validate();
    return cfg;
}

ExperimentConfig parse_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ValidationError(path + ": cannot open configuration file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path);
}

ExperimentConfig resolve(const ExperimentConfig& config)
{
    config.validate();
    ExperimentConfig out = config;
    out.run = resolve_config(config.run, std::size_t(config.particle_count()));
    out.run.M_request = out.run.dielectric.M;
    return out;
}

namespace {

std::string num(double x)
{
    if (std::isinf(x))
        return x > 0 ? ".inf" : "-.inf";
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

std::string quoted(const std::string& s)
{
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"' || ch == '\\')
            out += '\\';
        out += ch;
    }
    return out + "\"";
}

}  // namespace

std::string emit_config(const ExperimentConfig& c)
{
    const RunConfig& r = c.run;
    std::ostringstream os;
    if (!c.preset.empty())
        os << "preset: " << quoted(c.preset) << "\n";
    os << "system:\n"
       << "  Lx: " << num(r.geometry.Lx) << "\n"
       << "  Ly: " << num(r.geometry.Ly) << "\n"
       << "  H: " << num(r.geometry.H) << "\n"
       << "  Lz: " << (r.geometry.Lz >= r.geometry.H ? num(r.geometry.Lz) : "auto") << "\n"
       << "  bjerrum: " << num(r.bjerrum) << "\n"
       << "  min_separation: " << num(c.min_separation) << "\n"
       << "  lj: {epsilon: " << num(r.lj.epsilon) << ", sigma: " << num(r.lj.sigma) << "}\n"
       << "  wall: {epsilon: " << num(r.wall.epsilon) << ", sigma: " << num(r.wall.sigma) << "}\n"
       << "  species:\n";
    for (const auto& s : c.species)
        os << "    - {name: " << quoted(s.name) << ", count: " << s.count << ", charge: " << num(s.charge)
           << ", mass: " << num(s.mass) << "}\n";
    os << "dielectric:\n"
       << "  gamma_top: " << num(r.dielectric.gamma_top) << "\n"
       << "  gamma_bot: " << num(r.dielectric.gamma_bot) << "\n"
       << "  M: " << (r.M_request >= 0 ? std::to_string(r.M_request) : "auto") << "\n"
       << "  convention: " << name_of(r.dielectric.convention, kConventions) << "\n"
       << "electrostatics:\n"
       << "  alpha: " << (r.splitting.alpha > 0 ? num(r.splitting.alpha) : "auto") << "\n"
       << "  alpha_multiplier: " << num(r.alpha_multiplier) << "\n"
       << "  r_cut: " << num(r.splitting.r_cut) << "\n"
       << "  tolerance: " << num(r.splitting.tolerance) << "\n"
       << "  batch_size: " << r.splitting.batch_size << "\n"
       << "  skin_fraction: " << num(r.skin_fraction) << "\n"
       << "  force_mode: " << name_of(r.force_mode, kModes) << "\n"
       << "run:\n"
       << "  dt: " << num(r.dt) << "\n"
       << "  n_equil: " << r.n_equil << "\n"
       << "  n_prod: " << r.n_prod << "\n"
       << "  sample_every: " << r.sample_every << "\n"
       << "  seed: " << r.seed << "\n"
       << "  frame_energies: " << (r.frame_energies ? "true" : "false") << "\n"
       << "thermostat:\n"
       << "  kind: " << name_of(r.thermostat.kind, kThermostats) << "\n"
       << "  temperature: " << num(r.thermostat.temperature) << "\n"
       << "  friction: " << num(r.thermostat.friction) << "\n"
       << "  tau: " << num(r.thermostat.tau) << "\n"
       << "  kB: " << num(r.thermostat.kB) << "\n"
       << "output:\n"
       << "  dir: " << quoted(c.output_dir) << "\n";
    return os.str();
}

std::uint64_t fnv1a64(const std::string& bytes)
{
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t config_hash(const ExperimentConfig& config) { return fnv1a64(emit_config(config)); }

namespace {

// Desk scale keeps the number density and slab height, divides particle and step counts.
ExperimentConfig electrolyte(double scale_particles, double scale_steps)
{
    ExperimentConfig c;
    RunConfig& r = c.run;
    const double side = 90.0 * std::sqrt(scale_particles);
    r.geometry = {side, side, 30.0, 0.0};
    r.bjerrum = 3.5;
    r.lj = {1.0, 1.0};
    r.wall = {1.0, 0.5};
    c.species = {{"cation", std::lround(750 * scale_particles), 3.0, 1.0},
                 {"anion", std::lround(2250 * scale_particles), -1.0, 1.0}};
    r.splitting = {0.0, 10.0, 1e-4, 100};
    r.force_mode = ForceMode::RBE;
    r.dt = 1e-3;
    r.n_equil = std::lround(1e6 * scale_steps);
    r.n_prod = std::lround(1e7 * scale_steps);
    r.sample_every = 100;
    r.thermostat = {ThermostatKind::NoseHoover, 1.0, 1.0, 0.01, 1.0};
    return c;
}

ExperimentConfig dielectric_symmetric(double scale_particles, double scale_steps)
{
    ExperimentConfig c = electrolyte(scale_particles, 1.0);
    RunConfig& r = c.run;
    r.dielectric = DielectricSpec::from_contrasts(0.939, 0.939, 0);
    r.M_request = -1;
    r.dt = 0.005;
    r.thermostat.tau = 0.05;
    r.n_equil = std::lround(1e6 * scale_steps);
    r.n_prod = std::lround(1e8 * scale_steps);
    return c;
}

}  // namespace

std::vector<PresetInfo> preset_list()
{
    return {
        {"electrolyte-3-1", "3:1 primitive-model electrolyte, 750 cations / 2250 anions, 90x90x30 sigma, l_B = 3.5"},
        {"electrolyte-3-1-desk", "electrolyte-3-1 at 1/5 of the particles (same density) and 1/100 of the steps"},
        {"dielectric-symmetric", "3:1 electrolyte between interfaces with gamma_top = gamma_bot = 0.939"},
        {"dielectric-symmetric-desk", "dielectric-symmetric at desk scale"},
    };
}

ExperimentConfig preset(const std::string& name)
{
    ExperimentConfig c;
    if (name == "electrolyte-3-1")
        c = electrolyte(1.0, 1.0);
    else if (name == "electrolyte-3-1-desk")
        c = electrolyte(0.2, 0.01);
    else if (name == "dielectric-symmetric")
        c = dielectric_symmetric(1.0, 1.0);
    else if (name == "dielectric-symmetric-desk")
        c = dielectric_symmetric(0.2, 0.01);
    else
        throw ValidationError("unknown preset '" + name + "'");
    c.preset = name;
    return c;
}

ParticleSystem build_system(const ExperimentConfig& cfg)
{
    cfg.validate();
    const RunConfig& r = cfg.run;
    const SlabGeometry& g = r.geometry;
    const long n = cfg.particle_count();
    ParticleSystem s(n);
    RngHandle rng(r.seed, 3);

    const double dmin = cfg.min_separation * r.lj.sigma;
    const double zlo = std::min(r.wall.range(), 0.5 * g.H), zhi = g.H - zlo;
    const double cell = std::max(dmin, 1e-9);
    const int nx = std::max(1, int(g.Lx / cell)), ny = std::max(1, int(g.Ly / cell));
    const int nz = std::max(1, int(g.H / cell));
    std::vector<std::vector<long>> grid(std::size_t(nx) * ny * nz);
    auto cell_of = [&](const Vec3& p) {
        const int cx = std::min(nx - 1, int(p(0) / g.Lx * nx));
        const int cy = std::min(ny - 1, int(p(1) / g.Ly * ny));
        const int cz = std::min(nz - 1, std::max(0, int(p(2) / g.H * nz)));
        return std::array<int, 3>{cx, cy, cz};
    };

    long i = 0;
    for (std::size_t sp = 0; sp < cfg.species.size(); ++sp) {
        for (long k = 0; k < cfg.species[sp].count; ++k, ++i) {
            bool placed = false;
            for (int attempt = 0; attempt < 100000 && !placed; ++attempt) {
                const Vec3 p(rng.uniform() * g.Lx, rng.uniform() * g.Ly, zlo + rng.uniform() * (zhi - zlo));
                const auto c = cell_of(p);
                placed = true;
                for (int dx = -1; dx <= 1 && placed; ++dx)
                    for (int dy = -1; dy <= 1 && placed; ++dy)
                        for (int dz = -1; dz <= 1 && placed; ++dz) {
                            const int cz = c[2] + dz;
                            if (cz < 0 || cz >= nz)
                                continue;
                            const int cx = (c[0] + dx + nx) % nx, cy = (c[1] + dy + ny) % ny;
                            for (long j : grid[(std::size_t(cx) * ny + cy) * nz + cz])
                                if (min_image_xy(Vec3(s.positions.col(j) - p), g).norm() < dmin) {
                                    placed = false;
                                    break;
                                }
                        }
                if (placed) {
                    s.positions.col(i) = p;
                    grid[(std::size_t(c[0]) * ny + c[1]) * nz + c[2]].push_back(i);
                }
            }
            if (!placed)
                throw ValidationError("build_system: could not place particles at the requested separation");
            s.charges(i) = cfg.species[sp].charge;
            s.masses(i) = cfg.species[sp].mass;
            s.species(i) = int(sp);
        }
    }
    RngHandle vel(r.seed, 4);
    if (r.thermostat.temperature > 0)
        assign_velocities(s, r.thermostat.temperature, vel, r.thermostat.kB);
    return s;
}

ParticleSystem random_neutral_system(long n, const SlabGeometry& g, RngHandle& rng, double margin)
{
    if (n < 2 || n % 2 != 0)
        throw ValidationError("random_neutral_system: need an even particle count >= 2");
    if (!(margin >= 0 && 2 * margin < g.H))
        throw ValidationError("random_neutral_system: margin must lie in [0, H/2)");
    ParticleSystem s(n);
    for (long i = 0; i < n; ++i) {
        s.positions(0, i) = rng.uniform() * g.Lx;
        s.positions(1, i) = rng.uniform() * g.Ly;
        s.positions(2, i) = margin + rng.uniform() * (g.H - 2 * margin);
        s.charges(i) = i % 2 == 0 ? 1.0 : -1.0;
        s.species(i) = i % 2;
    }
    return s;
}

int default_thread_count()
{
    if (const char* v = std::getenv("RBE2D_THREADS")) {
        char* end = nullptr;
        const long n = std::strtol(v, &end, 10);
        if (end != v && *end == '\0' && n > 0)
            return int(n);
    }
    return 0;
}

}  // namespace rbe2d
