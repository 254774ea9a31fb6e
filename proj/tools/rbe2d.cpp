#include "rbe2d/ewald2d.hpp"
#include "rbe2d/io.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rbe2d;

namespace {

struct Options {
    std::string config;
    std::string preset_name;
    std::string out;
    std::optional<std::uint64_t> seed;
    int threads{default_thread_count()};
};

ExperimentConfig load(const Options& o)
{
    if (o.config.empty() && o.preset_name.empty())
        throw ValidationError("either --config or --preset is required");
    if (!o.config.empty() && !o.preset_name.empty())
        throw ValidationError("--config and --preset are mutually exclusive");
    ExperimentConfig c = o.config.empty() ? preset(o.preset_name) : parse_config(o.config);
    if (o.seed)
        c.run.seed = *o.seed;
    if (!o.out.empty())
        c.output_dir = o.out;
    return c;
}

fs::path output_dir(const Options& o, const ExperimentConfig* c)
{
    fs::path dir = !o.out.empty() ? fs::path(o.out) : (c ? fs::path(c->output_dir) : fs::path("."));
    fs::create_directories(dir);
    return dir;
}

void write_json(const fs::path& path, const json& j)
{
    std::ofstream out(path);
    if (!out)
        throw ValidationError(path.string() + ": cannot open for writing");
    out << j.dump(2) << "\n";
}

int cmd_run(const Options& o)
{
    const ExperimentConfig cfg = resolve(load(o));
    const fs::path dir = output_dir(o, &cfg);
    const ParticleSystem system = build_system(cfg);
    TrajectoryWriter traj((dir / "trajectory.bin").string(), cfg, system);
    const RunSummary sum = run_simulation(cfg.run, system, [&](const TrajectoryFrame& f) { traj.write(f); });
    traj.close();
    {
        std::ofstream echo(dir / "resolved_config.yaml");
        echo << emit_config(cfg);
    }
    json j = to_json(sum);
    j["trajectory"] = (dir / "trajectory.bin").string();
    j["config_hash"] = config_hash(cfg);
    write_json(dir / "summary.json", j);
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_energy(const Options& o, int rbe_samples, bool skip_reference)
{
    const ExperimentConfig cfg = resolve(load(o));
    const RunConfig& r = cfg.run;
    const SlabGeometry& g = r.geometry;
    const DielectricSpec& d = r.dielectric;
    const ParticleSystem s = build_system(cfg);
    const double alpha = r.splitting.alpha;
    const double scale = r.bjerrum * r.thermostat.kB * r.thermostat.temperature;

    ForceField ff(r, s);
    const EnergyBreakdown reform = ff.energy(s);
    EnergyBreakdown rform = reform;
    rform.method = "reformulated";
    rform.elc = scale * elc_energy(s, g, d, default_elc_hmax(g, d));

    json out{{"schema_version", kSchemaVersion}, {"particles", s.size()}, {"coulomb_scale", scale}};
    out["reformulated"] = to_json(rform);

    if (!skip_reference) {
        const Ewald2DParams p = converged_ewald2d_params(g, alpha);
        EnergyBreakdown ref = d.has_images() ? dielectric_reference_energy(s, g, d, p) : total_energy_2d(s, g, p);
        ref.real *= scale;
        ref.fourier *= scale;
        ref.self *= scale;
        ref.ibc *= scale;
        ref.lj = reform.lj;
        ref.wall = reform.wall;
        ref.method = "reference";
        out["reference"] = to_json(ref);
        out["relative_difference"] = std::abs(rform.coulomb() - ref.coulomb()) / std::abs(ref.coulomb());
    }

    RngHandle rng(r.seed, 2);
    KSampler sampler(g, alpha, rng, 10L * r.splitting.batch_size);
    std::vector<double> est;
    for (int k = 0; k < rbe_samples; ++k)
        est.push_back(scale * rbe_energy_estimate(s, g, d, alpha, sampler.sample(r.splitting.batch_size)));
    if (!est.empty()) {
        double m = 0.0, v = 0.0;
        for (double x : est)
            m += x;
        m /= double(est.size());
        for (double x : est)
            v += (x - m) * (x - m);
        const double se = est.size() > 1 ? std::sqrt(v / double(est.size() - 1) / double(est.size())) : 0.0;
        EnergyBreakdown rb = reform;
        rb.fourier = m - reform.self - reform.ibc;
        rb.method = "rbe-mean";
        json jr = to_json(rb);
        jr["samples"] = rbe_samples;
        jr["batch_size"] = r.splitting.batch_size;
        jr["coulomb_stderr"] = se;
        out["rbe_mean"] = jr;
    }
    std::cout << out.dump(2) << "\n";
    if (!o.out.empty())
        write_json(output_dir(o, nullptr) / "energy.json", out);
    return 0;
}

struct Check {
    std::string name;
    bool pass;
    double value;
    double threshold;
};

std::vector<Check> suite_oracle(RngHandle& rng)
{
    std::vector<Check> out;
    const SlabGeometry g0{4.0, 5.0, 3.0, 3.0};
    const double alpha = 2.6, rc = 1.95;
    const double Lz = choose_Lz(g0, alpha, 1e-8);
    const SlabGeometry g{g0.Lx, g0.Ly, g0.H, Lz};
    const KModeSet modes = kmodes_for_tolerance(g, alpha, 1e-10);
    double worst = 0.0;
    for (int c = 0; c < 5; ++c) {
        const ParticleSystem s = random_neutral_system(32, g, rng);
        const double ref = total_energy_2d(s, g, converged_ewald2d_params(g, alpha)).coulomb();
        const double val = reformulated_energy(s, g, DielectricSpec::homogeneous(), alpha, rc, modes).coulomb();
        worst = std::max(worst, std::abs(val - ref) / std::abs(ref));
    }
    out.push_back({"oracle.homogeneous.relative_error", worst < 1e-6, worst, 1e-6});
    return out;
}

std::vector<Check> suite_dielectric(RngHandle& rng)
{
    const SlabGeometry g0{4.0, 4.0, 2.0, 2.0};
    const double alpha = 2.6, rc = 1.95;
    DielectricSpec d = DielectricSpec::from_contrasts(0.9, 0.9, 1);
    d.M = choose_M(g0, d, 1e-6);
    const double Lz = choose_Lz(g0, alpha, 1e-8, d.M);
    const SlabGeometry g{g0.Lx, g0.Ly, g0.H, Lz};
    const KModeSet modes = kmodes_for_tolerance(g, alpha, 1e-10);
    double worst = 0.0;
    for (int c = 0; c < 3; ++c) {
        const ParticleSystem s = random_neutral_system(16, g, rng, 0.05);
        const double ref = dielectric_reference_energy(s, g, d, converged_ewald2d_params(g, alpha)).coulomb();
        const double val = reformulated_energy(s, g, d, alpha, rc, modes).coulomb();
        worst = std::max(worst, std::abs(val - ref) / std::abs(ref));
    }
    return {{"oracle.dielectric.relative_error", worst < 1e-5, worst, 1e-5}};
}

std::vector<Check> suite_sampler(RngHandle& rng)
{
    const SlabGeometry g{10.0, 10.0, 5.0, 15.0};
    KSampler sampler(g, 0.6, rng.split(11), 1000);
    const Chi2Result r = sampler_chi2_test(sampler, 200000);
    return {{"sampler.chi2.p_value", r.p_value > 0.01, r.p_value, 0.01}};
}

std::vector<Check> suite_quadrature()
{
    double worst = 0.0;
    for (double a : {0.3, 0.8, 1.5})
        for (double b : {0.0, 1.0, 3.0})
            for (double xi : {0.6, 0.9, 1.2}) {
                const QuadratureErrorReport rep = trapezoid_error_report(a, b, xi);
                const double err = gaussian_pole_integral(a, b) - gaussian_pole_trapezoid(a, b, xi, 400);
                const double resid = std::abs(err - rep.residue_correction);
                const double envelope = std::exp(rep.remainder_order) + 1e-14;
                worst = std::max(worst, resid / envelope);
            }
    return {{"quadrature.remainder_over_envelope", worst <= 1.0, worst, 1.0}};
}

int cmd_validate(const Options& o, const std::string& suite)
{
    RngHandle rng(o.seed.value_or(2024), 9);
    std::vector<Check> checks;
    auto add = [&](std::vector<Check> v) { checks.insert(checks.end(), v.begin(), v.end()); };
    const bool all = suite == "all";
    if (all || suite == "oracle")
        add(suite_oracle(rng));
    if (all || suite == "dielectric")
        add(suite_dielectric(rng));
    if (all || suite == "sampler")
        add(suite_sampler(rng));
    if (all || suite == "quadrature")
        add(suite_quadrature());
    if (checks.empty())
        throw ValidationError("unknown validation suite '" + suite + "'");

    json j{{"schema_version", kSchemaVersion}, {"suite", suite}, {"checks", json::array()}};
    bool ok = true;
    std::printf("%-40s %-6s %-14s %s\n", "check", "result", "value", "threshold");
    for (const auto& c : checks) {
        std::printf("%-40s %-6s %-14.6e %.3e\n", c.name.c_str(), c.pass ? "PASS" : "FAIL", c.value, c.threshold);
        j["checks"].push_back({{"name", c.name}, {"pass", c.pass}, {"value", c.value}, {"threshold", c.threshold}});
        ok = ok && c.pass;
    }
    j["pass"] = ok;
    if (!o.out.empty())
        write_json(output_dir(o, nullptr) / "validate.json", j);
    return ok ? 0 : 1;
}

int cmd_analyze(const Options& o, const std::string& path, const std::string& what, int bins, int blocks,
                const std::string& compare)
{
    const Trajectory t = read_trajectory(path);
    const ExperimentConfig cfg = parse_config_text(t.header.config_text, path);
    const fs::path dir = output_dir(o, nullptr);
    const bool all = what == "all";
    json report{{"schema_version", kSchemaVersion}, {"frames", t.frames.size()}, {"outputs", json::array()}};
    bool known = false;

    if (all || what == "profile") {
        known = true;
        std::vector<std::string> head{"z"};
        std::vector<Histogram1D> hs;
        for (std::size_t sp = 0; sp < cfg.species.size(); ++sp) {
            hs.push_back(concentration_profile(t.frames, t.header.species, int(sp), cfg.run.geometry, bins, blocks));
            head.push_back(cfg.species[sp].name + "_density");
            head.push_back(cfg.species[sp].name + "_stderr");
        }
        std::vector<std::vector<double>> rows;
        for (int b = 0; b < bins; ++b) {
            std::vector<double> row{hs.front().center(b)};
            for (const auto& h : hs) {
                row.push_back(h.counts(b));
                row.push_back(h.errors.size() ? h.errors(b) : 0.0);
            }
            rows.push_back(row);
        }
        write_csv((dir / "profile.csv").string(), head, rows);
        report["outputs"].push_back("profile.csv");
    }
    if (all || what == "msd") {
        known = true;
        const Series x = msd(t.frames, Axis::X), y = msd(t.frames, Axis::Y), z = msd(t.frames, Axis::Z),
                     a = msd(t.frames, Axis::All);
        std::vector<std::vector<double>> rows;
        for (std::size_t i = 0; i < a.size(); ++i)
            rows.push_back({a[i].first, x[i].second, y[i].second, z[i].second, a[i].second});
        write_csv((dir / "msd.csv").string(), {"lag_time", "msd_x", "msd_y", "msd_z", "msd_all"}, rows);
        report["outputs"].push_back("msd.csv");
    }
    if (all || what == "vacf") {
        known = true;
        std::vector<std::vector<double>> rows;
        for (const auto& [lag, c] : vacf(t.frames))
            rows.push_back({lag, c});
        write_csv((dir / "vacf.csv").string(), {"lag_time", "vacf"}, rows);
        report["outputs"].push_back("vacf.csv");
    }
    if (all || what == "energy") {
        known = true;
        std::vector<std::vector<double>> rows;
        for (const auto& f : t.frames) {
            const EnergyBreakdown& e = f.energy;
            rows.push_back({double(f.step), f.time, f.temperature, e.real, e.fourier, e.self, e.ibc, e.lj, e.wall,
                            e.total()});
        }
        write_csv((dir / "energy.csv").string(),
                  {"step", "time", "temperature", "real", "fourier", "self", "ibc", "lj", "wall", "total"}, rows);
        report["outputs"].push_back("energy.csv");
    }
    if (!known)
        throw ValidationError("unknown analysis '" + what + "' (profile, msd, vacf, energy, all)");
    if (!compare.empty()) {
        const Trajectory other = read_trajectory(compare);
        if (t.frames.empty() || other.frames.empty())
            throw ValidationError("energy comparison needs frames in both trajectories");
        report["w2_energy"] = w2_distance(potential_energies(t.frames), potential_energies(other.frames));
    }
    std::cout << report.dump(2) << "\n";
    return 0;
}

int cmd_presets(const Options& o)
{
    if (!o.preset_name.empty()) {
        std::cout << emit_config(preset(o.preset_name));
        return 0;
    }
    json j{{"schema_version", kSchemaVersion}, {"presets", json::array()}};
    for (const auto& p : preset_list())
        j["presets"].push_back({{"name", p.name}, {"description", p.description}});
    std::cout << j.dump(2) << "\n";
    return 0;
}

int exit_code(const Error& e)
{
    const std::string k = e.kind();
    if (k == "validation")
        return 2;
    if (k == "singularity")
        return 3;
    if (k == "stability")
        return 4;
    if (k == "escape")
        return 5;
    return 1;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Random batch Ewald molecular dynamics for doubly periodic slabs"};
    app.require_subcommand(1);
    app.fallthrough();
    Options o;
    std::uint64_t seed = 0;
    app.add_option("--config", o.config, "YAML experiment configuration");
    app.add_option("--preset", o.preset_name, "named preset instead of a configuration file");
    app.add_option("--out", o.out, "output directory");
    auto* seed_opt = app.add_option("--seed", seed, "override the configured seed");
    app.add_option("--threads", o.threads, "worker threads (default: RBE2D_THREADS or runtime default)");

    auto* run = app.add_subcommand("run", "run a simulation, write trajectory.bin and summary.json");
    auto* energy = app.add_subcommand("energy", "single-point energies by every method");
    int samples = 100;
    bool skip_reference = false;
    energy->add_option("--samples", samples, "random batches averaged for the RBE estimate");
    energy->add_flag("--skip-reference", skip_reference, "omit the direct lattice-sum reference");
    auto* validate = app.add_subcommand("validate", "run a validation suite");
    std::string suite = "all";
    validate->add_option("suite", suite, "oracle, dielectric, sampler, quadrature or all");
    auto* analyze = app.add_subcommand("analyze", "post-process a trajectory into CSV tables");
    std::string traj, what = "all", compare;
    int bins = 60, blocks = 10;
    analyze->add_option("trajectory", traj, "trajectory file")->required();
    analyze->add_option("--what", what, "profile, msd, vacf, energy or all");
    analyze->add_option("--bins", bins, "profile bins");
    analyze->add_option("--blocks", blocks, "blocks for profile error bars");
    analyze->add_option("--compare", compare, "second trajectory for the energy W2 distance");
    auto* presets = app.add_subcommand("presets", "list presets, or print one with --preset");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0)
            return app.exit(e);
        std::cerr << error_json("usage", e.what()).dump() << "\n";
        return 64;
    }
    if (*seed_opt)
        o.seed = seed;
    if (o.threads > 0)
        omp_set_num_threads(o.threads);

    try {
        if (*run)
            return cmd_run(o);
        if (*energy)
            return cmd_energy(o, samples, skip_reference);
        if (*validate)
            return cmd_validate(o, suite);
        if (*analyze)
            return cmd_analyze(o, traj, what, bins, blocks, compare);
        if (*presets)
            return cmd_presets(o);
    } catch (const Error& e) {
        std::cerr << error_json(e.kind(), e.what()).dump() << "\n";
        return exit_code(e);
    } catch (const std::exception& e) {
        std::cerr << error_json("internal", e.what()).dump() << "\n";
        return 1;
    }
    return 0;
}
