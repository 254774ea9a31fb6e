#include "rbe2d/md.hpp"
#include "rbe2d/special_functions.hpp"

#include <chrono>
#include <sstream>

namespace rbe2d {

void ThermostatConfig::validate() const
{
    if (kind != ThermostatKind::None && !(temperature > 0))
        throw ValidationError("thermostat: temperature must be positive");
    if (friction < 0)
        throw ValidationError("thermostat: friction must be non-negative");
    if (kind == ThermostatKind::NoseHoover && !(tau > 0))
        throw ValidationError("thermostat: Nose-Hoover tau must be positive");
    if (!(kB > 0))
        throw ValidationError("thermostat: kB must be positive");
}

void RunConfig::validate() const
{
    if (!(dt > 0))
        throw ValidationError("run: dt must be positive");
    if (sample_every < 1)
        throw ValidationError("run: sample_every must be >= 1");
    if (n_equil < 0 || n_prod < 0)
        throw ValidationError("run: step counts must be non-negative");
    if (!(geometry.Lx > 0 && geometry.Ly > 0 && geometry.H > 0))
        throw ValidationError("run: Lx, Ly and H must be positive");
    if (!(skin_fraction >= 0))
        throw ValidationError("run: skin fraction must be non-negative");
    if (!(alpha_multiplier > 0))
        throw ValidationError("run: alpha multiplier must be positive");
    if (!(splitting.r_cut > 0) || !(splitting.tolerance > 0 && splitting.tolerance < 1) || splitting.batch_size < 1)
        throw ValidationError("run: invalid splitting parameters");
    if (!(bjerrum >= 0))
        throw ValidationError("run: Bjerrum length must be non-negative");
    thermostat.validate();
}

RunConfig resolve_config(RunConfig c, std::size_t n)
{
    c.validate();
    if (!(c.splitting.alpha > 0)) {
        SlabGeometry flat{c.geometry.Lx, c.geometry.Ly, c.geometry.H, c.geometry.H};
        c.splitting.alpha = alpha_from_density(n, flat, c.alpha_multiplier);
    }
    DielectricSpec& d = c.dielectric;
    const bool contrast = d.gamma_top != 0.0 || d.gamma_bot != 0.0;
    if (!contrast)
        d.M = 0;
    else if (c.M_request >= 0)
        d.M = c.M_request;
    else
        d.M = choose_M({c.geometry.Lx, c.geometry.Ly, c.geometry.H, c.geometry.H}, d, c.splitting.tolerance);
    d.validate();
    if (!(c.geometry.Lz >= c.geometry.H))
        c.geometry.Lz = choose_Lz({c.geometry.Lx, c.geometry.Ly, c.geometry.H, c.geometry.H}, c.splitting.alpha,
                                  c.splitting.tolerance, d.M);
    c.geometry.validate();
    c.splitting.validate();
    return c;
}

namespace {

double wall_energy_total(const ParticleSystem& s, const SlabGeometry& g, const WallParams& w)
{
    if (w.epsilon == 0.0)
        return 0.0;
    double u = 0.0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        u += wall_energy(s.positions(2, i), w) + wall_energy(g.H - s.positions(2, i), w);
    return u;
}

double fitted_skin(const RunConfig& c)
{
    const double half = 0.5 * std::min(c.geometry.Lx, c.geometry.Ly);
    const double skin = c.skin_fraction * c.splitting.r_cut;
    if (c.splitting.r_cut >= half)
        throw ValidationError("run: real-space cutoff must be below half the box");
    return std::min(skin, 0.999 * (half - c.splitting.r_cut));
}

}  // namespace

ForceField::ForceField(const RunConfig& c, const ParticleSystem& initial)
    : cfg_(c), coulomb_scale_(c.bjerrum * c.thermostat.kB * c.thermostat.temperature)
{
    cfg_.geometry.validate();
    list_ = build_neighbor_list(initial, cfg_.geometry, cfg_.splitting.r_cut, fitted_skin(cfg_));
    if (cfg_.dielectric.has_images())
        check_image_stability(cfg_.geometry, cfg_.dielectric);
    if (cfg_.force_mode == ForceMode::Deterministic)
        modes_ = kmodes_for_tolerance(cfg_.geometry, cfg_.splitting.alpha, cfg_.splitting.tolerance);
    else
        sampler_ = std::make_unique<KSampler>(cfg_.geometry, cfg_.splitting.alpha, RngHandle(cfg_.seed, 2),
                                              10L * cfg_.splitting.batch_size);
}

ForceResult ForceField::compute(const ParticleSystem& s, bool want_energy)
{
    const SlabGeometry& g = cfg_.geometry;
    const DielectricSpec& d = cfg_.dielectric;
    const double alpha = cfg_.splitting.alpha;
    refresh_neighbor_list(list_, s, g);

    ForceResult out;
    const ShortRangeResult sr = lj_and_wall_energy_force(s, g, cfg_.lj, cfg_.wall, list_);
    const ShortRangeResult real = real_space_energy_force(s, g, d, alpha, list_);

    Positions kspace;
    if (cfg_.force_mode == ForceMode::Deterministic) {
        const KSpaceResult k = dielectric_fourier_energy_force(s, g, d, alpha, modes_);
        const EnergyForces ibc = ibc_energy_force(s, g, d);
        kspace = k.forces + ibc.forces;
        if (want_energy) {
            out.energy.fourier = coulomb_scale_ * (k.energy + alpha / kSqrtPi * s.charges.squaredNorm());
            out.energy.ibc = coulomb_scale_ * ibc.energy;
        }
    } else {
        KBatch batch = sampler_->sample(cfg_.splitting.batch_size);
        if (d.has_images())
            batch = precompute_Y(std::move(batch), d, g.H);
        kspace = rbe_force_dielectric(s, g, d, alpha, batch, true);
        if (want_energy) {
            if (modes_.modes.empty())
                modes_ = kmodes_for_tolerance(g, alpha, cfg_.splitting.tolerance);
            const double k = dielectric_fourier_energy(s, g, d, alpha, modes_);
            out.energy.fourier = coulomb_scale_ * (k + alpha / kSqrtPi * s.charges.squaredNorm());
            out.energy.ibc = coulomb_scale_ * ibc_energy_force(s, g, d).energy;
        }
    }
    out.forces = coulomb_scale_ * (real.forces + kspace) + sr.forces;
    if (want_energy) {
        out.energy.real = coulomb_scale_ * real.energy;
        out.energy.self = -coulomb_scale_ * alpha / kSqrtPi * s.charges.squaredNorm();
        out.energy.wall = wall_energy_total(s, g, cfg_.wall);
        out.energy.lj = sr.energy - out.energy.wall;
        out.energy.method = cfg_.force_mode == ForceMode::Deterministic ? "deterministic" : "rbe";
    }
    return out;
}

EnergyBreakdown ForceField::energy(const ParticleSystem& s)
{
    const SlabGeometry& g = cfg_.geometry;
    const DielectricSpec& d = cfg_.dielectric;
    const double alpha = cfg_.splitting.alpha;
    refresh_neighbor_list(list_, s, g);
    if (modes_.modes.empty())
        modes_ = kmodes_for_tolerance(g, alpha, cfg_.splitting.tolerance);
    EnergyBreakdown e;
    const double self = -alpha / kSqrtPi * s.charges.squaredNorm();
    e.real = coulomb_scale_ * real_space_energy_force(s, g, d, alpha, list_).energy;
    e.fourier = coulomb_scale_ * (dielectric_fourier_energy(s, g, d, alpha, modes_) - self);
    e.self = coulomb_scale_ * self;
    e.ibc = coulomb_scale_ * ibc_energy_force(s, g, d).energy;
    const double short_range = lj_and_wall_energy_force(s, g, cfg_.lj, cfg_.wall, list_).energy;
    e.wall = wall_energy_total(s, g, cfg_.wall);
    e.lj = short_range - e.wall;
    e.method = "deterministic";
    return e;
}

double kinetic_energy(const ParticleSystem& s)
{
    return 0.5 * (s.velocities.colwise().squaredNorm().transpose().cwiseProduct(s.masses)).sum();
}

double instantaneous_temperature(const ParticleSystem& s, double kB)
{
    return 2.0 * kinetic_energy(s) / (3.0 * double(s.size()) * kB);
}

void assign_velocities(ParticleSystem& s, double T, RngHandle& rng, double kB)
{
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        const double sd = std::sqrt(kB * T / s.masses(i));
        for (int c = 0; c < 3; ++c)
            s.velocities(c, i) = sd * rng.normal();
    }
    const Vec3 p = s.velocities * s.masses;
    const Vec3 vcm = p / s.masses.sum();
    s.velocities.colwise() -= vcm;
}

void langevin_step(ParticleSystem& s, Positions& F, const ForceFunction& force_fn, double dt,
                   const ThermostatConfig& cfg, RngHandle& rng)
{
    const Eigen::Index n = s.size();
    const bool noisy = cfg.kind == ThermostatKind::Langevin && cfg.friction > 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double inv_m = 1.0 / s.masses(i);
        s.velocities.col(i) += (0.5 * dt * inv_m) * F.col(i);
        s.positions.col(i) += (0.5 * dt) * s.velocities.col(i);
    }
    if (noisy) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const double c1 = std::exp(-cfg.friction * dt / s.masses(i));
            const double c2 = std::sqrt((1.0 - c1 * c1) * cfg.kB * cfg.temperature / s.masses(i));
            for (int c = 0; c < 3; ++c)
                s.velocities(c, i) = c1 * s.velocities(c, i) + c2 * rng.normal();
        }
    }
    for (Eigen::Index i = 0; i < n; ++i)
        s.positions.col(i) += (0.5 * dt) * s.velocities.col(i);
    F = force_fn(s);
    for (Eigen::Index i = 0; i < n; ++i)
        s.velocities.col(i) += (0.5 * dt / s.masses(i)) * F.col(i);
}

double nose_hoover_xi_rate(const ParticleSystem& s, const ThermostatConfig& cfg)
{
    const double g = 3.0 * double(s.size());
    const double kT = cfg.kB * cfg.temperature;
    const double Q = g * kT * cfg.tau * cfg.tau;
    return (2.0 * kinetic_energy(s) - g * kT) / Q;
}

namespace {

void nh_half(ParticleSystem& s, double dt, const ThermostatConfig& cfg, NoseHooverState& st)
{
    const double g = 3.0 * double(s.size());
    const double kT = cfg.kB * cfg.temperature;
    const double Q = g * kT * cfg.tau * cfg.tau;
    double K2 = 2.0 * kinetic_energy(s);
    st.xi += 0.25 * dt * (K2 - g * kT) / Q;
    const double scale = std::exp(-0.5 * dt * st.xi);
    s.velocities *= scale;
    K2 *= scale * scale;
    st.eta += 0.5 * dt * st.xi;
    st.xi += 0.25 * dt * (K2 - g * kT) / Q;
}

}  // namespace

void nose_hoover_step(ParticleSystem& s, Positions& F, const ForceFunction& force_fn, double dt,
                      const ThermostatConfig& cfg, NoseHooverState& st)
{
    nh_half(s, dt, cfg, st);
    const Eigen::Index n = s.size();
    for (Eigen::Index i = 0; i < n; ++i) {
        s.velocities.col(i) += (0.5 * dt / s.masses(i)) * F.col(i);
        s.positions.col(i) += dt * s.velocities.col(i);
    }
    F = force_fn(s);
    for (Eigen::Index i = 0; i < n; ++i)
        s.velocities.col(i) += (0.5 * dt / s.masses(i)) * F.col(i);
    nh_half(s, dt, cfg, st);
}

double nose_hoover_extended_energy(const ParticleSystem& s, double potential, const ThermostatConfig& cfg,
                                   const NoseHooverState& st)
{
    const double g = 3.0 * double(s.size());
    const double kT = cfg.kB * cfg.temperature;
    const double Q = g * kT * cfg.tau * cfg.tau;
    return kinetic_energy(s) + potential + 0.5 * Q * st.xi * st.xi + g * kT * st.eta;
}

RunSummary run_simulation(const RunConfig& config, const ParticleSystem& initial, const FrameSink& sink)
{
    const auto t0 = std::chrono::steady_clock::now();
    RunSummary sum;
    sum.resolved = resolve_config(config, static_cast<std::size_t>(initial.size()));
    const RunConfig& c = sum.resolved;
    initial.validate(c.geometry);

    ParticleSystem s = initial;
    ForceField ff(c, s);
    RngHandle noise(c.seed, 1);
    NoseHooverState nh;
    ForceFunction force_fn = [&](const ParticleSystem& x) { return ff.compute(x, false).forces; };

    const long total = c.n_equil + c.n_prod;
    long step = 0;
    double t_equil = 0.0, t_prod = 0.0;
    try {
        Positions F = force_fn(s);
        for (step = 1; step <= total; ++step) {
            if (c.thermostat.kind == ThermostatKind::NoseHoover)
                nose_hoover_step(s, F, force_fn, c.dt, c.thermostat, nh);
            else
                langevin_step(s, F, force_fn, c.dt, c.thermostat, noise);
            const double T = instantaneous_temperature(s, c.thermostat.kB);
            if (!std::isfinite(T))
                throw EscapeError("non-finite kinetic energy", step);
            if (step <= c.n_equil) {
                t_equil += T;
                continue;
            }
            t_prod += T;
            const long k = step - c.n_equil;
            if (k % c.sample_every == 0) {
                ++sum.frames;
                if (sink) {
                    TrajectoryFrame fr;
                    fr.step = step;
                    fr.time = step * c.dt;
                    fr.positions = s.positions;
                    fr.velocities = s.velocities;
                    fr.temperature = T;
                    if (c.frame_energies)
                        fr.energy = ff.energy(s);
                    sink(fr);
                }
            }
        }
    } catch (const EscapeError& e) {
        std::ostringstream os;
        os << e.what() << " (step " << step << ")";
        throw EscapeError(os.str(), step);
    } catch (const StabilityError& e) {
        std::ostringstream os;
        os << e.what() << " (step " << step << ")";
        throw StabilityError(os.str());
    } catch (const SingularityError& e) {
        std::ostringstream os;
        os << e.what() << " (step " << step << ")";
        throw SingularityError(os.str());
    }
    sum.steps = total;
    sum.mean_temperature_equil = c.n_equil > 0 ? t_equil / double(c.n_equil) : 0.0;
    sum.mean_temperature = c.n_prod > 0 ? t_prod / double(c.n_prod) : sum.mean_temperature_equil;
    sum.neighbor_rebuilds = ff.rebuilds();
    sum.sampler_acceptance = ff.sampler() ? ff.sampler()->acceptance_rate() : 0.0;
    sum.final_state = s;
    sum.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return sum;
}

}  // namespace rbe2d
