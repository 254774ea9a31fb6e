#include "rbe2d/analysis.hpp"
#include "rbe2d/md.hpp"

#include <doctest.h>

using namespace rbe2d;

namespace {

ParticleSystem free_particles(int n, double mass = 1.0)
{
    ParticleSystem s(n);
    RngHandle rng(1, 0);
    for (int i = 0; i < n; ++i) {
        s.positions.col(i) << rng.uniform() * 10, rng.uniform() * 10, 1.0 + rng.uniform() * 3;
        s.masses(i) = mass;
    }
    return s;
}

ForceFunction zero_force()
{
    return [](const ParticleSystem& s) { return Positions(Positions::Zero(3, s.size())); };
}

/// Small LJ slab, no charges.
RunConfig lj_config()
{
    RunConfig c;
    c.geometry = {8, 8, 6, 0};
    c.splitting = {1.0, 2.5, 1e-4, 20};
    c.bjerrum = 0.0;
    c.dt = 2e-3;
    c.sample_every = 10;
    c.thermostat = {ThermostatKind::NoseHoover, 1.0, 1.0, 0.05, 1.0};
    c.force_mode = ForceMode::Deterministic;
    return c;
}

ParticleSystem lattice(const RunConfig& c, int per_side, int layers, double charge = 0.0)
{
    const int n = per_side * per_side * layers;
    ParticleSystem s(n);
    int i = 0;
    for (int a = 0; a < per_side; ++a)
        for (int b = 0; b < per_side; ++b)
            for (int l = 0; l < layers; ++l, ++i) {
                s.positions.col(i) << (a + 0.5) * c.geometry.Lx / per_side, (b + 0.5) * c.geometry.Ly / per_side,
                    1.0 + l * (c.geometry.H - 2.0) / std::max(1, layers - 1);
                s.charges(i) = charge * (i % 2 ? -1 : 1);
            }
    RngHandle rng(2, 0);
    assign_velocities(s, c.thermostat.temperature, rng);
    return s;
}

}  // namespace

TEST_CASE("config validation")
{
    RunConfig c = lj_config();
    CHECK_NOTHROW(c.validate());
    c.dt = 0;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = lj_config();
    c.sample_every = 0;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = lj_config();
    c.thermostat.temperature = -1;
    CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("resolution fills alpha, Lz and M")
{
    RunConfig c = lj_config();
    c.splitting.alpha = 0;
    c.dielectric = DielectricSpec::from_contrasts(0.9, 0.9, 0);
    const RunConfig r = resolve_config(c, 100);
    CHECK(r.splitting.alpha == doctest::Approx(alpha_from_density(100, {8, 8, 6, 6})));
    CHECK(r.dielectric.M == choose_M({8, 8, 6, 6}, r.dielectric, 1e-4));
    CHECK(r.geometry.Lz == doctest::Approx(choose_Lz({8, 8, 6, 6}, r.splitting.alpha, 1e-4, r.dielectric.M)));
    c.M_request = 2;
    CHECK(resolve_config(c, 100).dielectric.M == 2);
}

TEST_CASE("frictionless Langevin step is velocity Verlet")
{
    ParticleSystem s = free_particles(3);
    s.velocities.setConstant(0.5);
    ThermostatConfig t{ThermostatKind::Langevin, 1.0, 0.0, 0.01, 1.0};
    RngHandle rng(1, 1);
    const Positions r0 = s.positions;
    Positions F = Positions::Zero(3, 3);
    for (int k = 0; k < 10; ++k)
        langevin_step(s, F, zero_force(), 0.1, t, rng);
    CHECK((s.positions - r0).cwiseAbs().maxCoeff() == doctest::Approx(0.5));
    CHECK(s.velocities.cwiseAbs().minCoeff() == doctest::Approx(0.5));
}

TEST_CASE("a cold particle at rest stays put")
{
    ParticleSystem s = free_particles(1);
    ThermostatConfig t{ThermostatKind::Langevin, 0.0, 5.0, 0.01, 1.0};
    RngHandle rng(1, 1);
    Positions F = Positions::Zero(3, 1);
    const Positions r0 = s.positions;
    for (int k = 0; k < 10; ++k)
        langevin_step(s, F, zero_force(), 0.1, t, rng);
    CHECK((s.positions - r0).norm() == 0.0);
}

TEST_CASE("free Langevin particles reach the Maxwell-Boltzmann variance")
{
    ParticleSystem s = free_particles(1, 2.0);
    ThermostatConfig t{ThermostatKind::Langevin, 1.5, 20.0, 0.01, 1.0};
    RngHandle rng(3, 1);
    Positions F = Positions::Zero(3, 1);
    double acc = 0;
    const int n = 100000;
    for (int k = 0; k < n; ++k) {
        langevin_step(s, F, zero_force(), 0.05, t, rng);
        acc += s.velocities.squaredNorm();
    }
    CHECK(acc / (3.0 * n) == doctest::Approx(1.5 / 2.0).epsilon(0.02));
}

TEST_CASE("Nose-Hoover fixed point")
{
    ParticleSystem s = free_particles(4);
    RngHandle rng(4, 0);
    assign_velocities(s, 1.0, rng);
    ThermostatConfig t{ThermostatKind::NoseHoover, 1.0, 0.0, 0.1, 1.0};
    t.temperature = instantaneous_temperature(s, 1.0);
    CHECK(std::abs(nose_hoover_xi_rate(s, t)) < 1e-12);
}

TEST_CASE("momentum is conserved without thermostat or walls")
{
    RunConfig c = lj_config();
    c.thermostat.kind = ThermostatKind::None;
    c.wall.epsilon = 0.0;
    c.bjerrum = 1.0;
    c.splitting.alpha = 1.2;
    ParticleSystem s = lattice(c, 4, 2, 1.0);
    const RunConfig r = resolve_config(c, s.size());
    ForceField ff(r, s);
    ForceFunction f = [&](const ParticleSystem& x) { return ff.compute(x, false).forces; };
    Positions F = f(s);
    const Vec3 p0 = s.velocities * s.masses;
    RngHandle rng(0, 1);
    for (int k = 0; k < 50; ++k)
        langevin_step(s, F, f, 1e-3, r.thermostat, rng);
    const Vec3 p1 = s.velocities * s.masses;
    CHECK((p1 - p0).norm() < 1e-9);
}

TEST_CASE("Nose-Hoover extended energy is conserved")
{
    RunConfig c = lj_config();
    c.dt = 1e-3;
    c.thermostat.tau = 0.1;
    ParticleSystem s = lattice(c, 5, 4);
    const RunConfig r = resolve_config(c, s.size());
    ForceField ff(r, s);
    ForceFunction f = [&](const ParticleSystem& x) { return ff.compute(x, false).forces; };
    Positions F = f(s);
    NoseHooverState st;
    const double h0 = nose_hoover_extended_energy(s, ff.energy(s).total(), r.thermostat, st);
    for (int k = 0; k < 10000; ++k)
        nose_hoover_step(s, F, f, r.dt, r.thermostat, st);
    const double h1 = nose_hoover_extended_energy(s, ff.energy(s).total(), r.thermostat, st);
    CHECK(std::abs(h1 - h0) / std::abs(h0) < 1e-4);
}

TEST_CASE("forces from the force field match its energy")
{
    RunConfig c = lj_config();
    c.splitting.alpha = 1.3;
    c.dielectric = DielectricSpec::from_contrasts(0.5, 0.5, 0);
    c.M_request = 1;
    c.splitting.tolerance = 1e-8;
    c.bjerrum = 2.0;
    ParticleSystem s = lattice(c, 3, 2, 1.0);
    s.positions(0, 0) += 0.3;
    s.positions(2, 3) += 0.2;
    const RunConfig r = resolve_config(c, s.size());
    ForceField ff(r, s);
    const ForceResult fr = ff.compute(s, true);
    CHECK(fr.energy.total() == doctest::Approx(ff.energy(s).total()).epsilon(1e-12));
    const double h = 1e-6;
    for (int i : {0, 3}) {
        for (int a = 0; a < 3; ++a) {
            ParticleSystem p = s, m = s;
            p.positions(a, i) += h;
            m.positions(a, i) -= h;
            const double fd = -(ff.energy(p).total() - ff.energy(m).total()) / (2 * h);
            CHECK(fr.forces(a, i) == doctest::Approx(fd).epsilon(1e-5));
        }
    }
}

TEST_CASE("runs are reproducible and frames follow sample_every")
{
    RunConfig c = lj_config();
    c.force_mode = ForceMode::RBE;
    c.bjerrum = 1.0;
    c.splitting.alpha = 1.0;
    c.n_equil = 20;
    c.n_prod = 60;
    c.sample_every = 20;
    c.seed = 11;
    const ParticleSystem s = lattice(c, 3, 2, 1.0);
    std::vector<TrajectoryFrame> a, b;
    run_simulation(c, s, [&](const TrajectoryFrame& f) { a.push_back(f); });
    const RunSummary sum = run_simulation(c, s, [&](const TrajectoryFrame& f) { b.push_back(f); });
    REQUIRE(a.size() == 3);
    CHECK(sum.frames == 3);
    CHECK(a[0].step == 40);
    for (std::size_t k = 0; k < a.size(); ++k) {
        CHECK(a[k].positions == b[k].positions);
        CHECK(a[k].energy.total() == b[k].energy.total());
    }
}

TEST_CASE("zero production steps yield an equilibration-only summary")
{
    RunConfig c = lj_config();
    c.n_equil = 30;
    c.n_prod = 0;
    const ParticleSystem s = lattice(c, 3, 2);
    long frames = 0;
    const RunSummary sum = run_simulation(c, s, [&](const TrajectoryFrame&) { ++frames; });
    CHECK(frames == 0);
    CHECK(sum.steps == 30);
    CHECK(sum.mean_temperature == sum.mean_temperature_equil);
    CHECK(sum.mean_temperature > 0);
}

TEST_CASE("escaping particles abort with the step index")
{
    RunConfig c = lj_config();
    c.n_equil = 100;
    c.dt = 0.01;
    c.thermostat.kind = ThermostatKind::None;
    ParticleSystem s = lattice(c, 3, 2);
    s.velocities.row(2).setConstant(-200.0);
    try {
        run_simulation(c, s, nullptr);
        FAIL("expected an escape");
    } catch (const EscapeError& e) {
        CHECK(e.step() >= 1);
        CHECK(std::string(e.what()).find("step") != std::string::npos);
    }
}
