#ifndef RBE2D_MD_HPP
#define RBE2D_MD_HPP

#include "rbe2d/fourier.hpp"
#include "rbe2d/rbe.hpp"
#include "rbe2d/realspace.hpp"

#include <functional>
#include <memory>
#include <optional>

namespace rbe2d {

enum class ThermostatKind { None, Langevin, NoseHoover };
enum class ForceMode { Deterministic, RBE };

struct ThermostatConfig {
    ThermostatKind kind{ThermostatKind::NoseHoover};
    double temperature{1};
    double friction{1};  // Langevin gamma
    double tau{0.01};    // Nose-Hoover relaxation time
    double kB{1};

    void validate() const;
};

struct RunConfig {
    double dt{1e-3};
    long n_equil{0};
    long n_prod{0};
    long sample_every{100};
    ForceMode force_mode{ForceMode::RBE};
    std::uint64_t seed{0};

    SlabGeometry geometry;  // Lz <= 0 selects it from the tolerance
    DielectricSpec dielectric;
    int M_request{-1};      // < 0 selects M from the tolerance when contrasts are nonzero
    SplittingParams splitting;
    double alpha_multiplier{1};  // used when splitting.alpha <= 0
    double skin_fraction{0.3};

    ThermostatConfig thermostat;
    double bjerrum{1};  // Coulomb energies carry bjerrum * kB * T
    LJParams lj;
    WallParams wall;
    bool frame_energies{true};

    void validate() const;
};

/// Fills alpha, Lz and M that were left to automatic selection.
RunConfig resolve_config(RunConfig config, std::size_t n_particles);

struct TrajectoryFrame {
    long step{0};
    double time{0};
    Positions positions;
    Positions velocities;
    EnergyBreakdown energy;
    double temperature{0};
};

struct ForceResult {
    Positions forces;
    EnergyBreakdown energy;  // fields populated only when requested
};

/// Real-space, reciprocal and short-range forces for one configuration.
class ForceField {
public:
    ForceField(const RunConfig& resolved, const ParticleSystem& initial);

    ForceResult compute(const ParticleSystem& system, bool want_energy);
    /// Deterministic energy breakdown regardless of force mode.
    EnergyBreakdown energy(const ParticleSystem& system);

    const KModeSet& modes() const { return modes_; }
    double coulomb_scale() const { return coulomb_scale_; }
    long rebuilds() const { return list_.generation; }
    const KSampler* sampler() const { return sampler_.get(); }

private:
    RunConfig cfg_;
    double coulomb_scale_;
    NeighborList list_;
    KModeSet modes_;
    std::unique_ptr<KSampler> sampler_;
};

struct NoseHooverState {
    double xi{0};   // thermostat velocity
    double eta{0};  // thermostat position
};

double kinetic_energy(const ParticleSystem& system);
double instantaneous_temperature(const ParticleSystem& system, double kB = 1.0);

/// Maxwell-Boltzmann velocities with zero total momentum.
void assign_velocities(ParticleSystem& system, double temperature, RngHandle& rng, double kB = 1.0);

using ForceFunction = std::function<Positions(const ParticleSystem&)>;

/// One BAOAB step. `forces` holds F(x_n) on entry and F(x_{n+1}) on return.
void langevin_step(ParticleSystem& system, Positions& forces, const ForceFunction& force_fn, double dt,
                   const ThermostatConfig& config, RngHandle& rng);

/// One Nose-Hoover (chain length 1) step with symmetric thermostat half-steps.
void nose_hoover_step(ParticleSystem& system, Positions& forces, const ForceFunction& force_fn, double dt,
                      const ThermostatConfig& config, NoseHooverState& state);

/// d xi / dt for the current kinetic energy.
double nose_hoover_xi_rate(const ParticleSystem& system, const ThermostatConfig& config);

double nose_hoover_extended_energy(const ParticleSystem& system, double potential, const ThermostatConfig& config,
                                   const NoseHooverState& state);

struct RunSummary {
    long steps{0};
    long frames{0};
    double mean_temperature{0};       // production, or equilibration when there is none
    double mean_temperature_equil{0};
    double wall_seconds{0};
    long neighbor_rebuilds{0};
    double sampler_acceptance{0};
    RunConfig resolved;
    ParticleSystem final_state;
};

using FrameSink = std::function<void(const TrajectoryFrame&)>;

RunSummary run_simulation(const RunConfig& config, const ParticleSystem& initial, const FrameSink& sink = {});

}  // namespace rbe2d

#endif
