// Experiment configuration: YAML parsing, presets and initial-state building.

#ifndef RBE2D_CONFIG_HPP
#define RBE2D_CONFIG_HPP

#include "rbe2d/md.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace rbe2d {

struct SpeciesSpec {
    std::string name;
    long count{0};
    double charge{0};
    double mass{1};

    bool operator==(const SpeciesSpec&) const = default;
};

struct ExperimentConfig {
    std::string preset;
    RunConfig run;
    std::vector<SpeciesSpec> species;
    std::string output_dir{"."};
    double min_separation{0.9};  // initial placement, in units of lj.sigma

    long particle_count() const;
    double net_charge() const;
    void validate() const;
};

/// Parses YAML text. Syntax errors carry the line number; unknown keys and
/// non-neutral species lists are rejected.
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin = "<config>");
ExperimentConfig parse_config(const std::string& path);

/// Resolves automatic alpha, Lz and M in place of their sentinels.
ExperimentConfig resolve(const ExperimentConfig& config);

/// Canonical YAML text; parse_config_text(emit_config(c)) reproduces c exactly.
std::string emit_config(const ExperimentConfig& config);

std::uint64_t fnv1a64(const std::string& bytes);
std::uint64_t config_hash(const ExperimentConfig& config);

struct PresetInfo {
    std::string name;
    std::string description;
};

std::vector<PresetInfo> preset_list();
ExperimentConfig preset(const std::string& name);

/// Random non-overlapping placement, species in listed order, Maxwell-Boltzmann velocities.
ParticleSystem build_system(const ExperimentConfig& config);

/// Alternating unit charges (N even) placed uniformly with z in [margin, H - margin].
ParticleSystem random_neutral_system(long n, const SlabGeometry& geometry, RngHandle& rng, double margin = 0.0);

/// Default thread count: the RBE2D_THREADS environment variable when set, else 0 (runtime default).
int default_thread_count();

}  // namespace rbe2d

#endif
