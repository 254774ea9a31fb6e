#ifndef RBE2D_REALSPACE_HPP
#define RBE2D_REALSPACE_HPP

#include "rbe2d/core.hpp"

#include <vector>

namespace rbe2d {

/// Half neighbor list: pair (i, j) with i < j is stored once, under i.
struct NeighborList {
    double r_cut{0};
    double skin{0};
    double cell_size{0};
    std::vector<std::vector<int>> neighbors;
    long generation{0};
    Positions reference;  // positions at build time

    std::size_t pair_count() const;
    /// True once any particle has moved more than skin/2 since the build.
    bool needs_rebuild(const ParticleSystem& system) const;
};

NeighborList build_neighbor_list(const ParticleSystem& system, const SlabGeometry& geometry, double r_cut,
                                 double skin);

/// Rebuilds `list` in place when stale; returns true if it did.
bool refresh_neighbor_list(NeighborList& list, const ParticleSystem& system, const SlabGeometry& geometry);

struct LJParams {
    double epsilon{1};
    double sigma{1};

    double r_lj() const { return std::pow(2.0, 1.0 / 6.0) * sigma; }
};

struct WallParams {
    double epsilon{1};
    double sigma{0.5};

    double range() const { return std::pow(2.0, 1.0 / 6.0) * sigma; }
};

using ShortRangeResult = EnergyForces;

/// erfc-screened Coulomb within r_cut for actual pairs and for actual-image
/// pairs up to level spec.M. Forces are exact gradients of the truncated energy
/// with respect to actual positions.
ShortRangeResult real_space_energy_force(const ParticleSystem& system, const SlabGeometry& geometry,
                                         const DielectricSpec& spec, double alpha, const NeighborList& list);

/// Shifted-truncated repulsive LJ between particles plus 12-6 walls at z = 0 and z = H.
ShortRangeResult lj_and_wall_energy_force(const ParticleSystem& system, const SlabGeometry& geometry,
                                          const LJParams& lj, const WallParams& wall, const NeighborList& list);

double lj_pair_energy(double r, const LJParams& lj);
double wall_energy(double distance, const WallParams& wall);

}  // namespace rbe2d

#endif
