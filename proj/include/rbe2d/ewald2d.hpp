// Exact doubly-periodic Ewald sums, O(N^2). The trusted reference for every
// approximation in the library; clarity over speed.

#ifndef RBE2D_EWALD2D_HPP
#define RBE2D_EWALD2D_HPP

#include "rbe2d/core.hpp"

#include <functional>

namespace rbe2d {

struct Ewald2DParams {
    double alpha{1};
    int real_shells{3};  // replicas with max(|nx|, |ny|) <= real_shells
    int h_max{20};       // reciprocal modes with max(|mx|, |my|) <= h_max

    void validate() const;
};

/// Truncations that make both sums converge below `tolerance` relative to O(1) terms.
Ewald2DParams converged_ewald2d_params(const SlabGeometry& geometry, double alpha, double tolerance = 1e-16);

double energy_real_2d(const ParticleSystem& system, const SlabGeometry& geometry, const Ewald2DParams& params);

/// Reciprocal h-sum plus self term plus zero-mode correction.
double energy_fourier_2d(const ParticleSystem& system, const SlabGeometry& geometry, const Ewald2DParams& params);

EnergyBreakdown total_energy_2d(const ParticleSystem& system, const SlabGeometry& geometry,
                                const Ewald2DParams& params);

/// Energy of the actual charges in the presence of their 2MN explicit images
/// (image-image interactions are not part of the model). Fields: real holds the
/// erfc part, fourier the h-sum plus zero mode, self the Gaussian self term.
EnergyBreakdown dielectric_reference_energy(const ParticleSystem& system, const SlabGeometry& geometry,
                                            const DielectricSpec& spec, const Ewald2DParams& params);

using EnergyFunction = std::function<double(const ParticleSystem&, const SlabGeometry&)>;

/// Central finite-difference forces -dU/dr, component by component.
Positions force_fd_oracle(const ParticleSystem& system, const SlabGeometry& geometry, const EnergyFunction& energy,
                          double step);

}  // namespace rbe2d

#endif
