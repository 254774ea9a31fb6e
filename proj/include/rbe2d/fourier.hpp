// Reciprocal-space machinery for slab geometries: the Ewald3D sum on a cell
// padded with a vacuum layer, the boundary and layer corrections, and the
// image-charge generalization for dielectric interfaces.

#ifndef RBE2D_FOURIER_HPP
#define RBE2D_FOURIER_HPP

#include "rbe2d/core.hpp"

#include <complex>
#include <vector>

namespace rbe2d {

using cplx = std::complex<double>;

struct KMode {
    Eigen::Vector3i n{Eigen::Vector3i::Zero()};
    Vec3 k{Vec3::Zero()};
    double k2{0};

    double magnitude() const { return std::sqrt(k2); }
    Vec3 reflected() const { return {k(0), k(1), -k(2)}; }
};

KMode make_kmode(const Eigen::Vector3i& n, const SlabGeometry& geometry);

inline double gaussian_weight(double k2, double alpha) { return std::exp(-k2 / (4.0 * alpha * alpha)); }

/// Modes with 0 < |k| <= k_cut, sorted by |k| then lexicographically in n.
/// With half_space, only one of each (k, -k) pair is kept; sums then carry weight 2.
struct KModeSet {
    std::vector<KMode> modes;
    double k_cut{0};
    bool half_space{true};
};

KModeSet enumerate_kmodes(const SlabGeometry& geometry, double k_cut, bool half_space = true);

/// Smallest k with exp(-k^2/4a^2)/k^2 below tolerance/10.
double kspace_cutoff(double alpha, double tolerance);

KModeSet kmodes_for_tolerance(const SlabGeometry& geometry, double alpha, double tolerance);

/// Image-level sums that decouple the particle and reflection loops.
struct YCoefficients {
    cplx odd{0.0, 0.0};
    cplx even{0.0, 0.0};
};

YCoefficients y_coefficients(double kz, const DielectricSpec& spec, double H);

struct StructureFactors {
    std::vector<cplx> rho;        // sum_i q_i e^{i k r_i}
    std::vector<cplx> rho_bar_M;  // actual plus image charges, conjugated convention
};

StructureFactors structure_factors(const ParticleSystem& system, const std::vector<KMode>& modes,
                                   const DielectricSpec& spec, double H);

enum class StabilityCheck { Enforce, Skip };

/// Throws StabilityError when the padded cell cannot hold the M image layers.
void check_image_stability(const SlabGeometry& geometry, const DielectricSpec& spec);

struct KSpaceResult {
    double energy{0};  // includes the Gaussian self term
    Positions forces;
    std::vector<cplx> rho;
};

double fourier3d_energy(const ParticleSystem& system, const SlabGeometry& geometry, double alpha,
                        const KModeSet& modes);
KSpaceResult fourier3d_energy_force(const ParticleSystem& system, const SlabGeometry& geometry, double alpha,
                                    const KModeSet& modes);

double dielectric_fourier_energy(const ParticleSystem& system, const SlabGeometry& geometry,
                                 const DielectricSpec& spec, double alpha, const KModeSet& modes,
                                 StabilityCheck check = StabilityCheck::Enforce);
KSpaceResult dielectric_fourier_energy_force(const ParticleSystem& system, const SlabGeometry& geometry,
                                             const DielectricSpec& spec, double alpha, const KModeSet& modes,
                                             StabilityCheck check = StabilityCheck::Enforce);

/// Dipole boundary correction. Without images: (2 pi / V) (sum q z)^2.
EnergyForces ibc_energy_force(const ParticleSystem& system, const SlabGeometry& geometry,
                              const DielectricSpec& spec = DielectricSpec::homogeneous());

/// Layer-correction term the reformulation neglects; diagnostic only.
double elc_energy(const ParticleSystem& system, const SlabGeometry& geometry, const DielectricSpec& spec, int h_max,
                  StabilityCheck check = StabilityCheck::Enforce);
int default_elc_hmax(const SlabGeometry& geometry, const DielectricSpec& spec, double tolerance = 1e-16);

/// Real-space (erfc within r_cut) + padded Ewald3D + boundary correction.
EnergyBreakdown reformulated_energy(const ParticleSystem& system, const SlabGeometry& geometry,
                                    const DielectricSpec& spec, double alpha, double r_cut, const KModeSet& modes,
                                    StabilityCheck check = StabilityCheck::Enforce);

// Parameter selection ---------------------------------------------------------

/// Unrounded reflection-depth estimate; infinite when the contrast product vanishes.
double choose_M_estimate(const SlabGeometry& geometry, const DielectricSpec& spec, double tolerance);

/// Smallest integer at or above the estimate (plus `safety`), clamped at 0.
/// A single nonzero contrast needs only first-layer images and yields 1.
int choose_M(const SlabGeometry& geometry, const DielectricSpec& spec, double tolerance, int safety = 0);

double choose_Lz(const SlabGeometry& geometry, double alpha, double tolerance, int M = 0);

// Closed forms ------------------------------------------------------------------

double zeta_factor(double h, const DielectricSpec& spec, double H);

/// Image-series kernel summed over all reflection levels.
double beta_closed_form(double h, double z_i, double z_j, const DielectricSpec& spec, double H);

struct QuadratureErrorReport {
    double residue_correction{0};
    double remainder_order{0};
    bool zero_a_branch{false};  // a == 0: no pole correction, limiting integral applies
};

QuadratureErrorReport trapezoid_error_report(double a, double b, double xi);

/// Closed form of integral_R exp(-(a^2 + t^2)) / (a^2 + t^2) e^{i b t} dt, a > 0.
double gaussian_pole_integral(double a, double b);

/// The (2M + 1)-point trapezoidal approximation of the same integral with step xi.
double gaussian_pole_trapezoid(double a, double b, double xi, int M);

}  // namespace rbe2d

#endif
