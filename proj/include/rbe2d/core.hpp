// Core domain types for doubly-periodic slab electrostatics.
//
// Geometry, dielectric description, image-charge bookkeeping and the seeded
// random streams shared by every other part of the library. Dense vectors are
// Eigen types templated on the scalar; the library instantiates double.

#ifndef RBE2D_CORE_HPP
#define RBE2D_CORE_HPP

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace rbe2d {

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Matrix3X = Eigen::Matrix<Scalar, 3, Eigen::Dynamic>;

using Vec3 = Vector3<double>;
using Vec3i = Eigen::Vector3i;
using Positions = Matrix3X<double>;

// ---------------------------------------------------------------------------
// Errors. Every failure the library reports derives from Error so the CLI can
// map it to a machine-readable kind.

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept = 0;
};

class ValidationError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "validation"; }
};

/// Coincident charges (actual or image) where the Coulomb kernel is singular.
class SingularityError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "singularity"; }
};

/// The vacuum layer is too thin for the requested reflection depth.
class StabilityError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "stability"; }
};

/// A particle left the slab; the integrator is misconfigured or blew up.
class EscapeError : public Error {
public:
    EscapeError(const std::string& what, long step = -1) : Error(what), step_(step) {}
    const char* kind() const noexcept override { return "escape"; }
    long step() const noexcept { return step_; }

private:
    long step_;
};

// ---------------------------------------------------------------------------

template <typename Scalar = double>
struct BasicSlabGeometry {
    Scalar Lx{1};
    Scalar Ly{1};
    Scalar H{1};   // confinement height, particles live in [0, H]
    Scalar Lz{1};  // extended height of the periodic cell used in k-space

    Scalar area() const { return Lx * Ly; }
    Scalar volume() const { return Lx * Ly * Lz; }
    Scalar max_xy() const { return Lx > Ly ? Lx : Ly; }

    void validate() const
    {
        if (!(Lx > 0 && Ly > 0 && H > 0 && Lz > 0))
            throw ValidationError("slab geometry: all side lengths must be positive");
        if (Lz < H)
            throw ValidationError("slab geometry: extended height Lz must be >= H");
    }

    static BasicSlabGeometry make(Scalar lx, Scalar ly, Scalar h, Scalar lz)
    {
        BasicSlabGeometry g{lx, ly, h, lz};
        g.validate();
        return g;
    }

    BasicSlabGeometry with_Lz(Scalar lz) const { return make(Lx, Ly, H, lz); }
};

using SlabGeometry = BasicSlabGeometry<double>;

// ---------------------------------------------------------------------------

enum class ImageBranch { Plus, Minus };

/// Exponent assignment for the image factors.
///
/// AsWritten uses gamma_plus(l) = top^floor(l/2) * bot^ceil(l/2). PhysicalMirror
/// swaps floor/ceil so the first image above the slab (at 2H - z) carries the
/// top contrast. The two agree whenever gamma_top == gamma_bot.
enum class ImageConvention { AsWritten, PhysicalMirror };

double dielectric_contrast(double eps_c, double eps_side);

struct DielectricSpec {
    double eps_top{1};
    double eps_c{1};
    double eps_bot{1};
    double gamma_top{0};
    double gamma_bot{0};
    int M{0};
    ImageConvention convention{ImageConvention::PhysicalMirror};

    bool has_images() const { return M > 0 && (gamma_top != 0.0 || gamma_bot != 0.0); }

    void validate() const;

    static DielectricSpec homogeneous() { return {}; }
    static DielectricSpec from_permittivities(double eps_top, double eps_c, double eps_bot, int M,
                                              ImageConvention conv = ImageConvention::PhysicalMirror);
    static DielectricSpec from_contrasts(double gamma_top, double gamma_bot, int M,
                                         ImageConvention conv = ImageConvention::PhysicalMirror);
};

double image_factor(int l, ImageBranch branch, const DielectricSpec& spec);

/// z coordinate of the l-th order image of a source at height z.
template <typename Scalar>
Scalar image_z(int l, ImageBranch branch, Scalar z, Scalar H)
{
    const Scalar sign = (l % 2 == 0) ? Scalar(1) : Scalar(-1);
    const int up = (l + 1) / 2;  // ceil(l/2)
    const int down = l / 2;      // floor(l/2)
    return branch == ImageBranch::Plus ? sign * z + Scalar(2 * up) * H : sign * z - Scalar(2 * down) * H;
}

template <typename Derived>
Vector3<typename Derived::Scalar> image_position(int l, ImageBranch branch, const Eigen::MatrixBase<Derived>& r,
                                                 typename Derived::Scalar H)
{
    if (l < 1)
        throw ValidationError("image_position: level must be >= 1");
    return {r(0), r(1), image_z(l, branch, r(2), H)};
}

struct ImageCharge {
    int level{1};
    ImageBranch branch{ImageBranch::Plus};
    double factor{0};
    Vec3 position{Vec3::Zero()};
};

ImageCharge make_image(int l, ImageBranch branch, const Vec3& source, const DielectricSpec& spec, double H);

// ---------------------------------------------------------------------------

struct SplittingParams {
    double alpha{1};
    double r_cut{1};
    double tolerance{1e-4};
    int batch_size{100};

    void validate() const
    {
        if (!(alpha > 0)) throw ValidationError("splitting: alpha must be positive");
        if (!(r_cut > 0)) throw ValidationError("splitting: r_cut must be positive");
        if (!(tolerance > 0 && tolerance < 1)) throw ValidationError("splitting: tolerance must lie in (0, 1)");
        if (batch_size < 1) throw ValidationError("splitting: batch size must be >= 1");
    }
};

/// alpha = multiplier * N^{1/3} / (Lx Ly H)^{1/3}; independent of Lz.
double alpha_from_density(std::size_t n, const SlabGeometry& geometry, double multiplier = 1.0);

// ---------------------------------------------------------------------------

struct ParticleSystem {
    Positions positions;   // x, y unwrapped; z confined to [0, H]
    Positions velocities;
    Eigen::VectorXd charges;
    Eigen::VectorXd masses;
    Eigen::VectorXi species;

    ParticleSystem() = default;
    explicit ParticleSystem(Eigen::Index n)
        : positions(Positions::Zero(3, n)), velocities(Positions::Zero(3, n)), charges(Eigen::VectorXd::Zero(n)),
          masses(Eigen::VectorXd::Ones(n)), species(Eigen::VectorXi::Zero(n))
    {
    }

    Eigen::Index size() const { return positions.cols(); }
    double net_charge() const { return charges.sum(); }

    /// Shape, neutrality and confinement checks. x, y are not required to be wrapped.
    void validate(const SlabGeometry& geometry) const;
};

/// Periodic image of x, y inside [0, L).
ParticleSystem wrapped_xy(const ParticleSystem& system, const SlabGeometry& geometry);

/// Nearest periodic image of a separation vector: x, y land in [-L/2, L/2).
template <typename Derived>
Vector3<typename Derived::Scalar> min_image_xy(const Eigen::MatrixBase<Derived>& dr,
                                               const BasicSlabGeometry<typename Derived::Scalar>& g)
{
    using std::floor;
    using Scalar = typename Derived::Scalar;
    const Scalar half(0.5);
    return {dr(0) - g.Lx * floor(dr(0) / g.Lx + half), dr(1) - g.Ly * floor(dr(1) / g.Ly + half), dr(2)};
}

// ---------------------------------------------------------------------------

/// Reproducible random stream keyed by (seed, stream id).
class RngHandle {
public:
    RngHandle(std::uint64_t seed = 0, std::uint64_t stream = 0);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

    double uniform() { return uniform_(engine_); }
    double normal() { return normal_(engine_); }
    std::uint64_t bits() { return engine_(); }

    /// Independent child stream; does not advance this handle.
    RngHandle split(std::uint64_t child) const;

    std::mt19937_64& engine() { return engine_; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::mt19937_64 engine_;
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
    std::normal_distribution<double> normal_{0.0, 1.0};
};

// ---------------------------------------------------------------------------

/// Compensated summation for long O(N^2) accumulations.
struct KahanSum {
    double sum{0};
    double carry{0};

    void add(double x)
    {
        const double y = x - carry;
        const double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    double value() const { return sum; }
};

/// A scalar energy together with its per-particle forces (3 x N).
struct EnergyForces {
    double energy{0};
    Positions forces;
};

/// Energy components. `total()` excludes the layer correction, which is only
/// ever a diagnostic of the neglected term.
struct EnergyBreakdown {
    double real{0};
    double fourier{0};
    double self{0};
    double ibc{0};
    double elc{0};
    double lj{0};
    double wall{0};
    std::string method;

    double coulomb() const { return real + fourier + self + ibc; }
    double total() const { return coulomb() + lj + wall; }
};

}  // namespace rbe2d

#endif  // RBE2D_CORE_HPP
