#include "rbe2d/core.hpp"

#include <sstream>

namespace rbe2d {

namespace {

std::uint64_t splitmix64(std::uint64_t& state)
{
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::mt19937_64 seeded_engine(std::uint64_t seed, std::uint64_t stream)
{
    std::uint64_t state = seed ^ (0xD1B54A32D192ED03ULL * (stream + 1));
    std::seed_seq seq{static_cast<std::uint32_t>(splitmix64(state)), static_cast<std::uint32_t>(splitmix64(state)),
                      static_cast<std::uint32_t>(splitmix64(state)), static_cast<std::uint32_t>(splitmix64(state)),
                      static_cast<std::uint32_t>(splitmix64(state)), static_cast<std::uint32_t>(splitmix64(state)),
                      static_cast<std::uint32_t>(splitmix64(state)), static_cast<std::uint32_t>(splitmix64(state))};
    return std::mt19937_64(seq);
}

double ipow(double base, int e)
{
    double r = 1.0;
    for (int i = 0; i < e; ++i)
        r *= base;
    return r;
}

}  // namespace

double dielectric_contrast(double eps_c, double eps_side)
{
    if (!(eps_c > 0) || !(eps_side > 0))
        throw ValidationError("dielectric_contrast: permittivities must be positive");
    return (eps_c - eps_side) / (eps_c + eps_side);
}

void DielectricSpec::validate() const
{
    if (std::abs(gamma_top) > 1.0 || std::abs(gamma_bot) > 1.0)
        throw ValidationError("dielectric: contrasts must lie in [-1, 1]");
    if (M < 0)
        throw ValidationError("dielectric: reflection level M must be non-negative");
    if (gamma_top == 0.0 && gamma_bot == 0.0 && M != 0)
        throw ValidationError("dielectric: M must be 0 when both contrasts vanish");
}

DielectricSpec DielectricSpec::from_permittivities(double et, double ec, double eb, int M, ImageConvention conv)
{
    DielectricSpec s;
    s.eps_top = et;
    s.eps_c = ec;
    s.eps_bot = eb;
    s.gamma_top = dielectric_contrast(ec, et);
    s.gamma_bot = dielectric_contrast(ec, eb);
    s.M = (s.gamma_top == 0.0 && s.gamma_bot == 0.0) ? 0 : M;
    s.convention = conv;
    s.validate();
    return s;
}

DielectricSpec DielectricSpec::from_contrasts(double gt, double gb, int M, ImageConvention conv)
{
    DielectricSpec s;
    s.gamma_top = gt;
    s.gamma_bot = gb;
    // Side permittivities relative to eps_c = 1; infinite for a perfect conductor.
    auto side = [](double g) { return g == -1.0 ? std::numeric_limits<double>::infinity() : (1.0 - g) / (1.0 + g); };
    s.eps_top = side(gt);
    s.eps_bot = side(gb);
    s.M = (gt == 0.0 && gb == 0.0) ? 0 : M;
    s.convention = conv;
    s.validate();
    return s;
}

double image_factor(int l, ImageBranch branch, const DielectricSpec& spec)
{
    if (l < 1)
        throw ValidationError("image_factor: level must be >= 1");
    const int lo = l / 2;
    const int hi = (l + 1) / 2;
    // AsWritten: plus = top^lo bot^hi, minus = top^hi bot^lo.
    bool plus_top_hi = spec.convention == ImageConvention::PhysicalMirror;
    const bool top_hi = (branch == ImageBranch::Plus) ? plus_top_hi : !plus_top_hi;
    return top_hi ? ipow(spec.gamma_top, hi) * ipow(spec.gamma_bot, lo)
                  : ipow(spec.gamma_top, lo) * ipow(spec.gamma_bot, hi);
}

ImageCharge make_image(int l, ImageBranch branch, const Vec3& source, const DielectricSpec& spec, double H)
{
    return {l, branch, image_factor(l, branch, spec), image_position(l, branch, source, H)};
}

double alpha_from_density(std::size_t n, const SlabGeometry& g, double multiplier)
{
    if (n == 0)
        throw ValidationError("alpha_from_density: empty system");
    return multiplier * std::cbrt(static_cast<double>(n)) / std::cbrt(g.Lx * g.Ly * g.H);
}

void ParticleSystem::validate(const SlabGeometry& g) const
{
    const Eigen::Index n = size();
    if (velocities.cols() != n || charges.size() != n || masses.size() != n || species.size() != n)
        throw ValidationError("particle system: per-particle arrays differ in length");
    if (n == 0)
        throw ValidationError("particle system: no particles");
    const double scale = std::max(1.0, charges.cwiseAbs().sum());
    if (std::abs(net_charge()) > 1e-12 * scale) {
        std::ostringstream os;
        os << "particle system: net charge " << net_charge() << " violates neutrality";
        throw ValidationError(os.str());
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!positions.col(i).allFinite())
            throw ValidationError("particle system: non-finite position");
        if (positions(2, i) < 0.0 || positions(2, i) > g.H) {
            std::ostringstream os;
            os << "particle system: particle " << i << " at z=" << positions(2, i) << " outside [0, H]";
            throw ValidationError(os.str());
        }
        if (!(masses(i) > 0))
            throw ValidationError("particle system: masses must be positive");
    }
}

ParticleSystem wrapped_xy(const ParticleSystem& s, const SlabGeometry& g)
{
    ParticleSystem out = s;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        out.positions(0, i) -= g.Lx * std::floor(s.positions(0, i) / g.Lx);
        out.positions(1, i) -= g.Ly * std::floor(s.positions(1, i) / g.Ly);
        if (out.positions(0, i) >= g.Lx) out.positions(0, i) = 0.0;
        if (out.positions(1, i) >= g.Ly) out.positions(1, i) = 0.0;
    }
    return out;
}

RngHandle::RngHandle(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), engine_(seeded_engine(seed, stream))
{
}

RngHandle RngHandle::split(std::uint64_t child) const
{
    std::uint64_t state = seed_ ^ (stream_ * 0xA24BAED4963EE407ULL);
    const std::uint64_t derived = splitmix64(state) ^ child;
    return RngHandle(derived, (stream_ << 20) ^ (child + 0x51ED27ULL));
}

}  // namespace rbe2d
