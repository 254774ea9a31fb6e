#include "rbe2d/ewald2d.hpp"
#include "rbe2d/special_functions.hpp"

#include <vector>

namespace rbe2d {

namespace {

// One term of U = sum_t weight_t * psi(d_t); psi is the full periodic pair potential.
struct PairTerm {
    Vec3 d;
    double weight;
    bool self;  // same particle: the n = 0 real-space term is excluded
};

std::vector<PairTerm> actual_pairs(const ParticleSystem& s, const SlabGeometry& g)
{
    std::vector<PairTerm> terms;
    const Eigen::Index n = s.size();
    terms.reserve(static_cast<std::size_t>(n * (n + 1) / 2));
    for (Eigen::Index i = 0; i < n; ++i) {
        terms.push_back({Vec3::Zero(), 0.5 * s.charges(i) * s.charges(i), true});
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const Vec3 d = min_image_xy((s.positions.col(i) - s.positions.col(j)).eval(), g);
            terms.push_back({d, s.charges(i) * s.charges(j), false});
        }
    }
    return terms;
}

std::vector<PairTerm> image_pairs(const ParticleSystem& s, const SlabGeometry& g, const DielectricSpec& spec)
{
    std::vector<PairTerm> terms;
    if (!spec.has_images())
        return terms;
    const Eigen::Index n = s.size();
    for (int l = 1; l <= spec.M; ++l) {
        for (ImageBranch b : {ImageBranch::Plus, ImageBranch::Minus}) {
            const double f = image_factor(l, b, spec);
            if (f == 0.0)
                continue;
            for (Eigen::Index i = 0; i < n; ++i)
                for (Eigen::Index j = 0; j < n; ++j) {
                    const Vec3 img = image_position(l, b, s.positions.col(j), g.H);
                    const Vec3 d = min_image_xy((s.positions.col(i) - img).eval(), g);
                    terms.push_back({d, 0.5 * s.charges(i) * s.charges(j) * f, false});
                }
        }
    }
    return terms;
}

double real_kernel_sum(const PairTerm& t, const SlabGeometry& g, const Ewald2DParams& p)
{
    KahanSum acc;
    const int S = p.real_shells;
    for (int nx = -S; nx <= S; ++nx)
        for (int ny = -S; ny <= S; ++ny) {
            const bool origin = nx == 0 && ny == 0;
            if (t.self && origin)
                continue;
            const Vec3 r = t.d + Vec3(nx * g.Lx, ny * g.Ly, 0.0);
            const double rn = r.norm();
            if (rn == 0.0)
                throw SingularityError("ewald2d: coincident charges");
            acc.add(erfc_flushed(p.alpha * rn) / rn);
        }
    return acc.value();
}

double fourier_kernel_sum(const PairTerm& t, const SlabGeometry& g, const Ewald2DParams& p)
{
    // Half plane (mx > 0, or mx == 0 and my > 0) with weight 2.
    KahanSum acc;
    const double dz = t.self ? 0.0 : t.d(2);
    for (int mx = 0; mx <= p.h_max; ++mx)
        for (int my = (mx == 0 ? 1 : -p.h_max); my <= p.h_max; ++my) {
            const double hx = 2.0 * kPi * mx / g.Lx;
            const double hy = 2.0 * kPi * my / g.Ly;
            const double h = std::hypot(hx, hy);
            const double phase = t.self ? 1.0 : std::cos(hx * t.d(0) + hy * t.d(1));
            acc.add(2.0 * phase * ewald2d_kernel(h, dz, p.alpha) / h);
        }
    return kPi / g.area() * acc.value() - 2.0 * kPi / g.area() * ewald2d_zero_mode(dz, p.alpha);
}

struct PartSums {
    double real{0};
    double fourier{0};
};

PartSums evaluate(const std::vector<PairTerm>& terms, const SlabGeometry& g, const Ewald2DParams& p, bool want_real,
                  bool want_fourier)
{
    const auto n = static_cast<long>(terms.size());
    std::vector<double> re(terms.size(), 0.0), fo(terms.size(), 0.0);
    bool singular = false;
#pragma omp parallel for schedule(dynamic, 16) reduction(|| : singular)
    for (long t = 0; t < n; ++t) {
        try {
            if (want_real)
                re[t] = terms[t].weight * real_kernel_sum(terms[t], g, p);
            if (want_fourier)
                fo[t] = terms[t].weight * fourier_kernel_sum(terms[t], g, p);
        } catch (const SingularityError&) {
            singular = true;
        }
    }
    if (singular)
        throw SingularityError("ewald2d: coincident charges");
    KahanSum r, f;
    for (std::size_t t = 0; t < terms.size(); ++t) {
        r.add(re[t]);
        f.add(fo[t]);
    }
    return {r.value(), f.value()};
}

double self_energy(const ParticleSystem& s, double alpha)
{
    return -alpha / kSqrtPi * s.charges.squaredNorm();
}

}  // namespace

void Ewald2DParams::validate() const
{
    if (!(alpha > 0)) throw ValidationError("ewald2d: alpha must be positive");
    if (real_shells < 0) throw ValidationError("ewald2d: real_shells must be >= 0");
    if (h_max < 1) throw ValidationError("ewald2d: h_max must be >= 1");
}

Ewald2DParams converged_ewald2d_params(const SlabGeometry& g, double alpha, double tolerance)
{
    Ewald2DParams p;
    p.alpha = alpha;
    const double x = std::sqrt(std::log(1.0 / tolerance));
    const double r_needed = x / alpha;
    p.real_shells = static_cast<int>(std::ceil(r_needed / std::min(g.Lx, g.Ly))) + 1;
    const double h_needed = 2.0 * alpha * x;
    p.h_max = std::max(1, static_cast<int>(std::ceil(h_needed * g.max_xy() / (2.0 * kPi))) + 1);
    return p;
}

double energy_real_2d(const ParticleSystem& s, const SlabGeometry& g, const Ewald2DParams& p)
{
    p.validate();
    return evaluate(actual_pairs(s, g), g, p, true, false).real;
}

double energy_fourier_2d(const ParticleSystem& s, const SlabGeometry& g, const Ewald2DParams& p)
{
    p.validate();
    // The -2 alpha/sqrt(pi) part of the self-pair potential is reported via self_energy.
    return evaluate(actual_pairs(s, g), g, p, false, true).fourier + self_energy(s, p.alpha);
}

EnergyBreakdown total_energy_2d(const ParticleSystem& s, const SlabGeometry& g, const Ewald2DParams& p)
{
    p.validate();
    const PartSums parts = evaluate(actual_pairs(s, g), g, p, true, true);
    EnergyBreakdown e;
    e.real = parts.real;
    e.fourier = parts.fourier;
    e.self = self_energy(s, p.alpha);
    e.method = "ewald2d-reference";
    return e;
}

EnergyBreakdown dielectric_reference_energy(const ParticleSystem& s, const SlabGeometry& g,
                                            const DielectricSpec& spec, const Ewald2DParams& p)
{
    p.validate();
    spec.validate();
    const double reach = (spec.M + 1) * g.H;
    if (!std::isfinite(reach) || reach > 1e150)
        throw ValidationError("dielectric reference: image heights exceed numeric range");
    std::vector<PairTerm> terms = actual_pairs(s, g);
    std::vector<PairTerm> images = image_pairs(s, g, spec);
    terms.insert(terms.end(), images.begin(), images.end());
    const PartSums parts = evaluate(terms, g, p, true, true);
    EnergyBreakdown e;
    e.real = parts.real;
    e.fourier = parts.fourier;
    e.self = self_energy(s, p.alpha);
    e.method = "ewald2d-dielectric-reference";
    return e;
}

Positions force_fd_oracle(const ParticleSystem& s, const SlabGeometry& g, const EnergyFunction& energy, double step)
{
    if (!(step > 0))
        throw ValidationError("force_fd_oracle: step must be positive");
    Positions f(3, s.size());
    ParticleSystem work = s;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        for (int c = 0; c < 3; ++c) {
            const double x0 = s.positions(c, i);
            work.positions(c, i) = x0 + step;
            const double up = energy(work, g);
            work.positions(c, i) = x0 - step;
            const double dn = energy(work, g);
            work.positions(c, i) = x0;
            f(c, i) = -(up - dn) / (2.0 * step);
        }
    return f;
}

}  // namespace rbe2d
