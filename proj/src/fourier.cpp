#include "rbe2d/fourier.hpp"
#include "rbe2d/realspace.hpp"
#include "rbe2d/special_functions.hpp"

#include "kspace_kernel.hpp"

#include <algorithm>
#include <sstream>

namespace rbe2d {

using detail::PhaseTables;

KMode make_kmode(const Eigen::Vector3i& n, const SlabGeometry& g)
{
    KMode m;
    m.n = n;
    m.k = Vec3(2.0 * kPi * n(0) / g.Lx, 2.0 * kPi * n(1) / g.Ly, 2.0 * kPi * n(2) / g.Lz);
    m.k2 = m.k.squaredNorm();
    return m;
}

KModeSet enumerate_kmodes(const SlabGeometry& g, double k_cut, bool half_space)
{
    if (!(k_cut > 0))
        throw ValidationError("k-space: cutoff must be positive");
    KModeSet set;
    set.k_cut = k_cut;
    set.half_space = half_space;
    const int nx = static_cast<int>(std::floor(k_cut * g.Lx / (2.0 * kPi)));
    const int ny = static_cast<int>(std::floor(k_cut * g.Ly / (2.0 * kPi)));
    const int nz = static_cast<int>(std::floor(k_cut * g.Lz / (2.0 * kPi)));
    const double kc2 = k_cut * k_cut;
    for (int a = half_space ? 0 : -nx; a <= nx; ++a)
        for (int b = -ny; b <= ny; ++b)
            for (int c = -nz; c <= nz; ++c) {
                if (a == 0 && b == 0 && c == 0)
                    continue;
                if (half_space && a == 0 && (b < 0 || (b == 0 && c < 0)))
                    continue;
                KMode m = make_kmode(Eigen::Vector3i(a, b, c), g);
                if (m.k2 <= kc2)
                    set.modes.push_back(m);
            }
    std::sort(set.modes.begin(), set.modes.end(), [](const KMode& u, const KMode& v) {
        if (u.k2 != v.k2)
            return u.k2 < v.k2;
        return std::lexicographical_compare(u.n.data(), u.n.data() + 3, v.n.data(), v.n.data() + 3);
    });
    return set;
}

double kspace_cutoff(double alpha, double tolerance)
{
    if (!(alpha > 0) || !(tolerance > 0 && tolerance < 1))
        throw ValidationError("kspace_cutoff: need alpha > 0 and tolerance in (0, 1)");
    const double target = std::log(tolerance / 10.0);
    // f(k) = -k^2/4a^2 - 2 ln k, strictly decreasing.
    auto f = [&](double k) { return -k * k / (4.0 * alpha * alpha) - 2.0 * std::log(k); };
    double lo = 1e-12, hi = alpha;
    while (f(hi) > target)
        hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) > target ? lo : hi) = mid;
    }
    return hi;
}

KModeSet kmodes_for_tolerance(const SlabGeometry& g, double alpha, double tolerance)
{
    return enumerate_kmodes(g, kspace_cutoff(alpha, tolerance), true);
}

YCoefficients y_coefficients(double kz, const DielectricSpec& spec, double H)
{
    YCoefficients y;
    if (!spec.has_images())
        return y;
    // Powers of e^{i kz H} by recurrence keep this O(M) with a single sin/cos.
    const cplx w = std::polar(1.0, kz * H);
    cplx prev(1.0, 0.0), cur = w;  // w^{l-1}, w^l
    for (int l = 1; l <= spec.M; ++l) {
        const double gp = image_factor(l, ImageBranch::Plus, spec);
        const double gm = image_factor(l, ImageBranch::Minus, spec);
        if (l % 2 == 1)
            y.odd += gp * cur * w + gm * std::conj(prev);
        else
            y.even += gp * cur + gm * std::conj(cur);
        prev = cur;
        cur *= w;
    }
    return y;
}

namespace {

std::vector<YCoefficients> y_table(const std::vector<KMode>& modes, const DielectricSpec& spec, double H)
{
    std::vector<YCoefficients> y(modes.size());
    for (std::size_t m = 0; m < modes.size(); ++m)
        y[m] = y_coefficients(modes[m].k(2), spec, H);
    return y;
}

double self_term(const ParticleSystem& s, double alpha)
{
    return -alpha / kSqrtPi * s.charges.squaredNorm();
}

// Per-mode factor (2 pi / V) * w * exp(-k^2/4a^2) / k^2, w = 2 for half-space sets.
std::vector<double> mode_factors(const KModeSet& set, const SlabGeometry& g, double alpha)
{
    const double w = set.half_space ? 2.0 : 1.0;
    const double pref = 2.0 * kPi / g.volume();
    std::vector<double> f(set.modes.size());
    for (std::size_t m = 0; m < f.size(); ++m)
        f[m] = pref * w * gaussian_weight(set.modes[m].k2, alpha) / set.modes[m].k2;
    return f;
}

KSpaceResult kspace_sum(const ParticleSystem& s, const SlabGeometry& g, const DielectricSpec* spec, double alpha,
                        const KModeSet& set, bool want_forces)
{
    const std::vector<double> fac = mode_factors(set, g, alpha);
    const PhaseTables tables(s.positions, g, detail::max_abs_index(set.modes));
    std::vector<YCoefficients> Y;
    if (spec)
        Y = y_table(set.modes, *spec, g.H);
    const std::vector<YCoefficients>* Yp = spec ? &Y : nullptr;

    KSpaceResult out;
    std::vector<cplx> sigma;
    detail::structure_sums(tables, s.charges, set.modes, Yp, out.rho, sigma);

    KahanSum acc;
    for (std::size_t m = 0; m < set.modes.size(); ++m) {
        const cplx& r = out.rho[m];
        acc.add(fac[m] * (spec ? (r * std::conj(sigma[m])).real() : std::norm(r)));
    }
    out.energy = acc.value() + self_term(s, alpha);

    if (want_forces) {
        out.forces = Positions::Zero(3, s.size());
        std::vector<double> coef(fac.size());
        for (std::size_t m = 0; m < fac.size(); ++m)
            coef[m] = -fac[m];
        detail::accumulate_forces(tables, s.charges, set.modes, Yp, out.rho, sigma, coef, out.forces);
    }
    return out;
}

}  // namespace

StructureFactors structure_factors(const ParticleSystem& s, const std::vector<KMode>& modes,
                                   const DielectricSpec& spec, double H)
{
    StructureFactors sf;
    sf.rho.resize(modes.size());
    sf.rho_bar_M.resize(modes.size());
    for (std::size_t m = 0; m < modes.size(); ++m) {
        const YCoefficients y = y_coefficients(modes[m].k(2), spec, H);
        cplx rho(0.0, 0.0), bar(0.0, 0.0);
        for (Eigen::Index i = 0; i < s.size(); ++i) {
            const Vec3 r = s.positions.col(i);
            const cplx e = std::polar(1.0, modes[m].k.dot(r));
            const cplx ez = std::polar(1.0, modes[m].k(2) * r(2));
            rho += s.charges(i) * e;
            bar += s.charges(i) * std::conj(e) * (1.0 + std::conj(y.even) + ez * ez * std::conj(y.odd));
        }
        sf.rho[m] = rho;
        sf.rho_bar_M[m] = bar;
    }
    return sf;
}

void check_image_stability(const SlabGeometry& g, const DielectricSpec& spec)
{
    if (!spec.has_images())
        return;
    const double need = (spec.M + 1) * g.H;
    if (g.Lz < need) {
        std::ostringstream os;
        os << "extended height Lz=" << g.Lz << " is below (M+1)H=" << need << " for M=" << spec.M
           << "; image layers overlap the periodic replicas";
        throw StabilityError(os.str());
    }
}

double fourier3d_energy(const ParticleSystem& s, const SlabGeometry& g, double alpha, const KModeSet& set)
{
    return kspace_sum(s, g, nullptr, alpha, set, false).energy;
}

KSpaceResult fourier3d_energy_force(const ParticleSystem& s, const SlabGeometry& g, double alpha,
                                    const KModeSet& set)
{
    return kspace_sum(s, g, nullptr, alpha, set, true);
}

double dielectric_fourier_energy(const ParticleSystem& s, const SlabGeometry& g, const DielectricSpec& spec,
                                 double alpha, const KModeSet& set, StabilityCheck check)
{
    if (!spec.has_images())
        return fourier3d_energy(s, g, alpha, set);
    if (check == StabilityCheck::Enforce)
        check_image_stability(g, spec);
    return kspace_sum(s, g, &spec, alpha, set, false).energy;
}

KSpaceResult dielectric_fourier_energy_force(const ParticleSystem& s, const SlabGeometry& g,
                                             const DielectricSpec& spec, double alpha, const KModeSet& set,
                                             StabilityCheck check)
{
    if (!spec.has_images())
        return fourier3d_energy_force(s, g, alpha, set);
    if (check == StabilityCheck::Enforce)
        check_image_stability(g, spec);
    return kspace_sum(s, g, &spec, alpha, set, true);
}

EnergyForces ibc_energy_force(const ParticleSystem& s, const SlabGeometry& g, const DielectricSpec& spec)
{
    const double pref = 2.0 * kPi / g.volume();
    const double A = s.charges.dot(s.positions.row(2).transpose());
    EnergyForces out{0.0, Positions::Zero(3, s.size())};
    if (!spec.has_images()) {
        out.energy = pref * A * A;
        for (Eigen::Index i = 0; i < s.size(); ++i)
            out.forces(2, i) = -2.0 * pref * s.charges(i) * A;
        return out;
    }
    // w(z) = z + sum_l (g+ z+(z) + g- z-(z)) is affine in z with slope d.
    double d = 1.0;
    double B = 0.0;
    for (Eigen::Index j = 0; j < s.size(); ++j) {
        const double z = s.positions(2, j);
        double w = z;
        for (int l = 1; l <= spec.M; ++l) {
            w += image_factor(l, ImageBranch::Plus, spec) * image_z(l, ImageBranch::Plus, z, g.H);
            w += image_factor(l, ImageBranch::Minus, spec) * image_z(l, ImageBranch::Minus, z, g.H);
        }
        B += s.charges(j) * w;
    }
    for (int l = 1; l <= spec.M; ++l) {
        const double sgn = (l % 2 == 0) ? 1.0 : -1.0;
        d += sgn * (image_factor(l, ImageBranch::Plus, spec) + image_factor(l, ImageBranch::Minus, spec));
    }
    out.energy = pref * A * B;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        out.forces(2, i) = -pref * s.charges(i) * (B + A * d);
    return out;
}

namespace {

// cosh(h z) / (1 - e^{h Lz}) without overflow, valid for |z| < Lz.
inline double elc_kernel(double h, double z, double Lz)
{
    const double az = std::abs(z);
    return -(std::exp(h * (az - Lz)) + std::exp(-h * (az + Lz))) / (2.0 * (1.0 - std::exp(-h * Lz)));
}

}  // namespace

int default_elc_hmax(const SlabGeometry& g, const DielectricSpec& spec, double tolerance)
{
    const double reach = spec.has_images() ? (spec.M + 1) * g.H : g.H;
    const double gap = std::max(g.Lz - reach, 1e-3 * g.H);
    const double h = std::log(1.0 / tolerance) / gap;
    return std::max(1, static_cast<int>(std::ceil(h * g.max_xy() / (2.0 * kPi))) + 1);
}

double elc_energy(const ParticleSystem& s, const SlabGeometry& g, const DielectricSpec& spec, int h_max,
                  StabilityCheck check)
{
    if (h_max < 1)
        throw ValidationError("elc: h_max must be >= 1");
    if (check == StabilityCheck::Enforce) {
        if (!(g.Lz > g.H))
            throw StabilityError("elc: Lz must exceed H");
        check_image_stability(g, spec);
    }
    struct Src {
        Eigen::Index j;
        double z;
        double w;
    };
    const Eigen::Index n = s.size();
    std::vector<Src> sources;
    for (Eigen::Index j = 0; j < n; ++j) {
        sources.push_back({j, s.positions(2, j), s.charges(j)});
        if (!spec.has_images())
            continue;
        for (int l = 1; l <= spec.M; ++l)
            for (ImageBranch b : {ImageBranch::Plus, ImageBranch::Minus}) {
                const double f = image_factor(l, b, spec);
                if (f != 0.0)
                    sources.push_back({j, image_z(l, b, s.positions(2, j), g.H), s.charges(j) * f});
            }
    }
    KahanSum acc;
    for (int mx = 0; mx <= h_max; ++mx)
        for (int my = (mx == 0 ? 1 : -h_max); my <= h_max; ++my) {
            const double hx = 2.0 * kPi * mx / g.Lx, hy = 2.0 * kPi * my / g.Ly;
            const double h = std::hypot(hx, hy);
            double mode = 0.0;
            for (Eigen::Index i = 0; i < n; ++i)
                for (const Src& src : sources) {
                    const double dx = s.positions(0, i) - s.positions(0, src.j);
                    const double dy = s.positions(1, i) - s.positions(1, src.j);
                    mode += s.charges(i) * src.w * std::cos(hx * dx + hy * dy) *
                            elc_kernel(h, s.positions(2, i) - src.z, g.Lz);
                }
            acc.add(2.0 * mode / h);
        }
    return 2.0 * kPi / g.area() * acc.value();
}

EnergyBreakdown reformulated_energy(const ParticleSystem& s, const SlabGeometry& g, const DielectricSpec& spec,
                                    double alpha, double r_cut, const KModeSet& set, StabilityCheck check)
{
    const NeighborList list = build_neighbor_list(s, g, r_cut, 0.0);
    EnergyBreakdown e;
    e.real = real_space_energy_force(s, g, spec, alpha, list).energy;
    const double k = dielectric_fourier_energy(s, g, spec, alpha, set, check);
    e.self = self_term(s, alpha);
    e.fourier = k - e.self;
    e.ibc = ibc_energy_force(s, g, spec).energy;
    e.method = spec.has_images() ? "reformulated-dielectric" : "reformulated";
    return e;
}

double choose_M_estimate(const SlabGeometry& g, const DielectricSpec& spec, double tol)
{
    if (!(tol > 0 && tol < 1))
        throw ValidationError("choose_M: tolerance must lie in (0, 1)");
    const double gg = std::abs(spec.gamma_top * spec.gamma_bot);
    if (gg > 1.0)
        throw ValidationError("choose_M: |gamma_top gamma_bot| must not exceed 1");
    if (gg == 0.0)
        return std::numeric_limits<double>::infinity();
    const double c = 4.0 * kPi * g.H / g.max_xy();
    const double lg = std::log(gg);
    return (2.0 * std::log(tol) - c - lg) / (lg - c);
}

int choose_M(const SlabGeometry& g, const DielectricSpec& spec, double tol, int safety)
{
    const double raw = choose_M_estimate(g, spec, tol);
    if (std::isinf(raw)) {
        const bool one = (spec.gamma_top != 0.0) != (spec.gamma_bot != 0.0);
        return one ? 1 : 0;
    }
    return std::max(0, static_cast<int>(std::ceil(raw)) + safety);
}

double choose_Lz(const SlabGeometry& g, double alpha, double tol, int M)
{
    if (!(tol > 0 && tol < 1))
        throw ValidationError("choose_Lz: tolerance must lie in (0, 1)");
    if (!(alpha > 0))
        throw ValidationError("choose_Lz: alpha must be positive");
    if (M < 0)
        throw ValidationError("choose_Lz: M must be non-negative");
    const double lg = std::log(1.0 / tol);
    const double pad = std::max(g.max_xy() / (2.0 * kPi) * lg, std::sqrt(lg) / alpha);
    return (M + 1) * g.H + pad;
}

double zeta_factor(double h, const DielectricSpec& spec, double H)
{
    const double x = spec.gamma_top * spec.gamma_bot * std::exp(-2.0 * h * H);
    if (std::abs(x) >= 1.0)
        throw ValidationError("zeta: geometric series diverges");
    return 1.0 / (1.0 - x);
}

double beta_closed_form(double h, double zi, double zj, const DielectricSpec& spec, double H)
{
    if (h < 0)
        throw ValidationError("beta: h must be non-negative");
    const double gt = spec.gamma_top, gb = spec.gamma_bot;
    const double zij = zi - zj, zs = zi + zj;
    const double num = gb * std::exp(-h * std::abs(zs)) + gt * std::exp(-h * std::abs(2.0 * H - zs)) +
                       gt * gb * (std::exp(-h * std::abs(2.0 * H - zij)) + std::exp(-h * std::abs(2.0 * H + zij)));
    if (num == 0.0)
        return 0.0;
    return num * zeta_factor(h, spec, H);
}

QuadratureErrorReport trapezoid_error_report(double a, double b, double xi)
{
    if (a < 0 || !(xi > 0))
        throw ValidationError("trapezoid_error_report: need a >= 0 and xi > 0");
    QuadratureErrorReport r;
    const double gap = kPi / xi - 0.5 * std::abs(b);
    const double sgn = gap > 0 ? 1.0 : (gap < 0 ? -1.0 : 0.0);
    r.remainder_order = -sgn * gap * gap;
    if (a == 0.0) {
        r.zero_a_branch = true;
        return r;
    }
    // (pi/a)(e^{-ab} + e^{ab}) / (1 - e^{2 pi a / xi}), scaled to avoid overflow.
    const double big = 2.0 * kPi * a / xi;
    const double ab = std::abs(a * b);
    r.residue_correction =
        -(kPi / a) * (std::exp(-ab - big) + std::exp(ab - big)) / (1.0 - std::exp(-big));
    return r;
}

double gaussian_pole_integral(double a, double b)
{
    if (!(a > 0))
        throw ValidationError("gaussian_pole_integral: a must be positive");
    // (pi / 2a) [e^{ab} erfc(a + b/2) + e^{-ab} erfc(a - b/2)]
    return kPi / (2.0 * a) * (exp_erfc(a * b, a + 0.5 * b) + exp_erfc(-a * b, a - 0.5 * b));
}

double gaussian_pole_trapezoid(double a, double b, double xi, int M)
{
    KahanSum acc;
    for (int j = -M; j <= M; ++j) {
        const double t = j * xi;
        const double s = a * a + t * t;
        if (s == 0.0)
            throw ValidationError("gaussian_pole_trapezoid: node at the pole");
        acc.add(std::exp(-s) / s * std::cos(b * t));
    }
    return xi * acc.value();
}

}  // namespace rbe2d
