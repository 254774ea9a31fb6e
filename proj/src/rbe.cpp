#include "rbe2d/rbe.hpp"
#include "rbe2d/special_functions.hpp"

#include "kspace_kernel.hpp"

#include <algorithm>
#include <random>

namespace rbe2d {

namespace {

// 2 sum_{n >= 1} exp(-c n^2)
double theta_tail(double c)
{
    double sum = 0.0;
    for (long n = 1;; ++n) {
        const double t = std::exp(-c * double(n) * double(n));
        sum += t;
        if (t < 1e-17 * sum || t == 0.0)
            break;
    }
    return 2.0 * sum;
}

// Mass of round(X) == n for X ~ N(0, s^2).
double rounded_gaussian_mass(int n, double s)
{
    const double a = std::abs(n);
    const double k = 1.0 / (s * std::sqrt(2.0));
    if (a == 0)
        return std::erf(0.5 * k);
    return 0.5 * (std::erfc((a - 0.5) * k) - std::erfc((a + 0.5) * k));
}

}  // namespace

double normalization_S(const SlabGeometry& g, double alpha, NormalizationMode mode)
{
    if (!(alpha > 0))
        throw ValidationError("normalization_S: alpha must be positive");
    if (mode == NormalizationMode::GaussianBound)
        return alpha * alpha * alpha * g.volume() / (kPi * kSqrtPi);
    const double L[3] = {g.Lx, g.Ly, g.Lz};
    double t[3];
    for (int a = 0; a < 3; ++a)
        t[a] = theta_tail(kPi * kPi / (alpha * alpha * L[a] * L[a]));
    // prod(1 + t) - 1 expanded to avoid cancellation when S is small.
    return t[0] + t[1] + t[2] + t[0] * t[1] + t[0] * t[2] + t[1] * t[2] + t[0] * t[1] * t[2];
}

KSampler::KSampler(const SlabGeometry& g, double alpha, RngHandle rng, long burn_in)
    : geometry_(g), alpha_(alpha), rng_(std::move(rng)), S_(normalization_S(g, alpha))
{
    if (!(alpha > 0))
        throw ValidationError("sampler: alpha must be positive");
    const double L[3] = {g.Lx, g.Ly, g.Lz};
    for (int a = 0; a < 3; ++a) {
        decay_(a) = kPi * kPi / (alpha * alpha * L[a] * L[a]);
        width_(a) = std::max(alpha * L[a] / (kPi * std::sqrt(2.0)), 0.6);
    }
    state_ = propose();
    state_log_ratio_ = log_target(state_) - log_proposal(state_);
    for (long i = 0; i < burn_in; ++i)
        next();
    proposals_ = accepted_ = 0;
}

double KSampler::log_target(const Eigen::Vector3i& n) const
{
    return -(decay_(0) * n(0) * n(0) + decay_(1) * n(1) * n(1) + decay_(2) * n(2) * n(2));
}

double KSampler::log_proposal(const Eigen::Vector3i& n) const
{
    double lp = 0.0;
    for (int a = 0; a < 3; ++a)
        lp += std::log(rounded_gaussian_mass(n(a), width_(a)));
    return lp;
}

Eigen::Vector3i KSampler::propose()
{
    for (;;) {
        Eigen::Vector3i n;
        for (int a = 0; a < 3; ++a)
            n(a) = static_cast<int>(std::lround(width_(a) * rng_.normal()));
        if (n != Eigen::Vector3i::Zero())
            return n;
    }
}

Eigen::Vector3i KSampler::next()
{
    const Eigen::Vector3i cand = propose();
    const double r = log_target(cand) - log_proposal(cand);
    ++proposals_;
    const double u = rng_.uniform();
    if (r >= state_log_ratio_ || std::log(u) < r - state_log_ratio_) {
        state_ = cand;
        state_log_ratio_ = r;
        ++accepted_;
    }
    return state_;
}

KBatch KSampler::sample(int P)
{
    if (P < 1)
        throw ValidationError("sampler: batch size must be >= 1");
    KBatch b;
    b.S = S_;
    b.modes.reserve(static_cast<std::size_t>(P));
    for (int p = 0; p < P; ++p)
        b.modes.push_back(make_kmode(next(), geometry_));
    return b;
}

KBatch sample_batch(int P, const SlabGeometry& g, double alpha, RngHandle& rng)
{
    KSampler sampler(g, alpha, rng.split(static_cast<std::uint64_t>(rng.bits())), 10L * P);
    return sampler.sample(P);
}

KBatch precompute_Y(KBatch b, const DielectricSpec& spec, double H)
{
    b.Y.resize(b.modes.size());
    for (std::size_t m = 0; m < b.modes.size(); ++m)
        b.Y[m] = y_coefficients(b.modes[m].k(2), spec, H);
    return b;
}

namespace {

Positions batch_force(const ParticleSystem& s, const SlabGeometry& g, double alpha, const KBatch& b,
                      const std::vector<YCoefficients>* Y, EstimatorVariant variant)
{
    const double pref = -2.0 * kPi / g.volume() * b.S / double(b.size());
    std::vector<double> coef(b.size());
    for (std::size_t m = 0; m < b.size(); ++m) {
        coef[m] = pref / b.modes[m].k2;
        if (variant == EstimatorVariant::LiteralGaussian)
            coef[m] *= gaussian_weight(b.modes[m].k2, alpha);
    }
    // Batch indices can be large along a tall axis; only the sampled rows are built there.
    const detail::PhaseTables tables(s.positions, g, b.modes);
    std::vector<cplx> rho, sigma;
    detail::structure_sums(tables, s.charges, b.modes, Y, rho, sigma);
    Positions F = Positions::Zero(3, s.size());
    detail::accumulate_forces(tables, s.charges, b.modes, Y, rho, sigma, coef, F);
    return F;
}

}  // namespace

Positions rbe_force_homogeneous(const ParticleSystem& s, const SlabGeometry& g, double alpha, const KBatch& b,
                                bool include_ibc, EstimatorVariant variant)
{
    Positions F = batch_force(s, g, alpha, b, nullptr, variant);
    if (include_ibc)
        F += ibc_energy_force(s, g).forces;
    return F;
}

Positions rbe_force_dielectric(const ParticleSystem& s, const SlabGeometry& g, const DielectricSpec& spec,
                               double alpha, const KBatch& b, bool include_ibc)
{
    if (!spec.has_images())
        return rbe_force_homogeneous(s, g, alpha, b, include_ibc);
    check_image_stability(g, spec);
    KBatch local;
    const KBatch* use = &b;
    if (b.Y.size() != b.modes.size()) {
        local = precompute_Y(b, spec, g.H);
        use = &local;
    }
    Positions F = batch_force(s, g, alpha, *use, &use->Y, EstimatorVariant::Importance);
    if (include_ibc)
        F += ibc_energy_force(s, g, spec).forces;
    return F;
}

double rbe_energy_estimate(const ParticleSystem& s, const SlabGeometry& g, const DielectricSpec& spec, double alpha,
                           const KBatch& b)
{
    const bool images = spec.has_images();
    if (images)
        check_image_stability(g, spec);
    KBatch local = images && b.Y.size() != b.modes.size() ? precompute_Y(b, spec, g.H) : KBatch{};
    const KBatch& use = local.modes.empty() ? b : local;
    const detail::PhaseTables tables(s.positions, g, use.modes);
    std::vector<cplx> rho, sigma;
    detail::structure_sums(tables, s.charges, use.modes, images ? &use.Y : nullptr, rho, sigma);
    double acc = 0.0;
    for (std::size_t m = 0; m < use.size(); ++m)
        acc += (images ? (rho[m] * std::conj(sigma[m])).real() : std::norm(rho[m])) / use.modes[m].k2;
    const double kspace = 2.0 * kPi / g.volume() * use.S / double(use.size()) * acc;
    return kspace - alpha / kSqrtPi * s.charges.squaredNorm() + ibc_energy_force(s, g, spec).energy;
}

Eigen::VectorXd analytic_variance(const ParticleSystem& s, const SlabGeometry& g, const DielectricSpec& spec,
                                  double alpha, int P, const KModeSet& full)
{
    if (P < 1)
        throw ValidationError("analytic_variance: P must be >= 1");
    const bool images = spec.has_images();
    std::vector<YCoefficients> Y;
    if (images) {
        check_image_stability(g, spec);
        Y.resize(full.modes.size());
        for (std::size_t m = 0; m < Y.size(); ++m)
            Y[m] = y_coefficients(full.modes[m].k(2), spec, g.H);
    }
    const double S = normalization_S(g, alpha);
    const double pref = 2.0 * kPi / g.volume();
    const double w = full.half_space ? 2.0 : 1.0;
    std::vector<double> coef(full.modes.size());
    for (std::size_t m = 0; m < coef.size(); ++m) {
        const double k2 = full.modes[m].k2;
        coef[m] = w * S * pref * pref * gaussian_weight(k2, alpha) / (k2 * k2);
    }
    const detail::PhaseTables tables(s.positions, g, detail::max_abs_index(full.modes));
    std::vector<cplx> rho, sigma;
    const std::vector<YCoefficients>* Yp = images ? &Y : nullptr;
    detail::structure_sums(tables, s.charges, full.modes, Yp, rho, sigma);
    Eigen::VectorXd second = Eigen::VectorXd::Zero(s.size());
    detail::accumulate_gradient_squares(tables, s.charges, full.modes, Yp, rho, sigma, coef, second);

    const Positions F = images ? dielectric_fourier_energy_force(s, g, spec, alpha, full).forces
                               : fourier3d_energy_force(s, g, alpha, full).forces;
    Eigen::VectorXd var(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i)
        var(i) = (second(i) - F.col(i).squaredNorm()) / double(P);
    return var;
}

VarianceReport variance_report(const ParticleSystem& s, const SlabGeometry& g, const DielectricSpec& spec,
                               double alpha, int P, int n_samples, RngHandle rng, double tolerance,
                               DrawScheme scheme)
{
    if (n_samples < 100)
        throw ValidationError("variance_report: need at least 100 samples");
    const bool images = spec.has_images();
    const KModeSet full = kmodes_for_tolerance(g, alpha, tolerance);
    const Positions F = images ? dielectric_fourier_energy_force(s, g, spec, alpha, full).forces
                               : fourier3d_energy_force(s, g, alpha, full).forces;

    VarianceReport rep;
    rep.P = P;
    rep.samples = n_samples;
    // The i.i.d. law is built over the full (unpaired) mode set.
    const KModeSet both = enumerate_kmodes(g, full.k_cut, false);
    std::vector<double> weights;
    if (scheme == DrawScheme::Independent)
        for (const KMode& m : both.modes)
            weights.push_back(gaussian_weight(m.k2, alpha));
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    RngHandle iid = rng.split(1);
    KSampler sampler(g, alpha, std::move(rng), 10L * P);
    const auto draw = [&] {
        if (scheme == DrawScheme::Chain)
            return sampler.sample(P);
        KBatch b;
        b.S = sampler.S();
        for (int p = 0; p < P; ++p)
            b.modes.push_back(both.modes[pick(iid.engine())]);
        return b;
    };
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(s.size()), sum2 = Eigen::VectorXd::Zero(s.size());
    double max_sum = 0.0;
    for (int t = 0; t < n_samples; ++t) {
        KBatch b = draw();
        if (images)
            b = precompute_Y(std::move(b), spec, g.H);
        const Positions Fr = images ? rbe_force_dielectric(s, g, spec, alpha, b, false)
                                    : rbe_force_homogeneous(s, g, alpha, b, false);
        const Eigen::VectorXd dev = (Fr - F).colwise().squaredNorm().transpose();
        sum += dev;
        sum2 += dev.cwiseProduct(dev);
        max_sum += std::sqrt(dev.maxCoeff());
    }
    const double n = n_samples;
    rep.empirical = sum / n;
    rep.empirical_stderr = ((sum2 / n - rep.empirical.cwiseProduct(rep.empirical)) / (n - 1.0)).cwiseMax(0.0).cwiseSqrt();
    rep.max_norm_mean = max_sum / n;
    rep.analytic = analytic_variance(s, g, spec, alpha, P, full);
    return rep;
}

}  // namespace rbe2d
