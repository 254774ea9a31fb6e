#include "rbe2d/analysis.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <array>
#include <map>
#include <numeric>

namespace rbe2d {

Histogram1D::Histogram1D(double lo_, double hi_, int n) : lo(lo_), hi(hi_), counts(Eigen::VectorXd::Zero(n))
{
    if (n < 1 || !(hi_ > lo_))
        throw ValidationError("histogram: need bins >= 1 and hi > lo");
}

int Histogram1D::index(double x) const
{
    if (!(x >= lo && x <= hi))
        return -1;
    const int b = int((x - lo) / width());
    return std::min(b, bins() - 1);
}

void Histogram1D::add(double x, double weight)
{
    const int b = index(x);
    if (b >= 0)
        counts(b) += weight;
}

Histogram1D Histogram1D::probability() const
{
    Histogram1D h = *this;
    const double total = counts.sum();
    if (total > 0) {
        h.counts /= total;
        if (errors.size())
            h.errors /= total;
    }
    h.norm = HistogramNorm::Probability;
    return h;
}

Histogram1D concentration_profile(const Frames& frames, const Eigen::VectorXi& species, int which,
                                  const SlabGeometry& g, int bins, int blocks)
{
    Histogram1D h(0.0, g.H, bins);
    h.norm = HistogramNorm::Density;
    if (frames.empty())
        throw ValidationError("concentration_profile: no frames");
    const double shell = g.area() * h.width();
    const auto nf = frames.size();
    std::vector<Eigen::VectorXd> per_frame(nf, Eigen::VectorXd::Zero(bins));
    for (std::size_t f = 0; f < nf; ++f) {
        const Positions& r = frames[f].positions;
        if (r.cols() != species.size())
            throw ValidationError("concentration_profile: species size does not match frames");
        for (Eigen::Index i = 0; i < r.cols(); ++i)
            if (species(i) == which) {
                const int b = h.index(r(2, i));
                if (b >= 0)
                    per_frame[f](b) += 1.0 / shell;
            }
    }
    for (const auto& c : per_frame)
        h.counts += c;
    h.counts /= double(nf);

    if (blocks >= 2 && nf >= std::size_t(blocks)) {
        const std::size_t len = nf / std::size_t(blocks);
        Eigen::MatrixXd means = Eigen::MatrixXd::Zero(bins, blocks);
        for (int b = 0; b < blocks; ++b) {
            for (std::size_t f = b * len; f < (b + 1) * len; ++f)
                means.col(b) += per_frame[f];
            means.col(b) /= double(len);
        }
        const Eigen::VectorXd mu = means.rowwise().mean();
        const Eigen::VectorXd var = (means.colwise() - mu).rowwise().squaredNorm() / double(blocks - 1);
        h.errors = (var / double(blocks)).cwiseSqrt();
    }
    return h;
}

namespace {

double displacement2(const Vec3& d, Axis axis)
{
    switch (axis) {
    case Axis::X: return d(0) * d(0);
    case Axis::Y: return d(1) * d(1);
    case Axis::Z: return d(2) * d(2);
    case Axis::All: return d.squaredNorm();
    }
    return 0.0;
}

template <typename Fn>
Series lag_average(const Frames& frames, Fn value)
{
    Series out;
    const std::size_t n = frames.size();
    if (n < 2)
        return out;
    const double dt = frames[1].time - frames[0].time;
    out.resize(n);
#pragma omp parallel for schedule(dynamic)
    for (long lag = 0; lag < long(n); ++lag) {
        double acc = 0.0;
        for (std::size_t t0 = 0; t0 + lag < n; ++t0)
            acc += value(frames[t0], frames[t0 + lag]);
        out[lag] = {lag * dt, acc / double(n - lag)};
    }
    return out;
}

}  // namespace

Series msd(const Frames& frames, Axis axis)
{
    return lag_average(frames, [axis](const TrajectoryFrame& a, const TrajectoryFrame& b) {
        const Eigen::Index n = a.positions.cols();
        double s = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            s += displacement2(b.positions.col(i) - a.positions.col(i), axis);
        return n ? s / double(n) : 0.0;
    });
}

Series vacf(const Frames& frames)
{
    Series c = lag_average(frames, [](const TrajectoryFrame& a, const TrajectoryFrame& b) {
        const Eigen::Index n = a.velocities.cols();
        const double s = (a.velocities.cwiseProduct(b.velocities)).sum();
        return n ? s / double(n) : 0.0;
    });
    if (!c.empty() && c[0].second != 0.0) {
        const double c0 = c[0].second;
        for (auto& p : c)
            p.second /= c0;
    }
    return c;
}

namespace {

double quantile_sorted(const std::vector<double>& s, double u)
{
    // Linear interpolation of the empirical inverse CDF at cell midpoints.
    const double pos = u * double(s.size()) - 0.5;
    if (pos <= 0)
        return s.front();
    if (pos >= double(s.size() - 1))
        return s.back();
    const auto i = std::size_t(pos);
    const double f = pos - double(i);
    return s[i] + f * (s[i + 1] - s[i]);
}

}  // namespace

double w2_distance(std::vector<double> a, std::vector<double> b)
{
    if (a.empty() || b.empty())
        throw ValidationError("w2_distance: empty sample set");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double acc = 0.0;
    if (a.size() == b.size()) {
        for (std::size_t i = 0; i < a.size(); ++i)
            acc += (a[i] - b[i]) * (a[i] - b[i]);
        return std::sqrt(acc / double(a.size()));
    }
    const std::size_t m = std::max(a.size(), b.size());
    for (std::size_t i = 0; i < m; ++i) {
        const double u = (double(i) + 0.5) / double(m);
        const double d = quantile_sorted(a, u) - quantile_sorted(b, u);
        acc += d * d;
    }
    return std::sqrt(acc / double(m));
}

void ScalingRecord::validate() const
{
    if (workers.size() != times.size() || workers.empty())
        throw ValidationError("scaling: workers and times must be nonempty and equal length");
    for (double t : times)
        if (!(t > 0))
            throw ValidationError("scaling: wall times must be positive");
    if (!(t_min > 0) || n_min < 1)
        throw ValidationError("scaling: missing baseline");
}

Series strong_scaling(const ScalingRecord& r)
{
    r.validate();
    Series out;
    for (std::size_t i = 0; i < r.workers.size(); ++i)
        out.emplace_back(r.workers[i], (double(r.n_min) / r.workers[i]) * (r.t_min / r.times[i]));
    return out;
}

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y)
{
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n)
        throw ValidationError("linear_fit: need at least two paired points");
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / double(n);
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / double(n);
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0))
        throw ValidationError("linear_fit: x values are all equal");
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    const double sse = std::max(0.0, syy - f.slope * sxy);
    f.r2 = syy > 0 ? 1.0 - sse / syy : 1.0;
    f.slope_stderr = n > 2 ? std::sqrt(sse / double(n - 2) / sxx) : 0.0;
    return f;
}

BlockEstimate block_average(const std::vector<double>& s, int blocks)
{
    if (blocks < 2 || s.size() < std::size_t(blocks))
        throw ValidationError("block_average: need at least two blocks with one sample each");
    const std::size_t len = s.size() / std::size_t(blocks);
    std::vector<double> m(blocks, 0.0);
    for (int b = 0; b < blocks; ++b) {
        for (std::size_t i = b * len; i < (b + 1) * len; ++i)
            m[b] += s[i];
        m[b] /= double(len);
    }
    BlockEstimate e;
    e.blocks = blocks;
    e.mean = std::accumulate(m.begin(), m.end(), 0.0) / blocks;
    double v = 0.0;
    for (double x : m)
        v += (x - e.mean) * (x - e.mean);
    e.stderr_ = std::sqrt(v / double(blocks - 1) / double(blocks));
    return e;
}

std::vector<double> potential_energies(const Frames& frames)
{
    std::vector<double> u;
    u.reserve(frames.size());
    for (const auto& f : frames)
        u.push_back(f.energy.total());
    return u;
}

double chi2_survival(double chi2, int dof)
{
    if (dof < 1)
        throw ValidationError("chi2_survival: dof must be >= 1");
    return boost::math::gamma_q(0.5 * dof, 0.5 * chi2);
}

Chi2Result sampler_chi2_test(KSampler& sampler, long draws, double min_expected)
{
    if (draws < 1)
        throw ValidationError("sampler_chi2_test: draws must be positive");
    const double S = sampler.S();
    const double floor_w = min_expected * S / double(draws);
    Eigen::Vector3d decay;
    for (int a = 0; a < 3; ++a)
        decay(a) = -sampler.log_target(Eigen::Vector3i::Unit(a));
    Eigen::Vector3i nmax;
    for (int a = 0; a < 3; ++a)
        nmax(a) = floor_w < 1.0 ? int(std::sqrt(-std::log(floor_w) / decay(a))) : 0;

    std::map<std::array<int, 3>, int> bin_of;
    std::vector<double> expected;
    for (int x = -nmax(0); x <= nmax(0); ++x)
        for (int y = -nmax(1); y <= nmax(1); ++y)
            for (int z = -nmax(2); z <= nmax(2); ++z) {
                if (x == 0 && y == 0 && z == 0)
                    continue;
                const double w = std::exp(sampler.log_target({x, y, z}));
                if (w < floor_w)
                    continue;
                bin_of[{x, y, z}] = int(expected.size());
                expected.push_back(double(draws) * w / S);
            }
    double listed = 0.0;
    for (double e : expected)
        listed += e;
    const double tail = std::max(0.0, double(draws) - listed);

    std::vector<double> observed(expected.size() + 1, 0.0);
    for (long d = 0; d < draws; ++d) {
        const Eigen::Vector3i n = sampler.next();
        const auto it = bin_of.find({n(0), n(1), n(2)});
        observed[it == bin_of.end() ? expected.size() : std::size_t(it->second)] += 1.0;
    }
    Chi2Result r;
    r.draws = draws;
    for (std::size_t b = 0; b < expected.size(); ++b)
        r.chi2 += (observed[b] - expected[b]) * (observed[b] - expected[b]) / expected[b];
    int bins = int(expected.size());
    if (tail >= 5.0) {
        const double o = observed.back();
        r.chi2 += (o - tail) * (o - tail) / tail;
        ++bins;
    }
    r.dof = std::max(1, bins - 1);
    r.p_value = chi2_survival(r.chi2, r.dof);
    return r;
}

}  // namespace rbe2d
