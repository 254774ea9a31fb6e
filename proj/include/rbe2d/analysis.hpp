#ifndef RBE2D_ANALYSIS_HPP
#define RBE2D_ANALYSIS_HPP

#include "rbe2d/md.hpp"

#include <utility>
#include <vector>

namespace rbe2d {

enum class HistogramNorm { Counts, Density, Probability };

struct Histogram1D {
    double lo{0};
    double hi{1};
    Eigen::VectorXd counts;
    Eigen::VectorXd errors;  // standard errors, empty unless estimated
    HistogramNorm norm{HistogramNorm::Counts};

    Histogram1D() = default;
    Histogram1D(double lo, double hi, int bins);

    int bins() const { return int(counts.size()); }
    double width() const { return (hi - lo) / bins(); }
    double center(int b) const { return lo + (b + 0.5) * width(); }
    /// Bin index or -1 when outside [lo, hi]; x == hi lands in the last bin.
    int index(double x) const;
    void add(double x, double weight = 1.0);
    Histogram1D probability() const;
};

using Series = std::vector<std::pair<double, double>>;
using Frames = std::vector<TrajectoryFrame>;

enum class Axis { X, Y, Z, All };

/// Number density of `species` along z, averaged over frames. Errors come from
/// block averaging over `blocks` contiguous groups of frames when blocks >= 2.
Histogram1D concentration_profile(const Frames& frames, const Eigen::VectorXi& species, int which,
                                  const SlabGeometry& g, int bins, int blocks = 0);

Series msd(const Frames& frames, Axis axis);
Series vacf(const Frames& frames);

double w2_distance(std::vector<double> a, std::vector<double> b);

struct ScalingRecord {
    std::vector<int> workers;
    std::vector<double> times;
    int n_min{1};
    double t_min{0};

    void validate() const;
};

Series strong_scaling(const ScalingRecord& record);

struct LinearFit {
    double slope{0};
    double intercept{0};
    double r2{0};
    double slope_stderr{0};
};

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

struct BlockEstimate {
    double mean{0};
    double stderr_{0};
    int blocks{0};
};

BlockEstimate block_average(const std::vector<double>& samples, int blocks);

std::vector<double> potential_energies(const Frames& frames);

struct Chi2Result {
    double chi2{0};
    int dof{0};
    double p_value{0};
    long draws{0};
};

/// Goodness of fit of chain draws against the exact mode law. Modes expecting at
/// least `min_expected` hits get their own bin; the rest share one tail bin.
Chi2Result sampler_chi2_test(KSampler& sampler, long draws, double min_expected = 10.0);

/// Upper tail probability of the chi-square distribution.
double chi2_survival(double chi2, int dof);

}  // namespace rbe2d

#endif
