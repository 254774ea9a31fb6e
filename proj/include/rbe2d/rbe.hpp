// Random-batch estimator of the reciprocal-space force.
//
// Modes are importance-sampled from P(k) = exp(-k^2/4a^2) / S over the nonzero
// lattice of the padded cell; each sampled mode contributes its full-k gradient
// scaled by S / (P k^2), which is an unbiased estimate of the deterministic sum.

#ifndef RBE2D_RBE_HPP
#define RBE2D_RBE_HPP

#include "rbe2d/fourier.hpp"

#include <vector>

namespace rbe2d {

enum class NormalizationMode { ExactSum, GaussianBound };

double normalization_S(const SlabGeometry& geometry, double alpha,
                       NormalizationMode mode = NormalizationMode::ExactSum);

struct KBatch {
    std::vector<KMode> modes;       // sampled with replacement, never k = 0
    double S{0};
    std::vector<YCoefficients> Y;   // per mode, empty without images

    std::size_t size() const { return modes.size(); }
};

/// Metropolis chain over nonzero integer modes with stationary law P(k).
///
/// Proposals are independent draws of a per-axis rounded Gaussian matched to the
/// target width; acceptance uses the exact bin probabilities of the proposal, so
/// the chain is reversible with respect to P(k). The chain persists across calls.
class KSampler {
public:
    KSampler(const SlabGeometry& geometry, double alpha, RngHandle rng, long burn_in = 1000);

    Eigen::Vector3i next();
    KBatch sample(int P);

    double acceptance_rate() const { return proposals_ ? double(accepted_) / double(proposals_) : 0.0; }
    const Vec3& proposal_width() const { return width_; }
    double S() const { return S_; }
    const SlabGeometry& geometry() const { return geometry_; }

    /// Unnormalized log target and log proposal mass of a mode.
    double log_target(const Eigen::Vector3i& n) const;
    double log_proposal(const Eigen::Vector3i& n) const;

private:
    Eigen::Vector3i propose();

    SlabGeometry geometry_;
    double alpha_;
    RngHandle rng_;
    Vec3 width_;
    Vec3 decay_;  // log target = -sum decay_a n_a^2
    double S_;
    Eigen::Vector3i state_;
    double state_log_ratio_;  // log_target - log_proposal of the current state
    long proposals_{0};
    long accepted_{0};
};

/// One-shot batch from a fresh chain burnt in for 10 P steps.
KBatch sample_batch(int P, const SlabGeometry& geometry, double alpha, RngHandle& rng);

KBatch precompute_Y(KBatch batch, const DielectricSpec& spec, double H);

/// Literal variant keeps the Gaussian factor inside the estimator as well as in the
/// sampling law; it is biased and exists for comparison only.
enum class EstimatorVariant { Importance, LiteralGaussian };

Positions rbe_force_homogeneous(const ParticleSystem& system, const SlabGeometry& geometry, double alpha,
                                const KBatch& batch, bool include_ibc = true,
                                EstimatorVariant variant = EstimatorVariant::Importance);

Positions rbe_force_dielectric(const ParticleSystem& system, const SlabGeometry& geometry,
                               const DielectricSpec& spec, double alpha, const KBatch& batch,
                               bool include_ibc = true);

/// Unbiased estimate of the reciprocal energy (Gaussian self term and boundary correction included).
double rbe_energy_estimate(const ParticleSystem& system, const SlabGeometry& geometry, const DielectricSpec& spec,
                           double alpha, const KBatch& batch);

struct VarianceReport {
    Eigen::VectorXd empirical;         // per particle E|F_rbe - F|^2
    Eigen::VectorXd empirical_stderr;  // standard error of the above
    Eigen::VectorXd analytic;          // closed form for independent draws
    double max_norm_mean{0};           // sample mean of max_i |F_rbe,i - F_i|
    int P{0};
    int samples{0};
};

/// Analytic per-particle variance of the P-mode estimator, using every mode up to k_cut.
Eigen::VectorXd analytic_variance(const ParticleSystem& system, const SlabGeometry& geometry,
                                  const DielectricSpec& spec, double alpha, int P, const KModeSet& full_modes);

/// Chain: batches come from one persistent KSampler, as in the force field.
/// Independent: i.i.d. draws from the enumerated modes, matching the analytic variance exactly.
enum class DrawScheme { Chain, Independent };

VarianceReport variance_report(const ParticleSystem& system, const SlabGeometry& geometry,
                               const DielectricSpec& spec, double alpha, int P, int n_samples, RngHandle rng,
                               double tolerance = 1e-10, DrawScheme scheme = DrawScheme::Chain);

}  // namespace rbe2d

#endif
