// Shared loops for k-space sums over an explicit list of modes.
#ifndef RBE2D_KSPACE_KERNEL_HPP
#define RBE2D_KSPACE_KERNEL_HPP

#include "rbe2d/fourier.hpp"

#include <vector>

namespace rbe2d::detail {

inline cplx cmul(cplx a, cplx b)
{
    return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}

inline cplx cmul_conj(cplx a, cplx b)  // conj(a) * b
{
    return {a.real() * b.real() + a.imag() * b.imag(), a.real() * b.imag() - a.imag() * b.real()};
}

/// Per-axis powers e^{i 2 pi n x / L}, one row of particles per index n >= 0.
///
/// The n_max form builds every row 0..n_max by recurrence. The mode-list form builds,
/// per axis, either that dense table or only the |n| that occur (from baby-step and
/// giant-step tables), whichever needs fewer rows, so a few large indices never cost
/// O(N n_max).
class PhaseTables {
public:
    PhaseTables(const Positions& r, const SlabGeometry& g, const Eigen::Vector3i& n_max);
    PhaseTables(const Positions& r, const SlabGeometry& g, const std::vector<KMode>& modes);

    cplx get(int axis, int n, Eigen::Index i) const
    {
        const cplx v = row(axis, n < 0 ? -n : n)[i];
        return n < 0 ? std::conj(v) : v;
    }
    const cplx* row(int axis, int n) const
    {
        const std::size_t slot = slots_[axis].empty() ? static_cast<std::size_t>(n) : slots_[axis][n];
        return rows_[axis].data() + slot * count_;
    }
    Eigen::Index count() const { return count_; }

private:
    static int baby_step(int n_max);
    std::vector<cplx> powers(const Positions& r, int axis, double t, int rows) const;
    void build_dense(int axis, const Positions& r, double L, int n_max);
    void build_sparse(int axis, const Positions& r, double L, const std::vector<int>& used);

    Eigen::Index count_;
    std::vector<cplx> rows_[3];
    std::vector<int> slots_[3];  // index -> row, empty when dense
};

Eigen::Vector3i max_abs_index(const std::vector<KMode>& modes);

/// rho_m = sum_i q_i e^{i k_m r_i}; sigma_m additionally folds in the images via Y
/// (sigma is left empty when Y is null).
void structure_sums(const PhaseTables& t, const Eigen::VectorXd& q, const std::vector<KMode>& modes,
                    const std::vector<YCoefficients>* Y, std::vector<cplx>& rho, std::vector<cplx>& sigma);

/// F_i += coef_m * grad_i(rho_m conj(sigma_m)) for every mode; the gradient of the
/// full-k term. Homogeneous when Y is null (sigma == rho).
void accumulate_forces(const PhaseTables& t, const Eigen::VectorXd& q, const std::vector<KMode>& modes,
                       const std::vector<YCoefficients>* Y, const std::vector<cplx>& rho,
                       const std::vector<cplx>& sigma, const std::vector<double>& coef, Positions& F);

/// out_i += coef_m * |grad_i(rho_m conj(sigma_m))|^2, mode by mode.
void accumulate_gradient_squares(const PhaseTables& t, const Eigen::VectorXd& q, const std::vector<KMode>& modes,
                                 const std::vector<YCoefficients>* Y, const std::vector<cplx>& rho,
                                 const std::vector<cplx>& sigma, const std::vector<double>& coef,
                                 Eigen::VectorXd& out);

}  // namespace rbe2d::detail

#endif
