#include "kspace_kernel.hpp"
#include "rbe2d/special_functions.hpp"

#include <algorithm>
#include <cmath>

namespace rbe2d::detail {

PhaseTables::PhaseTables(const Positions& r, const SlabGeometry& g, const Eigen::Vector3i& n_max) : count_(r.cols())
{
    const double L[3] = {g.Lx, g.Ly, g.Lz};
    for (int a = 0; a < 3; ++a)
        build_dense(a, r, L[a], n_max(a));
}

PhaseTables::PhaseTables(const Positions& r, const SlabGeometry& g, const std::vector<KMode>& modes)
    : count_(r.cols())
{
    const double L[3] = {g.Lx, g.Ly, g.Lz};
    const Eigen::Vector3i n_max = max_abs_index(modes);
    for (int a = 0; a < 3; ++a) {
        std::vector<int> used;
        used.reserve(modes.size() + 1);
        used.push_back(0);
        for (const KMode& k : modes)
            used.push_back(std::abs(k.n(a)));
        std::sort(used.begin(), used.end());
        used.erase(std::unique(used.begin(), used.end()), used.end());
        // Both layouts cost one complex multiply per particle and row built.
        const int step = baby_step(n_max(a));
        const long sparse_rows = 2L * step + static_cast<long>(used.size());
        if (n_max(a) + 1 <= sparse_rows)
            build_dense(a, r, L[a], n_max(a));
        else
            build_sparse(a, r, L[a], used);
    }
}

int PhaseTables::baby_step(int n_max) { return static_cast<int>(std::ceil(std::sqrt(n_max + 1.0))); }

void PhaseTables::build_dense(int axis, const Positions& r, double L, int n_max)
{
    rows_[axis] = powers(r, axis, 2.0 * kPi / L, n_max + 1);
}

// Rows e^{i n t x_i} for n = 0..rows-1, built row by row so writes stay contiguous.
std::vector<cplx> PhaseTables::powers(const Positions& r, int axis, double t, int rows) const
{
    std::vector<cplx> out(static_cast<std::size_t>(rows) * count_, cplx(1.0, 0.0));
    if (rows < 2)
        return out;
    cplx* e1 = out.data() + count_;
    for (Eigen::Index i = 0; i < count_; ++i)
        e1[i] = std::polar(1.0, t * r(axis, i));
    for (int n = 2; n < rows; ++n) {
        const cplx* prev = out.data() + static_cast<std::size_t>(n - 1) * count_;
        cplx* cur = out.data() + static_cast<std::size_t>(n) * count_;
        for (Eigen::Index i = 0; i < count_; ++i)
            cur[i] = cmul(prev[i], e1[i]);
    }
    return out;
}

// Only the rows in `used`, as e^{i n t} = giant[n / B] * baby[n % B].
void PhaseTables::build_sparse(int axis, const Positions& r, double L, const std::vector<int>& used)
{
    const int B = baby_step(used.back());
    const double t = 2.0 * kPi / L;
    const std::vector<cplx> baby = powers(r, axis, t, B);
    const std::vector<cplx> giant = powers(r, axis, t * B, used.back() / B + 1);
    slots_[axis].assign(static_cast<std::size_t>(used.back()) + 1, 0);
    rows_[axis].resize(used.size() * count_);
    for (std::size_t s = 0; s < used.size(); ++s) {
        slots_[axis][used[s]] = static_cast<int>(s);
        const cplx* g = giant.data() + static_cast<std::size_t>(used[s] / B) * count_;
        const cplx* b = baby.data() + static_cast<std::size_t>(used[s] % B) * count_;
        cplx* out = rows_[axis].data() + s * count_;
        for (Eigen::Index i = 0; i < count_; ++i)
            out[i] = cmul(g[i], b[i]);
    }
}

Eigen::Vector3i max_abs_index(const std::vector<KMode>& modes)
{
    Eigen::Vector3i m = Eigen::Vector3i::Zero();
    for (const KMode& k : modes)
        m = m.cwiseMax(k.n.cwiseAbs());
    return m;
}

namespace {

inline cplx fetch(const cplx* row, bool negate, Eigen::Index i)
{
    return negate ? std::conj(row[i]) : row[i];
}

}  // namespace

void structure_sums(const PhaseTables& t, const Eigen::VectorXd& q, const std::vector<KMode>& modes,
                    const std::vector<YCoefficients>* Y, std::vector<cplx>& rho, std::vector<cplx>& sigma)
{
    const auto M = static_cast<Eigen::Index>(modes.size());
    const Eigen::Index N = t.count();
    // Particle blocks keep the table rows in cache; partial sums per block are
    // reduced in block order so results do not depend on the thread schedule.
    constexpr Eigen::Index block = 256;
    const long nblocks = static_cast<long>(std::max<Eigen::Index>(1, (N + block - 1) / block));
    const int cols = Y ? 4 : 2;
    Eigen::MatrixXd partial = Eigen::MatrixXd::Zero(cols * M, nblocks);

#pragma omp parallel for schedule(dynamic, 1)
    for (long b = 0; b < nblocks; ++b) {
        const Eigen::Index i0 = b * block;
        const Eigen::Index i1 = std::min<Eigen::Index>(N, i0 + block);
        auto out = partial.col(b);
        for (Eigen::Index m = 0; m < M; ++m) {
            const Eigen::Vector3i& n = modes[m].n;
            const cplx* rx = t.row(0, std::abs(n(0)));
            const cplx* ry = t.row(1, std::abs(n(1)));
            const cplx* rz = t.row(2, std::abs(n(2)));
            const bool nx = n(0) < 0, ny = n(1) < 0, nz = n(2) < 0;
            double re = 0.0, im = 0.0;
            if (!Y) {
                for (Eigen::Index i = i0; i < i1; ++i) {
                    const cplx e = cmul(cmul(fetch(rx, nx, i), fetch(ry, ny, i)), fetch(rz, nz, i));
                    re += q(i) * e.real();
                    im += q(i) * e.imag();
                }
                out(2 * m) = re;
                out(2 * m + 1) = im;
                continue;
            }
            const cplx one_even = cplx(1.0, 0.0) + (*Y)[m].even;
            const cplx odd = (*Y)[m].odd;
            double sre = 0.0, sim = 0.0;
            for (Eigen::Index i = i0; i < i1; ++i) {
                const cplx exy = cmul(fetch(rx, nx, i), fetch(ry, ny, i));
                const cplx ez = fetch(rz, nz, i);
                const cplx e = cmul(exy, ez);
                re += q(i) * e.real();
                im += q(i) * e.imag();
                const cplx s = cmul(exy, cmul(one_even, ez) + cmul(odd, std::conj(ez)));
                sre += q(i) * s.real();
                sim += q(i) * s.imag();
            }
            out.segment<4>(4 * m) << re, im, sre, sim;
        }
    }

    const Eigen::VectorXd total = partial.rowwise().sum();
    rho.resize(modes.size());
    sigma.resize(Y ? modes.size() : 0);
    for (Eigen::Index m = 0; m < M; ++m) {
        rho[m] = {total(cols * m), total(cols * m + 1)};
        if (Y)
            sigma[m] = {total(4 * m + 2), total(4 * m + 3)};
    }
}

namespace {

struct ModeView {
    const cplx* rx;
    const cplx* ry;
    const cplx* rz;
    bool nx, ny, nz;
    cplx a;   // multiplies k
    cplx b;   // multiplies the reflected k (images only)

    ModeView(const PhaseTables& t, const KMode& km, const YCoefficients* y, cplx rho, cplx sigma)
        : rx(t.row(0, std::abs(km.n(0)))), ry(t.row(1, std::abs(km.n(1)))), rz(t.row(2, std::abs(km.n(2)))),
          nx(km.n(0) < 0), ny(km.n(1) < 0), nz(km.n(2) < 0)
    {
        if (!y) {
            a = rho + rho;
            b = cplx(0.0, 0.0);
        } else {
            a = sigma + cmul(cplx(1.0, 0.0) + std::conj(y->even), rho);
            b = cmul(std::conj(y->odd), rho);
        }
    }

    // Scalar weights (g1, g2) with grad_i = q_i (k g1 + k_reflected g2).
    void weights(Eigen::Index i, bool images, double& g1, double& g2) const
    {
        const cplx exy = cmul(fetch(rx, nx, i), fetch(ry, ny, i));
        const cplx ez = fetch(rz, nz, i);
        g1 = cmul_conj(cmul(exy, ez), a).imag();
        g2 = images ? cmul(cmul_conj(exy, ez), b).imag() : 0.0;
    }
};

}  // namespace

void accumulate_gradient_squares(const PhaseTables& t, const Eigen::VectorXd& q, const std::vector<KMode>& modes,
                                 const std::vector<YCoefficients>* Y, const std::vector<cplx>& rho,
                                 const std::vector<cplx>& sigma, const std::vector<double>& coef,
                                 Eigen::VectorXd& out)
{
    const Eigen::Index N = t.count();
    const long n = static_cast<long>(N);
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t m = 0; m < modes.size(); ++m) {
            const KMode& km = modes[m];
            const ModeView v(t, km, Y ? &(*Y)[m] : nullptr, rho[m], Y ? sigma[m] : rho[m]);
            double g1, g2;
            v.weights(i, Y != nullptr, g1, g2);
            const Vec3 grad = q(i) * (g1 * km.k + g2 * km.reflected());
            acc += coef[m] * grad.squaredNorm();
        }
        out(i) += acc;
    }
}

void accumulate_forces(const PhaseTables& t, const Eigen::VectorXd& q, const std::vector<KMode>& modes,
                       const std::vector<YCoefficients>* Y, const std::vector<cplx>& rho,
                       const std::vector<cplx>& sigma, const std::vector<double>& coef, Positions& F)
{
    const Eigen::Index N = t.count();
    constexpr Eigen::Index block = 256;
    const long nblocks = static_cast<long>((N + block - 1) / block);

#pragma omp parallel for schedule(dynamic, 1)
    for (long b = 0; b < nblocks; ++b) {
        const Eigen::Index i0 = b * block;
        const Eigen::Index i1 = std::min<Eigen::Index>(N, i0 + block);
        for (std::size_t m = 0; m < modes.size(); ++m) {
            const KMode& km = modes[m];
            const Eigen::Vector3i& n = km.n;
            const cplx* rx = t.row(0, std::abs(n(0)));
            const cplx* ry = t.row(1, std::abs(n(1)));
            const cplx* rz = t.row(2, std::abs(n(2)));
            const bool nx = n(0) < 0, ny = n(1) < 0, nz = n(2) < 0;
            const double c = coef[m];
            if (!Y) {
                const cplx a = rho[m] + rho[m];
                for (Eigen::Index i = i0; i < i1; ++i) {
                    const cplx e = cmul(cmul(fetch(rx, nx, i), fetch(ry, ny, i)), fetch(rz, nz, i));
                    const double g = cmul_conj(e, a).imag();
                    const double s = c * q(i) * g;
                    F(0, i) += s * km.k(0);
                    F(1, i) += s * km.k(1);
                    F(2, i) += s * km.k(2);
                }
                continue;
            }
            const cplx a = sigma[m] + cmul(cplx(1.0, 0.0) + std::conj((*Y)[m].even), rho[m]);
            const cplx b2 = cmul(std::conj((*Y)[m].odd), rho[m]);
            for (Eigen::Index i = i0; i < i1; ++i) {
                const cplx exy = cmul(fetch(rx, nx, i), fetch(ry, ny, i));
                const cplx ez = fetch(rz, nz, i);
                const cplx e = cmul(exy, ez);
                const double g1 = cmul_conj(e, a).imag();
                // e^{-i k_rho rho_i} e^{+i k_z z_i} conj(Y_odd) rho
                const double g2 = cmul(cmul_conj(exy, ez), b2).imag();
                const double s1 = c * q(i) * g1;
                const double s2 = c * q(i) * g2;
                F(0, i) += s1 * km.k(0) + s2 * km.k(0);
                F(1, i) += s1 * km.k(1) + s2 * km.k(1);
                F(2, i) += s1 * km.k(2) - s2 * km.k(2);
            }
        }
    }
}

}  // namespace rbe2d::detail
