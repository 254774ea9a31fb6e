#include "rbe2d/realspace.hpp"
#include "rbe2d/special_functions.hpp"

#include <algorithm>
#include <array>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rbe2d {

namespace {

int thread_count()
{
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

int thread_id()
{
#ifdef _OPENMP
    return omp_get_thread_num();
#else
    return 0;
#endif
}

// Per-thread force buffers merged in thread order.
struct Accumulators {
    std::vector<Positions> forces;
    std::vector<double> energy;

    Accumulators(int threads, Eigen::Index n) : forces(threads, Positions::Zero(3, n)), energy(threads, 0.0) {}

    ShortRangeResult merge() const
    {
        ShortRangeResult out{0.0, forces.front()};
        out.energy = energy.front();
        for (std::size_t t = 1; t < forces.size(); ++t) {
            out.forces += forces[t];
            out.energy += energy[t];
        }
        return out;
    }
};

// -dV/dr / r for erfc(a r)/r.
inline double coulomb_radial(double r, double alpha, double erfc_ar)
{
    return (erfc_ar / r + kTwoOverSqrtPi * alpha * std::exp(-alpha * alpha * r * r)) / (r * r);
}

}  // namespace

std::size_t NeighborList::pair_count() const
{
    std::size_t n = 0;
    for (const auto& v : neighbors)
        n += v.size();
    return n;
}

bool NeighborList::needs_rebuild(const ParticleSystem& s) const
{
    if (reference.cols() != s.size())
        return true;
    const double limit = 0.25 * skin * skin;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if ((s.positions.col(i) - reference.col(i)).squaredNorm() > limit)
            return true;
    return false;
}

NeighborList build_neighbor_list(const ParticleSystem& s, const SlabGeometry& g, double r_cut, double skin)
{
    if (!(r_cut > 0) || skin < 0)
        throw ValidationError("neighbor list: r_cut must be positive and skin non-negative");
    const double reach = r_cut + skin;
    if (!(reach < 0.5 * std::min(g.Lx, g.Ly))) {
        std::ostringstream os;
        os << "neighbor list: r_cut + skin = " << reach << " must be below half the box (" << 0.5 * std::min(g.Lx, g.Ly)
           << ")";
        throw ValidationError(os.str());
    }
    NeighborList list;
    list.r_cut = r_cut;
    list.skin = skin;
    list.cell_size = reach;
    list.reference = s.positions;
    const Eigen::Index n = s.size();
    list.neighbors.assign(static_cast<std::size_t>(n), {});

    const int ncx = std::max(1, static_cast<int>(std::floor(g.Lx / reach)));
    const int ncy = std::max(1, static_cast<int>(std::floor(g.Ly / reach)));
    const int ncz = std::max(1, static_cast<int>(std::floor(g.H / reach)));
    auto cell_of = [&](Eigen::Index i) {
        double x = s.positions(0, i) - g.Lx * std::floor(s.positions(0, i) / g.Lx);
        double y = s.positions(1, i) - g.Ly * std::floor(s.positions(1, i) / g.Ly);
        const int cx = std::min(ncx - 1, static_cast<int>(x / g.Lx * ncx));
        const int cy = std::min(ncy - 1, static_cast<int>(y / g.Ly * ncy));
        const int cz = std::clamp(static_cast<int>(s.positions(2, i) / g.H * ncz), 0, ncz - 1);
        return std::array<int, 3>{cx, cy, cz};
    };
    auto flat = [&](int cx, int cy, int cz) { return (cz * ncy + cy) * ncx + cx; };

    std::vector<std::vector<int>> cells(static_cast<std::size_t>(ncx * ncy * ncz));
    std::vector<std::array<int, 3>> where(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        where[i] = cell_of(i);
        cells[flat(where[i][0], where[i][1], where[i][2])].push_back(static_cast<int>(i));
    }

    const double reach2 = reach * reach;
    std::vector<int> visit;
    for (Eigen::Index i = 0; i < n; ++i) {
        visit.clear();
        const auto [cx, cy, cz] = where[i];
        for (int dz = -1; dz <= 1; ++dz) {
            const int z = cz + dz;
            if (z < 0 || z >= ncz)
                continue;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx)
                    visit.push_back(flat((cx + dx + ncx) % ncx, (cy + dy + ncy) % ncy, z));
        }
        std::sort(visit.begin(), visit.end());
        visit.erase(std::unique(visit.begin(), visit.end()), visit.end());
        auto& mine = list.neighbors[i];
        for (int c : visit)
            for (int j : cells[c]) {
                if (j <= i)
                    continue;
                const Vec3 d = min_image_xy((s.positions.col(i) - s.positions.col(j)).eval(), g);
                if (d.squaredNorm() <= reach2)
                    mine.push_back(j);
            }
        std::sort(mine.begin(), mine.end());
    }
    return list;
}

bool refresh_neighbor_list(NeighborList& list, const ParticleSystem& s, const SlabGeometry& g)
{
    if (!list.needs_rebuild(s))
        return false;
    const long gen = list.generation;
    list = build_neighbor_list(s, g, list.r_cut, list.skin);
    list.generation = gen + 1;
    return true;
}

ShortRangeResult real_space_energy_force(const ParticleSystem& s, const SlabGeometry& g, const DielectricSpec& spec,
                                         double alpha, const NeighborList& list)
{
    const Eigen::Index n = s.size();
    const double rc = list.r_cut;
    const double rc2 = rc * rc;

    // Image levels whose nearest possible distance, (l - 1) H, is inside the cutoff.
    struct Level {
        int l;
        ImageBranch b;
        double factor;
    };
    std::vector<Level> levels;
    if (spec.has_images()) {
        const int lmax = std::min(spec.M, static_cast<int>(std::floor(rc / g.H)) + 1);
        for (int l = 1; l <= lmax; ++l)
            for (ImageBranch b : {ImageBranch::Plus, ImageBranch::Minus}) {
                const double f = image_factor(l, b, spec);
                if (f != 0.0)
                    levels.push_back({l, b, f});
            }
    }

    Accumulators acc(thread_count(), n);
    bool singular = false;

#pragma omp parallel reduction(|| : singular)
    {
        const int t = thread_id();
        Positions& F = acc.forces[t];
        double& U = acc.energy[t];
        auto image_field = [&](Eigen::Index i, Eigen::Index j) {
            // Images of j acting on i; energy carries 1/2, force acts only on i.
            const double qq = s.charges(i) * s.charges(j);
            for (const Level& lv : levels) {
                const Vec3 img = image_position(lv.l, lv.b, s.positions.col(j), g.H);
                const Vec3 d = min_image_xy((s.positions.col(i) - img).eval(), g);
                const double r2 = d.squaredNorm();
                if (r2 > rc2)
                    continue;
                if (r2 == 0.0) {
                    singular = true;
                    continue;
                }
                const double r = std::sqrt(r2);
                const double e = erfc_flushed(alpha * r);
                U += 0.5 * qq * lv.factor * e / r;
                F.col(i) += (qq * lv.factor * coulomb_radial(r, alpha, e)) * d;
            }
        };
#pragma omp for schedule(static)
        for (Eigen::Index i = 0; i < n; ++i) {
            if (!levels.empty())
                image_field(i, i);
            for (int j : list.neighbors[i]) {
                const Vec3 d = min_image_xy((s.positions.col(i) - s.positions.col(j)).eval(), g);
                const double r2 = d.squaredNorm();
                if (r2 == 0.0) {
                    singular = true;
                    continue;
                }
                if (r2 <= rc2) {
                    const double r = std::sqrt(r2);
                    const double qq = s.charges(i) * s.charges(j);
                    const double e = erfc_flushed(alpha * r);
                    U += qq * e / r;
                    const Vec3 f = (qq * coulomb_radial(r, alpha, e)) * d;
                    F.col(i) += f;
                    F.col(j) -= f;
                }
                if (!levels.empty()) {
                    image_field(i, j);
                    image_field(j, i);
                }
            }
        }
    }
    if (singular)
        throw SingularityError("real space: coincident charges (actual or image)");
    return acc.merge();
}

double lj_pair_energy(double r, const LJParams& lj)
{
    if (r >= lj.r_lj())
        return 0.0;
    const double s6 = std::pow(lj.sigma / r, 6);
    return 4.0 * lj.epsilon * (s6 * s6 - s6) + lj.epsilon;
}

double wall_energy(double d, const WallParams& w)
{
    if (d >= w.range())
        return 0.0;
    const double s6 = std::pow(w.sigma / d, 6);
    return 4.0 * w.epsilon * (s6 * s6 - s6) + w.epsilon;
}

namespace {

// -dV/dr / r for the 12-6 form, valid inside the truncation radius.
inline double lj_radial(double r2, double eps, double sigma)
{
    const double s2 = sigma * sigma / r2;
    const double s6 = s2 * s2 * s2;
    return 24.0 * eps * (2.0 * s6 * s6 - s6) / r2;
}

}  // namespace

ShortRangeResult lj_and_wall_energy_force(const ParticleSystem& s, const SlabGeometry& g, const LJParams& lj,
                                          const WallParams& wall, const NeighborList& list)
{
    const Eigen::Index n = s.size();
    if (lj.epsilon != 0.0 && list.r_cut < lj.r_lj())
        throw ValidationError("lj: neighbor list cutoff shorter than the LJ range");
    const double rlj2 = lj.r_lj() * lj.r_lj();
    const double wr = wall.range();

    Accumulators acc(thread_count(), n);
    long escaped = -1;
    bool overlap = false;

#pragma omp parallel reduction(|| : overlap)
    {
        const int t = thread_id();
        Positions& F = acc.forces[t];
        double& U = acc.energy[t];
#pragma omp for schedule(static)
        for (Eigen::Index i = 0; i < n; ++i) {
            const double z = s.positions(2, i);
            if (!(z > 0.0 && z < g.H)) {
#pragma omp critical
                escaped = std::max<long>(escaped, static_cast<long>(i));
                continue;
            }
            if (wall.epsilon != 0.0) {
                if (z < wr) {
                    U += wall_energy(z, wall);
                    F(2, i) += lj_radial(z * z, wall.epsilon, wall.sigma) * z;
                }
                const double d = g.H - z;
                if (d < wr) {
                    U += wall_energy(d, wall);
                    F(2, i) -= lj_radial(d * d, wall.epsilon, wall.sigma) * d;
                }
            }
            if (lj.epsilon == 0.0)
                continue;
            for (int j : list.neighbors[i]) {
                const Vec3 d = min_image_xy((s.positions.col(i) - s.positions.col(j)).eval(), g);
                const double r2 = d.squaredNorm();
                if (r2 >= rlj2)
                    continue;
                if (r2 == 0.0) {
                    overlap = true;
                    continue;
                }
                U += lj_pair_energy(std::sqrt(r2), lj);
                const Vec3 f = lj_radial(r2, lj.epsilon, lj.sigma) * d;
                F.col(i) += f;
                F.col(j) -= f;
            }
        }
    }
    if (escaped >= 0) {
        std::ostringstream os;
        os << "particle " << escaped << " left the slab (z=" << s.positions(2, escaped) << ", H=" << g.H << ")";
        throw EscapeError(os.str());
    }
    if (overlap)
        throw SingularityError("lj: coincident particles");
    return acc.merge();
}

}  // namespace rbe2d
