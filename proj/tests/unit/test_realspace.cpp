#include "rbe2d/ewald2d.hpp"
#include "rbe2d/realspace.hpp"

#include <doctest.h>

#include <set>

using namespace rbe2d;

namespace {

ParticleSystem random_system(int n, const SlabGeometry& g, std::uint64_t seed, double margin = 0.1)
{
    RngHandle rng(seed, 0);
    ParticleSystem s(n);
    for (int i = 0; i < n; ++i) {
        s.positions.col(i) << rng.uniform() * g.Lx, rng.uniform() * g.Ly, margin + rng.uniform() * (g.H - 2 * margin);
        s.charges(i) = i % 2 ? -1.0 : 1.0;
    }
    return s;
}

Positions fd(const ParticleSystem& s, const std::function<double(const ParticleSystem&)>& u, double h = 1e-6)
{
    Positions f(3, s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i)
        for (int c = 0; c < 3; ++c) {
            ParticleSystem p = s, m = s;
            p.positions(c, i) += h;
            m.positions(c, i) -= h;
            f(c, i) = -(u(p) - u(m)) / (2 * h);
        }
    return f;
}

}  // namespace

TEST_CASE("neighbor list matches brute force")
{
    const SlabGeometry g{10, 9, 4, 4};
    const ParticleSystem s = random_system(120, g, 5);
    const double rc = 2.5, skin = 0.5;
    const NeighborList list = build_neighbor_list(s, g, rc, skin);
    std::set<std::pair<int, int>> expected, got;
    for (int i = 0; i < s.size(); ++i)
        for (int j = i + 1; j < s.size(); ++j)
            if (min_image_xy(Vec3(s.positions.col(j) - s.positions.col(i)), g).norm() < rc + skin)
                expected.insert({i, j});
    for (int i = 0; i < int(list.neighbors.size()); ++i)
        for (int j : list.neighbors[i]) {
            CHECK(j > i);
            got.insert({i, j});
        }
    CHECK(got == expected);
    CHECK(list.pair_count() == expected.size());
}

TEST_CASE("neighbor list rebuild triggers after half a skin")
{
    const SlabGeometry g{10, 10, 4, 4};
    ParticleSystem s = random_system(40, g, 6);
    NeighborList list = build_neighbor_list(s, g, 2.0, 0.4);
    const long gen = list.generation;
    s.positions(0, 3) += 0.15;
    CHECK_FALSE(refresh_neighbor_list(list, s, g));
    s.positions(0, 3) += 0.1;
    CHECK(list.needs_rebuild(s));
    CHECK(refresh_neighbor_list(list, s, g));
    CHECK(list.generation == gen + 1);
}

TEST_CASE("cutoff plus skin must fit in half the box")
{
    const SlabGeometry g{6, 6, 3, 3};
    const ParticleSystem s = random_system(10, g, 1);
    CHECK_THROWS_AS(build_neighbor_list(s, g, 2.9, 0.2), ValidationError);
}

TEST_CASE("real-space forces are gradients of the truncated energy")
{
    const SlabGeometry g{8, 8, 3, 3};
    const ParticleSystem s = random_system(24, g, 7);
    for (const auto& d : {DielectricSpec::homogeneous(), DielectricSpec::from_contrasts(0.8, -0.5, 3)}) {
        const NeighborList list = build_neighbor_list(s, g, 3.0, 0.0);
        const ShortRangeResult r = real_space_energy_force(s, g, d, 1.1, list);
        const Positions f = fd(s, [&](const ParticleSystem& x) {
            return real_space_energy_force(x, g, d, 1.1, build_neighbor_list(x, g, 3.0, 0.0)).energy;
        });
        CHECK((r.forces - f).cwiseAbs().maxCoeff() < 1e-6 * std::max(1.0, f.cwiseAbs().maxCoeff()));
        CHECK(r.forces.rowwise().sum().head<2>().norm() < 1e-10);
    }
}

TEST_CASE("real-space homogeneous energy matches the reference real sum when the cutoff converges")
{
    const SlabGeometry g{8, 8, 3, 3};
    const ParticleSystem s = random_system(20, g, 8);
    const double alpha = 1.6;
    const NeighborList list = build_neighbor_list(s, g, 3.9, 0.0);
    Ewald2DParams p;
    p.alpha = alpha;
    p.real_shells = 2;
    CHECK(real_space_energy_force(s, g, DielectricSpec::homogeneous(), alpha, list).energy ==
          doctest::Approx(energy_real_2d(s, g, p)).epsilon(1e-9));
}

TEST_CASE("coincident actual charges raise a singularity error")
{
    const SlabGeometry g{8, 8, 3, 3};
    ParticleSystem s = random_system(4, g, 9);
    s.positions.col(1) = s.positions.col(0);
    const NeighborList list = build_neighbor_list(s, g, 2.0, 0.0);
    CHECK_THROWS_AS(real_space_energy_force(s, g, DielectricSpec::homogeneous(), 1.0, list), SingularityError);
}

TEST_CASE("a charge on an interface meets its own image")
{
    const SlabGeometry g{8, 8, 3, 6};
    ParticleSystem s = random_system(2, g, 10);
    s.positions(2, 0) = 0.0;
    const NeighborList list = build_neighbor_list(s, g, 2.0, 0.0);
    CHECK_THROWS_AS(real_space_energy_force(s, g, DielectricSpec::from_contrasts(0.5, 0.5, 1), 1.0, list),
                    SingularityError);
}

TEST_CASE("WCA pair and wall potentials")
{
    const LJParams lj;
    CHECK(lj_pair_energy(lj.sigma, lj) == doctest::Approx(1.0));
    CHECK(lj_pair_energy(lj.r_lj(), lj) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(lj_pair_energy(2.0, lj) == 0.0);
    const WallParams w;
    CHECK(wall_energy(w.sigma, w) == doctest::Approx(1.0));
    CHECK(wall_energy(w.range(), w) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(wall_energy(3.0, w) == 0.0);
}

TEST_CASE("short-range forces are gradients and walls confine")
{
    const SlabGeometry g{6, 6, 3, 3};
    ParticleSystem s = random_system(30, g, 11, 0.3);
    const LJParams lj{1.0, 0.9};
    const WallParams w{1.0, 0.5};
    const NeighborList list = build_neighbor_list(s, g, 1.5, 0.0);
    const ShortRangeResult r = lj_and_wall_energy_force(s, g, lj, w, list);
    const Positions f = fd(s, [&](const ParticleSystem& x) { return lj_and_wall_energy_force(x, g, lj, w, list).energy; });
    CHECK((r.forces - f).cwiseAbs().maxCoeff() < 1e-5 * std::max(1.0, f.cwiseAbs().maxCoeff()));

    ParticleSystem one = random_system(2, g, 12);
    one.positions(2, 0) = 0.2;
    const NeighborList l1 = build_neighbor_list(one, g, 1.5, 0.0);
    CHECK(lj_and_wall_energy_force(one, g, lj, w, l1).forces(2, 0) > 0);
    one.positions(2, 0) = -0.1;
    CHECK_THROWS_AS(lj_and_wall_energy_force(one, g, lj, w, l1), EscapeError);
}
