#include "rbe2d/analysis.hpp"

#include <doctest.h>

#include <random>

using namespace rbe2d;

namespace {

Frames ballistic(int n_frames, const Vec3& v, double dt)
{
    Frames f;
    for (int t = 0; t < n_frames; ++t) {
        TrajectoryFrame fr;
        fr.step = t;
        fr.time = t * dt;
        fr.positions = Positions(3, 2);
        fr.positions.col(0) = v * (t * dt);
        fr.positions.col(1) = Vec3(1, 1, 1) + v * (t * dt);
        fr.velocities = Positions(3, 2);
        fr.velocities.colwise() = v;
        f.push_back(fr);
    }
    return f;
}

std::vector<double> normals(int n, double mean, std::uint64_t seed)
{
    std::mt19937_64 eng(seed);
    std::normal_distribution<double> d(mean, 1.0);
    std::vector<double> x(n);
    for (auto& v : x)
        v = d(eng);
    return x;
}

}  // namespace

TEST_CASE("histogram binning")
{
    Histogram1D h(0.0, 2.0, 4);
    h.add(0.1);
    h.add(2.0);
    h.add(2.5);
    h.add(-0.1);
    CHECK(h.counts(0) == 1);
    CHECK(h.counts(3) == 1);
    CHECK(h.counts.sum() == 2);
    CHECK(h.probability().counts.sum() == doctest::Approx(1.0));
    CHECK(h.center(1) == doctest::Approx(0.75));
    CHECK_THROWS_AS(Histogram1D(1.0, 1.0, 3), ValidationError);
}

TEST_CASE("concentration profile")
{
    const SlabGeometry g{2, 2, 4, 4};
    Frames f(3);
    Eigen::VectorXi sp(4);
    sp << 0, 0, 1, 1;
    for (auto& fr : f) {
        fr.positions = Positions::Constant(3, 4, 1.0);
        fr.positions.row(2).setConstant(2.0);
    }
    const Histogram1D h = concentration_profile(f, sp, 0, g, 8);
    CHECK(h.counts(4) == doctest::Approx(2.0 / (4.0 * 0.5)));
    CHECK(h.counts.sum() == doctest::Approx(h.counts(4)));
    CHECK(concentration_profile(f, sp, 7, g, 8).counts.sum() == 0.0);

    Frames gas(40);
    RngHandle rng(1, 0);
    Eigen::VectorXi all = Eigen::VectorXi::Zero(2000);
    for (auto& fr : gas) {
        fr.positions = Positions(3, 2000);
        for (int i = 0; i < 2000; ++i)
            fr.positions.col(i) << rng.uniform() * 2, rng.uniform() * 2, rng.uniform() * 4;
    }
    const Histogram1D flat = concentration_profile(gas, all, 0, g, 10, 8);
    const double rho = 2000.0 / 16.0;
    for (int b = 0; b < 10; ++b)
        CHECK(std::abs(flat.counts(b) - rho) < 4 * flat.errors(b) + 1e-12);
}

TEST_CASE("mean squared displacement")
{
    const Vec3 v(0.3, -0.2, 0.1);
    const Series m = msd(ballistic(10, v, 0.5), Axis::All);
    REQUIRE(m.size() == 10);
    for (const auto& [lag, val] : m)
        CHECK(val == doctest::Approx(v.squaredNorm() * lag * lag));
    const Series mz = msd(ballistic(10, v, 0.5), Axis::Z);
    CHECK(mz[4].second == doctest::Approx(0.01 * 4.0));
    CHECK(msd(ballistic(1, v, 0.5), Axis::X).empty());
    CHECK(msd(ballistic(5, Vec3::Zero(), 0.5), Axis::All)[3].second == 0.0);
}

TEST_CASE("velocity autocorrelation")
{
    const Series c = vacf(ballistic(6, Vec3(1, 2, 3), 0.1));
    for (const auto& [lag, val] : c)
        CHECK(val == doctest::Approx(1.0));
}

TEST_CASE("relabeling particles leaves MSD unchanged")
{
    Frames f = ballistic(6, Vec3(0.1, 0.2, 0.3), 1.0);
    Frames g = f;
    for (auto& fr : g) {
        fr.positions.col(0).swap(fr.positions.col(1));
        fr.velocities.col(0).swap(fr.velocities.col(1));
    }
    const Series a = msd(f, Axis::All), b = msd(g, Axis::All);
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(a[i].second == doctest::Approx(b[i].second));
}

TEST_CASE("Wasserstein-2 distance")
{
    const auto a = normals(1000, 0.0, 1);
    CHECK(w2_distance(a, a) == 0.0);
    CHECK(w2_distance({2.0}, {5.0}) == doctest::Approx(3.0));
    CHECK(w2_distance({2.0, 2.0}, {5.0}) == doctest::Approx(3.0));
    CHECK_THROWS_AS(w2_distance({}, {1.0}), ValidationError);

    const auto x = normals(100000, 0.0, 2), y = normals(100000, 0.7, 3);
    CHECK(w2_distance(x, y) == doctest::Approx(0.7).epsilon(0.02));

    const auto p = normals(300, 0.0, 4), q = normals(500, 1.0, 5), r = normals(400, -0.5, 6);
    CHECK(std::abs(w2_distance(p, q) - w2_distance(q, p)) < 1e-12);
    CHECK(w2_distance(p, r) <= w2_distance(p, q) + w2_distance(q, r) + 1e-12);
}

TEST_CASE("strong scaling efficiency")
{
    ScalingRecord r{{1, 2, 4}, {8.0, 4.0, 2.0}, 1, 8.0};
    for (const auto& [n, eta] : strong_scaling(r))
        CHECK(eta == doctest::Approx(1.0));
    ScalingRecord bad{{1, 2}, {1.0, 1.0}, 1, 0.0};
    CHECK_THROWS_AS(strong_scaling(bad), ValidationError);
}

TEST_CASE("linear fit and block averages")
{
    const LinearFit f = linear_fit({1, 2, 3, 4}, {3, 5, 7, 9});
    CHECK(f.slope == doctest::Approx(2.0));
    CHECK(f.intercept == doctest::Approx(1.0));
    CHECK(f.r2 == doctest::Approx(1.0));
    const BlockEstimate b = block_average({1, 1, 3, 3}, 2);
    CHECK(b.mean == doctest::Approx(2.0));
    CHECK(b.stderr_ == doctest::Approx(1.0));
}

TEST_CASE("chi-square survival function")
{
    CHECK(chi2_survival(0.0, 3) == doctest::Approx(1.0));
    CHECK(chi2_survival(3.841458820694124, 1) == doctest::Approx(0.05).epsilon(1e-9));
}
