#include "rbe2d/ewald2d.hpp"
#include "rbe2d/special_functions.hpp"

#include <doctest.h>

using namespace rbe2d;

namespace {

ParticleSystem sixteen()
{
    const double p[16][3] = {
        {0.94820448601972085, 2.1072196497166722, 1.7616691692259885},
        {4.9993566429560428, 4.2349537319876882, 0.36522269449289191},
        {2.9333044941091204, 2.9720798709828067, 0.49758908693782711},
        {4.1755026101232477, 0.78436803254453236, 0.9411954443734738},
        {1.3285609558736478, 4.6689925727579045, 1.8831438112242707},
        {0.56240618801342901, 3.231650995531635, 1.0834213268452739},
        {3.930125962683312, 0.64052324187720056, 0.20632726050628786},
        {2.5997105685011057, 4.6109528810489877, 1.003035896163355},
        {4.6813205606623791, 4.489786373795158, 0.9851038005288888},
        {3.2224347446570087, 1.7282650133856703, 0.22962469644598274},
        {0.97860184064090472, 4.4274188942746582, 0.87877359188105231},
        {2.5415856458186408, 1.3919746694897612, 1.0560912248613687},
        {3.3866893254805603, 3.4673950866357108, 0.75559077552621934},
        {3.911045811655196, 0.27293916844496668, 0.66792863919983658},
        {1.4317095132099737, 1.6093361957642993, 1.4996813423655218},
        {3.9577859407615761, 1.4752025305409027, 1.244592586937048},
    };
    ParticleSystem s(16);
    for (int i = 0; i < 16; ++i) {
        s.positions.col(i) << p[i][0], p[i][1], p[i][2];
        s.charges(i) = i % 2 == 0 ? 1.0 : -1.0;
    }
    return s;
}

}  // namespace

TEST_CASE("special functions")
{
    for (double x : {0.0, 0.5, 3.0, 9.9})
        CHECK(erfcx(x) == doctest::Approx(std::exp(x * x) * std::erfc(x)).epsilon(1e-13));
    CHECK(erfcx(30.0) == doctest::Approx(1.0 / (kSqrtPi * 30.0) * (1 - 1.0 / 1800.0 + 3.0 / 3240000.0)).epsilon(1e-8));
    CHECK(erfc_flushed(40.0) == 0.0);
    CHECK(std::isfinite(exp_erfc(800.0, 30.0)));
    CHECK(ewald2d_kernel(1.0, 0.0, 1.0) == doctest::Approx(2.0 * std::erfc(0.5)));
    CHECK(ewald2d_kernel(2.0, 0.3, 0.7) == doctest::Approx(ewald2d_kernel(2.0, -0.3, 0.7)));
}

TEST_CASE("real-space lattice sum of a pair")
{
    const SlabGeometry g{8, 8, 2, 2};
    ParticleSystem s(2);
    s.positions.col(0) << 2, 3, 1;
    s.positions.col(1) << 3, 3, 1;
    s.charges << 1, -1;
    Ewald2DParams p;
    p.alpha = 1.0;
    p.real_shells = 3;
    CHECK(energy_real_2d(s, g, p) == doctest::Approx(-0.15729920705028513).epsilon(1e-13));
}

TEST_CASE("reciprocal sum against quadrature of the integral form")
{
    const SlabGeometry g{6, 6, 3, 3};
    ParticleSystem s(2);
    s.positions.col(0) << 1, 1, 0.5;
    s.positions.col(1) << 2.5, 3, 2.5;
    s.charges << 1, -1;
    Ewald2DParams p;
    p.alpha = 0.8;
    p.h_max = 20;
    CHECK(energy_fourier_2d(s, g, p) == doctest::Approx(-0.27837450922106107).epsilon(1e-12));
}

TEST_CASE("sixteen charges against an extrapolated direct sum")
{
    const SlabGeometry g{5, 5, 2, 2};
    const ParticleSystem s = sixteen();
    for (double alpha : {0.8, 1.2, 1.6}) {
        const EnergyBreakdown e = total_energy_2d(s, g, converged_ewald2d_params(g, alpha));
        CHECK(e.coulomb() == doctest::Approx(-4.2972496184).epsilon(1e-9));
        CHECK(e.ibc == 0.0);
    }
}

TEST_CASE("splitting parameter does not change the total")
{
    const SlabGeometry g{5, 5, 2, 2};
    const ParticleSystem s = sixteen();
    const double a = total_energy_2d(s, g, converged_ewald2d_params(g, 0.9)).coulomb();
    const double b = total_energy_2d(s, g, converged_ewald2d_params(g, 1.7)).coulomb();
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
}

TEST_CASE("lateral translation invariance")
{
    const SlabGeometry g{5, 5, 2, 2};
    ParticleSystem s = sixteen();
    const auto p = converged_ewald2d_params(g, 1.2);
    const double u0 = total_energy_2d(s, g, p).coulomb();
    s.positions.row(0).array() += 1.37;
    s.positions.row(1).array() -= 0.41;
    CHECK(total_energy_2d(s, g, p).coulomb() == doctest::Approx(u0).epsilon(1e-12));
}

TEST_CASE("dielectric reference against explicit images")
{
    const SlabGeometry g{3.2, 3.2, 2.0, 2.0};
    ParticleSystem s(4);
    s.positions << 0.7, 2.3, 1.5, 2.8, 1.1, 0.4, 2.6, 2.9, 0.4, 1.6, 1.0, 0.3;
    s.charges << 1, -1, 2, -2;
    const auto d = DielectricSpec::from_contrasts(0.5, -0.3, 3);
    const EnergyBreakdown e = dielectric_reference_energy(s, g, d, converged_ewald2d_params(g, 1.3));
    CHECK(e.coulomb() == doctest::Approx(-4.51530748027).epsilon(1e-9));
}

TEST_CASE("homogeneous spec reduces the dielectric reference to the plain sum")
{
    const SlabGeometry g{5, 5, 2, 2};
    const ParticleSystem s = sixteen();
    const auto p = converged_ewald2d_params(g, 1.2);
    CHECK(dielectric_reference_energy(s, g, DielectricSpec::homogeneous(), p).coulomb() ==
          doctest::Approx(total_energy_2d(s, g, p).coulomb()).epsilon(1e-13));
}

TEST_CASE("coincident charges are reported")
{
    const SlabGeometry g{4, 4, 2, 2};
    ParticleSystem s(2);
    s.positions.col(0) << 1, 1, 1;
    s.positions.col(1) << 1, 1, 1;
    s.charges << 1, -1;
    CHECK_THROWS_AS(total_energy_2d(s, g, converged_ewald2d_params(g, 1.0)), SingularityError);
}

TEST_CASE("finite-difference forces of a neutral pair point inward")
{
    const SlabGeometry g{6, 6, 3, 3};
    ParticleSystem s(2);
    s.positions.col(0) << 2, 3, 1.5;
    s.positions.col(1) << 3, 3, 1.5;
    s.charges << 1, -1;
    const auto p = converged_ewald2d_params(g, 1.0);
    const Positions f =
        force_fd_oracle(s, g, [&](const ParticleSystem& x, const SlabGeometry& gg) { return total_energy_2d(x, gg, p).coulomb(); },
                        1e-5);
    CHECK(f(0, 0) > 0);
    CHECK(f(0, 1) < 0);
    CHECK(f(0, 0) == doctest::Approx(-f(0, 1)).epsilon(1e-8));
    CHECK(std::abs(f(2, 0)) < 1e-8);
}
