#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "lfe/numerics.hpp"

using namespace lfe;

TEST_CASE("quintic smoothstep endpoints and symmetry") {
    CHECK(blend_profile(-2.0, 0.0, 1.0).s == 0.0);
    CHECK(blend_profile(2.0, 0.0, 1.0).s == 1.0);
    CHECK(blend_profile(0.0, 0.0, 1.0).s == Catch::Approx(0.5));
    // vanishing first and second derivatives at the band edges
    for (double edge : {-1.0, 1.0}) {
        const BlendValue b = blend_profile(edge, 0.0, 1.0);
        CHECK(b.ds == 0.0);
        CHECK(b.dds == 0.0);
    }
    // interior derivative consistency against finite differences
    const double h = 1e-6;
    for (double z : {-0.7, -0.2, 0.4, 0.9}) {
        const BlendValue b = blend_profile(z, 0.0, 1.0);
        const double fd =
            (blend_profile(z + h, 0, 1).s - blend_profile(z - h, 0, 1).s) / (2 * h);
        CHECK(b.ds == Catch::Approx(fd).margin(1e-8));
        const double fd2 =
            (blend_profile(z + h, 0, 1).ds - blend_profile(z - h, 0, 1).ds) / (2 * h);
        CHECK(b.dds == Catch::Approx(fd2).margin(1e-6));
    }
    // monotone inside the band
    double prev = -1;
    for (double z = -1.0; z <= 1.0; z += 0.01) {
        const double s = blend_profile(z, 0.0, 1.0).s;
        CHECK(s >= prev);
        prev = s;
    }
}

TEST_CASE("Gauss-Kronrod panel on known integrals") {
    auto sinq = gauss_kronrod_panel([](double x) { return std::sin(x); }, 0.0, kPi);
    CHECK(sinq.value == Catch::Approx(2.0).epsilon(1e-14));

    auto poly = gauss_kronrod_panel([](double x) { return 3 * x * x; }, -1.0, 2.0);
    CHECK(poly.value == Catch::Approx(9.0).epsilon(1e-14));
    CHECK(poly.error < 1e-12);
}

TEST_CASE("adaptive quadrature handles mild endpoint singularity") {
    auto q = integrate_adaptive([](double x) { return 1.0 / std::sqrt(x); }, 1e-12,
                                1.0, 1e-10, 1e-10);
    CHECK(q.value == Catch::Approx(2.0).epsilon(1e-5));
}

TEST_CASE("DOPRI5 integrates the harmonic oscillator to tolerance") {
    OdeOptions opt;
    opt.abs_tol = opt.rel_tol = 1e-12;
    OdeVec y0(2);
    y0 << 1.0, 0.0;
    auto rhs = [](double, const OdeVec& y) {
        OdeVec dy(2);
        dy << y[1], -y[0];
        return dy;
    };
    const double T = 20 * kPi;
    DenseOde sol = integrate_ode(rhs, y0, 0.0, T, opt);
    CHECK(sol.y_final[0] == Catch::Approx(1.0).margin(1e-8));
    CHECK(sol.y_final[1] == Catch::Approx(0.0).margin(1e-8));

    // dense output matches cos/sin between steps, derivative matches too
    for (double t : {0.37, 5.11, 13.7, 60.0}) {
        CHECK(sol.eval(t)[0] == Catch::Approx(std::cos(t)).margin(1e-8));
        CHECK(sol.eval(t)[1] == Catch::Approx(-std::sin(t)).margin(1e-8));
        CHECK(sol.deriv(t)[0] == Catch::Approx(-std::sin(t)).margin(1e-6));
        CHECK(sol.deriv(t)[1] == Catch::Approx(-std::cos(t)).margin(1e-6));
    }
}

TEST_CASE("DOPRI5 honors the stop predicate") {
    OdeOptions opt;
    OdeVec y0(1);
    y0 << 0.0;
    auto rhs = [](double, const OdeVec&) {
        OdeVec dy(1);
        dy << 1.0;
        return dy;
    };
    DenseOde sol = integrate_ode(
        rhs, y0, 0.0, 10.0, opt,
        [](double, const OdeVec& y) { return y[0] > 3.0; });
    CHECK(sol.t_end < 10.0);
    CHECK(sol.y_final[0] > 3.0);
    CHECK(sol.y_final[0] < 4.0);
}

TEST_CASE("DOPRI5 step underflow reported") {
    OdeOptions opt;
    opt.max_steps = 10;
    OdeVec y0(1);
    y0 << 1.0;
    auto rhs = [](double t, const OdeVec& y) {
        OdeVec dy(1);
        dy << y[0] / (1.0 - t);  // blows up at t=1
        return dy;
    };
    CHECK_THROWS_AS(integrate_ode(rhs, y0, 0.0, 1.0, opt), StepUnderflow);
}

TEST_CASE("root bracketing") {
    const double r = find_root([](double x) { return x * x - 2.0; }, 0.0, 2.0);
    CHECK(r == Catch::Approx(std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("parallel_for is deterministic by index") {
    std::vector<int> out(100, 0);
    parallel_for(100, [&](int i) { out[i] = i * i; });
    for (int i = 0; i < 100; ++i) CHECK(out[i] == i * i);
}
