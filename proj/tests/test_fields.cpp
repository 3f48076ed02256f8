#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "lfe/dynamics.hpp"
#include "lfe/fields.hpp"

using namespace lfe;

namespace {

std::shared_ptr<SurfacePatchwork> make_plane() {
    auto s = std::make_shared<SurfacePatchwork>();
    s->add_chart(std::make_unique<PlaneChart>());
    return s;
}

// omega = B x dy on the flat chart (t, x, y): F = B dx ^ dy
EMPotential uniform_potential(double B) {
    return EMPotential(
        [B](const Event& e) {
            Vec w = Vec::Zero(3);
            w[2] = B * e.coords[1];
            return w;
        },
        [B](const Event&) {
            Mat d = Mat::Zero(3, 3);
            d(1, 2) = B;
            return d;
        });
}

std::shared_ptr<SurfacePatchwork> make_sphere(double r) {
    auto s = std::make_shared<SurfacePatchwork>();
    s->add_chart(std::make_unique<StereoChart>(
        "north", Vec3::Zero(), r, Vec3::UnitZ(), Vec3::UnitX(), Vec3::UnitY(),
        0.62 * kPi, 0.80 * kPi));
    s->add_chart(std::make_unique<StereoChart>(
        "south", Vec3::Zero(), r, -Vec3::UnitZ(), Vec3::UnitY(), Vec3::UnitX(),
        0.62 * kPi, 0.80 * kPi));
    return s;
}

// F = B * (volume form of the sphere factor), defined per chart from det(g_S).
EMField sphere_field(std::shared_ptr<SurfacePatchwork> surf, double B) {
    return EMField::direct([surf, B](const Event& e) {
        const Mat2 gs = surf->induced_metric(e.chart, e.spatial());
        const double vol = std::sqrt(gs.determinant());
        Mat F = Mat::Zero(3, 3);
        F(1, 2) = B * vol;
        F(2, 1) = -B * vol;
        return F;
    });
}

SurfaceMesh octahedron_mesh(const SurfacePatchwork& s, double r) {
    // vertices of an octahedron pushed onto the sphere, outward orientation
    std::vector<Vec3> pts = {{r, 0, 0},  {-r, 0, 0}, {0, r, 0},
                             {0, -r, 0}, {0, 0, r},  {0, 0, -r}};
    SurfaceMesh mesh;
    for (auto& p : pts) {
        const int chart = s.pick_chart(p);
        mesh.verts.push_back({chart, *s.chart(chart).from_r3(p, nullptr)});
    }
    mesh.tris = {{4, 0, 2}, {4, 2, 1}, {4, 1, 3}, {4, 3, 0},
                 {5, 2, 0}, {5, 1, 2}, {5, 3, 1}, {5, 0, 3}};
    return mesh;
}

}  // namespace

TEST_CASE("potential evaluation: linearity and the uniform-field example") {
    EMPotential w = uniform_potential(2.0);
    Event x = Event::product(0, 0.0, Vec2(0.5, -1.0));
    TangentVector v;
    v.base = x;
    v.components = Vec(3);
    v.components << 0.0, 0.0, 1.0;
    CHECK(potential_eval(w, x, v) == Catch::Approx(1.0));  // B x = 1.0

    v.components << 0.3, -0.2, 0.0;
    CHECK(potential_eval(w, x, v) == Catch::Approx(0.0).margin(1e-15));

    v.components.setZero();
    CHECK(potential_eval(w, x, v) == 0.0);

    // linearity under random combinations
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-2, 2);
    for (int i = 0; i < 100; ++i) {
        Vec a(3), b(3);
        a << u(rng), u(rng), u(rng);
        b << u(rng), u(rng), u(rng);
        const double s = u(rng), t = u(rng);
        CHECK(w.eval(x, s * a + t * b) ==
              Catch::Approx(s * w.eval(x, a) + t * w.eval(x, b)).margin(1e-12));
    }
}

TEST_CASE("field components: antisymmetry and exact derivative of omega") {
    auto w = std::make_shared<EMPotential>(uniform_potential(3.0));
    EMField F = EMField::exact(w);
    Event x = Event::product(0, 0.2, Vec2(1.1, 0.4));
    Mat f = F.components(x);
    CHECK(f(1, 2) == Catch::Approx(3.0));
    CHECK(f(2, 1) == Catch::Approx(-3.0));
    CHECK((f + f.transpose()).norm() < 1e-14);
    Vec u(3);
    u << 0.3, 1.0, -0.5;
    CHECK(F.eval(x, u, u) == Catch::Approx(0.0).margin(1e-13));

    // finite-difference exterior derivative agrees with the analytic one
    EMPotential w_fd(
        [](const Event& e) {
            Vec c = Vec::Zero(3);
            c[2] = 3.0 * e.coords[1];
            return c;
        },
        nullptr, 1e-5);
    EMField F_fd = EMField::exact(std::make_shared<EMPotential>(w_fd));
    CHECK((F_fd.components(x) - f).norm() < 100 * 1e-10);
}

TEST_CASE("sphere volume-form field at the equator") {
    auto surf = make_sphere(1.0);
    EMField F = sphere_field(surf, 1.0);
    // equator point in the north chart: w = 2r along x
    Event x = Event::product(0, 0.0, Vec2(2.0, 0.0));
    // conformal factor at the equator is 1/2: vol = lambda^2 = 1/4
    Vec u = Vec::Zero(3), v = Vec::Zero(3);
    u[1] = 1.0;
    v[2] = 1.0;
    CHECK(F.eval(x, u, v) == Catch::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("raise_field: Minkowski closed form and the defining identity") {
    auto surf = make_plane();
    MetricField m = MetricField::product(surf);
    auto w = std::make_shared<EMPotential>(uniform_potential(2.5));
    EMField F = EMField::exact(w);
    Event x = Event::product(0, 0.0, Vec2(0.4, 0.8));
    Mat fh = raise_field(m, F, x);
    // diag(1,-1,-1) metric: Fhat^x_y = -B, Fhat^y_x = +B, t row/col zero
    CHECK(fh(1, 2) == Catch::Approx(-2.5));
    CHECK(fh(2, 1) == Catch::Approx(2.5));
    CHECK(fh.row(0).norm() < 1e-14);
    CHECK(fh.col(0).norm() < 1e-14);
    CHECK(std::abs(fh.trace()) < 1e-14);

    // identity g(v, Fhat w) = F(v, w) and skewness on random data
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> ud(-1, 1);
    Mat g = m.metric_eval(x);
    for (int i = 0; i < 1000; ++i) {
        Vec a(3), b(3);
        a << ud(rng), ud(rng), ud(rng);
        b << ud(rng), ud(rng), ud(rng);
        CHECK(std::abs(a.dot(g * (fh * b)) - F.eval(x, a, b)) < 1e-10);
        CHECK(std::abs(a.dot(g * (fh * a))) < 1e-10);
    }
}

TEST_CASE("raise_field identity on the curved sphere scenario") {
    auto surf = make_sphere(1.0);
    MetricField m = MetricField::product(surf);
    EMField F = sphere_field(surf, 0.7);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> ud(-1.5, 1.5);
    for (int i = 0; i < 200; ++i) {
        Event x = Event::product(0, 0.0, Vec2(ud(rng), ud(rng)));
        Mat g = m.metric_eval(x);
        Mat fh = raise_field(m, F, x);
        Vec a(3), b(3);
        a << ud(rng), ud(rng), ud(rng);
        b << ud(rng), ud(rng), ud(rng);
        CHECK(std::abs(a.dot(g * (fh * b)) - F.eval(x, a, b)) < 1e-10);
        CHECK(std::abs(a.dot(g * (fh * a))) < 1e-10);
    }
}

TEST_CASE("flux integral: full sphere captures 4 pi r^2 B") {
    const double r = 1.0, B = 1.0;
    auto surf = make_sphere(r);
    EMField F = sphere_field(surf, B);
    SurfaceMesh mesh = octahedron_mesh(*surf, r);
    const double flux = flux_integral(F, *surf, mesh);
    CHECK(flux == Catch::Approx(4 * kPi * r * r * B).epsilon(1e-3));
}

TEST_CASE("flux integral: zero field and exact field over a folded closed mesh") {
    auto surf = make_plane();
    EMField zero = EMField::direct([](const Event&) { return Mat::Zero(3, 3); });

    // octahedron combinatorics with all six vertices folded into one chart:
    // a null-homologous 2-cycle, so any exact form integrates to zero
    SurfaceMesh mesh;
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-0.4, 0.4);
    for (int i = 0; i < 6; ++i) mesh.verts.push_back({0, Vec2(u(rng), u(rng))});
    mesh.tris = {{4, 0, 2}, {4, 2, 1}, {4, 1, 3}, {4, 3, 0},
                 {5, 2, 0}, {5, 1, 2}, {5, 3, 1}, {5, 0, 3}};
    CHECK(std::abs(flux_integral(zero, *surf, mesh)) == 0.0);

    auto w = std::make_shared<EMPotential>(uniform_potential(2.0));
    EMField F = EMField::exact(w);
    CHECK(std::abs(flux_integral(F, *surf, mesh)) < 1e-6);

    // open mesh rejected
    SurfaceMesh open_mesh = mesh;
    open_mesh.tris.pop_back();
    CHECK_THROWS_AS(flux_integral(zero, *surf, open_mesh), OpenMesh);
}

TEST_CASE("raise_field rejects a singular metric") {
    MetricField sing = MetricField::from_function(3, [](const Event&) {
        Mat g = Mat::Zero(3, 3);
        g(0, 0) = 1;
        g(2, 2) = -1;  // degenerate middle direction
        return g;
    });
    EMField F = EMField::direct([](const Event&) {
        Mat f = Mat::Zero(3, 3);
        f(1, 2) = 1;
        f(2, 1) = -1;
        return f;
    });
    Event x = Event::product(0, 0, Vec2(0, 0));
    CHECK_THROWS_AS(raise_field(sing, F, x), SingularMetric);
}
