#pragma once

#include <map>
#include <random>

#include "lfe/connect.hpp"

namespace lfe {

struct ReferenceValue {
    double value;
    std::string provenance;  // "paper", "derived", "trivial"
};

// One catalog entry: geometry, field, marked events and quoted reference
// values. Reference values are reproduced by the generic pipeline, never fed
// into solver logic.
struct ScenarioSpec {
    std::string name;
    std::shared_ptr<const SurfacePatchwork> surface;
    std::shared_ptr<const MetricField> metric;
    std::shared_ptr<const EMPotential> potential;  // null in the non-exact case
    std::shared_ptr<const EMField> field;
    Event x0, x1;
    ChargeRatio default_ratio{1.0};
    std::map<std::string, double> params;
    std::map<std::string, ReferenceValue> reference_values;
    AngularStructure angular;

    ConnectionContext context() const {
        return {metric.get(), field.get(), potential, angular};
    }

    ConnectionProblem problem(ChargeRatio ratio, Method method,
                              SolverTolerances tol = {}) const {
        ConnectionProblem pb;
        pb.ctx = context();
        pb.x0 = x0;
        pb.x1 = x1;
        pb.ratio = ratio;
        pb.method = method;
        pb.tol = tol;
        return pb;
    }

    // The action functional is ill posed when F is non-exact.
    FunctionalValue action(ChargeRatio ratio, const Trajectory& traj) const {
        if (field && field->origin() == EMField::Origin::direct)
            throw NonExactField("action undefined: field has no global potential");
        return action_I(*metric, potential.get(), ratio, traj);
    }
};

// ---------------------------------------------------------------------------
// Shared chart builders.

namespace detail {
inline std::shared_ptr<SurfacePatchwork> plane_surface() {
    auto s = std::make_shared<SurfacePatchwork>();
    s->add_chart(std::make_unique<PlaneChart>());
    return s;
}

inline std::shared_ptr<SurfacePatchwork> sphere_surface(double r) {
    auto s = std::make_shared<SurfacePatchwork>();
    s->add_chart(std::make_unique<StereoChart>(
        "north", Vec3::Zero(), r, Vec3::UnitZ(), Vec3::UnitX(), Vec3::UnitY(),
        0.62 * kPi, 0.80 * kPi));
    s->add_chart(std::make_unique<StereoChart>(
        "south", Vec3::Zero(), r, -Vec3::UnitZ(), Vec3::UnitY(), Vec3::UnitX(),
        0.62 * kPi, 0.80 * kPi));
    auto profile = std::make_shared<SphereProfile>(r);
    s->add_chart(std::make_unique<RevolutionChart>(
        "polar", profile, 0.05 * r, (kPi - 0.05) * r, 0.1 * r, r, false));
    return s;
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Flat spacetime with a uniform magnetic field: the analytic-oracle scenario.
// omega = B x dy, F = B dx ^ dy; marked events are half a gyration of the
// reference particle (beta = 0.6, q/m = 1) apart.

struct LarmorOracle {
    double B = 1.0, ratio = 1.0, beta = 0.6, phi0 = 0.0;
    double gamma() const { return 1.0 / std::sqrt(1.0 - beta * beta); }
    double omega_s() const { return ratio * B; }  // rotation rate in proper time
    double radius() const { return gamma() * beta / std::abs(omega_s()); }
    double period_s() const { return 2 * kPi / std::abs(omega_s()); }

    WorldlineState state(double s) const {
        const double g = gamma(), om = omega_s();
        const double ph = phi0 + om * s;
        WorldlineState st;
        st.param = s;
        st.x.chart = 0;
        st.x.coords = Vec(3);
        st.x.coords << g * s,
            (g * beta / om) * (std::sin(ph) - std::sin(phi0)),
            (g * beta / om) * (std::cos(phi0) - std::cos(ph));
        st.v = Vec(3);
        st.v << g, g * beta * std::cos(ph), g * beta * std::sin(ph);
        return st;
    }
};

inline ScenarioSpec minkowski_uniform(double B = 1.0) {
    ScenarioSpec sc;
    sc.name = "minkowski_uniform";
    sc.surface = detail::plane_surface();
    sc.metric = std::make_shared<MetricField>(MetricField::product(sc.surface));
    sc.potential = std::make_shared<EMPotential>(
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
    sc.field = std::make_shared<EMField>(EMField::exact(sc.potential));
    sc.params = {{"B", B}};
    sc.default_ratio = {1.0};

    sc.x0 = Event::product(0, 0.0, Vec2(0.0, 0.0));
    if (std::abs(B) > 1e-12) {
        LarmorOracle oracle{B, 1.0, 0.6, 0.0};
        const WorldlineState half = oracle.state(oracle.period_s() / 2);
        sc.x1 = Event::product(0, half.x.coords[0],
                               Vec2(half.x.coords[1], half.x.coords[2]));
        sc.reference_values = {
            {"larmor_radius", {oracle.radius(), "derived"}},
            {"reference_beta", {0.6, "derived"}},
        };
    } else {
        // field-free limit: same chronological displacement as the B = 1 case
        const double gamma = 1.25;
        sc.x1 = Event::product(0, kPi * gamma, Vec2(0.0, 1.5));
    }
    return sc;
}

// ---------------------------------------------------------------------------
// The ribbon example: semicylinder of radius r capped by a hemisphere, field
// supported on the ribbon -2 pi r < z < -pi r, marked events on the circle
// z = -3 pi r one period 2 pi r apart in t.

inline ScenarioSpec ribbon_scenario(double r = 1.0, double B = 1.0) {
    ScenarioSpec sc;
    sc.name = "ribbon";
    const double band = 0.1 * r;
    auto surf = std::make_shared<SurfacePatchwork>();
    auto profile = std::make_shared<CylinderToCapProfile>(r, band);
    const int rev = surf->add_chart(std::make_unique<RevolutionChart>(
        "rev", profile, -6 * kPi * r, (kPi / 2 - 0.25) * r, 0.05 * r, r));
    surf->add_chart(std::make_unique<StereoChart>(
        "cap", Vec3::Zero(), r, Vec3::UnitZ(), Vec3::UnitX(), Vec3::UnitY(),
        kPi / 2 - 0.45, kPi / 2 - 0.15));
    sc.surface = surf;
    sc.metric = std::make_shared<MetricField>(MetricField::product(sc.surface));

    // mu: smooth monotone decreasing, mu(-2 pi r) = 1, mu(-pi r) = 0
    auto mu = [r](double z) {
        return 1.0 - blend_profile(z, -1.5 * kPi * r, 0.5 * kPi * r).s;
    };
    auto dmu = [r](double z) {
        return -blend_profile(z, -1.5 * kPi * r, 0.5 * kPi * r).ds;
    };
    // omega = B r mu(z) d theta on the revolution chart; z >= 0 has mu = 0, so
    // the form extends by zero over the cap chart
    sc.potential = std::make_shared<EMPotential>(
        [B, r, mu, profile, rev](const Event& e) {
            Vec w = Vec::Zero(3);
            if (e.chart == rev) w[2] = B * r * mu(profile->at(e.coords[1]).h);
            return w;
        },
        [B, r, mu, dmu, profile, rev](const Event& e) {
            Mat d = Mat::Zero(3, 3);
            if (e.chart == rev) {
                const ProfilePoint p = profile->at(e.coords[1]);
                d(1, 2) = B * r * dmu(p.h) * p.dh;
            }
            return d;
        });
    sc.field = std::make_shared<EMField>(EMField::exact(sc.potential));

    sc.x0 = Event::product(rev, 0.0, Vec2(-3 * kPi * r, 0.0));
    sc.x1 = Event::product(rev, 2 * kPi * r, Vec2(-3 * kPi * r, 0.0));
    sc.default_ratio = {2.0 / B};  // |q/m * B| > 1 regime by default
    sc.params = {{"r", r}, {"B", B}, {"band_half_width", band}};
    sc.reference_values = {
        {"em_term_per_ratio", {2 * kPi * B * r, "paper"}},
        {"timelike_action_sup", {2 * kPi * r, "paper"}},
        {"class_count", {3, "paper"}},
    };
    sc.angular = {true, 0.3 * r};
    return sc;
}

// True when the scenario sits in the regime where the lightlike geodesics
// carry the absolute action extrema.
inline bool ribbon_critical_regime(const ScenarioSpec& sc, ChargeRatio ratio) {
    return std::abs(ratio.value * sc.params.at("B")) > 1.0;
}

// ---------------------------------------------------------------------------
// The cap-cylinder example: spherical cap of radius r glued (at polar angle
// 5 pi / 6) to the inscribed cylinder of radius r/2. Field F = script-B times
// the volume form, script-B = B on the cap above the equator, tapering to 0
// just below it. Marked events at q = (r, 0, 0), one equator period apart.

inline ScenarioSpec cap_cylinder_scenario(double r = 1.0, double B = 2.0,
                                          ChargeRatio ratio = {1.0}) {
    ScenarioSpec sc;
    sc.name = "cap_cylinder";
    const double eps_theta = kPi / 12;  // embedding blend half-width (angle)
    const double eps_field = kPi / 12;  // field taper width below the equator
    const double Bs = (ratio.value < 0 ? -1.0 : 1.0) * std::abs(B);

    auto surf = std::make_shared<SurfacePatchwork>();
    auto profile = std::make_shared<CapToCylinderProfile>(r, eps_theta * r);
    const int pole = surf->add_chart(std::make_unique<StereoChart>(
        "pole", Vec3::Zero(), r, Vec3::UnitZ(), Vec3::UnitX(), Vec3::UnitY(),
        0.62 * kPi, 0.72 * kPi));
    const int rev = surf->add_chart(std::make_unique<RevolutionChart>(
        "rev", profile, 0.25 * r, (5.0 / 6.0 * kPi + eps_theta) * r + 6 * r,
        0.05 * r, r));
    sc.surface = surf;
    sc.metric = std::make_shared<MetricField>(MetricField::product(sc.surface));

    // omega = j(psi) d phi with j' = script-B * r sin(psi): j = B r^2 (1-cos)
    // on the cap, blended to a constant below the equator so script-B tapers
    // monotonically to zero
    const double zeta_taper0 = (kPi / 2) * r, zeta_taper1 = (kPi / 2 + eps_field) * r;
    auto j_cap = [Bs, r](double zeta) {
        return Bs * r * r * (1.0 - std::cos(zeta / r));
    };
    auto dj_cap = [Bs, r](double zeta) { return Bs * r * std::sin(zeta / r); };
    const double Jinf = j_cap(zeta_taper1);
    auto j_of_zeta = [=](double zeta, double* dj) {
        if (zeta <= zeta_taper0) {
            if (dj) *dj = dj_cap(zeta);
            return j_cap(zeta);
        }
        if (zeta >= zeta_taper1) {
            if (dj) *dj = 0.0;
            return Jinf;
        }
        const BlendValue s = blend_profile(zeta, 0.5 * (zeta_taper0 + zeta_taper1),
                                           0.5 * (zeta_taper1 - zeta_taper0));
        if (dj) *dj = (1 - s.s) * dj_cap(zeta) + s.ds * (Jinf - j_cap(zeta));
        return (1 - s.s) * j_cap(zeta) + s.s * Jinf;
    };

    sc.potential = std::make_shared<EMPotential>(
        [=](const Event& e) {
            Vec w = Vec::Zero(3);
            if (e.chart == rev) {
                w[2] = j_of_zeta(e.coords[1], nullptr);
            } else if (e.chart == pole) {
                // j(psi) d phi in stereographic coordinates:
                // (j / w^2) (-v du + u dv), smooth at the pole
                const double u = e.coords[1], v = e.coords[2];
                const double w2 = u * u + v * v;
                const double psi = 2 * std::atan(std::sqrt(w2) / (2 * r));
                const double jj = j_of_zeta(psi * r, nullptr);
                // near the pole j ~ Bs * w^2 / 2 (quadratic), the ratio is finite
                const double f = w2 > 1e-30 ? jj / w2 : Bs / 2.0;
                w[1] = -f * v;
                w[2] = f * u;
            }
            return w;
        },
        nullptr, 1e-6);
    sc.field = std::make_shared<EMField>(EMField::exact(sc.potential));

    // q = (r, 0, 0): equator point of the cap sphere, pole-chart coords (2r, 0)
    sc.x0 = Event::product(pole, 0.0, Vec2(2 * r, 0.0));
    sc.x1 = Event::product(pole, 2 * kPi * r, Vec2(2 * r, 0.0));
    sc.default_ratio = ratio;
    sc.params = {{"r", r}, {"B", Bs}, {"eps_theta", eps_theta}};
    const double qmB = ratio.value * Bs;
    sc.reference_values = {
        {"action_sigma0", {2 * kPi * r * r * qmB, "paper"}},
        {"static_action", {2 * kPi * r, "trivial"}},
        {"cap_area_alpha0", {2 * kPi * r * r, "paper"}},
    };
    sc.angular = {true, 0.2 * r};
    return sc;
}

// Closed form of the paper's circle-family action: I(alpha) =
// 2 pi r^2 (q/m) B + 2 pi r (1 - (q/m) B r) sin(alpha).
inline double cap_cylinder_action_formula(double r, double qmB, double alpha) {
    return 2 * kPi * r * r * qmB + 2 * kPi * r * (1 - qmB * r) * std::sin(alpha);
}

// Constant-speed circle worldline c_alpha on the cap: the plane through q
// containing the y axis, tilted by alpha, intersected with the sphere; the
// worldline runs one full period (t from 0 to 2 pi r), counterclockwise.
inline Trajectory cap_cylinder_calpha(const ScenarioSpec& sc, double alpha,
                                      int n_samples = 65) {
    const double r = sc.params.at("r");
    const int pole = sc.surface->find_chart("pole");
    std::shared_ptr<const SurfacePatchwork> surf = sc.surface;
    const Vec3 n(std::sin(alpha), 0, std::cos(alpha));
    const Vec3 e1(std::cos(alpha), 0, -std::sin(alpha));
    const Vec3 e2(0, 1, 0);
    const Vec3 center = r * std::sin(alpha) * n;
    const double rc = r * std::cos(alpha);

    auto p3 = [=](double lam) -> Vec3 {
        const double u = 2 * kPi * lam;
        return center + rc * (std::cos(u) * e1 + std::sin(u) * e2);
    };
    auto dp3 = [=](double lam) -> Vec3 {
        const double u = 2 * kPi * lam;
        return 2 * kPi * rc * (-std::sin(u) * e1 + std::cos(u) * e2);
    };
    auto pos = [=](double lam) {
        return Event::product(pole, 2 * kPi * r * lam,
                              *surf->chart(pole).from_r3(p3(lam), nullptr));
    };
    auto vel = [=](double lam) {
        const Vec2 q = *surf->chart(pole).from_r3(p3(lam), nullptr);
        const Mat32 J = surf->chart(pole).embed(q).J;
        const Mat2 gram = J.transpose() * J;
        const Vec2 cdot = gram.ldlt().solve(J.transpose() * dp3(lam));
        Vec v(3);
        v << 2 * kPi * r, cdot[0], cdot[1];
        return v;
    };
    return make_trajectory(*sc.metric, std::make_shared<AnalyticCurve>(pos, vel, 0, 1),
                           n_samples, ParamKind::affine);
}

// The equatorial lightlike geodesic sigma_0 (the alpha -> 0 circle).
inline Trajectory cap_cylinder_sigma0(const ScenarioSpec& sc, int n_samples = 65) {
    return cap_cylinder_calpha(sc, 0.0, n_samples);
}

// ---------------------------------------------------------------------------
// Non-exact example: R x S^2 with F = B * (pullback of the volume form).
// Marked events are an antipodal pair at t1 = 1.2 pi r, which no LFE solution
// connects for any q/m.

inline ScenarioSpec sphere_scenario(double r = 1.0, double B = 1.0) {
    ScenarioSpec sc;
    sc.name = "sphere";
    sc.surface = detail::sphere_surface(r);
    sc.metric = std::make_shared<MetricField>(MetricField::product(sc.surface));
    auto surf = sc.surface;
    sc.potential = nullptr;
    sc.field = std::make_shared<EMField>(
        EMField::direct([surf, B](const Event& e) {
            const Mat2 gs = surf->induced_metric(e.chart, e.spatial());
            const double vol = std::sqrt(gs.determinant());
            Mat F = Mat::Zero(3, 3);
            F(1, 2) = B * vol;
            F(2, 1) = -B * vol;
            return F;
        }));

    // p = (r,0,0) and its antipode, both on the equator (w = 2r in both charts)
    const int north = surf->find_chart("north");
    sc.x0 = Event::product(north, 0.0, Vec2(2 * r, 0.0));
    sc.x1 = Event::product(north, 1.2 * kPi * r, Vec2(-2 * r, 0.0));
    sc.default_ratio = {1.0};
    sc.params = {{"r", r}, {"B", B}};
    sc.reference_values = {
        {"flux_total", {4 * kPi * r * r * B, "derived"}},
        {"rotation_coeff", {std::abs(B), "paper"}},  // |omega| = |q/m B| sqrt(1-v^2)
        {"geodesic_antipodal_time", {kPi * r, "trivial"}},
    };
    sc.angular = {true, 0.3 * r};
    return sc;
}

// Octahedron-based closed mesh over the sphere scenario's surface.
inline SurfaceMesh sphere_mesh(const ScenarioSpec& sc) {
    const double r = sc.params.at("r");
    const SurfacePatchwork& s = *sc.surface;
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

// ---------------------------------------------------------------------------
// Probe families and chronology witnesses.

// Random connecting causal curve in the ribbon scenario with a prescribed
// winding. The winding +-1 classes contain only lightlike pregeodesics, so
// those draws are random monotone reparametrizations of the null circles;
// winding 0 draws are Fourier-perturbed timelike curves.
inline Trajectory ribbon_random_causal_curve(const ScenarioSpec& sc, uint64_t seed,
                                             int winding, int n_samples = 65) {
    const double r = sc.params.at("r");
    const int rev = sc.surface->find_chart("rev");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);

    if (winding != 0) {
        // monotone map m(lam) = lam + sum c_k sin(k pi lam), |m'| > 0
        const double c1 = 0.2 * u(rng), c2 = 0.1 * u(rng);
        auto m = [=](double lam) {
            return lam + c1 * std::sin(kPi * lam) + c2 * std::sin(2 * kPi * lam);
        };
        auto dm = [=](double lam) {
            return 1 + c1 * kPi * std::cos(kPi * lam) +
                   c2 * 2 * kPi * std::cos(2 * kPi * lam);
        };
        const double T = 2 * kPi * r;
        auto pos = [=](double lam) {
            return Event::product(rev, T * m(lam),
                                  Vec2(-3 * kPi * r, 2 * kPi * winding * m(lam)));
        };
        auto vel = [=](double lam) {
            Vec v(3);
            v << T * dm(lam), 0, 2 * kPi * winding * dm(lam);
            return v;
        };
        return make_trajectory(*sc.metric,
                               std::make_shared<AnalyticCurve>(pos, vel, 0, 1),
                               n_samples, ParamKind::affine);
    }
    const int modes = 3;
    std::vector<double> az(modes), bth(modes);
    for (int k = 0; k < modes; ++k) {
        az[k] = u(rng) * r;
        bth[k] = u(rng);
    }
    const double T = 2 * kPi * r, z0 = -3 * kPi * r;

    auto path = [=](double lam, double* dz, double* dth) {
        double z = z0, th = 2 * kPi * winding * lam;
        double dzv = 0, dthv = 2 * kPi * winding;
        for (int k = 0; k < modes; ++k) {
            z += az[k] * std::sin((k + 1) * kPi * lam);
            dzv += az[k] * (k + 1) * kPi * std::cos((k + 1) * kPi * lam);
            th += bth[k] * std::sin((k + 1) * kPi * lam);
            dthv += bth[k] * (k + 1) * kPi * std::cos((k + 1) * kPi * lam);
        }
        if (dz) *dz = dzv;
        if (dth) *dth = dthv;
        return std::pair<double, double>(z, th);
    };
    // causality: rescale the perturbation until the dl-speed stays below dt/dl
    double scale = 1.0;
    for (int guard = 0; guard < 60; ++guard) {
        double worst = 0;
        for (int i = 0; i <= 64; ++i) {
            const double lam = i / 64.0;
            double dz, dth;
            path(lam, &dz, &dth);
            const double speed =
                std::sqrt(sqr(scale * dz) +
                          sqr(r * (2 * kPi * winding +
                                   scale * (dth - 2 * kPi * winding))));
            worst = std::max(worst, speed / T);
        }
        if (worst < 0.98) break;
        scale *= 0.85;
    }
    const double sc_factor = scale;

    auto pos = [=](double lam) {
        double dz, dth;
        auto [z, th] = path(lam, &dz, &dth);
        const double zs = z0 + sc_factor * (z - z0);
        const double ths = 2 * kPi * winding * lam +
                           sc_factor * (th - 2 * kPi * winding * lam);
        return Event::product(rev, T * lam, Vec2(zs, ths));
    };
    auto vel = [=](double lam) {
        double dz, dth;
        path(lam, &dz, &dth);
        Vec v(3);
        v << T, sc_factor * dz,
            2 * kPi * winding + sc_factor * (dth - 2 * kPi * winding);
        return v;
    };
    return make_trajectory(*sc.metric, std::make_shared<AnalyticCurve>(pos, vel, 0, 1),
                           n_samples, ParamKind::affine);
}

// Explicit timelike connecting curve (coarse chronology witness); absent for
// the sphere scenario's antipodal pair, where the witness is the t > pi r
// great-circle bound.
inline std::optional<Trajectory> chronology_witness(const ScenarioSpec& sc) {
    if (sc.name == "sphere") return std::nullopt;
    const Event a = sc.x0, b = sc.x1;
    if (a.chart == b.chart && (a.spatial() - b.spatial()).norm() < 1e-12) {
        auto pos = [a, b](double lam) {
            return Event::product(a.chart, a.t() + (b.t() - a.t()) * lam,
                                  a.spatial());
        };
        auto vel = [a, b](double) {
            Vec v(3);
            v << b.t() - a.t(), 0, 0;
            return v;
        };
        return make_trajectory(*sc.metric,
                               std::make_shared<AnalyticCurve>(pos, vel, 0, 1), 9,
                               ParamKind::affine);
    }
    // straight chart-line interpolation (flat scenario)
    auto pos = [a, b](double lam) {
        Event e;
        e.chart = a.chart;
        e.coords = a.coords + (b.coords - a.coords) * lam;
        return e;
    };
    auto vel = [a, b](double) { return Vec(b.coords - a.coords); };
    return make_trajectory(*sc.metric, std::make_shared<AnalyticCurve>(pos, vel, 0, 1),
                           9, ParamKind::affine);
}

// ---------------------------------------------------------------------------
// Projection diagnostics (the sphere example's circle law).

struct ProjectionStats {
    double speed_mean = 0;      // |c'|_dl in coordinate time
    double speed_stdev = 0;
    double rotation_mean = 0;   // |D_t c'| / |c'|, the velocity rotation rate
};

inline ProjectionStats projection_stats(const MetricField& m, const Trajectory& traj) {
    std::vector<double> speeds, rates;
    for (size_t i = 1; i + 1 < traj.samples.size(); ++i) {
        const double lam = traj.samples[i].param;
        const WorldlineState st = traj.dense->state(lam);
        const Mat2 gs = m.surface()->induced_metric(st.x.chart, st.x.spatial());
        const Vec2 cdot = Vec2(st.v[1], st.v[2]) / st.v[0];  // per coordinate time
        const double speed = std::sqrt(cdot.dot(gs * cdot));
        speeds.push_back(speed);

        // spatial covariant acceleration per unit coordinate time
        const Vec D = traj.dense->coord_accel(lam) +
                      m.christoffel(st.x).contract(st.v, st.v);
        // d/dlam (v_sp / v_t) = (D_sp v_t - v_sp a_t)/v_t^2, then / v_t for d/dt;
        // for product metrics a_t = coord_accel[0] and Gamma^t = 0
        const double at = traj.dense->coord_accel(lam)[0];
        const Vec2 Dsp(D[1], D[2]);
        const Vec2 acc_t = (Dsp - cdot * at) / sqr(st.v[0]);
        rates.push_back(std::sqrt(acc_t.dot(gs * acc_t)) / speed);
    }
    ProjectionStats out;
    for (double s : speeds) out.speed_mean += s;
    out.speed_mean /= speeds.size();
    for (double s : speeds) out.speed_stdev += sqr(s - out.speed_mean);
    out.speed_stdev = std::sqrt(out.speed_stdev / speeds.size());
    for (double r : rates) out.rotation_mean += r;
    out.rotation_mean /= rates.size();
    return out;
}

// ---------------------------------------------------------------------------
// Catalog dispatch.

inline ScenarioSpec scenario_by_name(const std::string& name,
                                     const std::map<std::string, double>& params = {}) {
    auto get = [&params](const std::string& key, double fallback) {
        auto it = params.find(key);
        return it == params.end() ? fallback : it->second;
    };
    if (name == "minkowski_uniform") return minkowski_uniform(get("B", 1.0));
    if (name == "ribbon") return ribbon_scenario(get("r", 1.0), get("B", 1.0));
    if (name == "cap_cylinder")
        return cap_cylinder_scenario(get("r", 1.0), get("B", 2.0),
                                     {get("ratio", 1.0)});
    if (name == "sphere") return sphere_scenario(get("r", 1.0), get("B", 1.0));
    throw ConfigError("unknown scenario: " + name);
}

}  // namespace lfe
