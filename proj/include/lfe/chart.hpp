#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <optional>
#include <string>

#include "lfe/numerics.hpp"

namespace lfe {

// Embedding data of a 2-chart at one point: position, Jacobian and the three
// second-derivative vectors of the map into Euclidean 3-space.
struct EmbedDerivs {
    Vec3 E;
    Mat32 J;          // columns: d/dq0, d/dq1
    Vec3 H00, H01, H11;
};

// One coordinate patch of an embedded surface. Charts own analytic embedding
// derivatives; induced metrics and Christoffels are exact, not differenced.
class SurfaceChart {
  public:
    virtual ~SurfaceChart() = default;

    virtual std::string name() const = 0;
    virtual bool in_domain(const Vec2& q) const = 0;
    // Normalized margin to the preferred region (positive inside); charts are
    // switched when this goes negative, well before in_domain fails.
    virtual double comfort(const Vec2& q) const = 0;
    virtual EmbedDerivs embed(const Vec2& q) const = 0;
    // Inverse of the embedding for points on the surface; nullopt when the
    // point is not representable. `hint` resolves branch choices (angles).
    virtual std::optional<Vec2> from_r3(const Vec3& p, const Vec2* hint) const = 0;
    // Diagnostic charts are excluded from automatic chart selection.
    virtual bool integration_enabled() const { return true; }

    int id = -1;  // assigned at registration
};

// ---------------------------------------------------------------------------
// Flat plane, chart coords (x, y).

class PlaneChart final : public SurfaceChart {
  public:
    explicit PlaneChart(double extent = 1e9) : extent_(extent) {}
    std::string name() const override { return "plane"; }
    bool in_domain(const Vec2& q) const override {
        return std::abs(q[0]) < extent_ && std::abs(q[1]) < extent_;
    }
    double comfort(const Vec2&) const override { return 1.0; }
    EmbedDerivs embed(const Vec2& q) const override {
        EmbedDerivs d;
        d.E = Vec3(q[0], q[1], 0.0);
        d.J.col(0) = Vec3::UnitX();
        d.J.col(1) = Vec3::UnitY();
        d.H00 = d.H01 = d.H11 = Vec3::Zero();
        return d;
    }
    std::optional<Vec2> from_r3(const Vec3& p, const Vec2*) const override {
        return Vec2(p[0], p[1]);
    }

  private:
    double extent_;
};

// ---------------------------------------------------------------------------
// Surfaces of revolution about the z-axis: profile curve zeta -> (rho, h),
// chart coords (zeta, theta). theta lives on the universal cover (plain real),
// which is what makes winding numbers a coordinate difference.

struct ProfilePoint {
    double rho, drho, ddrho;
    double h, dh, ddh;
};

class RevolutionProfile {
  public:
    virtual ~RevolutionProfile() = default;
    virtual ProfilePoint at(double zeta) const = 0;
};

// Two analytic pieces joined by a quintic blend over [center-eps, center+eps].
class BlendedProfile : public RevolutionProfile {
  public:
    ProfilePoint at(double zeta) const override {
        if (zeta <= center_ - eps_) return lower(zeta);
        if (zeta >= center_ + eps_) return upper(zeta);
        const ProfilePoint a = lower(zeta), b = upper(zeta);
        const BlendValue s = blend_profile(zeta, center_, eps_);
        ProfilePoint p;
        p.rho = mix(a.rho, b.rho, s, a.drho, b.drho, a.ddrho, b.ddrho, &p.drho, &p.ddrho);
        p.h = mix(a.h, b.h, s, a.dh, b.dh, a.ddh, b.ddh, &p.dh, &p.ddh);
        return p;
    }

  protected:
    BlendedProfile(double center, double eps) : center_(center), eps_(eps) {}
    virtual ProfilePoint lower(double zeta) const = 0;
    virtual ProfilePoint upper(double zeta) const = 0;
    double center_, eps_;

  private:
    static double mix(double fa, double fb, const BlendValue& s, double dfa,
                      double dfb, double ddfa, double ddfb, double* d1, double* d2) {
        const double diff = fb - fa;
        *d1 = (1 - s.s) * dfa + s.s * dfb + s.ds * diff;
        *d2 = (1 - s.s) * ddfa + s.s * ddfb + 2 * s.ds * (dfb - dfa) + s.dds * diff;
        return fa + s.s * diff;
    }
};

// Semicylinder x^2+y^2=r^2 (z<0) glued to the upper hemisphere of the
// origin-centered sphere of the same radius; blend band centered at z=0.
class CylinderToCapProfile final : public BlendedProfile {
  public:
    CylinderToCapProfile(double r, double band_half_width)
        : BlendedProfile(0.0, band_half_width), r_(r) {}

  protected:
    ProfilePoint lower(double z) const override { return {r_, 0, 0, z, 1, 0}; }
    ProfilePoint upper(double z) const override {
        const double c = std::cos(z / r_), s = std::sin(z / r_);
        return {r_ * c, -s, -c / r_, r_ * s, c, -s / r_};
    }

  private:
    double r_;
};

// Spherical cap of radius r (zeta = arc length from the north pole) glued to
// the inscribed cylinder x^2+y^2 = r^2/4; junction at polar angle 5*pi/6.
class CapToCylinderProfile final : public BlendedProfile {
  public:
    CapToCylinderProfile(double r, double band_half_width)
        : BlendedProfile(5.0 * kPi * r / 6.0, band_half_width), r_(r) {}

  protected:
    ProfilePoint lower(double zeta) const override {  // sphere side
        const double c = std::cos(zeta / r_), s = std::sin(zeta / r_);
        return {r_ * s, c, -s / r_, r_ * c, -s, -c / r_};
    }
    ProfilePoint upper(double zeta) const override {  // cylinder side
        const double hc = r_ * std::cos(5.0 * kPi / 6.0);
        return {0.5 * r_, 0, 0, hc - (zeta - center_), -1, 0};
    }

  private:
    double r_;
};

// Full round sphere as a profile (diagnostic polar chart).
class SphereProfile final : public RevolutionProfile {
  public:
    explicit SphereProfile(double r) : r_(r) {}
    ProfilePoint at(double zeta) const override {
        const double c = std::cos(zeta / r_), s = std::sin(zeta / r_);
        return {r_ * s, c, -s / r_, r_ * c, -s, -c / r_};
    }

  private:
    double r_;
};

class RevolutionChart final : public SurfaceChart {
  public:
    RevolutionChart(std::string name, std::shared_ptr<const RevolutionProfile> profile,
                    double zeta_min, double zeta_max, double comfort_margin,
                    double length_scale, bool enabled = true)
        : name_(std::move(name)),
          profile_(std::move(profile)),
          zmin_(zeta_min),
          zmax_(zeta_max),
          margin_(comfort_margin),
          scale_(length_scale),
          enabled_(enabled) {}

    std::string name() const override { return name_; }
    bool in_domain(const Vec2& q) const override {
        return q[0] >= zmin_ && q[0] <= zmax_;
    }
    double comfort(const Vec2& q) const override {
        return std::min(q[0] - (zmin_ + margin_), (zmax_ - margin_) - q[0]) / scale_;
    }
    bool integration_enabled() const override { return enabled_; }

    EmbedDerivs embed(const Vec2& q) const override {
        const ProfilePoint p = profile_->at(q[0]);
        const double c = std::cos(q[1]), s = std::sin(q[1]);
        EmbedDerivs d;
        d.E = Vec3(p.rho * c, p.rho * s, p.h);
        d.J.col(0) = Vec3(p.drho * c, p.drho * s, p.dh);
        d.J.col(1) = Vec3(-p.rho * s, p.rho * c, 0.0);
        d.H00 = Vec3(p.ddrho * c, p.ddrho * s, p.ddh);
        d.H01 = Vec3(-p.drho * s, p.drho * c, 0.0);
        d.H11 = Vec3(-p.rho * c, -p.rho * s, 0.0);
        return d;
    }

    std::optional<Vec2> from_r3(const Vec3& p, const Vec2* hint) const override {
        // invert the (monotone) height profile by bracketed root finding
        const double flo = profile_->at(zmin_).h - p[2];
        const double fhi = profile_->at(zmax_).h - p[2];
        if (flo * fhi > 0) return std::nullopt;
        const double zeta = find_root(
            [&](double z) { return profile_->at(z).h - p[2]; }, zmin_, zmax_, flo,
            fhi, 1e-15);
        const double rho = profile_->at(zeta).rho;
        if (std::abs(std::hypot(p[0], p[1]) - rho) > 1e-6 * scale_)
            return std::nullopt;  // not on this surface
        double theta = std::atan2(p[1], p[0]);
        if (hint) theta += 2 * kPi * std::round(((*hint)[1] - theta) / (2 * kPi));
        return Vec2(zeta, theta);
    }

  private:
    std::string name_;
    std::shared_ptr<const RevolutionProfile> profile_;
    double zmin_, zmax_, margin_, scale_;
    bool enabled_;
};

// ---------------------------------------------------------------------------
// Stereographic chart of a round sphere about a chosen pole. Conformal
// coordinates (u, v); the pole maps to the origin and the chart extends to
// polar angle psi_domain.

class StereoChart final : public SurfaceChart {
  public:
    StereoChart(std::string name, const Vec3& center, double r, const Vec3& pole_axis,
                const Vec3& e1, const Vec3& e2, double psi_comfort, double psi_domain)
        : name_(std::move(name)),
          center_(center),
          r_(r),
          n_(pole_axis.normalized()),
          e1_(e1.normalized()),
          e2_(e2.normalized()),
          psi_comfort_(psi_comfort),
          psi_domain_(psi_domain) {}

    std::string name() const override { return name_; }

    double psi_of(const Vec2& q) const {
        return 2.0 * std::atan(q.norm() / (2.0 * r_));
    }
    bool in_domain(const Vec2& q) const override { return psi_of(q) <= psi_domain_; }
    double comfort(const Vec2& q) const override { return psi_comfort_ - psi_of(q); }

    EmbedDerivs embed(const Vec2& q) const override {
        const double u = q[0], v = q[1];
        const double tau = (u * u + v * v) / (4 * r_ * r_);
        const double f = 1.0 / (1.0 + tau);
        const double tu = u / (2 * r_ * r_), tv = v / (2 * r_ * r_);
        const double tuu = 1.0 / (2 * r_ * r_);
        const double fu = -f * f * tu, fv = -f * f * tv;
        const double fuu = -2 * f * fu * tu - f * f * tuu;
        const double fuv = -2 * f * fv * tu;
        const double fvv = -2 * f * fv * tv - f * f * tuu;
        const Vec3 P = u * e1_ + v * e2_;
        EmbedDerivs d;
        d.E = center_ + f * P + r_ * (2 * f - 1) * n_;
        d.J.col(0) = fu * P + f * e1_ + 2 * r_ * fu * n_;
        d.J.col(1) = fv * P + f * e2_ + 2 * r_ * fv * n_;
        d.H00 = fuu * P + 2 * fu * e1_ + 2 * r_ * fuu * n_;
        d.H01 = fuv * P + fu * e2_ + fv * e1_ + 2 * r_ * fuv * n_;
        d.H11 = fvv * P + 2 * fv * e2_ + 2 * r_ * fvv * n_;
        return d;
    }

    std::optional<Vec2> from_r3(const Vec3& p, const Vec2*) const override {
        const Vec3 d = p - center_;
        if (std::abs(d.norm() - r_) > 1e-6 * r_) return std::nullopt;
        const double Z = d.dot(n_);
        const double U = d.dot(e1_), V = d.dot(e2_);
        if (r_ + Z < 1e-12 * r_) return std::nullopt;  // antipode
        Vec2 q(2 * r_ * U / (r_ + Z), 2 * r_ * V / (r_ + Z));
        if (!in_domain(q)) return std::nullopt;
        return q;
    }

  private:
    std::string name_;
    Vec3 center_;
    double r_;
    Vec3 n_, e1_, e2_;
    double psi_comfort_, psi_domain_;
};

}  // namespace lfe
