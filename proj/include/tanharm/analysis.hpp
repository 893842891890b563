#pragma once

// Monotonicity-density diagnostics and defect detection.

#include <algorithm>
#include <optional>
#include <vector>

#include "tanharm/energy.hpp"
#include "tanharm/fields.hpp"
#include "tanharm/geometry.hpp"

namespace tanharm {

enum class DensityWeight {
    Unweighted,     // plain 1-density of the energy measure
    InverseSquare,  // min{1, 1/|x|^2}, matching the exterior-energy weight
    Inverse,        // min{1, 1/|x|}, the variant printed in the monotonicity statement
};

inline double density_weight(DensityWeight w, double r) {
    switch (w) {
        case DensityWeight::InverseSquare: return std::min(1.0, 1.0 / (r * r));
        case DensityWeight::Inverse: return std::min(1.0, 1.0 / r);
        default: return 1.0;
    }
}

// Theta(f, x0, r) = (1/2r) int_{B_r(x0)} weight(|x|) |grad u|^2 by masked
// cell quadrature with a rim ramp on the ball boundary.
inline double density(const Field3& f, const Vec3& x0, double r,
                      DensityWeight weight = DensityWeight::Unweighted) {
    const BallGrid3& g = f.grid;
    if (r < 3.0 * g.h) throw std::domain_error("density: radius below 3h resolution floor");
    double cell = g.h * g.h * g.h;
    int i0 = std::max(0, int((x0.x - r + g.R) / g.h - 1));
    int i1 = std::min(g.n - 1, int((x0.x + r + g.R) / g.h + 1));
    int j0 = std::max(0, int((x0.y - r + g.R) / g.h - 1));
    int j1 = std::min(g.n - 1, int((x0.y + r + g.R) / g.h + 1));
    int k0 = std::max(0, int((x0.z - r + g.R) / g.h - 1));
    int k1 = std::min(g.n - 1, int((x0.z + r + g.R) / g.h + 1));
    double acc = 0.0;
    bool any = false;
    for (int k = k0; k <= k1; ++k)
        for (int j = j0; j <= j1; ++j)
            for (int i = i0; i <= i1; ++i) {
                Vec3 p = g.node(i, j, k);
                if (!g.inside(p)) continue;
                double d = (p - x0).norm();
                double wball = std::min(1.0, std::max(0.0, 0.5 + (r - d) / g.h));
                if (wball <= 0.0) continue;
                any = true;
                double w = wball * g.cut_fraction(p) * density_weight(weight, p.norm());
                Mat3 J = detail::masked_jacobian(f, i, j, k);
                acc += w * J.frobenius2() * cell;
            }
    if (!any) throw std::domain_error("density: ball does not meet the grid mask");
    return acc / (2.0 * r);
}

struct DensityProfile {
    Vec3 center;
    std::vector<double> radii;
    std::vector<double> theta;       // unweighted density
    std::vector<double> f_weighted;  // weighted density entering the monotone combination
    double c1 = 0.0, c2 = 0.0;       // fitted constants of e^{c1 r} f(r) + c2 r
    double residual = 0.0;           // max remaining monotonicity violation
    bool fitted = false;
};

inline double monotonicity_violation(const std::vector<double>& radii,
                                     const std::vector<double>& fvals, double c1, double c2) {
    double worst = 0.0;
    for (size_t i = 0; i + 1 < radii.size(); ++i) {
        double g0 = std::exp(c1 * radii[i]) * fvals[i] + c2 * radii[i];
        double g1 = std::exp(c1 * radii[i + 1]) * fvals[i + 1] + c2 * radii[i + 1];
        worst = std::max(worst, g0 - g1);
    }
    return worst;
}

// Samples the weighted density over the radii and fits the smallest
// (c1, c2) in {0, 0.5, ..., 50}^2, lexicographic order, making
// r -> e^{c1 r} f(r) + c2 r non-decreasing up to residual 1e-3.
inline DensityProfile density_profile(const Field3& f, const Vec3& x0,
                                      const std::vector<double>& radii,
                                      DensityWeight weight = DensityWeight::InverseSquare,
                                      double residual_tol = 1e-3) {
    if (radii.size() < 2) throw std::invalid_argument("density_profile: need at least 2 radii");
    for (size_t i = 0; i + 1 < radii.size(); ++i)
        if (!(radii[i] < radii[i + 1]))
            throw std::invalid_argument("density_profile: radii must increase strictly");
    DensityProfile prof;
    prof.center = x0;
    prof.radii = radii;
    for (double r : radii) {
        prof.theta.push_back(density(f, x0, r, DensityWeight::Unweighted));
        prof.f_weighted.push_back(density(f, x0, r, weight));
    }
    double best_res = std::numeric_limits<double>::infinity();
    for (int a = 0; a <= 100 && !prof.fitted; ++a)
        for (int b = 0; b <= 100; ++b) {
            double c1 = 0.5 * a, c2 = 0.5 * b;
            double res = monotonicity_violation(radii, prof.f_weighted, c1, c2);
            if (res < best_res) {
                best_res = res;
                prof.c1 = c1;
                prof.c2 = c2;
                prof.residual = res;
            }
            if (res <= residual_tol) {
                prof.c1 = c1;
                prof.c2 = c2;
                prof.residual = res;
                prof.fitted = true;
                break;
            }
        }
    return prof;
}

// (1/4pi) oint u . (d_phi u x d_theta u) over a latitude/longitude sampling
// of the sphere S_r(center); near-integer for genuine point defects.
inline double degree_on_sphere(const Field3& f, const Vec3& center, double r, int nphi = 64,
                               int ntheta = 128) {
    const BallGrid3& g = f.grid;
    if (center.norm() + r > g.R - 2.0 * g.h ||
        (g.r_in > 0.0 && center.norm() - r < g.r_in + 2.0 * g.h))
        throw std::domain_error("degree_on_sphere: sphere clipped by the grid mask");
    double dphi = kPi / nphi, dth = kTwoPi / ntheta;
    auto point = [&](double phi, double th) {
        Vec3 n{std::sin(phi) * std::cos(th), std::sin(phi) * std::sin(th), std::cos(phi)};
        return normalized(sample(f, center + n * r));
    };
    double acc = 0.0;
    for (int ip = 0; ip < nphi; ++ip) {
        double phi = (ip + 0.5) * dphi;
        for (int it = 0; it < ntheta; ++it) {
            double th = (it + 0.5) * dth;
            Vec3 u0 = point(phi, th);
            Vec3 dp = (point(phi + 0.5 * dphi, th) - point(phi - 0.5 * dphi, th)) / dphi;
            Vec3 dt = (point(phi, th + 0.5 * dth) - point(phi, th - 0.5 * dth)) / dth;
            acc += u0.dot(dp.cross(dt)) * dphi * dth;
        }
    }
    return acc / (4.0 * kPi);
}

struct Defect {
    Vec3 location;
    bool boundary = false;
    double local_density = 0.0;
    std::optional<double> degree;
};

using DefectList = std::vector<Defect>;

// Scans grid nodes (subsampled by `stride`) for density above the threshold,
// clusters hits within twice the scan radius, classifies boundary versus
// interior against the unit sphere, and attaches a degree to interior
// clusters when an evaluation sphere fits.
inline DefectList detect_defects(const Field3& f, double threshold, double scan_radius,
                                 int stride = 2) {
    const BallGrid3& g = f.grid;
    scan_radius = std::max(scan_radius, 3.0 * g.h);
    struct Hit {
        Vec3 p;
        double theta;
    };
    std::vector<Hit> hits;
    for (int k = 0; k < g.n; k += stride)
        for (int j = 0; j < g.n; j += stride)
            for (int i = 0; i < g.n; i += stride) {
                Vec3 p = g.node(i, j, k);
                if (!g.inside(p)) continue;
                if (p.norm() > 1.0 + g.h) continue;  // singular set lives in the closed ball
                double th = density(f, p, scan_radius, DensityWeight::Unweighted);
                if (th > threshold) hits.push_back({p, th});
            }
    std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
        return a.theta > b.theta;
    });
    DefectList out;
    std::vector<bool> used(hits.size(), false);
    for (size_t a = 0; a < hits.size(); ++a) {
        if (used[a]) continue;
        Vec3 centroid{0, 0, 0};
        double wsum = 0.0, peak = hits[a].theta;
        for (size_t b = a; b < hits.size(); ++b) {
            if (used[b]) continue;
            if ((hits[b].p - hits[a].p).norm() > 2.0 * scan_radius) continue;
            used[b] = true;
            centroid += hits[b].p * hits[b].theta;
            wsum += hits[b].theta;
        }
        Defect d;
        d.location = centroid / wsum;
        d.local_density = peak;
        d.boundary = std::abs(d.location.norm() - 1.0) <= std::max(2.0 * g.h, 0.5 * scan_radius);
        if (!d.boundary) {
            double rd = std::min(2.0 * scan_radius, 0.5 * (1.0 - d.location.norm()));
            if (rd > 3.0 * g.h && d.location.norm() + rd < g.R - 2.0 * g.h) {
                try {
                    d.degree = degree_on_sphere(f, d.location, rd);
                } catch (const std::domain_error&) {
                }
            }
        }
        out.push_back(d);
    }
    std::sort(out.begin(), out.end(), [](const Defect& a, const Defect& b) {
        if (a.location.z != b.location.z) return a.location.z < b.location.z;
        if (a.location.x != b.location.x) return a.location.x < b.location.x;
        return a.location.y < b.location.y;
    });
    return out;
}

struct RadialDerivativeCheck {
    double radial_term = 0.0;    // int over the chart annulus of |d_r u|^2 / |x - x0|
    double f_r1 = 0.0, f_r2 = 0.0;
    double annulus_energy = 0.0;
    double ratio = 0.0;          // radial_term / (f(r2) - f(r1) + annulus energy)
};

// Chart-annulus control of the radial derivative: the weighted density
// difference plus the annulus energy bounds the |x-x0|-weighted radial
// derivative up to a constant reported as `ratio`.
inline RadialDerivativeCheck radial_derivative_check(const Field3& f, const BoundaryChart& chart,
                                                     double r1, double r2,
                                                     DensityWeight weight =
                                                         DensityWeight::InverseSquare) {
    if (!(0.0 < r1 && r1 < r2 && r2 < 0.5 * chart.radius() + 1e-12))
        throw std::invalid_argument("radial_derivative_check: need 0 < r1 < r2 <= r0/2");
    const BallGrid3& g = f.grid;
    const Vec3& x0 = chart.base_point();
    double cell = g.h * g.h * g.h;
    RadialDerivativeCheck out;
    double fint1 = 0.0, fint2 = 0.0;
    f.for_each_masked([&](int i, int j, int k, const Vec3& p) {
        double chart_r;
        try {
            chart_r = chart.inverse(p).norm();
        } catch (const std::domain_error&) {
            return;
        }
        if (chart_r >= r2) return;
        Mat3 J = detail::masked_jacobian(f, i, j, k);
        double w = g.cut_fraction(p) * cell;
        double wf = w * density_weight(weight, p.norm()) * J.frobenius2();
        fint2 += wf;
        if (chart_r < r1) fint1 += wf;
        if (chart_r >= r1) {
            Vec3 d = p - x0;
            double dist = d.norm();
            if (dist < 1e-12) return;
            Vec3 er = d / dist;
            Vec3 radial = J * er;
            out.radial_term += w * radial.norm2() / dist;
            out.annulus_energy += 0.5 * w * J.frobenius2();
        }
    });
    out.f_r1 = fint1 / (2.0 * r1);
    out.f_r2 = fint2 / (2.0 * r2);
    double denom = (out.f_r2 - out.f_r1) + out.annulus_energy;
    out.ratio = denom > 0.0 ? out.radial_term / denom : std::numeric_limits<double>::infinity();
    return out;
}

}  // namespace tanharm
