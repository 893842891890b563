#pragma once

// The explicit competitor u0, its exact energy, the level-set coordinate
// machinery, and the upper/lower bounds on the minimal energy.

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "tanharm/geometry.hpp"

namespace tanharm {

// Normal field of the family of spheres meeting the boundary and the axis
// perpendicularly. Unit norm, tangent on the sphere, defects at (0,0,+-1).
inline Vec3 competitor_u0(const Vec3& x) {
    double rho2 = x.x * x.x + x.y * x.y;
    double rho = std::sqrt(rho2);
    double num_z = rho2 - x.z * x.z + 1.0;
    double D2 = 4.0 * x.z * x.z * rho2 + num_z * num_z;
    if (D2 < 1e-28) return Vec3{0, 0, 1};  // limit value at the origin/poles
    double D = std::sqrt(D2);
    Vec3 e_rho = rho > 1e-300 ? Vec3{x.x / rho, x.y / rho, 0.0} : Vec3{1, 0, 0};
    return (Vec3{0, 0, num_z} - e_rho * (2.0 * x.z * rho)) / D;
}

// Angle of u0 in the reduction u = sin(psi) e_rho + cos(psi) e_z.
inline double psi0_of_u0(double rho, double z) {
    return std::atan2(-2.0 * z * rho, rho * rho - z * z + 1.0);
}

// |grad u0|^2 in cylindrical coordinates; infinite at the pole defects.
inline double grad_norm_sq_u0(double rho, double z) {
    double den = rho * rho * rho * rho + 2.0 * rho * rho * z * z + 2.0 * rho * rho +
                 z * z * z * z - 2.0 * z * z + 1.0;
    double num = 4.0 * rho * rho + 8.0 * z * z;
    if (den < 1e-28) return std::numeric_limits<double>::infinity();
    return num / den;
}

namespace detail {

// Adaptive midpoint/Simpson quadrature of f(rho,z) over
// {rho >= 0, rho^2 + z^2 <= 1, dist((rho,z), (0,+-1)) >= eps}.
class HalfDiskQuadrature {
  public:
    HalfDiskQuadrature(std::function<double(double, double)> f, double eps, double tol)
        : f_(std::move(f)), eps_(eps), tol_(tol) {}

    double run() {
        // local tolerance distributed over the initial tiling
        int nx = 8, nz = 16;
        double total = 0.0;
        for (int j = 0; j < nz; ++j)
            for (int i = 0; i < nx; ++i)
                total += cell(i * 1.0 / nx, (i + 1.0) / nx, -1.0 + 2.0 * j / nz,
                              -1.0 + 2.0 * (j + 1) / nz, tol_ / (nx * nz), 0);
        return total;
    }

  private:
    int state(double r0, double r1, double z0, double z1) const {
        // 2 = fully inside the region, 0 = fully outside, 1 = cut
        auto inside = [&](double r, double z) {
            if (r * r + z * z > 1.0) return false;
            if (std::hypot(r, z - 1.0) < eps_) return false;
            if (std::hypot(r, z + 1.0) < eps_) return false;
            return true;
        };
        int cnt = 0;
        for (double r : {r0, r1})
            for (double z : {z0, z1}) cnt += inside(r, z) ? 1 : 0;
        if (cnt == 4) {
            // corners inside; the excluded disks could still bite an edge
            double zm = 0.5 * (z0 + z1);
            if (std::hypot(r0, std::abs(zm) - 1.0) < eps_ && r0 <= eps_) return 1;
            return 2;
        }
        if (cnt == 0) {
            // a cut is still possible when the circle crosses the cell
            double rm = 0.5 * (r0 + r1), zm = 0.5 * (z0 + z1);
            if (rm * rm + zm * zm > 1.0 && r0 * r0 + std::min(z0 * z0, z1 * z1) > 1.0) return 0;
            return 1;
        }
        return 1;
    }

    double fraction(double r0, double r1, double z0, double z1) const {
        int nsub = 8, cnt = 0;
        for (int j = 0; j < nsub; ++j)
            for (int i = 0; i < nsub; ++i) {
                double r = r0 + (i + 0.5) * (r1 - r0) / nsub;
                double z = z0 + (j + 0.5) * (z1 - z0) / nsub;
                bool in = r * r + z * z <= 1.0 && std::hypot(r, z - 1.0) >= eps_ &&
                          std::hypot(r, z + 1.0) >= eps_;
                if (in) ++cnt;
            }
        return double(cnt) / (nsub * nsub);
    }

    double cell(double r0, double r1, double z0, double z1, double tol, int depth) {
        int st = state(r0, r1, z0, z1);
        double area = (r1 - r0) * (z1 - z0);
        if (st == 0) return 0.0;
        double rm = 0.5 * (r0 + r1), zm = 0.5 * (z0 + z1);
        if (st == 1) {
            if (depth >= max_depth_) return f_(rm, zm) * area * fraction(r0, r1, z0, z1);
            return cell(r0, rm, z0, zm, tol / 4, depth + 1) +
                   cell(rm, r1, z0, zm, tol / 4, depth + 1) +
                   cell(r0, rm, zm, z1, tol / 4, depth + 1) +
                   cell(rm, r1, zm, z1, tol / 4, depth + 1);
        }
        double coarse = f_(rm, zm) * area;
        double fine = 0.0;
        for (int j = 0; j < 2; ++j)
            for (int i = 0; i < 2; ++i)
                fine += f_(r0 + (i + 0.5) * (r1 - r0) / 2, z0 + (j + 0.5) * (z1 - z0) / 2) *
                        area / 4.0;
        if (std::abs(fine - coarse) < tol || depth >= max_depth_) return fine;
        return cell(r0, rm, z0, zm, tol / 4, depth + 1) +
               cell(rm, r1, z0, zm, tol / 4, depth + 1) +
               cell(r0, rm, zm, z1, tol / 4, depth + 1) +
               cell(rm, r1, zm, z1, tol / 4, depth + 1);
    }

    std::function<double(double, double)> f_;
    double eps_;
    double tol_;
    int max_depth_ = 13;
};

inline double adaptive_simpson_1d(const std::function<double(double)>& f, double a, double b,
                                  double tol, int depth = 0) {
    double m = 0.5 * (a + b);
    double fa = f(a), fm = f(m), fb = f(b);
    double s = (b - a) / 6.0 * (fa + 4 * fm + fb);
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double sl = (m - a) / 6.0 * (fa + 4 * f(lm) + fm);
    double sr = (b - m) / 6.0 * (fm + 4 * f(rm) + fb);
    if (depth > 40 || std::abs(sl + sr - s) < 15 * tol) return sl + sr + (sl + sr - s) / 15.0;
    return adaptive_simpson_1d(f, a, m, tol / 2, depth + 1) +
           adaptive_simpson_1d(f, m, b, tol / 2, depth + 1);
}

}  // namespace detail

struct UpperBoundResult {
    double exact = 0.0;               // 5 pi - pi^3/4
    double quadrature = 0.0;          // pole-extrapolated energy quadrature
    double intermediate = 0.0;        // int |grad u0|^2 dx, no 1/2
    double intermediate_exact = 0.0;  // 10 pi - pi^3/2
};

// Energy of u0 by adaptive quadrature with pole disks of radius
// eps, eps/2, eps/4 excluded and quadratic extrapolation eps -> 0.
inline UpperBoundResult upper_bound(double eps = 1e-2, double tol = 1e-7) {
    UpperBoundResult res;
    res.exact = 5.0 * kPi - kPi * kPi * kPi / 4.0;
    res.intermediate_exact = 10.0 * kPi - kPi * kPi * kPi / 2.0;
    auto f = [](double rho, double z) { return grad_norm_sq_u0(rho, z) * rho; };
    double I[3];
    for (int k = 0; k < 3; ++k) {
        double e = eps / (1 << k);
        I[k] = detail::HalfDiskQuadrature(f, e, tol).run();
    }
    // quadratic Richardson at eps -> 0 for the halving sequence
    double extrapolated = I[0] / 3.0 - 2.0 * I[1] + (8.0 / 3.0) * I[2];
    res.intermediate = 2.0 * kPi * extrapolated;
    res.quadrature = 0.5 * res.intermediate;
    double achieved = std::abs(res.quadrature - res.exact) / res.exact;
    if (achieved > 1e-3)
        throw std::runtime_error("upper_bound: quadrature did not converge, rel err " +
                                 std::to_string(achieved));
    return res;
}

struct LowerBoundResult {
    double exact = 0.0;           // (4/3) pi (2 sqrt(2) - 1)
    double integral_1d = 0.0;     // int_{-1}^1 sqrt(c^2 (2 - c^2)) dc
    double integral_exact = 0.0;  // (2/3)(2 sqrt(2) - 1)
};

inline LowerBoundResult lower_bound() {
    LowerBoundResult res;
    res.exact = (4.0 / 3.0) * kPi * (2.0 * std::sqrt(2.0) - 1.0);
    res.integral_exact = (2.0 / 3.0) * (2.0 * std::sqrt(2.0) - 1.0);
    auto f = [](double c) { return std::sqrt(c * c * (2.0 - c * c)); };
    // kink at c = 0; integrand even
    res.integral_1d = 2.0 * detail::adaptive_simpson_1d(f, 0.0, 1.0, 1e-14);
    return res;
}

// ---------------------------------------------------------------------------
// Level-set flow machinery.

// Parameters of the level curve {u_rho = c}: alpha = c(1-c^2) from the
// departure-angle matching, b = (3/4) alpha c^3, and the start condition
// lambda_rho(0) = 0 fixing c2^2 = 108 b^3 / c1^4 with c2 < 0.
struct LevelSetParams {
    double c = 0.0;
    double alpha = 0.0;
    double b = 0.0;
    double c1 = 1.0;
    double c2 = 0.0;

    LevelSetParams(double level, double c1_ = 1.0) : c(level), c1(c1_) {
        if (!(level > -1.0 && level < 1.0) || level == 0.0)
            throw std::invalid_argument("LevelSetParams: c must lie in (-1,1) \\ {0}");
        if (!(c1_ > 0.0)) throw std::invalid_argument("LevelSetParams: c1 must be positive");
        alpha = c * (1.0 - c * c);
        b = 0.75 * alpha * c * c * c;
        c2 = -std::sqrt(108.0 * b * b * b / (c1 * c1 * c1 * c1));
    }

    double t_max() const { return -2.0 * c2; }

    // Closed-form lambda_rho along the arc, via the stable arccos branch of
    // the cubic root selected by lambda_rho(0) = 0 (equivalent to the arctan
    // form away from the midpoint).
    double lambda_rho_explicit(double t) const {
        double beta = 3.0 * b / c1;
        double s = 2.0 * (c2 + t) * (c2 + t) / (c2 * c2);
        double X = std::min(1.0, std::max(-1.0, s - 1.0));
        double th = std::acos(X) / 3.0;
        return beta * (1.0 - std::cos(th) + std::sqrt(3.0) * std::sin(th));
    }

    double implicit_residual(double t, double lam) const {
        double q = lam + 3.0 * b / c1;
        double r = lam - 6.0 * b / c1;
        return (c2 + t) * (c2 + t) - q * r * r / c1;
    }
};

struct LevelSetTrajectory {
    std::vector<double> t, rho, rho_dot, z;
    double max_implicit_residual = 0.0;
    double departure_tan = 0.0;  // lim_{t->0+} lambda_rho' / lambda_z'
};

// Integrates lambda_rho'' = -lambda_rho'^2/(2 lambda_rho) - (2b/3)/lambda_rho^3
// and lambda_z' = alpha/lambda_rho by classical RK4 after a square-root
// series bootstrap; the step ramps geometrically out of the bootstrap point.
inline LevelSetTrajectory level_set_ode_solve(const LevelSetParams& p, double t_end, int steps) {
    LevelSetTrajectory out;
    double tmax = p.t_max();
    t_end = std::min(t_end, 0.995 * tmax);
    if (t_end <= 0.0 || steps < 16)
        throw std::invalid_argument("level_set_ode_solve: bad t_end or steps");
    double K = 2.0 * p.b / 3.0;
    double series_coeff = 2.0 * std::sqrt(6.0) * p.b / (p.c1 * std::sqrt(-p.c2));
    double tb = 1e-8 * tmax;
    double lam = series_coeff * std::sqrt(tb);
    double vel = 0.5 * series_coeff / std::sqrt(tb);
    double zz = -1.0;
    double t = tb;
    auto push = [&](double tt, double l, double v, double zv) {
        out.t.push_back(tt);
        out.rho.push_back(l);
        out.rho_dot.push_back(v);
        out.z.push_back(zv);
        double r = p.implicit_residual(tt, l);
        out.max_implicit_residual = std::max(out.max_implicit_residual, std::abs(r));
        if (l <= 0.0) throw std::runtime_error("level_set_ode_solve: lambda_rho left (0,inf)");
    };
    push(t, lam, vel, zz);
    out.departure_tan = vel / (p.alpha / lam);
    auto deriv = [&](double l, double v, std::array<double, 3>& d) {
        d[0] = v;
        d[1] = -v * v / (2.0 * l) - K / (l * l * l);
        d[2] = p.alpha / l;
    };
    // geometric ramp to 0.05*tmax, then uniform steps
    double ramp_end = std::min(0.05 * tmax, t_end);
    double q = 5e-4;
    while (t < t_end) {
        double dt = t < ramp_end ? q * t : (t_end - ramp_end) / steps;
        dt = std::min(dt, t_end - t);
        if (dt <= 0.0) break;
        std::array<double, 3> k1{}, k2{}, k3{}, k4{};
        deriv(lam, vel, k1);
        deriv(lam + 0.5 * dt * k1[0], vel + 0.5 * dt * k1[1], k2);
        deriv(lam + 0.5 * dt * k2[0], vel + 0.5 * dt * k2[1], k3);
        deriv(lam + dt * k3[0], vel + dt * k3[1], k4);
        lam += dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]);
        vel += dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]);
        zz += dt / 6.0 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2]);
        t += dt;
        push(t, lam, vel, zz);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Numerical check of det(grad Phi) = -1 for level-set coordinates of a
// synthetic planar field u_rho with analytic gradient.

struct LevelSetFixture {
    std::function<double(double, double)> urho;
    // gradient (d_rho u, d_z u)
    std::function<std::array<double, 2>(double, double)> grad;
    // starting rho on the transversal z = z0 for a given level c
    std::function<double(double)> start_rho;
    double z0 = 0.0;
};

inline LevelSetFixture levelset_fixture_linear() {
    LevelSetFixture f;
    f.urho = [](double rho, double) { return rho; };
    f.grad = [](double, double) { return std::array<double, 2>{1.0, 0.0}; };
    f.start_rho = [](double c) { return c; };
    f.z0 = -0.2;
    return f;
}

inline LevelSetFixture levelset_fixture_parabolic() {
    LevelSetFixture f;
    f.urho = [](double rho, double z) { return 0.5 * rho * (1.0 - z * z); };
    f.grad = [](double rho, double z) {
        return std::array<double, 2>{0.5 * (1.0 - z * z), -rho * z};
    };
    f.start_rho = [](double c) { return 2.0 * c / (1.0 - 0.2 * 0.2); };
    f.z0 = 0.2;
    return f;
}

// Flows grad^perp u_rho = (-d_z u, d_rho u) from the transversal and measures
// max |det(grad Phi) + 1| over a (t, c) box by central differences.
inline double levelset_jacobian_check(const LevelSetFixture& fx, double c_lo, double c_hi,
                                      double t_hi, int nc = 9, int nt = 9, int rk_steps = 400) {
    auto flow = [&](double c, double t) {
        double rho = fx.start_rho(c), z = fx.z0;
        int dir = t >= 0 ? 1 : -1;
        double dt = std::abs(t) / rk_steps * dir;
        for (int s = 0; s < rk_steps; ++s) {
            auto f = [&](double r, double zz, double& dr, double& dz) {
                auto g = fx.grad(r, zz);
                if (std::abs(g[0]) + std::abs(g[1]) < 1e-12)
                    throw std::domain_error("levelset_jacobian_check: degenerate gradient");
                dr = -g[1];
                dz = g[0];
            };
            double k1r, k1z, k2r, k2z, k3r, k3z, k4r, k4z;
            f(rho, z, k1r, k1z);
            f(rho + 0.5 * dt * k1r, z + 0.5 * dt * k1z, k2r, k2z);
            f(rho + 0.5 * dt * k2r, z + 0.5 * dt * k2z, k3r, k3z);
            f(rho + dt * k3r, z + dt * k3z, k4r, k4z);
            rho += dt / 6.0 * (k1r + 2 * k2r + 2 * k3r + k4r);
            z += dt / 6.0 * (k1z + 2 * k2z + 2 * k3z + k4z);
        }
        return std::array<double, 2>{rho, z};
    };
    double worst = 0.0;
    double dc = 1e-4 * (c_hi - c_lo), dt = 1e-4 * std::max(t_hi, 0.1);
    for (int ic = 0; ic < nc; ++ic)
        for (int it = 0; it < nt; ++it) {
            double c = c_lo + (c_hi - c_lo) * (ic + 0.5) / nc;
            double t = t_hi * (it + 0.5) / nt;
            auto pt = flow(c, t + dt), mt = flow(c, t - dt);
            auto pc = flow(c + dc, t), mc = flow(c - dc, t);
            double drdt = (pt[0] - mt[0]) / (2 * dt), dzdt = (pt[1] - mt[1]) / (2 * dt);
            double drdc = (pc[0] - mc[0]) / (2 * dc), dzdc = (pc[1] - mc[1]) / (2 * dc);
            double det = drdt * dzdc - drdc * dzdt;
            worst = std::max(worst, std::abs(det + 1.0));
        }
    return worst;
}

}  // namespace tanharm
