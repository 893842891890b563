#pragma once

// Quadrature of the energy functionals and pointwise Euler-Lagrange
// residuals: Dirichlet energy on masked grids, the weighted exterior energy
// on the annulus, the T-functional and sector energies on the cylindrical
// lattice, the reduced energy of the scalar angle field, and the residuals of
// the harmonic-map equation and its reflected counterpart.

#include <functional>
#include <map>
#include <optional>
#include <string>

#include "tanharm/fields.hpp"
#include "tanharm/parallel.hpp"

namespace tanharm {

struct EnergyReport {
    std::optional<double> dirichlet;
    std::optional<double> exterior;
    std::optional<double> combined;
    std::optional<double> t_functional;
    std::optional<double> reduced;
    std::map<std::string, double> breakdown;
    int resolution = 0;
    std::string scheme = "central+cutcell";
};

namespace detail {

// Gradient column d of component values at a masked node: central difference
// when both neighbors are masked, one-sided otherwise, zero if isolated.
template <class Get>
inline double masked_diff(const BallGrid3& g, Get&& val, int i, int j, int k, int d) {
    int di = d == 0, dj = d == 1, dk = d == 2;
    bool has_p = i + di < g.n && j + dj < g.n && k + dk < g.n &&
                 g.inside(g.node(i + di, j + dj, k + dk));
    bool has_m = i - di >= 0 && j - dj >= 0 && k - dk >= 0 &&
                 g.inside(g.node(i - di, j - dj, k - dk));
    if (has_p && has_m)
        return (val(i + di, j + dj, k + dk) - val(i - di, j - dj, k - dk)) / (2.0 * g.h);
    if (has_p) return (val(i + di, j + dj, k + dk) - val(i, j, k)) / g.h;
    if (has_m) return (val(i, j, k) - val(i - di, j - dj, k - dk)) / g.h;
    return 0.0;
}

inline Mat3 masked_jacobian(const Field3& f, int i, int j, int k) {
    Mat3 J;
    for (int c = 0; c < 3; ++c)
        for (int d = 0; d < 3; ++d)
            J(c, d) = masked_diff(f.grid, [&](int a, int b, int e) { return f.at(a, b, e)[c]; },
                                  i, j, k, d);
    return J;
}

}  // namespace detail

// (1/2) sum |grad u|^2 * cut volume over an optional radial window.
inline double dirichlet_energy_shell(const Field3& f, double r_lo, double r_hi) {
    const BallGrid3& g = f.grid;
    double cell = g.h * g.h * g.h;
    return parallel_plane_sum(g.n, [&](int k) {
        double acc = 0.0;
        for (int j = 0; j < g.n; ++j)
            for (int i = 0; i < g.n; ++i) {
                Vec3 p = g.node(i, j, k);
                if (!g.inside(p)) continue;
                double r = p.norm();
                double w = g.cut_fraction(p);
                w *= std::min(1.0, std::max(0.0, 0.5 + (r_hi - r) / g.h));
                w *= std::min(1.0, std::max(0.0, 0.5 + (r - r_lo) / g.h));
                if (w <= 0.0) continue;
                Mat3 J = detail::masked_jacobian(f, i, j, k);
                acc += 0.5 * w * J.frobenius2() * cell;
            }
        return acc;
    });
}

inline double dirichlet_energy(const Field3& f) {
    bool any = false;
    f.for_each_masked([&](int, int, int, const Vec3&) { any = true; });
    if (!any) throw std::domain_error("dirichlet_energy: empty mask");
    return dirichlet_energy_shell(f, f.grid.r_in - f.grid.h, f.grid.R + f.grid.h);
}

struct ExteriorEnergyTerms {
    double gradient = 0.0;    // (1/2) int |grad w|^2 / |x|^2
    double radial_sq = 0.0;   // (1/2) int (4/|x|^6)(w.x)^2
    double transport = 0.0;   // (1/2) int (4/|x|^4) x.[(w.grad)w]
    double divergence = 0.0;  // -(1/2) int (4/|x|^4)(w.x) div w
    double total() const { return 4.0 * kPi + gradient + radial_sq + transport + divergence; }
};

// Exterior energy on the annulus grid. The contraction w^T (grad w)^T x is
// x . [(w.grad)w], the reading under which the exterior energy of the
// extension reproduces the interior energy over the inverted shell.
inline ExteriorEnergyTerms exterior_energy_terms(const Field3& f) {
    const BallGrid3& g = f.grid;
    if (g.r_in <= 0.0)
        throw std::domain_error("exterior_energy: field must live on an annulus mask");
    double cell = g.h * g.h * g.h;
    ExteriorEnergyTerms t;
    std::vector<std::array<double, 4>> partial(size_t(g.n), {0, 0, 0, 0});
    parallel_for(0, g.n, [&](int k) {
        std::array<double, 4> acc{0, 0, 0, 0};
        for (int j = 0; j < g.n; ++j)
            for (int i = 0; i < g.n; ++i) {
                Vec3 p = g.node(i, j, k);
                if (!g.inside(p)) continue;
                double w = g.cut_fraction(p) * cell * 0.5;
                double n2 = p.norm2();
                Mat3 J = detail::masked_jacobian(f, i, j, k);
                const Vec3& v = f.at(i, j, k);
                double vx = v.dot(p);
                double div = J(0, 0) + J(1, 1) + J(2, 2);
                acc[0] += w * J.frobenius2() / n2;
                acc[1] += w * 4.0 * vx * vx / (n2 * n2 * n2);
                acc[2] += w * 4.0 * p.dot(J * v) / (n2 * n2);
                acc[3] -= w * 4.0 * vx * div / (n2 * n2);
            }
        partial[size_t(k)] = acc;
    });
    for (auto& a : partial) {
        t.gradient += a[0];
        t.radial_sq += a[1];
        t.transport += a[2];
        t.divergence += a[3];
    }
    return t;
}

inline double exterior_energy(const Field3& f) { return exterior_energy_terms(f).total(); }

struct TFunctionalResult {
    double value = 0.0;
    double axis_cutoff = 0.0;  // rho below which circles were excluded
};

// int rho^-2 (u_rho d_theta u_theta - u_theta d_theta u_rho) dx over the unit
// ball, theta-derivatives by central differences along sampled circles. The
// quadrature-hostile shell rho < 2h is excluded.
template <class Sampler>
inline TFunctionalResult t_functional_sampled(Sampler&& smp, double h, int ntheta) {
    int nrho = int(std::floor(1.0 / h));
    int nz = int(std::floor(2.0 / h));
    double dth = kTwoPi / ntheta;
    TFunctionalResult res;
    res.axis_cutoff = 2.0 * h;
    std::vector<double> ur(size_t(ntheta)), ut(size_t(ntheta));
    for (int c = 0; c < nz; ++c) {
        double zz = -1.0 + (c + 0.5) * h;
        for (int a = 0; a < nrho; ++a) {
            double rho = (a + 0.5) * h;
            if (rho < res.axis_cutoff) continue;
            double rr = std::hypot(rho, zz);
            if (rr > 1.0 + 0.5 * h) continue;
            double cut = std::min(1.0, std::max(0.0, 0.5 + (1.0 - rr) / h));
            if (cut <= 0.0) continue;
            for (int b = 0; b < ntheta; ++b) {
                double th = b * dth;
                Vec3 x{rho * std::cos(th), rho * std::sin(th), zz};
                Vec3 v = smp(x);
                ur[size_t(b)] = v.x * std::cos(th) + v.y * std::sin(th);
                ut[size_t(b)] = -v.x * std::sin(th) + v.y * std::cos(th);
            }
            double circ = 0.0;
            for (int b = 0; b < ntheta; ++b) {
                int bp = (b + 1) % ntheta, bm = (b + ntheta - 1) % ntheta;
                double dut = (ut[size_t(bp)] - ut[size_t(bm)]) / (2.0 * dth);
                double dur = (ur[size_t(bp)] - ur[size_t(bm)]) / (2.0 * dth);
                circ += ur[size_t(b)] * dut - ut[size_t(b)] * dur;
            }
            res.value += cut * circ * dth * rho / (rho * rho) * h * h;
        }
    }
    return res;
}

inline TFunctionalResult t_functional(const Field3& f, int ntheta = 0) {
    if (ntheta == 0) ntheta = 4 * f.grid.n;
    return t_functional_sampled([&f](const Vec3& x) { return sample(f, x); }, f.grid.h, ntheta);
}

// int (1/rho^2) sum_a (d_theta u_a)^2 dx, same sampling scheme (no axis
// exclusion; the integrand is nonnegative and rho >= h/2 on the lattice).
template <class Sampler>
inline double theta_derivative_energy_sampled(Sampler&& smp, double h, int ntheta) {
    int nrho = int(std::floor(1.0 / h));
    int nz = int(std::floor(2.0 / h));
    double dth = kTwoPi / ntheta;
    double total = 0.0;
    std::vector<double> ur(size_t(ntheta)), ut(size_t(ntheta)), uzv(size_t(ntheta));
    for (int c = 0; c < nz; ++c) {
        double zz = -1.0 + (c + 0.5) * h;
        for (int a = 0; a < nrho; ++a) {
            double rho = (a + 0.5) * h;
            double rr = std::hypot(rho, zz);
            if (rr > 1.0 + 0.5 * h) continue;
            double cut = std::min(1.0, std::max(0.0, 0.5 + (1.0 - rr) / h));
            if (cut <= 0.0) continue;
            for (int b = 0; b < ntheta; ++b) {
                double th = b * dth;
                Vec3 x{rho * std::cos(th), rho * std::sin(th), zz};
                Vec3 v = smp(x);
                ur[size_t(b)] = v.x * std::cos(th) + v.y * std::sin(th);
                ut[size_t(b)] = -v.x * std::sin(th) + v.y * std::cos(th);
                uzv[size_t(b)] = v.z;
            }
            double circ = 0.0;
            for (int b = 0; b < ntheta; ++b) {
                int bp = (b + 1) % ntheta, bm = (b + ntheta - 1) % ntheta;
                double d1 = (ur[size_t(bp)] - ur[size_t(bm)]) / (2.0 * dth);
                double d2 = (ut[size_t(bp)] - ut[size_t(bm)]) / (2.0 * dth);
                double d3 = (uzv[size_t(bp)] - uzv[size_t(bm)]) / (2.0 * dth);
                circ += d1 * d1 + d2 * d2 + d3 * d3;
            }
            total += cut * circ * dth * h * h / rho;
        }
    }
    return total;
}

inline double theta_derivative_energy(const Field3& f, int ntheta = 0) {
    if (ntheta == 0) ntheta = 4 * f.grid.n;
    return theta_derivative_energy_sampled([&f](const Vec3& x) { return sample(f, x); },
                                           f.grid.h, ntheta);
}

// ---------------------------------------------------------------------------
// Sector energy of the symmetrization proof:
//   int [ rho/2 (|d_rho u|^2 + |d_z u|^2) + 1/(4rho) |d_theta u|^2
//         + 1/(2rho) (u_rho^2 + u_theta^2) ] drho dtheta dz
// with componentwise derivatives of the cylindrical coefficients. Satisfies
// E_sym = E - T - (1/2) sum_a int (1/(2rho)) (d_theta u_a)^2.

namespace detail {

struct CoeffLattice {
    int nrho, ntheta, nz;
    double h, dth;
    bool periodic;
    std::vector<double> ur, ut, uz;
    size_t idx(int a, int b, int c) const {
        return (size_t(c) * size_t(ntheta) + size_t(b)) * size_t(nrho) + size_t(a);
    }
    bool inside(int a, int c) const {
        double rho = (a + 0.5) * h, zz = -1.0 + (c + 0.5) * h;
        return rho * rho + zz * zz <= 1.0 + h;
    }
};

template <class Sampler>
inline CoeffLattice sector_lattice(Sampler&& smp, double th1, double th2, double h, int ntheta) {
    CoeffLattice L;
    L.nrho = int(std::floor(1.0 / h));
    L.nz = int(std::floor(2.0 / h));
    L.h = h;
    L.periodic = std::abs((th2 - th1) - kTwoPi) < 1e-12;
    L.ntheta = ntheta;
    L.dth = L.periodic ? kTwoPi / ntheta : (th2 - th1) / (ntheta - 1);
    size_t sz = size_t(L.nrho) * size_t(L.ntheta) * size_t(L.nz);
    L.ur.assign(sz, 0.0);
    L.ut.assign(sz, 0.0);
    L.uz.assign(sz, 0.0);
    for (int c = 0; c < L.nz; ++c) {
        double zz = -1.0 + (c + 0.5) * h;
        for (int a = 0; a < L.nrho; ++a) {
            double rho = (a + 0.5) * h;
            if (!L.inside(a, c)) continue;
            if (std::hypot(rho, zz) > 1.0 + 0.5 * h) continue;
            for (int b = 0; b < L.ntheta; ++b) {
                double th = th1 + b * L.dth;
                Vec3 x{rho * std::cos(th), rho * std::sin(th), zz};
                Vec3 v = smp(x);
                size_t id = L.idx(a, b, c);
                L.ur[id] = v.x * std::cos(th) + v.y * std::sin(th);
                L.ut[id] = -v.x * std::sin(th) + v.y * std::cos(th);
                L.uz[id] = v.z;
            }
        }
    }
    return L;
}

inline double sector_energy_of_lattice(const CoeffLattice& L) {
    auto diff_rz = [&](const std::vector<double>& V, int a, int b, int c, bool in_rho) {
        int da = in_rho ? 1 : 0, dc = in_rho ? 0 : 1;
        auto ok = [&](int aa, int cc) {
            if (aa < 0 || cc < 0 || aa >= L.nrho || cc >= L.nz) return false;
            double rho = (aa + 0.5) * L.h, zz = -1.0 + (cc + 0.5) * L.h;
            return rho * rho + zz * zz <= 1.0;
        };
        bool hp = ok(a + da, c + dc), hm = ok(a - da, c - dc);
        if (hp && hm) return (V[L.idx(a + da, b, c + dc)] - V[L.idx(a - da, b, c - dc)]) / (2 * L.h);
        if (hp) return (V[L.idx(a + da, b, c + dc)] - V[L.idx(a, b, c)]) / L.h;
        if (hm) return (V[L.idx(a, b, c)] - V[L.idx(a - da, b, c - dc)]) / L.h;
        return 0.0;
    };
    auto diff_th = [&](const std::vector<double>& V, int a, int b, int c) {
        if (L.periodic) {
            int bp = (b + 1) % L.ntheta, bm = (b + L.ntheta - 1) % L.ntheta;
            return (V[L.idx(a, bp, c)] - V[L.idx(a, bm, c)]) / (2 * L.dth);
        }
        if (b > 0 && b + 1 < L.ntheta)
            return (V[L.idx(a, b + 1, c)] - V[L.idx(a, b - 1, c)]) / (2 * L.dth);
        if (b == 0) return (V[L.idx(a, 1, c)] - V[L.idx(a, 0, c)]) / L.dth;
        return (V[L.idx(a, b, c)] - V[L.idx(a, b - 1, c)]) / L.dth;
    };
    double total = 0.0;
    for (int c = 0; c < L.nz; ++c) {
        double zz = -1.0 + (c + 0.5) * L.h;
        for (int a = 0; a < L.nrho; ++a) {
            double rho = (a + 0.5) * L.h;
            double rr = std::hypot(rho, zz);
            if (rr > 1.0 + 0.5 * L.h) continue;
            double cut = std::min(1.0, std::max(0.0, 0.5 + (1.0 - rr) / L.h));
            if (cut <= 0.0) continue;
            for (int b = 0; b < L.ntheta; ++b) {
                double wth = 1.0;
                if (!L.periodic && (b == 0 || b + 1 == L.ntheta)) wth = 0.5;
                double drr = 0, dzz = 0, dth2 = 0;
                for (const auto* V : {&L.ur, &L.ut, &L.uz}) {
                    double dr = diff_rz(*V, a, b, c, true);
                    double dz = diff_rz(*V, a, b, c, false);
                    double dt = diff_th(*V, a, b, c);
                    drr += dr * dr;
                    dzz += dz * dz;
                    dth2 += dt * dt;
                }
                size_t id = L.idx(a, b, c);
                double dens = 0.5 * rho * (drr + dzz) + dth2 / (4.0 * rho) +
                              (L.ur[id] * L.ur[id] + L.ut[id] * L.ut[id]) / (2.0 * rho);
                total += cut * wth * dens * L.h * L.h * L.dth;
            }
        }
    }
    return total;
}

}  // namespace detail

template <class Sampler>
inline double symmetrization_energy_sampled(Sampler&& smp, double th1, double th2, double h,
                                            int ntheta) {
    if (!(th2 > th1)) throw std::invalid_argument("symmetrization_energy: degenerate sector");
    return detail::sector_energy_of_lattice(
        detail::sector_lattice(smp, th1, th2, h, ntheta));
}

inline double symmetrization_energy(const Field3& f, double th1, double th2, int ntheta = 0) {
    if (!(th2 > th1)) throw std::invalid_argument("symmetrization_energy: degenerate sector");
    bool full = std::abs((th2 - th1) - kTwoPi) < 1e-12;
    if (ntheta == 0) {
        ntheta = std::max(8, int(std::round(4 * f.grid.n * (th2 - th1) / kTwoPi)));
        if (!full) ntheta += 1;
    }
    return symmetrization_energy_sampled([&f](const Vec3& x) { return sample(f, x); }, th1, th2,
                                         f.grid.h, ntheta);
}

// ---------------------------------------------------------------------------
// Reduced energy of the scalar angle field: the three-dimensional Dirichlet
// energy of the lift,
//   E_red(psi) = pi * int_D (psi_rho^2 + psi_z^2 + sin^2(psi)/rho^2) rho drho dz,
// discretized edge-wise so that the solver gradient is exact.

inline double reduced_energy(const PsiField& p) {
    const HalfDiskMesh& m = p.mesh;
    return kPi * parallel_plane_sum(m.nz, [&](int j) {
        double acc = 0.0;
        for (int i = 0; i < m.nrho; ++i) {
            if (!m.inside(i, j)) continue;
            double cf = m.cut_fraction(i, j);
            double rho = m.rho(i);
            double ps = p.at(i, j);
            double s = std::sin(ps);
            acc += cf * s * s * m.h * m.h / rho;
            if (m.inside(i + 1, j)) {
                double w = 0.5 * (cf + m.cut_fraction(i + 1, j));
                double d = p.at(i + 1, j) - ps;
                acc += w * (rho + 0.5 * m.h) * d * d;
            }
            if (m.inside(i, j + 1)) {
                double w = 0.5 * (cf + m.cut_fraction(i, j + 1));
                double d = p.at(i, j + 1) - ps;
                acc += w * rho * d * d;
            }
        }
        return acc;
    });
}

// Gradient of reduced_energy with respect to nodal values; entries at
// Dirichlet arc nodes are zeroed.
inline std::vector<double> reduced_energy_gradient(const PsiField& p) {
    const HalfDiskMesh& m = p.mesh;
    std::vector<double> grad(p.psi.size(), 0.0);
    parallel_for(0, m.nz, [&](int j) {
        for (int i = 0; i < m.nrho; ++i) {
            if (!m.inside(i, j)) continue;
            double cf = m.cut_fraction(i, j);
            double rho = m.rho(i);
            double ps = p.at(i, j);
            double gsum = 2.0 * cf * std::sin(ps) * std::cos(ps) * m.h * m.h / rho;
            auto edge = [&](int i2, int j2, double rho_e) {
                if (!m.inside(i2, j2)) return;
                double w = 0.5 * (cf + m.cut_fraction(i2, j2));
                gsum += 2.0 * w * rho_e * (ps - p.at(i2, j2));
            };
            edge(i + 1, j, rho + 0.5 * m.h);
            edge(i - 1, j, rho - 0.5 * m.h);
            edge(i, j + 1, rho);
            edge(i, j - 1, rho);
            grad[m.index(i, j)] = m.is_bc(i, j) ? 0.0 : kPi * gsum;
        }
    });
    return grad;
}

// ---------------------------------------------------------------------------
// Edge-based 3D Dirichlet objective for the projected gradient flow; the
// gradient of this discrete functional is exact and symmetric.

inline double edge_dirichlet_energy(const Field3& f) {
    const BallGrid3& g = f.grid;
    return parallel_plane_sum(g.n, [&](int k) {
        double acc = 0.0;
        for (int j = 0; j < g.n; ++j)
            for (int i = 0; i < g.n; ++i) {
                Vec3 p = g.node(i, j, k);
                if (!g.inside(p)) continue;
                double cf = g.cut_fraction(p);
                const Vec3& v = f.at(i, j, k);
                auto edge = [&](int i2, int j2, int k2) {
                    if (i2 >= g.n || j2 >= g.n || k2 >= g.n) return;
                    Vec3 q = g.node(i2, j2, k2);
                    if (!g.inside(q)) return;
                    double w = 0.5 * (cf + g.cut_fraction(q));
                    Vec3 d = f.at(i2, j2, k2) - v;
                    acc += 0.5 * w * d.norm2() * g.h;
                };
                edge(i + 1, j, k);
                edge(i, j + 1, k);
                edge(i, j, k + 1);
            }
        return acc;
    });
}

inline std::vector<Vec3> edge_dirichlet_gradient(const Field3& f) {
    const BallGrid3& g = f.grid;
    std::vector<Vec3> grad(f.values.size());
    parallel_for(0, g.n, [&](int k) {
        for (int j = 0; j < g.n; ++j)
            for (int i = 0; i < g.n; ++i) {
                Vec3 p = g.node(i, j, k);
                if (!g.inside(p)) continue;
                double cf = g.cut_fraction(p);
                const Vec3& v = f.at(i, j, k);
                Vec3 gsum{0, 0, 0};
                auto edge = [&](int i2, int j2, int k2) {
                    if (i2 < 0 || j2 < 0 || k2 < 0 || i2 >= g.n || j2 >= g.n || k2 >= g.n) return;
                    Vec3 q = g.node(i2, j2, k2);
                    if (!g.inside(q)) return;
                    double w = 0.5 * (cf + g.cut_fraction(q));
                    gsum += (v - f.at(i2, j2, k2)) * (w * g.h);
                };
                edge(i + 1, j, k); edge(i - 1, j, k);
                edge(i, j + 1, k); edge(i, j - 1, k);
                edge(i, j, k + 1); edge(i, j, k - 1);
                grad[g.index(i, j, k)] = gsum;
            }
    });
    return grad;
}

// ---------------------------------------------------------------------------
// Pointwise residuals.

// r = -Lap(u) - |grad u|^2 u by central second differences of a callable.
inline Vec3 harmonic_residual_at(const std::function<Vec3(const Vec3&)>& u, const Vec3& x,
                                 double h) {
    Vec3 u0 = u(x);
    Vec3 lap{0, 0, 0};
    double g2 = 0.0;
    for (int d = 0; d < 3; ++d) {
        Vec3 e{d == 0 ? h : 0.0, d == 1 ? h : 0.0, d == 2 ? h : 0.0};
        Vec3 up = u(x + e), um = u(x - e);
        lap += (up - u0 * 2.0 + um) / (h * h);
        Vec3 gd = (up - um) / (2.0 * h);
        g2 += gd.norm2();
    }
    return -1.0 * lap - g2 * u0;
}

inline Vec3 harmonic_residual(const Field3& f, int i, int j, int k) {
    const BallGrid3& g = f.grid;
    Vec3 p = g.node(i, j, k);
    if (!g.inside(p) || g.R - p.norm() < 2.0 * g.h ||
        (g.r_in > 0.0 && p.norm() - g.r_in < 2.0 * g.h))
        throw std::domain_error("harmonic_residual: node closer than 2h to the boundary");
    return harmonic_residual_at([&f](const Vec3& x) { return sample(f, x); }, p, g.h);
}

// Residual of the reflected Euler-Lagrange equation on the annulus. The
// right-hand side is the strong form of the reflected outer-variation
// identity; for w = A(u o iota) with u solving the harmonic-map equation the
// residual equals (1/|y|^4) A(y) [-Lap u - |grad u|^2 u](iota(y)) and thus
// vanishes.
inline Vec3 reflected_el_residual_at(const std::function<Vec3(const Vec3&)>& w, const Vec3& y,
                                     double h) {
    Vec3 w0 = w(y);
    Vec3 lap{0, 0, 0};
    Mat3 J;
    for (int d = 0; d < 3; ++d) {
        Vec3 e{d == 0 ? h : 0.0, d == 1 ? h : 0.0, d == 2 ? h : 0.0};
        Vec3 wp = w(y + e), wm = w(y - e);
        lap += (wp - w0 * 2.0 + wm) / (h * h);
        Vec3 gd = (wp - wm) / (2.0 * h);
        J(0, d) = gd.x;
        J(1, d) = gd.y;
        J(2, d) = gd.z;
    }
    double n2 = y.norm2();
    double g2 = J.frobenius2();
    double div = J(0, 0) + J(1, 1) + J(2, 2);
    double wy = w0.dot(y);
    Vec3 Jy = J * y;                    // (y.grad) w
    Vec3 Jty = J.transposed() * y;      // components sum_i y_i dw_i/dy_j
    double transport = y.dot(J * w0);   // x . (w.grad) w
    Vec3 rhs = (-2.0 / n2) * Jy - (4.0 / (n2 * n2)) * wy * y +
               (4.0 / (n2 * n2)) * wy * wy * w0 + g2 * w0 - (4.0 / n2) * Jty +
               (4.0 / n2) * transport * w0 + (4.0 / n2) * div * y - (4.0 / n2) * wy * div * w0;
    return (-1.0 * lap) - rhs;
}

inline Vec3 reflected_el_residual(const Field3& f, int i, int j, int k) {
    const BallGrid3& g = f.grid;
    Vec3 p = g.node(i, j, k);
    double r = p.norm();
    if (!g.inside(p) || g.R - r < 2.0 * g.h || r - g.r_in < 2.0 * g.h)
        throw std::domain_error("reflected_el_residual: node closer than 2h to a sphere");
    return reflected_el_residual_at([&f](const Vec3& x) { return sample(f, x); }, p, g.h);
}

}  // namespace tanharm
