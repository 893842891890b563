#pragma once

// Discrete representations: unit-vector fields on cell-centered Cartesian
// grids masked to a ball or annulus, the scalar angle field of the
// equivariant reduction on a half-disk mesh, and a cylindrical sampling
// lattice used by the theta-dependent functionals.

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tanharm/geometry.hpp"

namespace tanharm {

enum class NodeClass : uint8_t { Exterior = 0, Interior = 1, Boundary = 2 };

// Cell-centered grid on [-R,R]^3 masked to {r_in <= |x| <= R}. Nodes within
// one spacing of either sphere are boundary-adjacent (cut-cell band).
struct BallGrid3 {
    int n = 0;
    double R = 1.0;
    double r_in = 0.0;
    double h = 0.0;

    BallGrid3() = default;
    BallGrid3(int n_, double R_, double r_inner = 0.0) : n(n_), R(R_), r_in(r_inner) {
        if (n_ < 4) throw std::invalid_argument("BallGrid3: n too small");
        if (!(R_ == 1.0 || R_ == 2.0)) throw std::invalid_argument("BallGrid3: R must be 1 or 2");
        if (r_inner < 0.0 || r_inner >= R_) throw std::invalid_argument("BallGrid3: bad r_in");
        h = 2.0 * R_ / n_;
    }

    double coord(int i) const { return -R + (i + 0.5) * h; }
    Vec3 node(int i, int j, int k) const { return {coord(i), coord(j), coord(k)}; }
    size_t index(int i, int j, int k) const {
        return (size_t(k) * size_t(n) + size_t(j)) * size_t(n) + size_t(i);
    }
    size_t size() const { return size_t(n) * size_t(n) * size_t(n); }

    bool inside(const Vec3& p) const {
        double r = p.norm();
        return r <= R && r >= r_in;
    }
    NodeClass classify(const Vec3& p) const {
        double r = p.norm();
        if (r > R || r < r_in) return NodeClass::Exterior;
        if (R - r < h) return NodeClass::Boundary;
        if (r_in > 0.0 && r - r_in < h) return NodeClass::Boundary;
        return NodeClass::Interior;
    }
    // Fraction of the node cell inside the domain, half-space approximation.
    double cut_fraction(const Vec3& p) const {
        double r = p.norm();
        double f = std::min(1.0, std::max(0.0, 0.5 + (R - r) / h));
        if (r_in > 0.0) f *= std::min(1.0, std::max(0.0, 0.5 + (r - r_in) / h));
        return f;
    }
};

// Sampled vector field on a BallGrid3. Exterior entries are kept zeroed.
struct Field3 {
    BallGrid3 grid;
    std::vector<Vec3> values;

    Field3() = default;
    explicit Field3(const BallGrid3& g) : grid(g), values(g.size()) {}

    Vec3& at(int i, int j, int k) { return values[grid.index(i, j, k)]; }
    const Vec3& at(int i, int j, int k) const { return values[grid.index(i, j, k)]; }

    template <class F>
    void for_each_masked(F&& f) const {
        for (int k = 0; k < grid.n; ++k)
            for (int j = 0; j < grid.n; ++j)
                for (int i = 0; i < grid.n; ++i) {
                    Vec3 p = grid.node(i, j, k);
                    if (grid.inside(p)) f(i, j, k, p);
                }
    }
};

inline Field3 field_from_closed_form(const std::function<Vec3(const Vec3&)>& fn,
                                     const BallGrid3& grid) {
    Field3 f(grid);
    f.for_each_masked([&](int i, int j, int k, const Vec3& p) { f.at(i, j, k) = fn(p); });
    return f;
}

// Extension across the unit sphere: u for |x| <= 1, A(x) u(x/|x|^2) outside.
inline Field3 extended_field(const std::function<Vec3(const Vec3&)>& u_fn, int n) {
    BallGrid3 g(n, 2.0, 0.0);
    Field3 f(g);
    f.for_each_masked([&](int i, int j, int k, const Vec3& p) {
        double r = p.norm();
        if (r <= 1.0)
            f.at(i, j, k) = u_fn(p);
        else
            f.at(i, j, k) = reflection_matrix(p) * u_fn(inversion(p));
    });
    return f;
}

// Trilinear sampling with mask-weighted renormalization near the rim. Exact
// at masked nodes and on multilinear functions over fully masked cells.
inline Vec3 sample(const Field3& f, const Vec3& x) {
    const BallGrid3& g = f.grid;
    double tx = (x.x + g.R) / g.h - 0.5;
    double ty = (x.y + g.R) / g.h - 0.5;
    double tz = (x.z + g.R) / g.h - 0.5;
    int i0 = std::min(std::max(int(std::floor(tx)), 0), g.n - 2);
    int j0 = std::min(std::max(int(std::floor(ty)), 0), g.n - 2);
    int k0 = std::min(std::max(int(std::floor(tz)), 0), g.n - 2);
    double fx = std::min(std::max(tx - i0, 0.0), 1.0);
    double fy = std::min(std::max(ty - j0, 0.0), 1.0);
    double fz = std::min(std::max(tz - k0, 0.0), 1.0);
    Vec3 acc{0, 0, 0};
    double wsum = 0.0;
    for (int dk = 0; dk < 2; ++dk)
        for (int dj = 0; dj < 2; ++dj)
            for (int di = 0; di < 2; ++di) {
                Vec3 p = g.node(i0 + di, j0 + dj, k0 + dk);
                if (!g.inside(p)) continue;
                double w = (di ? fx : 1.0 - fx) * (dj ? fy : 1.0 - fy) * (dk ? fz : 1.0 - fz);
                acc += f.at(i0 + di, j0 + dj, k0 + dk) * w;
                wsum += w;
            }
    if (wsum < 1e-12) throw std::domain_error("sample: point has no masked support");
    return acc / wsum;
}

// Normalizes every masked value; throws if a value is shorter than 1e-8.
inline Field3 project_unit(const Field3& f) {
    Field3 out = f;
    out.for_each_masked([&](int i, int j, int k, const Vec3&) {
        Vec3& v = out.at(i, j, k);
        double n = v.norm();
        if (n < 1e-8)
            throw std::domain_error("project_unit: near-zero value at node (" +
                                    std::to_string(i) + "," + std::to_string(j) + "," +
                                    std::to_string(k) + ")");
        v = v / n;
    });
    return out;
}

// Removes the normal component at boundary-adjacent nodes and renormalizes.
inline Field3 project_tangential(const Field3& f) {
    Field3 out = f;
    out.for_each_masked([&](int i, int j, int k, const Vec3& p) {
        if (out.grid.classify(p) != NodeClass::Boundary) return;
        Vec3 nu = normalized(p);
        Vec3& v = out.at(i, j, k);
        Vec3 t = v - nu * v.dot(nu);
        double tn = t.norm();
        if (tn < 1e-8)
            throw std::domain_error("project_tangential: value parallel to normal at node (" +
                                    std::to_string(i) + "," + std::to_string(j) + "," +
                                    std::to_string(k) + ")");
        v = t / tn;
    });
    return out;
}

inline double norm_defect(const Field3& f) {
    double d = 0.0;
    f.for_each_masked([&](int i, int j, int k, const Vec3&) {
        d = std::max(d, std::abs(f.at(i, j, k).norm() - 1.0));
    });
    return d;
}

// Max |v . nu| over boundary-adjacent nodes.
inline double tangency_residual(const Field3& f) {
    double d = 0.0;
    f.for_each_masked([&](int i, int j, int k, const Vec3& p) {
        if (f.grid.classify(p) != NodeClass::Boundary) return;
        d = std::max(d, std::abs(f.at(i, j, k).dot(normalized(p))));
    });
    return d;
}

// ---------------------------------------------------------------------------
// Half-disk mesh and the scalar reduction psi.

// Cell-centered nodes (rho_i, z_j) = ((i+1/2)/m, -1+(j+1/2)/m) inside the
// closed half-disk; no node sits on the axis rho = 0.
struct HalfDiskMesh {
    int m = 0;
    double h = 0.0;
    int nrho = 0;
    int nz = 0;
    std::vector<uint8_t> inside_mask;  // 1 inside, 0 outside
    std::vector<uint8_t> bc_mask;      // 1 where the Dirichlet arc condition applies

    HalfDiskMesh() = default;
    explicit HalfDiskMesh(int m_) : m(m_), h(1.0 / m_), nrho(m_), nz(2 * m_) {
        if (m_ < 4) throw std::invalid_argument("HalfDiskMesh: m too small");
        inside_mask.assign(size_t(nrho) * size_t(nz), 0);
        bc_mask.assign(size_t(nrho) * size_t(nz), 0);
        auto in_disk = [&](int i, int j) {
            if (i < 0 || j < 0 || i >= nrho || j >= nz) return false;
            double r = rho(i), zz = z(j);
            return r * r + zz * zz <= 1.0;
        };
        for (int j = 0; j < nz; ++j)
            for (int i = 0; i < nrho; ++i) {
                if (!in_disk(i, j)) continue;
                inside_mask[index(i, j)] = 1;
                bool rim = !in_disk(i + 1, j) || !in_disk(i, j + 1) || !in_disk(i, j - 1);
                if (rim) bc_mask[index(i, j)] = 1;
            }
    }

    double rho(int i) const { return (i + 0.5) * h; }
    double z(int j) const { return -1.0 + (j + 0.5) * h; }
    size_t index(int i, int j) const { return size_t(j) * size_t(nrho) + size_t(i); }
    bool inside(int i, int j) const {
        return i >= 0 && j >= 0 && i < nrho && j < nz && inside_mask[index(i, j)];
    }
    bool is_bc(int i, int j) const { return inside(i, j) && bc_mask[index(i, j)]; }
    // Fraction of the node cell inside the disk (rim ramp).
    double cut_fraction(int i, int j) const {
        double r = std::hypot(rho(i), z(j));
        return std::min(1.0, std::max(0.0, 0.5 + (1.0 - r) / h));
    }
};

enum class PsiBranch { Minus, Plus };  // psi = varphi -/+ pi/2 on the arc

struct PsiField {
    HalfDiskMesh mesh;
    std::vector<double> psi;

    PsiField() = default;
    explicit PsiField(const HalfDiskMesh& m_) : mesh(m_), psi(m_.inside_mask.size(), 0.0) {}
    explicit PsiField(int m_) : PsiField(HalfDiskMesh(m_)) {}

    double& at(int i, int j) { return psi[mesh.index(i, j)]; }
    double at(int i, int j) const { return psi[mesh.index(i, j)]; }
};

// varphi is the colatitude of the node direction, measured from +e3.
inline double boundary_psi_value(double rho, double z, PsiBranch branch) {
    double varphi = std::atan2(rho, z);
    return branch == PsiBranch::Minus ? varphi - 0.5 * kPi : varphi + 0.5 * kPi;
}

inline void apply_psi_boundary_condition(PsiField& p, PsiBranch branch = PsiBranch::Minus) {
    for (int j = 0; j < p.mesh.nz; ++j)
        for (int i = 0; i < p.mesh.nrho; ++i)
            if (p.mesh.is_bc(i, j))
                p.at(i, j) = boundary_psi_value(p.mesh.rho(i), p.mesh.z(j), branch);
}

inline PsiField psi_from_closed_form(const std::function<double(double, double)>& fn, int m,
                                     bool set_bc = true, PsiBranch branch = PsiBranch::Minus) {
    PsiField p(m);
    for (int j = 0; j < p.mesh.nz; ++j)
        for (int i = 0; i < p.mesh.nrho; ++i)
            if (p.mesh.inside(i, j)) p.at(i, j) = fn(p.mesh.rho(i), p.mesh.z(j));
    if (set_bc) apply_psi_boundary_condition(p, branch);
    return p;
}

// Bilinear sampling of psi with mask-weighted renormalization; queries must
// stay within the closed half-disk (plus a one-cell margin).
inline double sample_psi(const PsiField& p, double rho, double z) {
    const HalfDiskMesh& m = p.mesh;
    double rr = std::hypot(rho, z);
    if (rho < -1e-12 || rr > 1.0 + m.h)
        throw std::domain_error("sample_psi: point outside half-disk hull");
    double tx = rho / m.h - 0.5;
    double ty = (z + 1.0) / m.h - 0.5;
    int i0 = std::min(std::max(int(std::floor(tx)), 0), m.nrho - 2);
    int j0 = std::min(std::max(int(std::floor(ty)), 0), m.nz - 2);
    double fx = std::min(std::max(tx - i0, 0.0), 1.0);
    double fy = std::min(std::max(ty - j0, 0.0), 1.0);
    double acc = 0.0, wsum = 0.0;
    for (int dj = 0; dj < 2; ++dj)
        for (int di = 0; di < 2; ++di) {
            if (!m.inside(i0 + di, j0 + dj)) continue;
            double w = (di ? fx : 1.0 - fx) * (dj ? fy : 1.0 - fy);
            acc += p.at(i0 + di, j0 + dj) * w;
            wsum += w;
        }
    if (wsum < 1e-12) throw std::domain_error("sample_psi: no masked support");
    return acc / wsum;
}

// u = sin(psi) e_rho + cos(psi) e_z; equivariant with u_theta = 0 by
// construction. Axis nodes use the flagged frame (theta = 0).
inline Field3 lift_equivariant(const PsiField& p, const BallGrid3& grid) {
    Field3 f(grid);
    f.for_each_masked([&](int i, int j, int k, const Vec3& x) {
        CylCoords c = to_cylindrical(x);
        double ps = sample_psi(p, c.rho, c.z);
        double sp = std::sin(ps), cp = std::cos(ps);
        double ct = std::cos(c.theta), st = std::sin(c.theta);
        f.at(i, j, k) = Vec3{sp * ct, sp * st, cp};
    });
    return f;
}

// Closed-form sampler for the same lift; exactly equivariant as a map.
inline std::function<Vec3(const Vec3&)> psi_lift_sampler(const PsiField& p) {
    return [p](const Vec3& x) {
        CylCoords c = to_cylindrical(x);
        double ps = sample_psi(p, c.rho, c.z);
        double sp = std::sin(ps), cp = std::cos(ps);
        double ct = std::cos(c.theta), st = std::sin(c.theta);
        return Vec3{sp * ct, sp * st, cp};
    };
}

// ---------------------------------------------------------------------------
// Cylindrical sampling lattice.

// Cylindrical coefficients (u_rho, u_theta, u_z) on nodes
// (rho_a, theta_b, z_c), theta uniform on [0, 2pi). Used for the
// theta-dependent energies and the dyadic symmetrization, where reflection
// and periodization act as exact index maps.
struct CylField {
    int nrho = 0, ntheta = 0, nz = 0;
    double h = 0.0;  // rho and z spacing
    std::vector<double> urho, utheta, uz;

    CylField() = default;
    CylField(int nrho_, int ntheta_, int nz_, double h_)
        : nrho(nrho_), ntheta(ntheta_), nz(nz_), h(h_) {
        size_t sz = size_t(nrho) * size_t(ntheta) * size_t(nz);
        urho.assign(sz, 0.0);
        utheta.assign(sz, 0.0);
        uz.assign(sz, 0.0);
    }

    size_t index(int a, int b, int c) const {
        return (size_t(c) * size_t(ntheta) + size_t(b)) * size_t(nrho) + size_t(a);
    }
    double rho(int a) const { return (a + 0.5) * h; }
    double theta(int b) const { return kTwoPi * b / ntheta; }
    double z(int c) const { return -1.0 + (c + 0.5) * h; }
    bool inside(int a, int c) const {
        double r = rho(a), zz = z(c);
        return r * r + zz * zz <= 1.0;
    }
    double cut_fraction(int a, int c) const {
        double r = std::hypot(rho(a), z(c));
        return std::min(1.0, std::max(0.0, 0.5 + (1.0 - r) / h));
    }
    double dtheta() const { return kTwoPi / ntheta; }
};

// Samples a field-like object (Field3 or closed form) onto the lattice.
template <class Sampler>
inline CylField cyl_from_sampler(Sampler&& smp, int nrho, int ntheta, int nz, double h) {
    CylField c(nrho, ntheta, nz, h);
    for (int cc = 0; cc < nz; ++cc)
        for (int b = 0; b < ntheta; ++b)
            for (int a = 0; a < nrho; ++a) {
                if (!c.inside(a, cc)) continue;
                double th = c.theta(b);
                Vec3 x{c.rho(a) * std::cos(th), c.rho(a) * std::sin(th), c.z(cc)};
                Vec3 v = smp(x);
                double ct = std::cos(th), st = std::sin(th);
                size_t id = c.index(a, b, cc);
                c.urho[id] = v.x * ct + v.y * st;
                c.utheta[id] = -v.x * st + v.y * ct;
                c.uz[id] = v.z;
            }
    return c;
}

inline CylField cyl_from_field(const Field3& f, int ntheta) {
    int nrho = f.grid.n / 2, nz = f.grid.n;
    return cyl_from_sampler([&f](const Vec3& x) { return sample(f, x); }, nrho, ntheta, nz,
                            f.grid.h);
}

// Reassembles a Field3 from lattice coefficients (bilinear in rho,z; linear
// periodic in theta), then restores unit norm and tangency exactly.
inline Field3 cyl_to_field(const CylField& c, const BallGrid3& grid) {
    Field3 f(grid);
    f.for_each_masked([&](int i, int j, int k, const Vec3& x) {
        CylCoords cyl = to_cylindrical(x);
        double tr = cyl.rho / c.h - 0.5;
        double tz = (cyl.z + 1.0) / c.h - 0.5;
        int a0 = std::min(std::max(int(std::floor(tr)), 0), c.nrho - 2);
        int c0 = std::min(std::max(int(std::floor(tz)), 0), c.nz - 2);
        double fr = std::min(std::max(tr - a0, 0.0), 1.0);
        double fz = std::min(std::max(tz - c0, 0.0), 1.0);
        double tt = cyl.theta / c.dtheta();
        int b0 = int(std::floor(tt)) % c.ntheta;
        int b1 = (b0 + 1) % c.ntheta;
        double ft = tt - std::floor(tt);
        double ur = 0, ut = 0, uzv = 0, wsum = 0;
        for (int dc = 0; dc < 2; ++dc)
            for (int da = 0; da < 2; ++da) {
                if (!c.inside(a0 + da, c0 + dc)) continue;
                double w = (da ? fr : 1.0 - fr) * (dc ? fz : 1.0 - fz);
                size_t ia = c.index(a0 + da, b0, c0 + dc);
                size_t ib = c.index(a0 + da, b1, c0 + dc);
                ur += w * ((1.0 - ft) * c.urho[ia] + ft * c.urho[ib]);
                ut += w * ((1.0 - ft) * c.utheta[ia] + ft * c.utheta[ib]);
                uzv += w * ((1.0 - ft) * c.uz[ia] + ft * c.uz[ib]);
                wsum += w;
            }
        if (wsum < 1e-12) throw std::domain_error("cyl_to_field: no lattice support");
        ur /= wsum; ut /= wsum; uzv /= wsum;
        double ct = std::cos(cyl.theta), st = std::sin(cyl.theta);
        f.at(i, j, k) = Vec3{ur * ct - ut * st, ur * st + ut * ct, uzv};
    });
    return project_tangential(project_unit(f));
}

// Max |u . e_theta| over boundary-sphere samples; precondition probe for the
// circle averaging.
template <class Sampler>
inline double boundary_utheta_residual(Sampler&& smp, double radius, int nphi = 64,
                                       int ntheta = 128) {
    double worst = 0.0;
    for (int ip = 1; ip < nphi; ++ip) {
        double phi = kPi * ip / nphi;
        for (int it = 0; it < ntheta; ++it) {
            double th = kTwoPi * it / ntheta;
            Vec3 x{radius * std::sin(phi) * std::cos(th), radius * std::sin(phi) * std::sin(th),
                   radius * std::cos(phi)};
            Vec3 v = smp(x);
            double ut = -v.x * std::sin(th) + v.y * std::cos(th);
            worst = std::max(worst, std::abs(ut));
        }
    }
    return worst;
}

struct ThetaAverageOptions {
    double boundary_tolerance = 0.05;  // on |u . e_theta| at the rim
    double uz_sign = 1.0;              // branch of the compensated z component
    int ntheta = 0;                    // 0: use 4n circle samples
};

// Circle average of u_rho with compensated u_z = sign * sqrt(1 - avg^2);
// output is equivariant with u_theta = 0.
inline Field3 theta_average(const Field3& f, const ThetaAverageOptions& opt = {}) {
    const BallGrid3& g = f.grid;
    int ntheta = opt.ntheta > 0 ? opt.ntheta : 4 * g.n;
    double rim = boundary_utheta_residual([&f](const Vec3& x) { return sample(f, x); },
                                          g.R - 1.5 * g.h);
    if (rim > opt.boundary_tolerance)
        throw std::invalid_argument("theta_average: u_theta on the boundary sphere exceeds " +
                                    std::to_string(opt.boundary_tolerance));
    // circle averages of u_rho on a (rho, z) table
    int nrho = g.n / 2, nz = g.n;
    std::vector<double> avg(size_t(nrho) * size_t(nz), 0.0);
    std::vector<uint8_t> have(size_t(nrho) * size_t(nz), 0);
    for (int c = 0; c < nz; ++c)
        for (int a = 0; a < nrho; ++a) {
            double rho = (a + 0.5) * g.h, zz = -1.0 + (c + 0.5) * g.h;
            if (rho * rho + zz * zz > 1.0) continue;
            double s = 0.0;
            for (int b = 0; b < ntheta; ++b) {
                double th = kTwoPi * b / ntheta;
                Vec3 x{rho * std::cos(th), rho * std::sin(th), zz};
                Vec3 v = sample(f, x);
                s += v.x * std::cos(th) + v.y * std::sin(th);
            }
            double m = s / ntheta;
            if (std::abs(m) > 1.0 + 1e-6)
                throw std::domain_error("theta_average: |circle average| exceeds 1 + 1e-6");
            avg[size_t(c) * size_t(nrho) + size_t(a)] = std::min(1.0, std::max(-1.0, m));
            have[size_t(c) * size_t(nrho) + size_t(a)] = 1;
        }
    auto avg_at = [&](double rho, double zz) {
        double tr = rho / g.h - 0.5, tz = (zz + 1.0) / g.h - 0.5;
        int a0 = std::min(std::max(int(std::floor(tr)), 0), nrho - 2);
        int c0 = std::min(std::max(int(std::floor(tz)), 0), nz - 2);
        double fr = std::min(std::max(tr - a0, 0.0), 1.0);
        double fz = std::min(std::max(tz - c0, 0.0), 1.0);
        double acc = 0, wsum = 0;
        for (int dc = 0; dc < 2; ++dc)
            for (int da = 0; da < 2; ++da) {
                size_t id = size_t(c0 + dc) * size_t(nrho) + size_t(a0 + da);
                if (!have[id]) continue;
                double w = (da ? fr : 1.0 - fr) * (dc ? fz : 1.0 - fz);
                acc += avg[id] * w;
                wsum += w;
            }
        if (wsum < 1e-12) throw std::domain_error("theta_average: no table support");
        return acc / wsum;
    };
    Field3 out(g);
    out.for_each_masked([&](int i, int j, int k, const Vec3& x) {
        CylCoords c = to_cylindrical(x);
        double ur = std::min(1.0, std::max(-1.0, avg_at(c.rho, c.z)));
        double uzv = opt.uz_sign * std::sqrt(std::max(0.0, 1.0 - ur * ur));
        double ct = std::cos(c.theta), st = std::sin(c.theta);
        out.at(i, j, k) = Vec3{ur * ct, ur * st, uzv};
    });
    return out;
}

}  // namespace tanharm
