#pragma once

// Constrained minimization: the 2D reduced solver for the angle field and
// the 3D renormalized gradient flow with tangential projection.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "tanharm/bounds.hpp"
#include "tanharm/energy.hpp"
#include "tanharm/fields.hpp"

namespace tanharm {

struct SolveParams {
    int max_iters = 20000;
    double step = 0.1;                 // initial trial step
    double backtrack = 0.5;            // step shrink factor in the Armijo loop
    double grad_tolerance = 1e-7;      // on the l2 norm of the discrete gradient
    double energy_tolerance = 1e-12;   // relative stagnation threshold
    double projection_tolerance = 1e-6;
    unsigned seed = 0;
    bool barzilai_borwein = true;      // spectral trial step, Armijo safeguarded

    void validate() const {
        if (!(step > 0.0) || !(grad_tolerance > 0.0) || !(energy_tolerance > 0.0) ||
            !(projection_tolerance > 0.0) || !(backtrack > 0.0 && backtrack < 1.0))
            throw std::invalid_argument("SolveParams: step and tolerances must be positive");
    }
};

struct SolveTrace {
    std::vector<double> energy;
    std::vector<double> grad_norm;
    std::vector<double> tangency_residual;
    std::string termination = "max_iters";
    int iterations = 0;
    bool clamp_active = false;

    void record(double e, double g, double t) {
        energy.push_back(e);
        grad_norm.push_back(g);
        tangency_residual.push_back(t);
    }
};

struct SolveError : std::runtime_error {
    SolveTrace trace;
    SolveError(const std::string& what, SolveTrace tr)
        : std::runtime_error(what), trace(std::move(tr)) {}
};

// max / min truncations at -pi and pi; both can only lower the reduced
// energy (the gradient vanishes on the plateau and sin^2 does not grow).
inline std::pair<PsiField, PsiField> clamp_competitors(const PsiField& p) {
    PsiField lo = p, hi = p;
    for (size_t i = 0; i < p.psi.size(); ++i) {
        lo.psi[i] = std::max(p.psi[i], -kPi);
        hi.psi[i] = std::min(p.psi[i], kPi);
    }
    return {lo, hi};
}

struct ReducedSolution {
    PsiField psi;
    SolveTrace trace;
    double energy = 0.0;
};

// Gradient descent on the reduced energy. Dirichlet data on the boundary arc
// stays fixed; the axis side carries no constraint (the sin^2/rho^2 term
// penalizes nonzero angles there by itself). Trial steps follow a
// Barzilai-Borwein estimate clipped to [1e-12, 1e3] and are accepted only if
// the energy decreases (Armijo backtracking); the recorded energy sequence
// is non-increasing.
inline ReducedSolution solve_reduced(const PsiField& init, const SolveParams& params) {
    params.validate();
    const HalfDiskMesh& m = init.mesh;
    PsiField cur = init;
    SolveTrace trace;
    double e_cur = reduced_energy(cur);
    if (!std::isfinite(e_cur)) throw SolveError("solve_reduced: non-finite initial energy", trace);
    std::vector<double> grad = reduced_energy_gradient(cur);
    std::vector<double> prev_grad, prev_step;
    double tau = params.step;

    auto grad_norm = [&](const std::vector<double>& g) {
        double s = 0.0;
        for (double v : g) s += v * v;
        return std::sqrt(s);
    };

    double gn = grad_norm(grad);
    trace.record(e_cur, gn, 0.0);
    int it = 0;
    for (; it < params.max_iters; ++it) {
        if (gn < params.grad_tolerance) {
            trace.termination = "grad_tolerance";
            break;
        }
        double trial = tau;
        if (params.barzilai_borwein && !prev_grad.empty()) {
            double sy = 0.0, yy = 0.0;
            for (size_t a = 0; a < grad.size(); ++a) {
                double y = grad[a] - prev_grad[a];
                sy += prev_step[a] * y;
                yy += y * y;
            }
            if (yy > 0.0 && sy > 0.0) trial = std::min(std::max(sy / yy, 1e-12), 1e3);
        }
        PsiField next = cur;
        double e_next = 0.0;
        bool accepted = false;
        while (trial >= 1e-12) {
            for (size_t a = 0; a < grad.size(); ++a) next.psi[a] = cur.psi[a] - trial * grad[a];
            e_next = reduced_energy(next);
            if (!std::isfinite(e_next)) throw SolveError("solve_reduced: non-finite energy", trace);
            if (e_next <= e_cur) {
                accepted = true;
                break;
            }
            trial *= params.backtrack;
        }
        if (!accepted) {
            trace.termination = "stagnation";  // step underflow below 1e-12
            break;
        }
        prev_step.assign(grad.size(), 0.0);
        for (size_t a = 0; a < grad.size(); ++a) prev_step[a] = next.psi[a] - cur.psi[a];
        prev_grad = grad;
        double rel_drop = (e_cur - e_next) / std::max(1.0, std::abs(e_cur));
        cur = next;
        e_cur = e_next;
        grad = reduced_energy_gradient(cur);
        gn = grad_norm(grad);
        tau = trial;
        trace.record(e_cur, gn, 0.0);
        if (rel_drop < params.energy_tolerance && gn < 1e3 * params.grad_tolerance) {
            trace.termination = "stagnation";
            ++it;
            break;
        }
    }
    trace.iterations = it;

    // post-hoc truncation to [-pi, pi]; cannot increase the energy
    auto [lo, hi] = clamp_competitors(cur);
    PsiField clamped = lo;
    for (size_t a = 0; a < clamped.psi.size(); ++a)
        clamped.psi[a] = std::min(clamped.psi[a], kPi);
    double e_clamped = reduced_energy(clamped);
    if (e_clamped < e_cur - 1e-15) {
        trace.clamp_active = true;
        cur = clamped;
        e_cur = e_clamped;
    }
    (void)hi;
    return {std::move(cur), std::move(trace), e_cur};
}

// Linear extrapolation of psi onto the axis rho = 0 from the first two
// columns; used to probe the emergent axis value.
inline double psi_axis_value(const PsiField& p, double z) {
    const HalfDiskMesh& m = p.mesh;
    int j = std::min(std::max(int(std::floor((z + 1.0) / m.h - 0.5)), 0), m.nz - 1);
    if (!m.inside(0, j) || !m.inside(1, j))
        throw std::domain_error("psi_axis_value: axis columns missing at this z");
    return 1.5 * p.at(0, j) - 0.5 * p.at(1, j);
}

// Bilinear prolongation onto a finer mesh, re-imposing the arc condition.
inline PsiField prolong_psi(const PsiField& coarse, int m_fine,
                            PsiBranch branch = PsiBranch::Minus) {
    PsiField fine(m_fine);
    for (int j = 0; j < fine.mesh.nz; ++j)
        for (int i = 0; i < fine.mesh.nrho; ++i) {
            if (!fine.mesh.inside(i, j)) continue;
            double rho = fine.mesh.rho(i), z = fine.mesh.z(j);
            double rr = std::hypot(rho, z);
            if (rr > 1.0) {
                rho *= (1.0 - 1e-12) / rr;
                z *= (1.0 - 1e-12) / rr;
            }
            fine.at(i, j) = sample_psi(coarse, rho, z);
        }
    apply_psi_boundary_condition(fine, branch);
    return fine;
}

inline PsiField random_psi(int m, unsigned seed, double amplitude = 0.5,
                           PsiBranch branch = PsiBranch::Minus) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> dist(-amplitude, amplitude);
    PsiField p(m);
    for (int j = 0; j < p.mesh.nz; ++j)
        for (int i = 0; i < p.mesh.nrho; ++i)
            if (p.mesh.inside(i, j)) p.at(i, j) = dist(rng);
    apply_psi_boundary_condition(p, branch);
    return p;
}

// ---------------------------------------------------------------------------
// 3D projected gradient flow.

struct FullSolution {
    Field3 field;
    SolveTrace trace;
    double energy = 0.0;  // final edge-based objective
};

// v <- v - tau grad E_h(v), then tangential projection, then normalization;
// a step is accepted only if the discrete objective decreases.
inline FullSolution solve_full3d(const Field3& init, const SolveParams& params) {
    params.validate();
    Field3 cur = project_unit(project_tangential(init));
    SolveTrace trace;
    double e_cur = edge_dirichlet_energy(cur);
    if (!std::isfinite(e_cur)) throw SolveError("solve_full3d: non-finite initial energy", trace);
    std::vector<Vec3> grad = edge_dirichlet_gradient(cur);
    std::vector<Vec3> prev_grad, prev_step;
    double tau = params.step;

    auto gnorm = [&](const std::vector<Vec3>& g) {
        double s = 0.0;
        for (const Vec3& v : g) s += v.norm2();
        return std::sqrt(s);
    };
    auto step_to = [&](double t, const Field3& from, const std::vector<Vec3>& g) {
        Field3 next = from;
        next.for_each_masked([&](int i, int j, int k, const Vec3&) {
            next.at(i, j, k) -= g[next.grid.index(i, j, k)] * t;
        });
        return project_unit(project_tangential(next));
    };

    double gn = gnorm(grad);
    trace.record(e_cur, gn, tangency_residual(cur));
    int it = 0;
    for (; it < params.max_iters; ++it) {
        if (gn < params.grad_tolerance) {
            trace.termination = "grad_tolerance";
            break;
        }
        double trial = tau;
        if (params.barzilai_borwein && !prev_grad.empty()) {
            double sy = 0.0, yy = 0.0;
            for (size_t a = 0; a < grad.size(); ++a) {
                Vec3 y = grad[a] - prev_grad[a];
                sy += prev_step[a].dot(y);
                yy += y.dot(y);
            }
            if (yy > 0.0 && sy > 0.0) trial = std::min(std::max(sy / yy, 1e-12), 1e2);
        }
        Field3 next;
        double e_next = 0.0;
        bool accepted = false;
        while (trial >= 1e-12) {
            next = step_to(trial, cur, grad);
            e_next = edge_dirichlet_energy(next);
            if (!std::isfinite(e_next)) throw SolveError("solve_full3d: non-finite energy", trace);
            if (e_next <= e_cur) {
                accepted = true;
                break;
            }
            trial *= params.backtrack;
        }
        if (!accepted) {
            trace.termination = "stagnation";
            break;
        }
        prev_step.assign(grad.size(), Vec3{});
        for (size_t a = 0; a < grad.size(); ++a) prev_step[a] = next.values[a] - cur.values[a];
        prev_grad = grad;
        double rel_drop = (e_cur - e_next) / std::max(1.0, std::abs(e_cur));
        cur = std::move(next);
        e_cur = e_next;
        grad = edge_dirichlet_gradient(cur);
        gn = gnorm(grad);
        tau = trial;
        trace.record(e_cur, gn, tangency_residual(cur));
        if (rel_drop < params.energy_tolerance) {
            trace.termination = "stagnation";
            ++it;
            break;
        }
    }
    trace.iterations = it;
    return {std::move(cur), std::move(trace), e_cur};
}

}  // namespace tanharm
