#pragma once

#include <cstdio>
#include <cstdlib>
#include <limits>
#include <string>

#include "retrocap/matrix.hpp"

namespace retrocap {

// [[Re m, -Im m], [Im m, Re m]]; PSD iff m is, every eigenvalue doubled.
inline ComplexMatrix hermitian_to_real_embedding(const ComplexMatrix& m) {
    if (!m.is_hermitian(1e-10 * std::max(1.0, m.max_abs())))
        throw std::invalid_argument("hermitian_to_real_embedding: input not Hermitian");
    const std::size_t n = m.rows();
    ComplexMatrix r(2 * n, 2 * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double re = m(i, j).real();
            const double im = m(i, j).imag();
            r(i, j) = re;
            r(i + n, j + n) = re;
            r(i, j + n) = -im;
            r(i + n, j) = im;
        }
    return r;
}

// Left inverse of the embedding, averaging over its symmetry.
inline ComplexMatrix project_from_real_embedding(const ComplexMatrix& m) {
    if (!m.is_square() || m.rows() % 2 != 0)
        throw std::invalid_argument("project_from_real_embedding: even side required");
    const std::size_t n = m.rows() / 2;
    ComplexMatrix r(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double re = 0.5 * (m(i, j).real() + m(i + n, j + n).real());
            const double im = 0.5 * (m(i + n, j).real() - m(i, j + n).real());
            r(i, j) = complexd(re, im);
        }
    return r;
}

enum class SdpSense { minimize, maximize };
enum class SdpStatus { optimal, infeasible, unbounded, max_iterations };

// Standard-form semidefinite program over Hermitian blocks:
//   optimize  sum_b <objective[b], X_b>
//   s.t.      sum_b <constraints[i][b], X_b> = rhs[i],  X_b >= 0.
struct SdpProblem {
    std::vector<int> block_sides;
    std::vector<ComplexMatrix> objective;                // one per block
    std::vector<std::vector<ComplexMatrix>> constraints; // [constraint][block]
    std::vector<double> rhs;
    SdpSense sense = SdpSense::minimize;
};

struct SdpSolveOptions {
    double gap_tol = 1e-8;       // relative duality gap stop
    double residual_tol = 1e-9;  // relative primal/dual residual stop
    int max_iterations = 200;
    double step_fraction = 0.98;
};

struct SdpSolution {
    SdpStatus status = SdpStatus::max_iterations;
    double primal_value = 0.0;
    double dual_value = 0.0;
    std::vector<ComplexMatrix> primal_blocks;
    std::vector<ComplexMatrix> dual_blocks;
    std::vector<double> dual_multipliers;
    double gap = 0.0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    int iterations = 0;
};

namespace sdp_detail {

struct Scaling {
    ComplexMatrix d;      // W^{1/2}
    ComplexMatrix d_inv;  // W^{-1/2}
    ComplexMatrix w;      // NT scaling, W Z W = X
    EigResult v_eig;      // spectrum of V = D^{-1} X D^{-1} = D Z D
};

inline ComplexMatrix from_eig(const EigResult& e, double (*f)(double)) {
    const std::size_t n = e.values.size();
    ComplexMatrix r(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        const double fv = f(e.values[k]);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                r(i, j) += fv * e.vectors(i, k) * std::conj(e.vectors(j, k));
    }
    return r;
}

inline Scaling nt_scaling(const ComplexMatrix& x, const ComplexMatrix& z) {
    const auto ex = hermitian_eig(x);
    const auto x_half = from_eig(ex, [](double t) { return std::sqrt(std::max(t, 1e-300)); });
    const auto m = x_half * z * x_half;
    const auto em = hermitian_eig(m);
    const auto m_isqrt = from_eig(em, [](double t) { return 1.0 / std::sqrt(std::max(t, 1e-300)); });
    Scaling s;
    s.w = x_half * m_isqrt * x_half;
    const auto ew = hermitian_eig(s.w);
    s.d = from_eig(ew, [](double t) { return std::sqrt(std::max(t, 1e-300)); });
    s.d_inv = from_eig(ew, [](double t) { return 1.0 / std::sqrt(std::max(t, 1e-300)); });
    auto v = s.d_inv * x * s.d_inv;
    // symmetrize against roundoff before the spectral solve
    v = (v + v.adjoint()) * complexd(0.5, 0.0);
    s.v_eig = hermitian_eig(v);
    return s;
}

// Largest alpha in (0, cap] with X + alpha * dX >= 0, given X = x_half^2.
inline double max_step(const EigResult& x_eig, const ComplexMatrix& dx, double cap) {
    const auto x_isqrt = from_eig(x_eig, [](double t) { return 1.0 / std::sqrt(std::max(t, 1e-300)); });
    auto s = x_isqrt * dx * x_isqrt;
    s = (s + s.adjoint()) * complexd(0.5, 0.0);
    const double lam_min = hermitian_eig(s).values.back();
    if (lam_min >= -1e-14) return cap;
    return std::min(cap, -1.0 / lam_min);
}

// Cholesky solve of the (dense, symmetric PD) Schur system with one round of
// iterative refinement; tiny escalating jitter if the factorization fails.
class SchurSolver {
public:
    explicit SchurSolver(std::vector<std::vector<double>> m) : a_(std::move(m)), n_(a_.size()) {}

    bool factor() {
        double jitter = 0.0;
        for (int attempt = 0; attempt < 4; ++attempt) {
            l_ = a_;
            if (jitter > 0.0)
                for (std::size_t i = 0; i < n_; ++i) l_[i][i] += jitter;
            if (cholesky_in_place()) return true;
            double scale = 1.0;
            for (std::size_t i = 0; i < n_; ++i) scale = std::max(scale, std::abs(a_[i][i]));
            jitter = (jitter == 0.0) ? 1e-14 * scale : jitter * 100.0;
        }
        return false;
    }

    std::vector<double> solve(const std::vector<double>& rhs) const {
        auto x = substitute(rhs);
        // one refinement pass
        std::vector<double> r(n_, 0.0);
        for (std::size_t i = 0; i < n_; ++i) {
            double s = rhs[i];
            for (std::size_t j = 0; j < n_; ++j) s -= a_[i][j] * x[j];
            r[i] = s;
        }
        const auto dx = substitute(r);
        for (std::size_t i = 0; i < n_; ++i) x[i] += dx[i];
        return x;
    }

private:
    bool cholesky_in_place() {
        for (std::size_t j = 0; j < n_; ++j) {
            double d = l_[j][j];
            for (std::size_t k = 0; k < j; ++k) d -= l_[j][k] * l_[j][k];
            if (d <= 0.0 || !std::isfinite(d)) return false;
            l_[j][j] = std::sqrt(d);
            for (std::size_t i = j + 1; i < n_; ++i) {
                double s = l_[i][j];
                for (std::size_t k = 0; k < j; ++k) s -= l_[i][k] * l_[j][k];
                l_[i][j] = s / l_[j][j];
            }
        }
        return true;
    }

    std::vector<double> substitute(const std::vector<double>& rhs) const {
        std::vector<double> y(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            double s = rhs[i];
            for (std::size_t k = 0; k < i; ++k) s -= l_[i][k] * y[k];
            y[i] = s / l_[i][i];
        }
        for (std::size_t i = n_; i-- > 0;) {
            double s = y[i];
            for (std::size_t k = i + 1; k < n_; ++k) s -= l_[k][i] * y[k];
            y[i] = s / l_[i][i];
        }
        return y;
    }

    std::vector<std::vector<double>> a_;
    std::vector<std::vector<double>> l_;
    std::size_t n_;
};

}  // namespace sdp_detail

// Primal-dual path-following interior point method with Nesterov-Todd scaling
// and a Mehrotra predictor-corrector step. Complex Hermitian data is solved
// through the real symmetric embedding; values are reported in the complex
// domain (embedded objectives are halved).
inline SdpSolution solve_sdp(const SdpProblem& problem, const SdpSolveOptions& options = {}) {
    using namespace sdp_detail;

    const std::size_t nblocks = problem.block_sides.size();
    const std::size_t m = problem.constraints.size();
    if (nblocks == 0) throw std::invalid_argument("solve_sdp: no blocks");
    if (problem.objective.size() != nblocks)
        throw std::invalid_argument("solve_sdp: objective/block count mismatch");
    if (problem.rhs.size() != m) throw std::invalid_argument("solve_sdp: rhs/constraint mismatch");
    for (const auto& row : problem.constraints)
        if (row.size() != nblocks)
            throw std::invalid_argument("solve_sdp: constraint row/block count mismatch");
    for (std::size_t b = 0; b < nblocks; ++b) {
        const double scale = std::max(1.0, problem.objective[b].max_abs());
        if (!problem.objective[b].is_hermitian(1e-10 * scale))
            throw std::invalid_argument("solve_sdp: objective block not Hermitian");
        for (const auto& row : problem.constraints) {
            if (!row[b].is_hermitian(1e-10 * std::max(1.0, row[b].max_abs())))
                throw std::invalid_argument("solve_sdp: constraint block not Hermitian");
        }
    }
    for (double v : problem.rhs)
        if (!std::isfinite(v)) throw std::invalid_argument("solve_sdp: rhs not finite");

    // Detect complex data; embed if needed.
    bool complex_data = false;
    auto has_imag = [](const ComplexMatrix& mm) {
        for (const auto& v : mm.data())
            if (v.imag() != 0.0) return true;
        return false;
    };
    for (std::size_t b = 0; b < nblocks && !complex_data; ++b) {
        if (has_imag(problem.objective[b])) complex_data = true;
        for (std::size_t i = 0; i < m && !complex_data; ++i)
            if (has_imag(problem.constraints[i][b])) complex_data = true;
    }

    const double sense_sign = (problem.sense == SdpSense::maximize) ? -1.0 : 1.0;
    const double value_scale = complex_data ? 0.5 : 1.0;

    std::vector<ComplexMatrix> c(nblocks);
    std::vector<std::vector<ComplexMatrix>> a(m, std::vector<ComplexMatrix>(nblocks));
    std::vector<double> b_vec(problem.rhs);
    for (std::size_t b = 0; b < nblocks; ++b) {
        c[b] = complex_data ? hermitian_to_real_embedding(problem.objective[b])
                            : problem.objective[b];
        if (sense_sign < 0) c[b] = c[b] * complexd(-1.0, 0.0);
        for (std::size_t i = 0; i < m; ++i)
            a[i][b] = complex_data ? hermitian_to_real_embedding(problem.constraints[i][b])
                                   : problem.constraints[i][b];
    }
    if (complex_data)
        for (auto& v : b_vec) v *= 2.0;

    std::vector<int> sides(nblocks);
    int total_dim = 0;
    for (std::size_t b = 0; b < nblocks; ++b) {
        sides[b] = static_cast<int>(c[b].rows());
        total_dim += sides[b];
    }

    double data_max = 0.0;
    for (std::size_t b = 0; b < nblocks; ++b) {
        data_max = std::max(data_max, c[b].max_abs());
        for (std::size_t i = 0; i < m; ++i) data_max = std::max(data_max, a[i][b].max_abs());
    }
    for (double v : b_vec) data_max = std::max(data_max, std::abs(v));
    const double init = 1.0 + data_max;

    std::vector<ComplexMatrix> x(nblocks), z(nblocks);
    for (std::size_t b = 0; b < nblocks; ++b) {
        x[b] = ComplexMatrix::identity(sides[b]) * complexd(init, 0.0);
        z[b] = ComplexMatrix::identity(sides[b]) * complexd(init, 0.0);
    }
    std::vector<double> y(m, 0.0);

    double b_norm = 0.0;
    for (double v : b_vec) b_norm = std::max(b_norm, std::abs(v));
    double c_norm = 0.0;
    for (const auto& cb : c) c_norm = std::max(c_norm, cb.max_abs());

    FILE* trace = nullptr;
    if (const char* path = std::getenv("RETROCAP_SDP_TRACE"); path && *path) {
        trace = std::fopen(path, "a");
        if (trace)
            std::fprintf(trace, "{\"event\":\"solve\",\"blocks\":%zu,\"constraints\":%zu,\"embedded\":%s}\n",
                         nblocks, m, complex_data ? "true" : "false");
    }

    auto inner = [](const ComplexMatrix& p, const ComplexMatrix& q) { return p.hs_inner(q); };

    SdpSolution sol;
    double mu_prev = std::numeric_limits<double>::max();
    int stall_count = 0;

    double pobj = 0.0, dobj = 0.0, pres = 0.0, dres = 0.0, mu = 0.0;
    std::vector<ComplexMatrix> rd(nblocks);
    std::vector<double> rp(m);

    int iter = 0;
    for (; iter < options.max_iterations; ++iter) {
        // residuals and objectives
        pobj = 0.0;
        for (std::size_t b = 0; b < nblocks; ++b) pobj += inner(c[b], x[b]);
        dobj = 0.0;
        for (std::size_t i = 0; i < m; ++i) dobj += b_vec[i] * y[i];

        pres = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            double ax = 0.0;
            for (std::size_t b = 0; b < nblocks; ++b) ax += inner(a[i][b], x[b]);
            rp[i] = b_vec[i] - ax;
            pres = std::max(pres, std::abs(rp[i]));
        }
        dres = 0.0;
        for (std::size_t b = 0; b < nblocks; ++b) {
            ComplexMatrix r = c[b] - z[b];
            for (std::size_t i = 0; i < m; ++i)
                if (y[i] != 0.0) r = r - a[i][b] * complexd(y[i], 0.0);
            rd[b] = r;
            dres = std::max(dres, r.max_abs());
        }

        double gap_inner = 0.0;
        for (std::size_t b = 0; b < nblocks; ++b) gap_inner += inner(x[b], z[b]);
        mu = gap_inner / total_dim;

        const double rel_gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
        const double rel_pres = pres / (1.0 + b_norm);
        const double rel_dres = dres / (1.0 + c_norm);

        if (trace)
            std::fprintf(trace,
                         "{\"iter\":%d,\"mu\":%.3e,\"pobj\":%.12e,\"dobj\":%.12e,"
                         "\"pres\":%.3e,\"dres\":%.3e}\n",
                         iter, mu, pobj, dobj, rel_pres, rel_dres);

        if (rel_gap <= options.gap_tol && rel_pres <= options.residual_tol &&
            rel_dres <= options.residual_tol) {
            sol.status = SdpStatus::optimal;
            break;
        }
        if (mu > 0.9 * mu_prev) {
            if (++stall_count >= 5) break;  // numerical floor reached
        } else {
            stall_count = 0;
        }
        mu_prev = mu;

        // NT scalings per block
        std::vector<Scaling> sc(nblocks);
        for (std::size_t b = 0; b < nblocks; ++b) sc[b] = nt_scaling(x[b], z[b]);

        // Schur complement M_ij = sum_b <A_i, W A_j W>
        std::vector<std::vector<double>> schur(m, std::vector<double>(m, 0.0));
        std::vector<std::vector<ComplexMatrix>> waw(m);  // per constraint, per block
        for (std::size_t j = 0; j < m; ++j) {
            waw[j].resize(nblocks);
            for (std::size_t b = 0; b < nblocks; ++b) waw[j][b] = sc[b].w * a[j][b] * sc[b].w;
        }
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = i; j < m; ++j) {
                double s = 0.0;
                for (std::size_t b = 0; b < nblocks; ++b) s += inner(a[i][b], waw[j][b]);
                schur[i][j] = s;
                schur[j][i] = s;
            }
        SchurSolver solver(std::move(schur));
        if (!solver.factor()) break;

        auto solve_direction = [&](const std::vector<ComplexMatrix>& rc,
                                   std::vector<ComplexMatrix>& dx, std::vector<double>& dy,
                                   std::vector<ComplexMatrix>& dz) {
            std::vector<double> rhs(m);
            for (std::size_t i = 0; i < m; ++i) {
                double t = rp[i];
                for (std::size_t b = 0; b < nblocks; ++b) {
                    const auto drcd = sc[b].d * rc[b] * sc[b].d;
                    t -= inner(a[i][b], drcd);
                    t += inner(a[i][b], sc[b].w * rd[b] * sc[b].w);
                }
                rhs[i] = t;
            }
            dy = solver.solve(rhs);
            dz.resize(nblocks);
            dx.resize(nblocks);
            for (std::size_t b = 0; b < nblocks; ++b) {
                ComplexMatrix dzb = rd[b];
                for (std::size_t i = 0; i < m; ++i)
                    if (dy[i] != 0.0) dzb = dzb - a[i][b] * complexd(dy[i], 0.0);
                dz[b] = dzb;
                ComplexMatrix dxb = sc[b].d * rc[b] * sc[b].d - sc[b].w * dzb * sc[b].w;
                dx[b] = (dxb + dxb.adjoint()) * complexd(0.5, 0.0);
            }
        };

        // predictor: drive complementarity toward zero
        std::vector<ComplexMatrix> rc(nblocks);
        for (std::size_t b = 0; b < nblocks; ++b) {
            const auto& ve = sc[b].v_eig;
            const std::size_t n = ve.values.size();
            ComplexMatrix v(n, n);
            for (std::size_t k = 0; k < n; ++k)
                for (std::size_t i2 = 0; i2 < n; ++i2)
                    for (std::size_t j2 = 0; j2 < n; ++j2)
                        v(i2, j2) += ve.values[k] * ve.vectors(i2, k) * std::conj(ve.vectors(j2, k));
            rc[b] = v * complexd(-1.0, 0.0);
        }
        std::vector<ComplexMatrix> dx_aff, dz_aff;
        std::vector<double> dy_aff;
        solve_direction(rc, dx_aff, dy_aff, dz_aff);

        std::vector<EigResult> ex(nblocks), ez(nblocks);
        for (std::size_t b = 0; b < nblocks; ++b) {
            ex[b] = hermitian_eig(x[b]);
            ez[b] = hermitian_eig(z[b]);
        }
        double ap_aff = 1.0, ad_aff = 1.0;
        for (std::size_t b = 0; b < nblocks; ++b) {
            ap_aff = std::min(ap_aff, max_step(ex[b], dx_aff[b], 1.0));
            ad_aff = std::min(ad_aff, max_step(ez[b], dz_aff[b], 1.0));
        }
        double gap_aff = 0.0;
        for (std::size_t b = 0; b < nblocks; ++b) {
            const auto xa = x[b] + dx_aff[b] * complexd(ap_aff, 0.0);
            const auto za = z[b] + dz_aff[b] * complexd(ad_aff, 0.0);
            gap_aff += inner(xa, za);
        }
        const double mu_aff = std::max(gap_aff / total_dim, 0.0);
        double sigma = std::pow(mu_aff / std::max(mu, 1e-300), 3.0);
        sigma = std::min(1.0, std::max(sigma, 1e-12));

        // corrector: target sigma*mu with the Mehrotra second-order term
        for (std::size_t b = 0; b < nblocks; ++b) {
            const auto& svb = sc[b];
            const auto& ve = svb.v_eig;
            const std::size_t n = ve.values.size();
            // scaled affine steps
            auto dxh = svb.d_inv * dx_aff[b] * svb.d_inv;
            auto dzh = svb.d * dz_aff[b] * svb.d;
            auto t = (dxh * dzh + dzh * dxh) * complexd(0.5, 0.0);
            // move to the V eigenbasis, apply the Lyapunov weights, move back
            auto t_tilde = ve.vectors.adjoint() * t * ve.vectors;
            ComplexMatrix s_tilde(n, n);
            for (std::size_t i2 = 0; i2 < n; ++i2)
                for (std::size_t j2 = 0; j2 < n; ++j2) {
                    const double denom = ve.values[i2] + ve.values[j2];
                    const double target =
                        (i2 == j2) ? (sigma * mu - ve.values[i2] * ve.values[i2]) : 0.0;
                    s_tilde(i2, j2) =
                        (complexd(2.0, 0.0) * (complexd(target, 0.0) - t_tilde(i2, j2))) /
                        complexd(std::max(denom, 1e-300), 0.0);
                }
            rc[b] = sc[b].v_eig.vectors * s_tilde * sc[b].v_eig.vectors.adjoint();
            rc[b] = (rc[b] + rc[b].adjoint()) * complexd(0.5, 0.0);
        }
        std::vector<ComplexMatrix> dx, dz;
        std::vector<double> dy;
        solve_direction(rc, dx, dy, dz);

        double ap = 1.0, ad = 1.0;
        for (std::size_t b = 0; b < nblocks; ++b) {
            ap = std::min(ap, max_step(ex[b], dx[b], 1.0 / options.step_fraction));
            ad = std::min(ad, max_step(ez[b], dz[b], 1.0 / options.step_fraction));
        }
        ap = std::min(1.0, options.step_fraction * ap);
        ad = std::min(1.0, options.step_fraction * ad);
        if (ap < 1e-10 && ad < 1e-10) break;  // no usable step left

        for (std::size_t b = 0; b < nblocks; ++b) {
            x[b] = x[b] + dx[b] * complexd(ap, 0.0);
            z[b] = z[b] + dz[b] * complexd(ad, 0.0);
            x[b] = (x[b] + x[b].adjoint()) * complexd(0.5, 0.0);
            z[b] = (z[b] + z[b].adjoint()) * complexd(0.5, 0.0);
        }
        for (std::size_t i = 0; i < m; ++i) y[i] += ad * dy[i];
    }

    sol.iterations = iter;
    sol.primal_value = sense_sign * value_scale * pobj;
    sol.dual_value = sense_sign * value_scale * dobj;
    sol.gap = std::abs(sol.primal_value - sol.dual_value);
    sol.primal_residual = value_scale * pres;
    sol.dual_residual = dres;
    sol.dual_multipliers.resize(m);
    for (std::size_t i = 0; i < m; ++i) sol.dual_multipliers[i] = sense_sign * y[i];
    sol.primal_blocks.resize(nblocks);
    sol.dual_blocks.resize(nblocks);
    for (std::size_t b = 0; b < nblocks; ++b) {
        sol.primal_blocks[b] = complex_data ? project_from_real_embedding(x[b]) : x[b];
        ComplexMatrix zb = complex_data ? project_from_real_embedding(z[b]) : z[b];
        sol.dual_blocks[b] = zb;
    }

    if (sol.status != SdpStatus::optimal) {
        // Heuristic classification after running out of progress: a divergent
        // primal iterate with a clean dual side signals unboundedness, a
        // divergent dual side signals infeasibility.
        double x_norm = 0.0, y_norm = 0.0;
        for (const auto& xb : sol.primal_blocks) x_norm = std::max(x_norm, xb.max_abs());
        for (double v : y) y_norm = std::max(y_norm, std::abs(v));
        if (x_norm > 1e8 * init && pres / (1.0 + b_norm) < 1e-6)
            sol.status = SdpStatus::unbounded;
        else if (y_norm > 1e8 * init && dres / (1.0 + c_norm) < 1e-6)
            sol.status = SdpStatus::infeasible;
        else
            sol.status = SdpStatus::max_iterations;
    }

    if (trace) {
        std::fprintf(trace, "{\"event\":\"done\",\"status\":%d,\"iterations\":%d,\"gap\":%.3e}\n",
                     static_cast<int>(sol.status), sol.iterations, sol.gap);
        std::fclose(trace);
    }
    return sol;
}

}  // namespace retrocap
