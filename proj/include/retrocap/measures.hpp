#pragma once

#include <limits>

#include "retrocap/channel.hpp"
#include "retrocap/sdp.hpp"

namespace retrocap {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// Optimum below this is reported as an infinite divergence; values within
// a decade above it are flagged low-confidence.
inline constexpr double kInfinityThreshold = 1e-9;
inline constexpr double kLowConfidenceThreshold = 1e-6;

struct MeasureDiagnostics {
    SdpStatus status = SdpStatus::optimal;
    double gap = 0.0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    int iterations = 0;
};

// A log-scale (bits) information measure together with its optimizer and the
// positive-semidefinite certificate of the solved program.
struct MeasureResult {
    double value = 0.0;  // may be +infinity
    ComplexMatrix optimizer;
    ComplexMatrix certificate;
    MeasureDiagnostics diag;
    bool low_confidence = false;

    bool is_infinite() const { return std::isinf(value); }
};

struct SingletExtremes {
    double f_max = 0.0;
    double f_min = 0.0;
    ComplexMatrix k0_choi;
    ComplexMatrix k1_choi;
};

namespace measure_detail {

inline std::vector<ComplexMatrix> hermitian_basis(int d) {
    std::vector<ComplexMatrix> basis;
    for (int i = 0; i < d; ++i) {
        ComplexMatrix e(d, d);
        e(i, i) = 1.0;
        basis.push_back(e);
    }
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) {
            ComplexMatrix re(d, d), im(d, d);
            re(i, j) = inv_sqrt2;
            re(j, i) = inv_sqrt2;
            im(i, j) = complexd(0.0, -inv_sqrt2);
            im(j, i) = complexd(0.0, inv_sqrt2);
            basis.push_back(re);
            basis.push_back(im);
        }
    return basis;
}

inline SdpSolveOptions measure_solve_options() {
    SdpSolveOptions opt;
    // The floor formulas downstream snap their arguments to 12 decimals, so
    // these solves run to the numerical floor rather than the engine default.
    opt.gap_tol = 1e-13;
    opt.residual_tol = 1e-12;
    return opt;
}

inline void require_cp(const QuantumMap& n, const char* who) {
    if (!n.is_cp)
        throw std::invalid_argument(std::string(who) + ": map is not completely positive");
}

inline MeasureDiagnostics diag_of(const SdpSolution& s) {
    return MeasureDiagnostics{s.status, s.gap, s.primal_residual, s.dual_residual, s.iterations};
}

inline void require_solved(const SdpSolution& s, const char* who) {
    if (s.status != SdpStatus::optimal)
        throw std::runtime_error(std::string(who) + ": SDP solve failed (status " +
                                 std::to_string(static_cast<int>(s.status)) + ")");
}

inline ComplexMatrix combine(const std::vector<ComplexMatrix>& basis, const std::vector<double>& y) {
    ComplexMatrix r(basis.front().rows(), basis.front().cols());
    for (std::size_t j = 0; j < basis.size(); ++j)
        if (y[j] != 0.0) r = r + basis[j] * complexd(y[j], 0.0);
    return r;
}

inline ComplexMatrix direct_sum(const ComplexMatrix& a, const ComplexMatrix& b) {
    ComplexMatrix r(a.rows() + b.rows(), a.cols() + b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) r(i, j) = a(i, j);
    for (std::size_t i = 0; i < b.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) r(a.rows() + i, a.cols() + j) = b(i, j);
    return r;
}

}  // namespace measure_detail

// Smallest log2 scale at which sigma dominates rho, by spectral reduction on
// the support of sigma (with the Schur-complement correction off-support).
inline double dmax(const ComplexMatrix& rho, const ComplexMatrix& sigma) {
    if (rho.rows() != sigma.rows() || !rho.is_square() || !sigma.is_square())
        throw std::invalid_argument("dmax: dimension mismatch");
    const double rho_scale = std::max(1.0, rho.max_abs());
    const double sigma_scale = std::max(1.0, sigma.max_abs());
    if (!rho.is_hermitian(1e-10 * rho_scale) || !sigma.is_hermitian(1e-10 * sigma_scale))
        throw std::invalid_argument("dmax: inputs must be Hermitian");

    const std::size_t n = rho.rows();
    const auto es = hermitian_eig(sigma);
    const double sig_cut = 1e-12 * std::max(1.0, std::abs(es.values.front()));

    std::vector<std::size_t> supp, perp;
    for (std::size_t k = 0; k < n; ++k)
        (es.values[k] > sig_cut ? supp : perp).push_back(k);
    if (supp.empty()) return kInfinity;

    auto block = [&](const std::vector<std::size_t>& rows_k, const std::vector<std::size_t>& cols_k) {
        ComplexMatrix b(rows_k.size(), cols_k.size());
        for (std::size_t i = 0; i < rows_k.size(); ++i)
            for (std::size_t j = 0; j < cols_k.size(); ++j) {
                complexd s(0.0, 0.0);
                for (std::size_t p = 0; p < n; ++p)
                    for (std::size_t q = 0; q < n; ++q)
                        s += std::conj(es.vectors(p, rows_k[i])) * rho(p, q) * es.vectors(q, cols_k[j]);
                b(i, j) = s;
            }
        return b;
    };

    ComplexMatrix r_eff = block(supp, supp);
    if (!perp.empty()) {
        const auto r_pp = block(perp, perp);
        const auto ep = hermitian_eig(r_pp);
        if (ep.values.front() > 1e-10 * rho_scale) return kInfinity;  // rho sticks out of supp(sigma)

        // rotate the perp block into its own eigenbasis; kernel directions must
        // not couple to the support, strictly negative ones contribute a
        // Schur-complement correction
        const auto r_sp = block(supp, perp);  // supp x perp coupling
        const auto coupling = r_sp * ep.vectors;
        std::vector<std::size_t> neg;
        for (std::size_t k = 0; k < perp.size(); ++k) {
            if (ep.values[k] < -1e-10 * rho_scale) {
                neg.push_back(k);
            } else {
                for (std::size_t i = 0; i < supp.size(); ++i)
                    if (std::abs(coupling(i, k)) > 1e-8 * rho_scale) return kInfinity;
            }
        }
        for (std::size_t a = 0; a < neg.size(); ++a)
            for (std::size_t i = 0; i < supp.size(); ++i)
                for (std::size_t j = 0; j < supp.size(); ++j)
                    r_eff(i, j) += coupling(i, neg[a]) * std::conj(coupling(j, neg[a])) /
                                   complexd(-ep.values[neg[a]], 0.0);
    }

    ComplexMatrix scaled(supp.size(), supp.size());
    for (std::size_t i = 0; i < supp.size(); ++i)
        for (std::size_t j = 0; j < supp.size(); ++j)
            scaled(i, j) = r_eff(i, j) / std::sqrt(es.values[supp[i]] * es.values[supp[j]]);
    const double lam = hermitian_eig(scaled).values.front();
    if (lam <= 0.0) return -kInfinity;
    return std::log2(lam);
}

// Smallest log2 scale at which a product of the uniform reference state and
// some output state dominates the Choi state. Always finite for CP maps.
inline MeasureResult max_information(const QuantumMap& n) {
    using namespace measure_detail;
    require_cp(n, "max_information");
    const auto basis = hermitian_basis(n.d_out);
    const auto pi = canonical_operator(CanonicalKind::uniform, n.d_in);

    SdpProblem p;
    p.sense = SdpSense::maximize;
    p.block_sides = {n.d_in * n.d_out, n.d_out};
    p.objective = {n.choi, ComplexMatrix(n.d_out, n.d_out)};
    for (const auto& f : basis) {
        p.constraints.push_back({kron(pi, f), f});
        p.rhs.push_back(f.trace().real());
    }
    const auto sol = solve_sdp(p, measure_solve_options());
    require_solved(sol, "max_information");

    const double scale_opt = 0.5 * (sol.primal_value + sol.dual_value);
    MeasureResult r;
    r.value = std::log2(scale_opt);
    const auto x_opt = combine(basis, sol.dual_multipliers);
    const double tr = x_opt.trace().real();
    r.optimizer = (tr > 0.0) ? x_opt * complexd(1.0 / tr, 0.0) : x_opt;
    r.certificate = sol.primal_blocks[0];
    r.diag = diag_of(sol);
    return r;
}

// Smallest log2 scale at which the Choi state dominates a product of the
// uniform reference state and some unit-trace Hermitian output operator;
// +infinity when no positive-trace dominated operator exists.
inline MeasureResult doeblin_information(const QuantumMap& n) {
    using namespace measure_detail;
    require_cp(n, "doeblin_information");
    const auto basis = hermitian_basis(n.d_out);
    const auto pi = canonical_operator(CanonicalKind::uniform, n.d_in);

    SdpProblem p;
    p.sense = SdpSense::minimize;
    p.block_sides = {n.d_in * n.d_out};
    p.objective = {n.choi};
    for (const auto& f : basis) {
        p.constraints.push_back({kron(pi, f)});
        p.rhs.push_back(f.trace().real());
    }
    const auto sol = solve_sdp(p, measure_solve_options());
    require_solved(sol, "doeblin_information");

    const double best_trace = 0.5 * (sol.primal_value + sol.dual_value);
    MeasureResult r;
    r.optimizer = combine(basis, sol.dual_multipliers);
    r.certificate = sol.primal_blocks[0];
    r.diag = diag_of(sol);
    if (best_trace <= kInfinityThreshold) {
        r.value = kInfinity;
    } else {
        r.value = -std::log2(best_trace);
        r.low_confidence = best_trace <= kLowConfidenceThreshold;
    }
    return r;
}

// Two-sided variant: the dominated product must also dominate the negated
// Choi state. Additive upper bound on the regularized one-sided measure.
inline MeasureResult pm_information(const QuantumMap& n) {
    using namespace measure_detail;
    require_cp(n, "pm_information");
    const auto basis = hermitian_basis(n.d_out);
    const auto pi = canonical_operator(CanonicalKind::uniform, n.d_in);

    SdpProblem p;
    p.sense = SdpSense::minimize;
    p.block_sides = {n.d_in * n.d_out, n.d_in * n.d_out};
    p.objective = {n.choi, n.choi};
    for (const auto& f : basis) {
        const auto pif = kron(pi, f);
        p.constraints.push_back({pif, pif * complexd(-1.0, 0.0)});
        p.rhs.push_back(f.trace().real());
    }
    const auto sol = solve_sdp(p, measure_solve_options());
    require_solved(sol, "pm_information");

    const double best_trace = 0.5 * (sol.primal_value + sol.dual_value);
    MeasureResult r;
    r.optimizer = combine(basis, sol.dual_multipliers);
    r.certificate = direct_sum(sol.primal_blocks[0], sol.primal_blocks[1]);
    r.diag = diag_of(sol);
    if (best_trace <= kInfinityThreshold) {
        r.value = kInfinity;
    } else {
        r.value = -std::log2(best_trace);
        r.low_confidence = best_trace <= kLowConfidenceThreshold;
    }
    return r;
}

// Extremes of the recovered overlap with the maximally entangled state over
// all recovery channels, as linear programs in the recovery Choi state.
inline SingletExtremes singlet_fraction_extremes(const QuantumMap& n) {
    using namespace measure_detail;
    require_cp(n, "singlet_fraction_extremes");
    const int da = n.d_in, db = n.d_out;
    // objective coefficient G with <G, Choi(K)> = overlap of (K o N) applied
    // to the entangled input against the entangled target
    const auto g = permute_subsystems(n.choi, SystemDims{da, db}, {1, 0}).conjugate() *
                   complexd(static_cast<double>(db) / da, 0.0);
    const auto basis = hermitian_basis(db);

    SdpProblem p;
    p.block_sides = {db * da};
    p.objective = {g};
    for (const auto& f : basis) {
        p.constraints.push_back({kron(f, ComplexMatrix::identity(da))});
        p.rhs.push_back(f.trace().real() / db);
    }

    p.sense = SdpSense::maximize;
    const auto hi = solve_sdp(p, measure_solve_options());
    require_solved(hi, "singlet_fraction_extremes (max)");
    p.sense = SdpSense::minimize;
    const auto lo = solve_sdp(p, measure_solve_options());
    require_solved(lo, "singlet_fraction_extremes (min)");

    SingletExtremes s;
    s.f_max = 0.5 * (hi.primal_value + hi.dual_value);
    s.f_min = 0.5 * (lo.primal_value + lo.dual_value);
    s.k0_choi = hi.primal_blocks[0];
    s.k1_choi = lo.primal_blocks[0];
    return s;
}

// Per-copy one-sided measure of the k-fold tensor power.
inline double n_copy_doeblin(const QuantumMap& n, int copies) {
    if (copies < 1 || copies > 3)
        throw std::invalid_argument("n_copy_doeblin: copies must be 1, 2 or 3");
    double side = 1.0;
    for (int k = 0; k < copies; ++k) side *= n.d_in * n.d_out;
    if (2.0 * side > 256.0)
        throw std::invalid_argument("n_copy_doeblin: embedded dimension exceeds the solver cap");
    const QuantumMap power = (copies == 1) ? n : tensor_power(n, copies);
    const auto r = doeblin_information(power);
    return r.value / copies;  // +inf / k stays +inf
}

struct DoeblinBounds {
    double lower = 0.0;  // best multi-copy lower bound on the regularized value
    double upper = 0.0;  // additive two-sided upper bound
    int copies_used = 1;
};

inline DoeblinBounds regularized_doeblin_bounds(const QuantumMap& n, int max_copies) {
    if (max_copies < 1 || max_copies > 3)
        throw std::invalid_argument("regularized_doeblin_bounds: max_copies must be 1, 2 or 3");
    DoeblinBounds b;
    b.lower = n_copy_doeblin(n, 1);
    b.copies_used = 1;
    for (int k = 2; k <= max_copies && !std::isinf(b.lower); ++k) {
        double side = 1.0;
        for (int i = 0; i < k; ++i) side *= n.d_in * n.d_out;
        if (2.0 * side > 256.0) break;  // larger copies fall outside the solver cap
        const double v = n_copy_doeblin(n, k);
        if (v > b.lower) {
            b.lower = v;
            b.copies_used = k;
        }
    }
    if (std::isinf(b.lower)) {
        b.upper = kInfinity;  // forced by the two-sided sandwich
    } else {
        // superadditivity puts every per-copy value at or below the additive
        // two-sided bound; clamp only the tolerance-level numerics
        b.upper = std::max(pm_information(n).value, b.lower);
    }
    return b;
}

}  // namespace retrocap
