#pragma once

#include <optional>
#include <utility>

#include "retrocap/matrix.hpp"

namespace retrocap {

inline constexpr double kPsdTol = 1e-9;
inline constexpr double kTpTol = 1e-9;

enum class ChannelFamily { generic, depolarizing, erasure, amplitude_damping, replacement };

// A completely positive map held as its Choi state: the operator on
// (input reference x output) obtained by sending one half of a maximally
// entangled input pair through the map. Channels have unit trace and a
// uniform reference marginal in this normalization.
struct QuantumMap {
    int d_in = 0;
    int d_out = 0;
    ComplexMatrix choi;  // side d_in * d_out, factors ordered (reference, output)

    bool is_cp = false;
    bool is_tp = false;
    double cp_deviation = 0.0;  // max(0, -min eigenvalue of choi)
    double tp_deviation = 0.0;  // max-entry distance of reference marginal from uniform

    ChannelFamily family = ChannelFamily::generic;
    double family_param = 0.0;

    bool is_channel() const { return is_cp && is_tp; }

    // Action on an operator over the full input space.
    ComplexMatrix apply(const ComplexMatrix& x) const {
        if (static_cast<int>(x.rows()) != d_in || !x.is_square())
            throw std::invalid_argument("QuantumMap::apply: operand dimension mismatch");
        // out[b,bt] = d_in * sum_{a,at} X[a,at] J[(a,b),(at,bt)]
        ComplexMatrix out(d_out, d_out);
        for (int a = 0; a < d_in; ++a)
            for (int at = 0; at < d_in; ++at) {
                const complexd w = x(a, at);
                if (w == complexd(0.0, 0.0)) continue;
                for (int b = 0; b < d_out; ++b)
                    for (int bt = 0; bt < d_out; ++bt)
                        out(b, bt) += w * choi(a * d_out + b, at * d_out + bt);
            }
        return out * complexd(d_in, 0.0);
    }
};

namespace detail {

inline void revalidate(QuantumMap& m) {
    if (!m.choi.is_hermitian(1e-10 * std::max(1.0, m.choi.max_abs())))
        throw std::invalid_argument("QuantumMap: Choi matrix not Hermitian");
    // Exact minimum eigenvalue at desk scale; Cholesky screen for large sides,
    // falling back to the eigensolver only when the screen fails.
    if (m.choi.rows() <= 200) {
        const double min_eig = min_eigenvalue(m.choi);
        m.cp_deviation = std::max(0.0, -min_eig);
        m.is_cp = min_eig >= -kPsdTol;
    } else {
        const double shift = kPsdTol * std::max(1.0, m.choi.max_abs());
        ComplexMatrix shifted = m.choi + ComplexMatrix::identity(m.choi.rows()) * complexd(shift, 0.0);
        if (try_cholesky(shifted)) {
            m.cp_deviation = 0.0;
            m.is_cp = true;
        } else {
            const double min_eig = min_eigenvalue(m.choi);
            m.cp_deviation = std::max(0.0, -min_eig);
            m.is_cp = min_eig >= -kPsdTol;
        }
    }

    const auto marginal = partial_trace(m.choi, SystemDims{m.d_in, m.d_out}, {0});
    const auto uniform = canonical_operator(CanonicalKind::uniform, m.d_in);
    m.tp_deviation = marginal.max_abs_diff(uniform);
    m.is_tp = m.tp_deviation <= kTpTol;
}

}  // namespace detail

inline QuantumMap map_from_choi(int d_in, int d_out, ComplexMatrix choi,
                                ChannelFamily family = ChannelFamily::generic,
                                double family_param = 0.0) {
    if (d_in < 1 || d_out < 1) throw std::invalid_argument("map_from_choi: dimensions must be >= 1");
    if (!choi.is_square() || static_cast<int>(choi.rows()) != d_in * d_out)
        throw std::invalid_argument("map_from_choi: Choi side must equal d_in * d_out");
    QuantumMap m;
    m.d_in = d_in;
    m.d_out = d_out;
    m.choi = std::move(choi);
    m.family = family;
    m.family_param = family_param;
    detail::revalidate(m);
    return m;
}

inline QuantumMap from_kraus(const std::vector<ComplexMatrix>& kraus) {
    if (kraus.empty()) throw std::invalid_argument("from_kraus: empty Kraus list");
    const int d_out = static_cast<int>(kraus.front().rows());
    const int d_in = static_cast<int>(kraus.front().cols());
    for (const auto& k : kraus)
        if (static_cast<int>(k.rows()) != d_out || static_cast<int>(k.cols()) != d_in)
            throw std::invalid_argument("from_kraus: inconsistent Kraus shapes");

    ComplexMatrix choi(static_cast<std::size_t>(d_in) * d_out, static_cast<std::size_t>(d_in) * d_out);
    for (const auto& k : kraus) {
        // vec = sum_i |i> x K|i>
        std::vector<complexd> vec(static_cast<std::size_t>(d_in) * d_out);
        for (int i = 0; i < d_in; ++i)
            for (int b = 0; b < d_out; ++b) vec[i * d_out + b] = k(b, i);
        for (std::size_t r = 0; r < vec.size(); ++r)
            for (std::size_t c = 0; c < vec.size(); ++c)
                choi(r, c) += vec[r] * std::conj(vec[c]) * complexd(1.0 / d_in, 0.0);
    }
    return map_from_choi(d_in, d_out, std::move(choi));
}

inline QuantumMap identity_map(int d) {
    return map_from_choi(d, d, canonical_operator(CanonicalKind::max_entangled, d));
}

inline QuantumMap replacement_map(int d_in, const ComplexMatrix& target) {
    if (!target.is_square()) throw std::invalid_argument("replacement_map: target not square");
    if (!target.is_hermitian(1e-10 * std::max(1.0, target.max_abs())))
        throw std::invalid_argument("replacement_map: target not Hermitian");
    if (std::abs(target.trace() - complexd(1.0, 0.0)) > 1e-9)
        throw std::invalid_argument("replacement_map: target must have unit trace");
    const auto pi = canonical_operator(CanonicalKind::uniform, d_in);
    return map_from_choi(d_in, static_cast<int>(target.rows()), kron(pi, target),
                         ChannelFamily::replacement);
}

// Unitary relabeling of tensor factors as a channel.
inline QuantumMap permutation_map(const SystemDims& dims, const std::vector<int>& perm) {
    const int n = dims.total();
    ComplexMatrix u(n, n);
    std::vector<int> digits, moved(perm.size());
    std::vector<int> new_dims(perm.size());
    for (std::size_t k = 0; k < perm.size(); ++k) new_dims[k] = dims[perm[k]];
    for (int i = 0; i < n; ++i) {
        detail::decompose_index(i, dims, digits);
        for (std::size_t k = 0; k < perm.size(); ++k) moved[k] = digits[perm[k]];
        u(detail::compose_index(moved, new_dims), i) = 1.0;
    }
    return from_kraus({u});
}

inline QuantumMap builtin_depolarizing(int d, double p) {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("depolarizing: p must be in [0, 1]");
    const auto phi = canonical_operator(CanonicalKind::max_entangled, d);
    const auto pi = canonical_operator(CanonicalKind::uniform, d);
    ComplexMatrix choi = phi * complexd(1.0 - p, 0.0) + kron(pi, pi) * complexd(p, 0.0);
    return map_from_choi(d, d, std::move(choi), ChannelFamily::depolarizing, p);
}

inline QuantumMap builtin_erasure(int d, double p) {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("erasure: p must be in [0, 1]");
    const int d_out = d + 1;  // erasure flag is the last output basis vector
    ComplexMatrix choi(static_cast<std::size_t>(d) * d_out, static_cast<std::size_t>(d) * d_out);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            choi(i * d_out + i, j * d_out + j) += complexd((1.0 - p) / d, 0.0);
    for (int i = 0; i < d; ++i) choi(i * d_out + d, i * d_out + d) += complexd(p / d, 0.0);
    return map_from_choi(d, d_out, std::move(choi), ChannelFamily::erasure, p);
}

inline QuantumMap builtin_amplitude_damping(double gamma) {
    if (gamma < 0.0 || gamma > 1.0)
        throw std::invalid_argument("amplitude_damping: gamma must be in [0, 1]");
    ComplexMatrix k0(2, 2), k1(2, 2);
    k0(0, 0) = 1.0;
    k0(1, 1) = std::sqrt(1.0 - gamma);
    k1(0, 1) = std::sqrt(gamma);
    QuantumMap m = from_kraus({k0, k1});
    m.family = ChannelFamily::amplitude_damping;
    m.family_param = gamma;
    return m;
}

// second . first as maps; Choi of the composition.
inline QuantumMap compose(const QuantumMap& second, const QuantumMap& first) {
    if (second.d_in != first.d_out)
        throw std::invalid_argument("compose: inner dimensions differ");
    const int d_in = first.d_in;
    const int d_mid = first.d_out;
    const int d_out = second.d_out;
    // Apply `second` to the output factor of first's Choi.
    ComplexMatrix choi(static_cast<std::size_t>(d_in) * d_out, static_cast<std::size_t>(d_in) * d_out);
    // J2 contraction: out[(a,b),(at,bt)] = d_mid * sum_{m,mt} J1[(a,m),(at,mt)] J2[(m,b),(mt,bt)]
    for (int a = 0; a < d_in; ++a)
        for (int at = 0; at < d_in; ++at)
            for (int b = 0; b < d_out; ++b)
                for (int bt = 0; bt < d_out; ++bt) {
                    complexd s(0.0, 0.0);
                    for (int m = 0; m < d_mid; ++m)
                        for (int mt = 0; mt < d_mid; ++mt)
                            s += first.choi(a * d_mid + m, at * d_mid + mt) *
                                 second.choi(m * d_out + b, mt * d_out + bt);
                    choi(a * d_out + b, at * d_out + bt) = s * complexd(d_mid, 0.0);
                }
    return map_from_choi(d_in, d_out, std::move(choi));
}

inline QuantumMap tensor(const QuantumMap& a, const QuantumMap& b) {
    // kron gives factor order (refA, outA, refB, outB); regroup to
    // ((refA, refB), (outA, outB)).
    const auto grouped = permute_subsystems(kron(a.choi, b.choi),
                                            SystemDims{a.d_in, a.d_out, b.d_in, b.d_out},
                                            {0, 2, 1, 3});
    return map_from_choi(a.d_in * b.d_in, a.d_out * b.d_out, grouped);
}

inline QuantumMap tensor_power(const QuantumMap& a, int copies) {
    if (copies < 1) throw std::invalid_argument("tensor_power: copies must be >= 1");
    QuantumMap r = a;
    for (int k = 1; k < copies; ++k) r = tensor(r, a);
    return r;
}

// Adjoint with respect to the Hilbert-Schmidt pairing.
inline QuantumMap adjoint(const QuantumMap& n) {
    const auto swapped =
        permute_subsystems(n.choi, SystemDims{n.d_in, n.d_out}, {1, 0}).conjugate();
    return map_from_choi(n.d_out, n.d_in,
                         swapped * complexd(static_cast<double>(n.d_in) / n.d_out, 0.0));
}

// N acting on the middle factor of (pre x in x post), without forming the
// identity-extended Choi.
inline ComplexMatrix apply_on_factors(const QuantumMap& n, const ComplexMatrix& x, int d_pre,
                                      int d_post) {
    const int d_in = n.d_in, d_out = n.d_out;
    if (static_cast<int>(x.rows()) != d_pre * d_in * d_post || !x.is_square())
        throw std::invalid_argument("apply_on_factors: operand dimension mismatch");
    const int out_n = d_pre * d_out * d_post;
    ComplexMatrix out(out_n, out_n);
    for (int a = 0; a < d_in; ++a)
        for (int at = 0; at < d_in; ++at)
            for (int b = 0; b < d_out; ++b)
                for (int bt = 0; bt < d_out; ++bt) {
                    const complexd j = n.choi(a * d_out + b, at * d_out + bt) * complexd(d_in, 0.0);
                    if (j == complexd(0.0, 0.0)) continue;
                    for (int p = 0; p < d_pre; ++p)
                        for (int pt = 0; pt < d_pre; ++pt)
                            for (int q = 0; q < d_post; ++q)
                                for (int qt = 0; qt < d_post; ++qt)
                                    out((p * d_out + b) * d_post + q, (pt * d_out + bt) * d_post + qt) +=
                                        j * x((p * d_in + a) * d_post + q, (pt * d_in + at) * d_post + qt);
                }
    return out;
}

// Relabels the tensor factors of a map's input and output spaces. Flags are
// unchanged (the Choi is conjugated by a permutation).
inline QuantumMap reorder_map_factors(const QuantumMap& n, const SystemDims& in_dims,
                                      const std::vector<int>& in_perm, const SystemDims& out_dims,
                                      const std::vector<int>& out_perm) {
    if (in_dims.total() != n.d_in || out_dims.total() != n.d_out)
        throw std::invalid_argument("reorder_map_factors: dims mismatch");
    std::vector<int> all_dims = in_dims.dims;
    all_dims.insert(all_dims.end(), out_dims.dims.begin(), out_dims.dims.end());
    std::vector<int> perm = in_perm;
    for (int p : out_perm) perm.push_back(p + static_cast<int>(in_dims.count()));
    QuantumMap r = n;
    r.choi = permute_subsystems(n.choi, SystemDims(all_dims), perm);
    r.family = ChannelFamily::generic;
    return r;
}

// Builds the Choi state by acting on half of a maximally entangled pair;
// `action` receives operators on the input space.
template <typename F>
QuantumMap map_from_function(int d_in, int d_out, F action) {
    ComplexMatrix choi(static_cast<std::size_t>(d_in) * d_out, static_cast<std::size_t>(d_in) * d_out);
    ComplexMatrix basis(d_in, d_in);
    for (int i = 0; i < d_in; ++i)
        for (int j = 0; j < d_in; ++j) {
            basis(i, j) = 1.0;
            const ComplexMatrix out = action(basis);
            basis(i, j) = 0.0;
            if (static_cast<int>(out.rows()) != d_out)
                throw std::invalid_argument("map_from_function: action output dimension mismatch");
            for (int b = 0; b < d_out; ++b)
                for (int bt = 0; bt < d_out; ++bt)
                    choi(i * d_out + b, j * d_out + bt) = out(b, bt) * complexd(1.0 / d_in, 0.0);
        }
    return map_from_choi(d_in, d_out, std::move(choi));
}

// Initial/final boundary data on (B x C) and (A x C).
struct BoundaryCondition {
    int d_a = 0, d_b = 0, d_c = 0;
    ComplexMatrix rho_init;   // on B x C
    ComplexMatrix rho_final;  // on A x C
};

inline BoundaryCondition make_boundary(int d_a, int d_b, int d_c, ComplexMatrix rho_init,
                                       ComplexMatrix rho_final) {
    if (static_cast<int>(rho_init.rows()) != d_b * d_c ||
        static_cast<int>(rho_final.rows()) != d_a * d_c)
        throw std::invalid_argument("make_boundary: dimension mismatch");
    for (const auto* rho : {&rho_init, &rho_final}) {
        if (!rho->is_hermitian(1e-9)) throw std::invalid_argument("make_boundary: state not Hermitian");
        if (min_eigenvalue(*rho) < -kPsdTol)
            throw std::invalid_argument("make_boundary: state not positive semidefinite");
        if (std::abs(rho->trace() - complexd(1.0, 0.0)) > 1e-9)
            throw std::invalid_argument("make_boundary: state trace must be 1");
    }
    return BoundaryCondition{d_a, d_b, d_c, std::move(rho_init), std::move(rho_final)};
}

// X_A -> Tr_{AC}[rho_final (X_A x rho_init_{BC})], a CP map from A to B.
inline QuantumMap boundary_to_map(const BoundaryCondition& bc) {
    const int da = bc.d_a, db = bc.d_b, dc = bc.d_c;
    // rho_final acts on (A, C): extend with identity on B, ordered (A, B, C)
    const auto final_ext = permute_subsystems(kron(bc.rho_final, ComplexMatrix::identity(db)),
                                              SystemDims{da, dc, db}, {0, 2, 1});
    return map_from_function(da, db, [&](const ComplexMatrix& x) {
        const auto operand = kron(x, bc.rho_init);  // order (A, B, C)
        return partial_trace(final_ext * operand, SystemDims{da, db, dc}, {1});
    });
}

// Boundary realization of a CP map: maximally entangled final condition and
// the map's normalized Choi state as the initial condition. The returned
// scale satisfies boundary_to_map(bc) == n / scale.
inline std::pair<BoundaryCondition, double> map_to_boundary(const QuantumMap& n) {
    const double norm = n.choi.trace().real();
    if (norm <= 1e-12)
        throw std::invalid_argument("map_to_boundary: map has (near-)zero Choi trace");
    const int da = n.d_in, db = n.d_out, dc = n.d_in;
    // (N x id_C)[Phi_AC] in factor order (B, C) = Choi with reference renamed to C, swapped
    const auto init =
        permute_subsystems(n.choi, SystemDims{n.d_in, n.d_out}, {1, 0}) * complexd(1.0 / norm, 0.0);
    const auto fin = canonical_operator(CanonicalKind::max_entangled, da);
    BoundaryCondition bc = make_boundary(da, db, dc, init, fin);
    return {std::move(bc), norm * da * da};
}

}  // namespace retrocap
