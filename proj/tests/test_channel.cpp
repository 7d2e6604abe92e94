#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "retrocap/channel.hpp"

using namespace retrocap;

namespace {

std::mt19937_64 rng(0xc4a11ULL);

ComplexMatrix random_complex(std::size_t r, std::size_t c) {
    std::normal_distribution<double> g(0.0, 1.0);
    ComplexMatrix m(r, c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) m(i, j) = complexd(g(rng), g(rng));
    return m;
}

ComplexMatrix random_state(int d) {
    auto g = random_complex(d, d);
    auto rho = g * g.adjoint();
    return rho * complexd(1.0 / rho.trace().real(), 0.0);
}

// CP map with Choi trace ~1, generally not trace preserving.
QuantumMap random_cp_map(int d_in, int d_out) {
    auto g = random_complex(static_cast<std::size_t>(d_in) * d_out, static_cast<std::size_t>(d_in) * d_out);
    auto j = g * g.adjoint();
    j = j * complexd(1.0 / j.trace().real(), 0.0);
    return map_from_choi(d_in, d_out, std::move(j));
}

// Random channel: CP Choi projected onto the trace-preserving marginal.
QuantumMap random_channel(int d_in, int d_out) {
    auto m = random_cp_map(d_in, d_out);
    const auto marginal = partial_trace(m.choi, SystemDims{d_in, d_out}, {0});
    const auto w = pseudo_inverse_sqrt(marginal) * complexd(1.0 / std::sqrt(double(d_in)), 0.0);
    const auto wfull = kron(w, ComplexMatrix::identity(d_out));
    auto fixed = wfull * m.choi * wfull.adjoint();
    return map_from_choi(d_in, d_out, std::move(fixed));
}

}  // namespace

TEST_CASE("from_kraus identity gives the Bell Choi") {
    const auto id = from_kraus({ComplexMatrix::identity(2)});
    CHECK(id.choi.max_abs_diff(canonical_operator(CanonicalKind::max_entangled, 2)) < 1e-14);
    CHECK(id.is_cp);
    CHECK(id.is_tp);
}

TEST_CASE("from_kraus reset channel equals amplitude damping at gamma 1") {
    ComplexMatrix k0(2, 2), k1(2, 2);
    k0(0, 0) = 1.0;
    k1(0, 1) = 1.0;
    const auto reset = from_kraus({k0, k1});
    const auto ad1 = builtin_amplitude_damping(1.0);
    CHECK(reset.choi.max_abs_diff(ad1.choi) < 1e-14);
    CHECK(reset.is_tp);
}

TEST_CASE("from_kraus isometry sets is_tp and PSD Choi") {
    // random isometry 2 -> 4 by Gram-Schmidt on random columns
    auto g = random_complex(4, 2);
    auto col = [&](int j) {
        ComplexMatrix c(4, 1);
        for (int i = 0; i < 4; ++i) c(i, 0) = g(i, j);
        return c;
    };
    auto c0 = col(0);
    c0 = c0 * complexd(1.0 / std::sqrt(c0.hs_inner(c0)), 0.0);
    auto c1 = col(1);
    complexd ov(0, 0);
    for (int i = 0; i < 4; ++i) ov += std::conj(c0(i, 0)) * c1(i, 0);
    for (int i = 0; i < 4; ++i) c1(i, 0) -= ov * c0(i, 0);
    c1 = c1 * complexd(1.0 / std::sqrt(c1.hs_inner(c1)), 0.0);
    ComplexMatrix v(4, 2);
    for (int i = 0; i < 4; ++i) {
        v(i, 0) = c0(i, 0);
        v(i, 1) = c1(i, 0);
    }
    const auto m = from_kraus({v});
    CHECK(m.is_tp);
    CHECK(m.is_cp);
    CHECK((v.adjoint() * v).max_abs_diff(ComplexMatrix::identity(2)) < 1e-12);
}

TEST_CASE("from_kraus rejects shape mismatch") {
    CHECK_THROWS_AS(from_kraus({ComplexMatrix::identity(2), ComplexMatrix::identity(3)}),
                    std::invalid_argument);
}

TEST_CASE("depolarizing builtin") {
    SECTION("p = 1 fully mixing") {
        const auto m = builtin_depolarizing(2, 1.0);
        const auto pi = canonical_operator(CanonicalKind::uniform, 2);
        CHECK(m.choi.max_abs_diff(kron(pi, pi)) < 1e-14);
    }
    SECTION("p = 0.5 Choi eigenvalues") {
        const auto m = builtin_depolarizing(2, 0.5);
        const auto eig = hermitian_eig(m.choi);
        CHECK(eig.values[0] == Catch::Approx(0.625).margin(1e-12));
        for (int k = 1; k < 4; ++k) CHECK(eig.values[k] == Catch::Approx(0.125).margin(1e-12));
    }
    SECTION("parameter validation") {
        CHECK_THROWS_AS(builtin_depolarizing(2, -0.1), std::invalid_argument);
        CHECK_THROWS_AS(builtin_depolarizing(2, 1.1), std::invalid_argument);
    }
}

TEST_CASE("erasure builtin") {
    SECTION("p = 0 embeds the Bell Choi with no erasure weight") {
        const auto m = builtin_erasure(2, 0.0);
        REQUIRE(m.d_out == 3);
        const auto phi = canonical_operator(CanonicalKind::max_entangled, 2);
        for (int i = 0; i < 2; ++i)
            for (int b = 0; b < 3; ++b)
                for (int j = 0; j < 2; ++j)
                    for (int bt = 0; bt < 3; ++bt) {
                        const complexd val = m.choi(i * 3 + b, j * 3 + bt);
                        if (b < 2 && bt < 2)
                            CHECK(std::abs(val - phi(i * 2 + b, j * 2 + bt)) < 1e-14);
                        else
                            CHECK(std::abs(val) < 1e-14);
                    }
    }
    SECTION("every sampled p is CP and TP") {
        for (double p : {0.0, 0.25, 0.5, 0.75, 1.0}) {
            const auto m = builtin_erasure(2, p);
            CHECK(m.is_cp);
            CHECK(m.is_tp);
        }
    }
}

TEST_CASE("builtin families are channels at sampled parameters") {
    for (double p : {0.0, 0.3, 0.7, 1.0}) {
        CHECK(builtin_depolarizing(2, p).is_channel());
        CHECK(builtin_depolarizing(3, p).is_channel());
        CHECK(builtin_erasure(3, p).is_channel());
        CHECK(builtin_amplitude_damping(p).is_channel());
    }
}

TEST_CASE("apply") {
    SECTION("identity map returns the operand") {
        const auto id = identity_map(3);
        const auto rho = random_state(3);
        CHECK(id.apply(rho).max_abs_diff(rho) < 1e-12);
    }
    SECTION("replacement map emits the target scaled by trace") {
        const auto sigma = random_state(2);
        const auto rep = replacement_map(3, sigma);
        const auto rho = random_state(3);
        CHECK(rep.apply(rho).max_abs_diff(sigma) < 1e-12);
        const auto half = rho * complexd(0.5, 0.0);
        CHECK(rep.apply(half).max_abs_diff(sigma * complexd(0.5, 0.0)) < 1e-12);
    }
    SECTION("channel application preserves trace") {
        const auto m = random_channel(3, 2);
        const auto rho = random_state(3);
        CHECK(std::abs(m.apply(rho).trace() - complexd(1.0, 0.0)) < 1e-9);
    }
    SECTION("applying depolarizing to half the Bell state reproduces its Choi") {
        const auto dep = builtin_depolarizing(2, 0.5);
        const auto phi = canonical_operator(CanonicalKind::max_entangled, 2);
        // reference first, map acting on the second factor
        const auto applied = apply_on_factors(dep, phi, 2, 1);
        CHECK(applied.max_abs_diff(dep.choi) < 1e-12);
    }
    SECTION("dimension mismatch rejected") {
        CHECK_THROWS_AS(identity_map(2).apply(random_state(3)), std::invalid_argument);
    }
}

TEST_CASE("compose") {
    const auto n = random_channel(2, 3);
    SECTION("identity is neutral") {
        CHECK(compose(identity_map(3), n).choi.max_abs_diff(n.choi) < 1e-12);
        CHECK(compose(n, identity_map(2)).choi.max_abs_diff(n.choi) < 1e-12);
    }
    SECTION("replacement absorbs a channel") {
        const auto sigma = random_state(2);
        const auto rep = replacement_map(3, sigma);
        const auto c = compose(rep, n);
        CHECK(c.choi.max_abs_diff(replacement_map(2, sigma).choi) < 1e-12);
    }
    SECTION("agrees with apply-based oracle on random maps") {
        for (int rep = 0; rep < 4; ++rep) {
            const auto f = random_cp_map(2, 3);
            const auto s = random_cp_map(3, 2);
            const auto c = compose(s, f);
            const auto rho = random_state(2);
            CHECK(c.apply(rho).max_abs_diff(s.apply(f.apply(rho))) < 1e-10);
        }
    }
    SECTION("dimension mismatch rejected") {
        CHECK_THROWS_AS(compose(random_cp_map(3, 2), random_cp_map(2, 2)), std::invalid_argument);
    }
}

TEST_CASE("tensor agrees with the apply-twice oracle") {
    const auto dep = builtin_depolarizing(2, 0.3);
    const auto t = tensor(dep, dep);
    const auto phi4 = canonical_operator(CanonicalKind::max_entangled, 4);
    // oracle: apply the copies one factor at a time on (A1, A2, ref4)
    const auto step1 = apply_on_factors(dep, phi4, 1, 2 * 4);
    const auto step2 = apply_on_factors(dep, step1, 2, 4);
    const auto joint = apply_on_factors(t, phi4, 1, 4);
    CHECK(joint.max_abs_diff(step2) < 1e-12);

    for (int rep = 0; rep < 3; ++rep) {
        const auto a = random_cp_map(2, 2);
        const auto b = random_cp_map(2, 2);
        const auto ab = tensor(a, b);
        const auto rho = random_state(4);
        const auto direct = ab.apply(rho);
        const auto stepwise = apply_on_factors(b, apply_on_factors(a, rho, 1, 2), 2, 1);
        CHECK(direct.max_abs_diff(stepwise) < 1e-10);
    }
}

TEST_CASE("adjoint satisfies the pairing identity") {
    for (int rep = 0; rep < 4; ++rep) {
        const auto n = random_cp_map(2, 3);
        const auto na = adjoint(n);
        const auto x = random_complex(2, 2);
        const auto xh = (x + x.adjoint()) * complexd(0.5, 0.0);
        const auto y = random_complex(3, 3);
        const auto yh = (y + y.adjoint()) * complexd(0.5, 0.0);
        const double lhs = yh.hs_inner(n.apply(xh));
        const double rhs = na.apply(yh).hs_inner(xh);
        CHECK(lhs == Catch::Approx(rhs).margin(1e-10));
    }
}

TEST_CASE("boundary conditions") {
    SECTION("product boundary factorizes to a scaled replacement") {
        const int da = 2, db = 2, dc = 3;
        const auto pi_b = canonical_operator(CanonicalKind::uniform, db);
        const auto pi_c = canonical_operator(CanonicalKind::uniform, dc);
        const auto pi_a = canonical_operator(CanonicalKind::uniform, da);
        const auto bc = make_boundary(da, db, dc, kron(pi_b, pi_c), kron(pi_a, pi_c));
        const auto n = boundary_to_map(bc);
        const auto expected = replacement_map(da, pi_b);
        CHECK(n.choi.max_abs_diff(expected.choi * complexd(1.0 / (da * dc), 0.0)) < 1e-12);
    }
    SECTION("maximally entangled boundary realizes postselected teleportation") {
        const int d = 2;
        const auto phi = canonical_operator(CanonicalKind::max_entangled, d);
        const auto bc = make_boundary(d, d, d, phi, phi);
        const auto n = boundary_to_map(bc);
        const auto id = identity_map(d);
        CHECK(n.choi.max_abs_diff(id.choi * complexd(1.0 / (d * d), 0.0)) < 1e-12);
    }
    SECTION("boundary output is CP for PSD boundary inputs") {
        for (int rep = 0; rep < 4; ++rep) {
            const auto bc = make_boundary(2, 2, 2, random_state(4), random_state(4));
            CHECK(boundary_to_map(bc).is_cp);
        }
    }
    SECTION("map_to_boundary of a replacement map") {
        const auto pi2 = canonical_operator(CanonicalKind::uniform, 2);
        const auto rep = replacement_map(2, pi2);
        const auto [bc, scale] = map_to_boundary(rep);
        CHECK(bc.rho_init.max_abs_diff(kron(pi2, pi2)) < 1e-12);
        CHECK(bc.rho_final.max_abs_diff(canonical_operator(CanonicalKind::max_entangled, 2)) < 1e-12);
        (void)scale;
    }
    SECTION("map_to_boundary normalization for depolarizing") {
        const auto dep = builtin_depolarizing(2, 0.5);
        const auto [bc, scale] = map_to_boundary(dep);
        // Choi trace is 1 for a channel, so the initial state is the swapped Choi itself
        const auto expected = permute_subsystems(dep.choi, SystemDims{2, 2}, {1, 0});
        CHECK(bc.rho_init.max_abs_diff(expected) < 1e-12);
        CHECK(scale == Catch::Approx(4.0).margin(1e-10));
    }
    SECTION("round trip reproduces the map up to the returned scale") {
        for (int rep = 0; rep < 4; ++rep) {
            const auto n = random_cp_map(2, 3);
            const auto [bc, scale] = map_to_boundary(n);
            const auto back = boundary_to_map(bc);
            CHECK(back.choi.max_abs_diff(n.choi * complexd(1.0 / scale, 0.0)) < 1e-10);
        }
    }
}

TEST_CASE("reorder_map_factors relabels without changing action") {
    const auto a = random_cp_map(2, 2);
    const auto b = random_cp_map(3, 2);
    const auto ab = tensor(a, b);
    const auto ba = tensor(b, a);
    const auto reordered = reorder_map_factors(ab, SystemDims{2, 3}, {1, 0}, SystemDims{2, 2}, {1, 0});
    CHECK(reordered.choi.max_abs_diff(ba.choi) < 1e-12);
}

TEST_CASE("choi state normalization for channels") {
    for (int rep = 0; rep < 3; ++rep) {
        const auto m = random_channel(2, 2);
        CHECK(std::abs(m.choi.trace() - complexd(1.0, 0.0)) < 1e-9);
        CHECK(m.is_cp);
        CHECK(m.is_tp);
    }
}
