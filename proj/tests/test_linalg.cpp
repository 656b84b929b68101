#include <catch2/catch_amalgamated.hpp>

#include "sepdec/linalg.hpp"
#include "sepdec/rng.hpp"

using namespace sepdec;

namespace {

ComplexMatrix pauli_x() { return ComplexMatrix(2, 2, {0, 1, 1, 0}); }
ComplexMatrix pauli_z() { return ComplexMatrix(2, 2, {1, 0, 0, -1}); }

ComplexMatrix random_matrix(SplitMix64& rng, std::size_t r, std::size_t c) {
    ComplexMatrix m(r, c);
    for (auto& x : m.a) x = rng.complex_gaussian();
    return m;
}

ComplexMatrix random_hermitian(SplitMix64& rng, std::size_t d) {
    ComplexMatrix g = random_matrix(rng, d, d);
    ComplexMatrix h(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            h(i, j) = 0.5 * (g(i, j) + std::conj(g(j, i)));
    return h;
}

// Random density matrix (Ginibre construction), used as a generic trace-one
// PSD test input.
ComplexMatrix random_density(SplitMix64& rng, std::size_t d) {
    ComplexMatrix g = random_matrix(rng, d, d);
    ComplexMatrix rho = g * g.adjoint();
    rho *= 1.0 / std::real(rho.trace());
    return rho;
}

ComplexMatrix random_unitary(SplitMix64& rng, std::size_t d) {
    // Eigenvectors of a random Hermitian matrix form a Haar-ish unitary,
    // good enough for invariance tests.
    return hermitian_eig(random_hermitian(rng, d)).eigenvectors;
}

ComplexMatrix bell_phi_plus_projector() {
    ComplexMatrix rho(4, 4);
    const std::size_t idx[2] = {0, 3};
    for (std::size_t i : idx)
        for (std::size_t j : idx) rho(i, j) = 0.5;
    return rho;
}

}  // namespace

TEST_CASE("kron basics") {
    ComplexMatrix i2 = ComplexMatrix::identity(2);
    CHECK(approx_equal(kron(i2, i2), ComplexMatrix::identity(4), 1e-14));

    SplitMix64 rng(11);
    ComplexMatrix a = random_matrix(rng, 2, 3);
    ComplexMatrix b = random_matrix(rng, 2, 2);
    ComplexMatrix k = kron(a, b);
    CHECK(k.rows == 4);
    CHECK(k.cols == 6);

    ComplexMatrix xz = kron(pauli_x(), pauli_z());
    CHECK(xz(0, 2) == cplx(1.0));
    CHECK(xz(1, 3) == cplx(-1.0));
}

TEST_CASE("kron is associative") {
    SplitMix64 rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        ComplexMatrix a = random_matrix(rng, 2, 2);
        ComplexMatrix b = random_matrix(rng, 3, 2);
        ComplexMatrix c = random_matrix(rng, 2, 3);
        CHECK(approx_equal(kron(kron(a, b), c), kron(a, kron(b, c)), 1e-12));
    }
}

TEST_CASE("partial trace of product operators factorizes") {
    SplitMix64 rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        ComplexMatrix sa = random_matrix(rng, 2, 2);
        ComplexMatrix sb = random_matrix(rng, 3, 3);
        BipartiteDims dims(2, 3);
        ComplexMatrix joint = kron(sa, sb);

        ComplexMatrix ta = partial_trace(joint, dims, Subsystem::A);
        ComplexMatrix tb = partial_trace(joint, dims, Subsystem::B);
        // keep A: sa * tr(sb); keep B: sb * tr(sa)
        CHECK(approx_equal(partial_trace(joint, dims, Subsystem::A), sa * sb.trace(), 1e-12));
        CHECK(approx_equal(ta, sa * sb.trace(), 1e-12));
        CHECK(approx_equal(tb, sb * sa.trace(), 1e-12));
    }
}

TEST_CASE("partial trace of Bell projector is maximally mixed") {
    ComplexMatrix rho = bell_phi_plus_projector();
    ComplexMatrix red = partial_trace(rho, BipartiteDims(2, 2), Subsystem::B);
    CHECK(approx_equal(red, ComplexMatrix::identity(2) * cplx(0.5), 1e-14));
}

TEST_CASE("partial trace preserves trace") {
    SplitMix64 rng(14);
    for (int trial = 0; trial < 10; ++trial) {
        ComplexMatrix rho = random_density(rng, 6);
        BipartiteDims dims(2, 3);
        for (Subsystem keep : {Subsystem::A, Subsystem::B}) {
            ComplexMatrix red = partial_trace(rho, dims, keep);
            CHECK(std::abs(red.trace() - rho.trace()) < 1e-12);
        }
    }
}

TEST_CASE("partial transpose fixed point, spectrum and involution") {
    BipartiteDims dims(2, 2);
    ComplexMatrix mm = ComplexMatrix::identity(4) * cplx(0.25);
    CHECK(approx_equal(partial_transpose(mm, dims, Subsystem::B), mm, 1e-14));

    ComplexMatrix pt = partial_transpose(bell_phi_plus_projector(), dims, Subsystem::B);
    auto eig = hermitian_eig(pt);
    REQUIRE(eig.eigenvalues.size() == 4);
    CHECK(eig.eigenvalues[0] == Catch::Approx(-0.5).margin(1e-12));
    CHECK(eig.eigenvalues[1] == Catch::Approx(0.5).margin(1e-12));
    CHECK(eig.eigenvalues[2] == Catch::Approx(0.5).margin(1e-12));
    CHECK(eig.eigenvalues[3] == Catch::Approx(0.5).margin(1e-12));

    SplitMix64 rng(15);
    for (int trial = 0; trial < 10; ++trial) {
        ComplexMatrix rho = random_density(rng, 6);
        BipartiteDims d23(2, 3);
        for (Subsystem side : {Subsystem::A, Subsystem::B}) {
            ComplexMatrix twice = partial_transpose(partial_transpose(rho, d23, side), d23, side);
            CHECK(approx_equal(twice, rho, 1e-13));
            // trace preservation under PT: eigenvalues sum to the input trace
            auto e = hermitian_eig(partial_transpose(rho, d23, side));
            double sum = 0.0;
            for (double x : e.eigenvalues) sum += x;
            CHECK(sum == Catch::Approx(std::real(rho.trace())).margin(1e-10));
        }
    }
}

TEST_CASE("hermitian_eig on simple matrices") {
    ComplexMatrix diag(3, 3, {3, 0, 0, 0, 1, 0, 0, 0, 2});
    auto e = hermitian_eig(diag);
    CHECK(e.eigenvalues[0] == Catch::Approx(1.0).margin(1e-13));
    CHECK(e.eigenvalues[1] == Catch::Approx(2.0).margin(1e-13));
    CHECK(e.eigenvalues[2] == Catch::Approx(3.0).margin(1e-13));

    auto ex = hermitian_eig(pauli_x());
    CHECK(ex.eigenvalues[0] == Catch::Approx(-1.0).margin(1e-13));
    CHECK(ex.eigenvalues[1] == Catch::Approx(1.0).margin(1e-13));
}

TEST_CASE("hermitian_eig reconstruction and orthonormality") {
    SplitMix64 rng(16);
    for (std::size_t d : {2u, 3u, 5u, 8u, 12u}) {
        ComplexMatrix h = random_hermitian(rng, d);
        auto e = hermitian_eig(h);
        ComplexMatrix lam(d, d);
        for (std::size_t i = 0; i < d; ++i) lam(i, i) = e.eigenvalues[i];
        ComplexMatrix rec = e.eigenvectors * lam * e.eigenvectors.adjoint();
        CHECK(hs_distance(rec, h) <= 1e-10 * static_cast<double>(d));
        ComplexMatrix gram = e.eigenvectors.adjoint() * e.eigenvectors;
        CHECK(hs_distance(gram, ComplexMatrix::identity(d)) <= 1e-10 * static_cast<double>(d));
        for (std::size_t i = 0; i + 1 < d; ++i) CHECK(e.eigenvalues[i] <= e.eigenvalues[i + 1]);
    }
}

TEST_CASE("hermitian_eig spectrum is unitarily invariant") {
    SplitMix64 rng(17);
    for (int trial = 0; trial < 5; ++trial) {
        ComplexMatrix h = random_hermitian(rng, 5);
        ComplexMatrix u = random_unitary(rng, 5);
        auto e1 = hermitian_eig(h);
        auto e2 = hermitian_eig(u * h * u.adjoint());
        for (std::size_t i = 0; i < 5; ++i)
            CHECK(e1.eigenvalues[i] == Catch::Approx(e2.eigenvalues[i]).margin(1e-9));
    }
}

TEST_CASE("hermitian_eig rejects clearly non-Hermitian input") {
    ComplexMatrix bad(2, 2, {0, 1, 0, 0});
    CHECK_THROWS_AS(hermitian_eig(bad), std::invalid_argument);
}

TEST_CASE("hs_distance basics") {
    SplitMix64 rng(18);
    ComplexMatrix rho = random_density(rng, 4);
    CHECK(hs_distance(rho, rho) == 0.0);

    ComplexMatrix p0(2, 2, {1, 0, 0, 0});
    ComplexMatrix p1(2, 2, {0, 0, 0, 1});
    CHECK(hs_distance(p0, p1) == Catch::Approx(std::sqrt(2.0)).margin(1e-15));

    for (int trial = 0; trial < 30; ++trial) {
        ComplexMatrix a = random_matrix(rng, 3, 3);
        ComplexMatrix b = random_matrix(rng, 3, 3);
        ComplexMatrix c = random_matrix(rng, 3, 3);
        CHECK(hs_distance(a, c) <= hs_distance(a, b) + hs_distance(b, c) + 1e-12);
    }

    CHECK_THROWS_AS(hs_distance(p0, random_matrix(rng, 3, 3)), std::invalid_argument);
}

TEST_CASE("vectorize_hermitian is a linear isometry") {
    SplitMix64 rng(19);
    ComplexMatrix zero(4, 4);
    auto vz = vectorize_hermitian(zero);
    for (double x : vz) CHECK(x == 0.0);

    for (int trial = 0; trial < 20; ++trial) {
        ComplexMatrix a = random_hermitian(rng, 4);
        ComplexMatrix b = random_hermitian(rng, 4);
        auto va = vectorize_hermitian(a);
        auto vb = vectorize_hermitian(b);
        double dist2 = 0.0;
        for (std::size_t k = 0; k < va.size(); ++k)
            dist2 += (va[k] - vb[k]) * (va[k] - vb[k]);
        CHECK(std::sqrt(dist2) == Catch::Approx(hs_distance(a, b)).margin(1e-12));

        const double al = 0.3, be = -1.7;
        ComplexMatrix combo = a * cplx(al) + b * cplx(be);
        auto vc = vectorize_hermitian(combo);
        for (std::size_t k = 0; k < vc.size(); ++k)
            CHECK(vc[k] == Catch::Approx(al * va[k] + be * vb[k]).margin(1e-12));

        ComplexMatrix back = devectorize_hermitian(va, 4);
        CHECK(approx_equal(back, a, 1e-12));
    }

    ComplexMatrix bad(2, 2, {0, 1, 0, 0});
    CHECK_THROWS_AS(vectorize_hermitian(bad), std::invalid_argument);
}

TEST_CASE("solve_linear solves and detects singularity") {
    SplitMix64 rng(20);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t k = 5;
        std::vector<double> a(k * k);
        for (auto& x : a) x = rng.gaussian();
        std::vector<double> xtrue(k);
        for (auto& x : xtrue) x = rng.gaussian();
        std::vector<double> b(k, 0.0);
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j) b[i] += a[i * k + j] * xtrue[j];
        auto x = solve_linear(a, b);
        for (std::size_t i = 0; i < k; ++i)
            CHECK(x[i] == Catch::Approx(xtrue[i]).margin(1e-8));
    }
    std::vector<double> sing = {1, 2, 2, 4};
    CHECK_THROWS_AS(solve_linear(sing, {1, 1}), std::runtime_error);
}
