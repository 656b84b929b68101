#include <catch2/catch_amalgamated.hpp>

#include "sepdec/enumeration.hpp"

using namespace sepdec;

TEST_CASE("validate accepts canonical states") {
    BipartiteDims d22(2, 2);
    CHECK_NOTHROW(validate(ComplexMatrix::identity(4) * cplx(0.25), d22));

    DensityMatrix b = bell(BellState::PhiPlus);
    auto eig = hermitian_eig(b.mat);
    CHECK(eig.eigenvalues[3] == Catch::Approx(1.0).margin(1e-12));
    CHECK(eig.eigenvalues[2] == Catch::Approx(0.0).margin(1e-12));
    CHECK_NOTHROW(validate(b.mat, d22));
}

TEST_CASE("validate rejects a slightly negative state") {
    ComplexMatrix m(4, 4);
    m(0, 0) = 1.0001;
    m(3, 3) = -0.0001;
    try {
        validate(m, BipartiteDims(2, 2));
        FAIL("expected StateValidationError");
    } catch (const StateValidationError& e) {
        REQUIRE(e.violations.size() == 1);
        CHECK(e.violations[0].find("NotPositive") != std::string::npos);
    }
}

TEST_CASE("validate lists every violated invariant") {
    ComplexMatrix m(4, 4);
    m(0, 0) = 2.0;        // trace 2
    m(0, 1) = cplx(0, 1); // non-Hermitian (m(1,0) stays 0)
    m(3, 3) = -0.5;       // negative eigenvalue
    try {
        validate(m, BipartiteDims(2, 2));
        FAIL("expected StateValidationError");
    } catch (const StateValidationError& e) {
        REQUIRE(e.violations.size() == 3);
        CHECK(e.violations[0].find("NotHermitian") != std::string::npos);
        CHECK(e.violations[1].find("TraceNotOne") != std::string::npos);
        CHECK(e.violations[2].find("NotPositive") != std::string::npos);
    }
}

TEST_CASE("isotropic family endpoints and linearity") {
    DensityMatrix p0 = isotropic(0.0, 2);
    CHECK(approx_equal(p0.mat, ComplexMatrix::identity(4) * cplx(0.25), 1e-14));

    DensityMatrix p1 = isotropic(1.0, 2);
    CHECK(approx_equal(p1.mat, bell(BellState::PhiPlus).mat, 1e-14));

    const double p = 0.37;
    DensityMatrix mid = isotropic(p, 2);
    ComplexMatrix interp = p1.mat * cplx(p) + p0.mat * cplx(1.0 - p);
    CHECK(approx_equal(mid.mat, interp, 1e-13));

    CHECK_THROWS_AS(isotropic(-0.1), std::invalid_argument);
    CHECK_THROWS_AS(isotropic(1.1), std::invalid_argument);
}

TEST_CASE("werner at p=1 for qubits is the singlet") {
    DensityMatrix w = werner(1.0, 2);
    CHECK(approx_equal(w.mat, bell(BellState::PsiMinus).mat, 1e-13));
    CHECK_THROWS_AS(werner(2.0), std::invalid_argument);
}

TEST_CASE("every generator output passes validate") {
    for (BellState which : {BellState::PhiPlus, BellState::PhiMinus, BellState::PsiPlus,
                            BellState::PsiMinus})
        CHECK_NOTHROW(validate(bell(which).mat, BipartiteDims(2, 2)));
    for (double p : {0.0, 0.3, 0.7, 1.0}) {
        CHECK_NOTHROW(validate(isotropic(p, 2).mat, BipartiteDims(2, 2)));
        CHECK_NOTHROW(validate(isotropic(p, 3).mat, BipartiteDims(3, 3)));
        CHECK_NOTHROW(validate(werner(p, 2).mat, BipartiteDims(2, 2)));
        CHECK_NOTHROW(validate(werner(p, 3).mat, BipartiteDims(3, 3)));
    }
    CHECK_NOTHROW(validate(max_mixed(BipartiteDims(2, 3)).mat, BipartiteDims(2, 3)));
    for (std::uint64_t seed = 0; seed < 20; ++seed)
        CHECK_NOTHROW(random_rational_separable(seed, 3, BipartiteDims(2, 2), 4));
}

TEST_CASE("rational separable mixtures are always PPT") {
    // PPT is necessary for separability; the partial transpose of each sample
    // must stay positive. Runs as a direct spectral check, independent of the
    // detector module.
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        BipartiteDims dims = (seed % 2 == 0) ? BipartiteDims(2, 2) : BipartiteDims(2, 3);
        DensityMatrix rho = random_rational_separable(seed, 3, dims, 4);
        ComplexMatrix pt = partial_transpose(rho.mat, dims, Subsystem::B);
        auto eig = hermitian_eig(pt);
        CHECK(eig.eigenvalues.front() >= -1e-10);
    }
}

TEST_CASE("rational separable sample reconstructs from its atoms") {
    auto sample = random_rational_separable_sample(7, 3, BipartiteDims(2, 2), 4);
    ComplexMatrix rec(4, 4);
    for (std::size_t k = 0; k < sample.atoms.size(); ++k)
        rec += sample.atoms[k].projector * cplx(sample.weights[k]);
    CHECK(approx_equal(rec, sample.state.mat, 1e-13));
}

TEST_CASE("product state projector is idempotent") {
    auto p = make_product_state({cplx(0.6, 0.1), cplx(0.0, 0.79)}, {1.0, cplx(0, 1), 0.5});
    CHECK(approx_equal(p.projector * p.projector, p.projector, 1e-10));
    CHECK(std::abs(p.projector.trace() - cplx(1.0)) < 1e-12);
}

TEST_CASE("state JSON round trip") {
    DensityMatrix rho = isotropic(0.42, 2);
    std::string text = write_state(rho);
    DensityMatrix back = read_state(text);
    CHECK(back.dims == rho.dims);
    CHECK(approx_equal(back.mat, rho.mat, 1e-14));
    CHECK(write_state(back) == text);
}

TEST_CASE("state JSON schema violations") {
    CHECK_THROWS_WITH(read_state("{\"re\":[[1]],\"im\":[[0]]}"),
                      Catch::Matchers::ContainsSubstring("dims"));
    CHECK_THROWS(read_state("not json at all"));
    // 3x3 matrix with dims [2,2]
    nlohmann::json j;
    j["dims"] = {2, 2};
    j["re"] = {{1, 0, 0}, {0, 0, 0}, {0, 0, 0}};
    j["im"] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
    CHECK_THROWS_WITH(read_state(j.dump()),
                      Catch::Matchers::ContainsSubstring("does not match dims"));
    // schema fine but not a state
    nlohmann::json bad;
    bad["dims"] = {2, 2};
    bad["re"] = std::vector<std::vector<double>>(4, std::vector<double>(4, 0.0));
    bad["im"] = std::vector<std::vector<double>>(4, std::vector<double>(4, 0.0));
    CHECK_THROWS_AS(read_state(bad.dump()), StateValidationError);
}
