#include <catch2/catch_amalgamated.hpp>

#include "sepdec/hull.hpp"
#include "sepdec/rng.hpp"

using namespace sepdec;

namespace {

std::vector<cplx> random_unit(SplitMix64& rng, std::size_t d) {
    std::vector<cplx> v(d);
    for (auto& c : v) c = rng.complex_gaussian();
    return normalized(std::move(v));
}

ProductState random_product(SplitMix64& rng, BipartiteDims dims) {
    return make_product_state(random_unit(rng, dims.n), random_unit(rng, dims.m));
}

ProjectorTuple random_full_tuple(SplitMix64& rng, BipartiteDims dims) {
    const std::size_t L = caratheodory_bound(dims);
    for (int attempt = 0; attempt < 64; ++attempt) {
        ProjectorTuple t;
        for (std::size_t i = 0; i < L; ++i) t.elements.push_back(random_product(rng, dims));
        if (affinely_independent(t)) return t;
    }
    throw std::runtime_error("random_full_tuple: could not draw an independent tuple");
}

ProjectorTuple computational_tuple() {
    ProjectorTuple t;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            std::vector<cplx> a = {i == 0 ? 1.0 : 0.0, i == 0 ? 0.0 : 1.0};
            std::vector<cplx> b = {j == 0 ? 1.0 : 0.0, j == 0 ? 0.0 : 1.0};
            t.elements.push_back(make_product_state(a, b));
        }
    return t;
}

ComplexMatrix tuple_mix(const ProjectorTuple& t, const std::vector<double>& w) {
    ComplexMatrix m(t.elements[0].projector.rows, t.elements[0].projector.cols);
    for (std::size_t i = 0; i < t.size(); ++i) m += t.elements[i].projector * cplx(w[i]);
    return m;
}

}  // namespace

TEST_CASE("affine independence basics") {
    SplitMix64 rng(41);
    ProjectorTuple rep;
    auto p = random_product(rng, BipartiteDims(2, 2));
    rep.elements = {p, p};
    CHECK(!affinely_independent(rep));

    CHECK(affinely_independent(computational_tuple()));

    // three collinear abstract points
    std::vector<double> t1 = {0, 0, 1}, t2 = {2, 0, 1};
    std::vector<double> mid = {1, 0, 1};
    CHECK(!affinely_independent({t1, t2, mid}));
    CHECK(affinely_independent({t1, t2, {0, 1, 0}}));

    CHECK_THROWS_AS(affinely_independent(ProjectorTuple{}), std::invalid_argument);
}

TEST_CASE("facet test: centroid is In with uniform weights") {
    SplitMix64 rng(42);
    auto t = random_full_tuple(rng, BipartiteDims(2, 2));
    std::vector<double> uni(t.size(), 1.0 / t.size());
    auto res = facet_sign_membership(tuple_mix(t, uni), t);
    REQUIRE(res.kind == MembershipKind::In);
    REQUIRE(res.weights.has_value());
    for (double w : *res.weights) CHECK(w == Catch::Approx(1.0 / 16.0).margin(1e-7));
}

TEST_CASE("facet test: reflected exterior point is Out with a valid certificate") {
    SplitMix64 rng(43);
    auto t = random_full_tuple(rng, BipartiteDims(2, 2));
    std::vector<double> uni(t.size(), 1.0 / t.size());
    ComplexMatrix centroid = tuple_mix(t, uni);
    ComplexMatrix rho = t.elements[0].projector * cplx(2.0) - centroid;  // trace stays 1

    auto res = facet_sign_membership(rho, t);
    REQUIRE(res.kind == MembershipKind::Out);
    REQUIRE(res.facet.has_value());
    const double rho_val = hs_inner_re(res.facet->normal, rho);
    CHECK(rho_val < res.facet->offset - 1e-9);
    for (const auto& e : t.elements)
        CHECK(hs_inner_re(res.facet->normal, e.projector) >= res.facet->offset - 1e-7);
}

TEST_CASE("facet test: a point on a facet is Degenerate") {
    SplitMix64 rng(44);
    auto t = random_full_tuple(rng, BipartiteDims(2, 2));
    std::vector<double> w(t.size(), 1.0 / (t.size() - 1));
    w[5] = 0.0;  // drop one vertex: the mix lies on the opposite facet
    auto res = facet_sign_membership(tuple_mix(t, w), t);
    CHECK(res.kind == MembershipKind::Degenerate);
}

TEST_CASE("barycentric oracle: vertices and centroid") {
    SplitMix64 rng(45);
    auto t = random_full_tuple(rng, BipartiteDims(2, 2));
    std::vector<double> uni(t.size(), 1.0 / t.size());
    auto c = barycentric_membership(tuple_mix(t, uni), t);
    REQUIRE(c.kind == MembershipKind::In);
    for (double w : *c.weights) CHECK(w == Catch::Approx(1.0 / 16.0).margin(1e-7));

    auto v = barycentric_membership(t.elements[3].projector, t);
    REQUIRE(v.kind == MembershipKind::In);
    for (std::size_t i = 0; i < v.weights->size(); ++i)
        CHECK((*v.weights)[i] == Catch::Approx(i == 3 ? 1.0 : 0.0).margin(1e-7));
}

TEST_CASE("barycentric oracle: maximally mixed against an extended diagonal tuple") {
    SplitMix64 rng(46);
    ProjectorTuple t = computational_tuple();
    while (t.size() < 16) {
        t.elements.push_back(random_product(rng, BipartiteDims(2, 2)));
        if (!affinely_independent(t)) t.elements.pop_back();
    }
    ComplexMatrix mm = ComplexMatrix::identity(4) * cplx(0.25);
    auto res = barycentric_membership(mm, t);
    REQUIRE(res.kind == MembershipKind::In);
    for (std::size_t i = 0; i < 16; ++i)
        CHECK((*res.weights)[i] == Catch::Approx(i < 4 ? 0.25 : 0.0).margin(1e-8));
}

TEST_CASE("out-of-span targets are Out in both tests") {
    SplitMix64 rng(47);
    ProjectorTuple small;
    for (int i = 0; i < 3; ++i) small.elements.push_back(random_product(rng, BipartiteDims(2, 2)));
    REQUIRE(affinely_independent(small));
    ComplexMatrix rho = ComplexMatrix::identity(4) * cplx(0.25);
    auto f = facet_sign_membership(rho, small);
    auto b = barycentric_membership(rho, small);
    CHECK(f.kind == MembershipKind::Out);
    CHECK(b.kind == MembershipKind::Out);
    REQUIRE(f.facet.has_value());
    CHECK(hs_inner_re(f.facet->normal, rho) > f.facet->offset + 1e-10);
}

TEST_CASE("oracle equivalence on random non-degenerate instances") {
    SplitMix64 rng(48);
    int disagreements = 0, compared = 0;
    for (int trial = 0; trial < 40; ++trial) {
        auto t = random_full_tuple(rng, BipartiteDims(2, 2));
        for (int c = 0; c < 5; ++c) {
            ComplexMatrix rho(4, 4);
            if (c % 2 == 0) {
                // random interior-ish mixture
                std::vector<double> w(t.size());
                double s = 0.0;
                for (auto& x : w) {
                    x = -std::log(rng.uniform() + 1e-300);
                    s += x;
                }
                for (auto& x : w) x /= s;
                rho = tuple_mix(t, w);
            } else {
                // random state, usually outside
                ComplexMatrix g(4, 4);
                for (auto& x : g.a) x = rng.complex_gaussian();
                rho = g * g.adjoint();
                rho *= cplx(1.0 / std::real(rho.trace()));
            }
            auto bary = barycentric_membership(rho, t);
            if (bary.kind == MembershipKind::Out && !bary.weights.has_value()) {
                // recompute the raw solve to apply the non-degeneracy filter
            }
            auto facet = facet_sign_membership(rho, t);
            if (facet.kind == MembershipKind::Degenerate) continue;
            ++compared;
            if (facet.kind != bary.kind) ++disagreements;
        }
    }
    CHECK(compared > 100);
    CHECK(disagreements == 0);
}

TEST_CASE("membership verdicts are invariant under tuple permutation") {
    SplitMix64 rng(49);
    auto t = random_full_tuple(rng, BipartiteDims(2, 2));
    std::vector<double> w(t.size());
    double s = 0.0;
    for (auto& x : w) {
        x = -std::log(rng.uniform() + 1e-300);
        s += x;
    }
    for (auto& x : w) x /= s;
    ComplexMatrix inside = tuple_mix(t, w);
    ComplexMatrix outside = t.elements[0].projector * cplx(1.7) - tuple_mix(t, w) * cplx(0.7);

    for (int perm = 0; perm < 4; ++perm) {
        ProjectorTuple shuffled = t;
        for (std::size_t i = shuffled.size(); i > 1; --i)
            std::swap(shuffled.elements[i - 1], shuffled.elements[rng.below(i)]);
        CHECK(facet_sign_membership(inside, shuffled).kind == MembershipKind::In);
        CHECK(barycentric_membership(inside, shuffled).kind == MembershipKind::In);
        CHECK(facet_sign_membership(outside, shuffled).kind == MembershipKind::Out);
        CHECK(barycentric_membership(outside, shuffled).kind == MembershipKind::Out);
    }
}

TEST_CASE("growing hull: single point and exact membership") {
    SplitMix64 rng(50);
    auto p = random_product(rng, BipartiteDims(2, 2));
    auto res = growing_hull_check(p.projector, {p});
    CHECK(res.distance == Catch::Approx(0.0).margin(1e-12));
    CHECK(res.weights[0] == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("growing hull: maximally mixed needs exactly the four basis projectors") {
    ComplexMatrix mm = ComplexMatrix::identity(4) * cplx(0.25);
    auto t = computational_tuple();
    auto res = growing_hull_check(mm, t.elements);
    CHECK(res.distance == Catch::Approx(0.0).margin(1e-10));
    for (double w : res.weights) CHECK(w == Catch::Approx(0.25).margin(1e-9));
}

TEST_CASE("growing hull: Bell state against diagonal projectors keeps sqrt(1/2)") {
    auto t = computational_tuple();
    DensityMatrix rho = bell(BellState::PhiPlus);
    auto res = growing_hull_check(rho.mat, t.elements);
    CHECK(res.distance == Catch::Approx(std::sqrt(0.5)).margin(1e-9));
}

TEST_CASE("growing hull distance is non-increasing as points accumulate") {
    SplitMix64 rng(51);
    DensityMatrix target = isotropic(0.2, 2);
    GrowingHull hull(target.mat);
    double prev = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 60; ++i) {
        const double d = hull.append(random_product(rng, BipartiteDims(2, 2)).projector);
        CHECK(d <= prev + 1e-12);
        prev = d;
    }
}

TEST_CASE("certificates reconstruct and prune to the Caratheodory bound") {
    SplitMix64 rng(52);
    // L + 3 atoms with forced dependencies
    std::vector<ProductState> atoms;
    for (int i = 0; i < 19; ++i) atoms.push_back(random_product(rng, BipartiteDims(2, 2)));
    std::vector<double> w(atoms.size());
    double s = 0.0;
    for (auto& x : w) {
        x = 0.2 + rng.uniform();
        s += x;
    }
    for (auto& x : w) x /= s;
    ComplexMatrix rho(4, 4);
    for (std::size_t i = 0; i < atoms.size(); ++i) rho += atoms[i].projector * cplx(w[i]);

    auto cert = extract_certificate(w, atoms, rho, 16, 1e-8);
    CHECK(cert.pairs.size() <= 16);
    CHECK(cert.residual <= 1e-9);
    double sum = 0.0;
    ComplexMatrix rec(4, 4);
    for (const auto& [wt, atom] : cert.pairs) {
        CHECK(wt >= 0.0);
        sum += wt;
        rec += atom.projector * cplx(wt);
    }
    CHECK(sum == Catch::Approx(1.0).margin(1e-10));
    CHECK(hs_distance(rec, rho) <= 1e-9);

    // single-atom input stays put
    auto single = extract_certificate({1.0}, {atoms[0]}, atoms[0].projector, 16, 1e-8);
    CHECK(single.pairs.size() == 1);
    CHECK(single.pairs[0].first == Catch::Approx(1.0));
}

TEST_CASE("growing hull weights feed extract_certificate soundly") {
    SplitMix64 rng(53);
    DensityMatrix target = isotropic(0.15, 2);
    GrowingHull hull(target.mat);
    std::vector<ProductState> pool;
    ProductEnumerator en(BipartiteDims(2, 2));
    double dist = 1.0;
    while (dist > 1e-8 && pool.size() < 40000) {
        auto item = en.next();
        if (item.skipped()) continue;
        pool.push_back(*item.state);
        dist = hull.append(pool.back().projector);
    }
    REQUIRE(dist <= 1e-8);
    auto cert = extract_certificate(hull.weights(), pool, target.mat, 16, 1e-7);
    CHECK(cert.pairs.size() <= 16);
    CHECK(cert.residual <= 1e-7);
}
