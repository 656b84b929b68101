// The countable dense grid of rational-parameter product states and its
// enumeration order.
//
// A grid factor of local dimension n is
//   ( (p_1/q_1) e^{2 pi i r_1/s_1}, ..., sqrt(1 - sum (p_j/q_j)^2) e^{2 pi i r_n/s_n} )
// with all integers canonical: fractions in lowest terms, p <= q, and phase
// pairs either (1,1) (encoding phase 0) or 1 <= r < s coprime. Indices are
// ranked by height h = sum(p+q+r+s) over all slots, ties broken
// lexicographically on the flat integer tuple, so small denominators come
// first. Tuples that violate the normalization budget sum (p/q)^2 <= 1 keep
// their index but evaluate to Skip.
//
// The rank-deficient mode enumerates rational coefficient vectors over the
// eigenbasis of rho; the closing phase is not free but solved from the
// product-purity condition, which reduces to a self-inversive quartic on the
// unit circle.

#pragma once

#include <cstdint>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "sepdec/linalg.hpp"
#include "sepdec/rng.hpp"
#include "sepdec/states.hpp"

namespace sepdec {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

/// One free coefficient (p/q) e^{2 pi i r/s}.
struct RationalPhaseCoeff {
    std::uint32_t p = 0, q = 1, r = 1, s = 1;

    double modulus() const { return static_cast<double>(p) / static_cast<double>(q); }
    double phase_angle() const {
        return kTwoPi * static_cast<double>(r) / static_cast<double>(s);
    }
    cplx value() const {
        return modulus() * cplx(std::cos(phase_angle()), std::sin(phase_angle()));
    }
    std::uint64_t weight() const { return std::uint64_t(p) + q + r + s; }
};

/// Phase-only slot for the closing coefficient of a factor.
struct RationalPhase {
    std::uint32_t r = 1, s = 1;

    double angle() const { return kTwoPi * static_cast<double>(r) / static_cast<double>(s); }
    cplx value() const { return {std::cos(angle()), std::sin(angle())}; }
    std::uint64_t weight() const { return std::uint64_t(r) + s; }
};

/// Integer address of one grid product state.
struct ProductIndex {
    std::vector<RationalPhaseCoeff> coeffs_a;
    RationalPhase closing_a;
    std::vector<RationalPhaseCoeff> coeffs_b;
    RationalPhase closing_b;

    std::uint64_t height() const {
        std::uint64_t h = closing_a.weight() + closing_b.weight();
        for (const auto& c : coeffs_a) h += c.weight();
        for (const auto& c : coeffs_b) h += c.weight();
        return h;
    }

    std::vector<std::uint32_t> flat() const {
        std::vector<std::uint32_t> f;
        f.reserve(4 * (coeffs_a.size() + coeffs_b.size()) + 4);
        for (const auto& c : coeffs_a) { f.push_back(c.p); f.push_back(c.q); f.push_back(c.r); f.push_back(c.s); }
        f.push_back(closing_a.r); f.push_back(closing_a.s);
        for (const auto& c : coeffs_b) { f.push_back(c.p); f.push_back(c.q); f.push_back(c.r); f.push_back(c.s); }
        f.push_back(closing_b.r); f.push_back(closing_b.s);
        return f;
    }
};

namespace grid {

/// Canonical modulus pairs: (0,1), (1,1), and 1 <= p < q coprime.
inline bool canonical_modulus(std::uint32_t p, std::uint32_t q) {
    if (q == 0) return false;
    if (p == 0) return q == 1;
    if (p == q) return p == 1;
    return p < q && std::gcd(p, q) == 1;
}

/// Canonical phase pairs: (1,1) encodes phase 0, otherwise 1 <= r < s coprime.
inline bool canonical_phase(std::uint32_t r, std::uint32_t s) {
    if (s == 0 || r == 0) return false;
    if (r == s) return r == 1;
    return r < s && std::gcd(r, s) == 1;
}

struct Tables {
    // lists per exact weight, lex-sorted within each weight
    std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> mods_by_w;
    std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> phases_by_w;
    // global lists sorted by (first, second), with parallel weight arrays
    std::vector<std::pair<std::uint32_t, std::uint32_t>> mods_lex, phases_lex;

    std::uint64_t built = 0;

    void ensure(std::uint64_t w_max) {
        if (w_max <= built) return;
        mods_by_w.assign(w_max + 1, {});
        phases_by_w.assign(w_max + 1, {});
        mods_lex.clear();
        phases_lex.clear();
        for (std::uint32_t q = 1; q <= w_max; ++q)
            for (std::uint32_t p = 0; p <= q; ++p) {
                if (std::uint64_t(p) + q > w_max) break;
                if (canonical_modulus(p, q)) mods_lex.emplace_back(p, q);
                if (canonical_phase(p, q)) phases_lex.emplace_back(p, q);
            }
        std::sort(mods_lex.begin(), mods_lex.end());
        std::sort(phases_lex.begin(), phases_lex.end());
        for (auto [p, q] : mods_lex) mods_by_w[p + q].emplace_back(p, q);
        for (auto [r, s] : phases_lex) phases_by_w[r + s].emplace_back(r, s);
        built = w_max;
    }
};

}  // namespace grid

/// Factor vector from canonical rational data. The closing modulus comes from
/// the exact rational complement, so budget boundaries are decided without
/// floating-point error. Returns nullopt when the budget is violated (Skip).
inline std::optional<std::vector<cplx>> build_grid_factor(
    const std::vector<RationalPhaseCoeff>& coeffs, RationalPhase closing, std::size_t dim) {
    if (coeffs.size() + 1 != dim)
        throw std::invalid_argument("build_grid_factor: coefficient count != dim-1");
    std::uint64_t num_acc = 0, den_acc = 1;
    for (const auto& c : coeffs) {
        const std::uint64_t q2 = std::uint64_t(c.q) * c.q;
        if (den_acc > (std::uint64_t(1) << 62) / q2)
            throw std::overflow_error("build_grid_factor: denominators too large");
        num_acc = num_acc * q2 + std::uint64_t(c.p) * c.p * den_acc;
        den_acc *= q2;
    }
    if (num_acc > den_acc) return std::nullopt;
    std::vector<cplx> v(dim);
    for (std::size_t j = 0; j + 1 < dim; ++j) v[j] = coeffs[j].value();
    const double closing_mod =
        std::sqrt(static_cast<double>(den_acc - num_acc) / static_cast<double>(den_acc));
    v[dim - 1] = closing_mod * closing.value();
    return v;
}

/// Materialize one grid address; nullopt = Skip (normalization budget).
inline std::optional<ProductState> build_product(const ProductIndex& idx, BipartiteDims dims) {
    auto fa = build_grid_factor(idx.coeffs_a, idx.closing_a, dims.n);
    auto fb = build_grid_factor(idx.coeffs_b, idx.closing_b, dims.m);
    if (!fa || !fb) return std::nullopt;
    return make_product_state(std::move(*fa), std::move(*fb));
}

struct EnumeratedProduct {
    std::uint64_t index = 0;
    ProductIndex tuple;
    std::optional<ProductState> state;  // nullopt = Skip

    bool skipped() const { return !state.has_value(); }
};

/// Streams the grid in (height, lex) order. Deterministic: the sequence is a
/// pure function of dims. The cursor is an iterative depth-first odometer
/// over the slots, so memory stays O(slots) no matter how far it runs.
class ProductEnumerator {
public:
    explicit ProductEnumerator(BipartiteDims dims) : dims_(dims) {
        const std::size_t slots_a = dims_.n - 1;
        const std::size_t slots_b = dims_.m - 1;
        total_slots_ = slots_a + 1 + slots_b + 1;
        slots_.resize(total_slots_);
        suffix_min_.assign(total_slots_ + 1, 0);
        for (std::size_t k = total_slots_; k-- > 0;)
            suffix_min_[k] = suffix_min_[k + 1] + (is_coeff_slot(k) ? 3 : 2);
        height_ = min_height(dims);
        start_class();
    }

    static std::uint64_t min_height(BipartiteDims dims) {
        return 3 * (std::uint64_t(dims.n) - 1) + 2 + 3 * (std::uint64_t(dims.m) - 1) + 2;
    }

    /// Largest height any canonical address with all denominators <= Q can
    /// have; scanning to this height provably covers the q,s <= Q grid.
    static std::uint64_t max_height_for_denominators(BipartiteDims dims, std::uint32_t q_max) {
        const std::uint64_t pair_max = 2 * std::uint64_t(q_max) - (q_max > 1 ? 1 : 0);
        const std::uint64_t coeff_max = 2 * pair_max;
        return (std::uint64_t(dims.n) - 1) * coeff_max + pair_max +
               (std::uint64_t(dims.m) - 1) * coeff_max + pair_max;
    }

    std::uint64_t current_height() const { return height_; }

    EnumeratedProduct next() {
        EnumeratedProduct out;
        out.index = flat_index_++;
        out.tuple = current_tuple();
        out.state = build_product(out.tuple, dims_);
        advance();
        return out;
    }

private:
    struct SlotIter {
        std::size_t mod_i = 0;   // into mods_lex (coeff slots only)
        std::size_t ph_i = 0;    // into phases_lex, or phases_by_w[exact] for the last slot
        std::uint64_t cap = 0;   // weight budget (exact target for the last slot)
        std::uint64_t consumed = 0;
    };

    bool is_coeff_slot(std::size_t k) const {
        const std::size_t slots_a = dims_.n - 1;
        if (k < slots_a) return true;
        if (k == slots_a) return false;
        return k < slots_a + 1 + dims_.m - 1;
    }

    bool is_last(std::size_t k) const { return k + 1 == total_slots_; }

    std::uint64_t mod_weight(std::size_t i) const {
        return std::uint64_t(tables_.mods_lex[i].first) + tables_.mods_lex[i].second;
    }
    std::uint64_t phase_weight(std::size_t i) const {
        return std::uint64_t(tables_.phases_lex[i].first) + tables_.phases_lex[i].second;
    }

    // first phase index >= from with weight <= cap; npos when none
    std::size_t seek_phase(std::size_t from, std::uint64_t cap) const {
        for (std::size_t i = from; i < tables_.phases_lex.size(); ++i) {
            if (std::uint64_t(tables_.phases_lex[i].first) + 1 > cap) break;  // r only grows
            if (phase_weight(i) <= cap) return i;
        }
        return SIZE_MAX;
    }
    // first mod index >= from whose weight leaves room for some phase
    std::size_t seek_mod(std::size_t from, std::uint64_t cap) const {
        for (std::size_t i = from; i < tables_.mods_lex.size(); ++i) {
            if (std::uint64_t(tables_.mods_lex[i].first) > cap) break;  // p only grows
            if (mod_weight(i) + 2 <= cap) return i;
        }
        return SIZE_MAX;
    }
    // exact-weight variant: mod weight such that cap - w(mod) indexes a
    // non-empty phase list (true for every remainder >= 2)
    std::size_t seek_mod_exact(std::size_t from, std::uint64_t exact) const {
        for (std::size_t i = from; i < tables_.mods_lex.size(); ++i) {
            if (std::uint64_t(tables_.mods_lex[i].first) > exact) break;
            const std::uint64_t wm = mod_weight(i);
            if (wm + 2 <= exact && !tables_.phases_by_w[exact - wm].empty()) return i;
        }
        return SIZE_MAX;
    }

    // position slot k at its first candidate; cap/exact must be set
    bool slot_first(std::size_t k) {
        SlotIter& it = slots_[k];
        if (is_coeff_slot(k)) {
            if (is_last(k)) {
                it.mod_i = seek_mod_exact(0, it.cap);
                if (it.mod_i == SIZE_MAX) return false;
                it.ph_i = 0;  // into phases_by_w[it.cap - w(mod)]
                it.consumed = it.cap;
            } else {
                it.mod_i = seek_mod(0, it.cap);
                if (it.mod_i == SIZE_MAX) return false;
                it.ph_i = seek_phase(0, it.cap - mod_weight(it.mod_i));
                it.consumed = mod_weight(it.mod_i) + phase_weight(it.ph_i);
            }
        } else {
            if (is_last(k)) {
                if (it.cap < 2 || it.cap >= tables_.phases_by_w.size() ||
                    tables_.phases_by_w[it.cap].empty())
                    return false;
                it.ph_i = 0;
                it.consumed = it.cap;
            } else {
                it.ph_i = seek_phase(0, it.cap);
                if (it.ph_i == SIZE_MAX) return false;
                it.consumed = phase_weight(it.ph_i);
            }
        }
        return true;
    }

    // advance slot k to its next candidate in lex order
    bool slot_advance(std::size_t k) {
        SlotIter& it = slots_[k];
        if (is_coeff_slot(k)) {
            if (is_last(k)) {
                const auto& list = tables_.phases_by_w[it.cap - mod_weight(it.mod_i)];
                if (it.ph_i + 1 < list.size()) {
                    ++it.ph_i;
                    return true;
                }
                it.mod_i = seek_mod_exact(it.mod_i + 1, it.cap);
                if (it.mod_i == SIZE_MAX) return false;
                it.ph_i = 0;
                return true;
            }
            const std::size_t nx = seek_phase(it.ph_i + 1, it.cap - mod_weight(it.mod_i));
            if (nx != SIZE_MAX) {
                it.ph_i = nx;
                it.consumed = mod_weight(it.mod_i) + phase_weight(nx);
                return true;
            }
            it.mod_i = seek_mod(it.mod_i + 1, it.cap);
            if (it.mod_i == SIZE_MAX) return false;
            it.ph_i = seek_phase(0, it.cap - mod_weight(it.mod_i));
            it.consumed = mod_weight(it.mod_i) + phase_weight(it.ph_i);
            return true;
        }
        if (is_last(k)) {
            if (it.ph_i + 1 < tables_.phases_by_w[it.cap].size()) {
                ++it.ph_i;
                return true;
            }
            return false;
        }
        const std::size_t nx = seek_phase(it.ph_i + 1, it.cap);
        if (nx == SIZE_MAX) return false;
        it.ph_i = nx;
        it.consumed = phase_weight(nx);
        return true;
    }

    // set caps for slot k given the budget remaining before it, then take the
    // first candidate; always succeeds when remaining >= suffix_min_[k]
    void descend(std::size_t k, std::uint64_t remaining) {
        SlotIter& it = slots_[k];
        it.cap = is_last(k) ? remaining : remaining - suffix_min_[k + 1];
        const bool ok = slot_first(k);
        if (!ok) throw std::logic_error("ProductEnumerator: descend failed");
    }

    void start_class() {
        tables_.ensure(height_ + 2);
        std::uint64_t remaining = height_;
        for (std::size_t k = 0; k < total_slots_; ++k) {
            descend(k, remaining);
            remaining -= slots_[k].consumed;
        }
    }

    void advance() {
        std::size_t k = total_slots_;
        while (k-- > 0) {
            if (slot_advance(k)) {
                std::uint64_t remaining = height_;
                for (std::size_t j = 0; j <= k; ++j) remaining -= slots_[j].consumed;
                for (std::size_t j = k + 1; j < total_slots_; ++j) {
                    descend(j, remaining);
                    remaining -= slots_[j].consumed;
                }
                return;
            }
        }
        ++height_;
        start_class();
    }

    RationalPhaseCoeff coeff_at(std::size_t k) const {
        const SlotIter& it = slots_[k];
        const auto [p, q] = tables_.mods_lex[it.mod_i];
        std::uint32_t r, s;
        if (is_last(k)) {
            const auto& list = tables_.phases_by_w[it.cap - mod_weight(it.mod_i)];
            r = list[it.ph_i].first;
            s = list[it.ph_i].second;
        } else {
            r = tables_.phases_lex[it.ph_i].first;
            s = tables_.phases_lex[it.ph_i].second;
        }
        return {p, q, r, s};
    }

    RationalPhase phase_at(std::size_t k) const {
        const SlotIter& it = slots_[k];
        if (is_last(k)) {
            const auto& pr = tables_.phases_by_w[it.cap][it.ph_i];
            return {pr.first, pr.second};
        }
        return {tables_.phases_lex[it.ph_i].first, tables_.phases_lex[it.ph_i].second};
    }

    ProductIndex current_tuple() const {
        ProductIndex idx;
        const std::size_t slots_a = dims_.n - 1;
        idx.coeffs_a.reserve(slots_a);
        idx.coeffs_b.reserve(dims_.m - 1);
        for (std::size_t k = 0; k < slots_a; ++k) idx.coeffs_a.push_back(coeff_at(k));
        idx.closing_a = phase_at(slots_a);
        for (std::size_t k = slots_a + 1; k + 1 < total_slots_; ++k)
            idx.coeffs_b.push_back(coeff_at(k));
        idx.closing_b = phase_at(total_slots_ - 1);
        return idx;
    }

    BipartiteDims dims_;
    std::size_t total_slots_ = 0;
    std::uint64_t height_ = 0;
    std::uint64_t flat_index_ = 0;
    std::vector<SlotIter> slots_;
    std::vector<std::uint64_t> suffix_min_;
    grid::Tables tables_;
};

/// Random access by walking the stream; O(index), intended for tests and
/// small indices. Long runs should hold a ProductEnumerator cursor.
inline EnumeratedProduct enumerate_product(std::uint64_t index, BipartiteDims dims) {
    ProductEnumerator en(dims);
    EnumeratedProduct item;
    for (std::uint64_t i = 0; i <= index; ++i) item = en.next();
    return item;
}

inline std::uint64_t count_indices_up_to_height(BipartiteDims dims, std::uint64_t h_max) {
    ProductEnumerator en(dims);
    std::uint64_t count = 0;
    while (true) {
        EnumeratedProduct item = en.next();
        if (item.tuple.height() > h_max) return count;
        ++count;
    }
}

// ---------------------------------------------------------------------------
// seeded separable test corpus

struct RationalSeparableSample {
    DensityMatrix state;
    std::vector<double> weights;
    std::vector<ProductState> atoms;
    std::vector<ProductIndex> addresses;  // canonical grid addresses of the atoms

    std::uint64_t max_height() const {
        std::uint64_t h = 0;
        for (const auto& a : addresses) h = std::max(h, a.height());
        return h;
    }
};

namespace detail {

inline RationalPhaseCoeff draw_canonical_coeff(SplitMix64& rng, std::uint32_t max_den) {
    std::uint32_t q = 1 + static_cast<std::uint32_t>(rng.below(max_den));
    std::uint32_t p = static_cast<std::uint32_t>(rng.below(q + 1));
    if (p == 0) {
        q = 1;
    } else {
        const std::uint32_t g = std::gcd(p, q);
        p /= g;
        q /= g;
    }
    std::uint32_t s = 1 + static_cast<std::uint32_t>(rng.below(max_den));
    std::uint32_t r = static_cast<std::uint32_t>(rng.below(s));
    if (r == 0) {
        r = 1;
        s = 1;
    } else {
        const std::uint32_t g = std::gcd(r, s);
        r /= g;
        s /= g;
    }
    return {p, q, r, s};
}

inline RationalPhase draw_canonical_phase(SplitMix64& rng, std::uint32_t max_den) {
    const RationalPhaseCoeff c = draw_canonical_coeff(rng, max_den);
    return {c.r, c.s};
}

}  // namespace detail

/// Convex mixture of `count` product states drawn from the rational grid with
/// denominators <= max_den. Separable by construction, and because the atoms
/// are built through the same factor constructor the enumerator uses, the
/// prover finds them bit-exactly once the enumeration passes their heights.
inline RationalSeparableSample random_rational_separable_sample(std::uint64_t seed,
                                                                std::size_t count,
                                                                BipartiteDims dims,
                                                                std::uint32_t max_den = 4) {
    if (count == 0) throw std::invalid_argument("random_rational_separable: count must be >= 1");
    if (max_den == 0) throw std::invalid_argument("random_rational_separable: max_den must be >= 1");
    SplitMix64 rng(seed ^ 0x5ebd5ebd5ebd5ebdULL);
    RationalSeparableSample out;
    std::vector<double> w(count);
    double wsum = 0.0;
    for (auto& x : w) {
        x = 0.1 + rng.uniform();
        wsum += x;
    }
    for (auto& x : w) x /= wsum;

    ComplexMatrix rho(dims.total(), dims.total());
    for (std::size_t k = 0; k < count; ++k) {
        for (int attempt = 0;; ++attempt) {
            if (attempt >= 4096)
                throw std::runtime_error("random_rational_separable: factor draw stalled");
            ProductIndex addr;
            addr.coeffs_a.resize(dims.n - 1);
            addr.coeffs_b.resize(dims.m - 1);
            for (auto& c : addr.coeffs_a) c = detail::draw_canonical_coeff(rng, max_den);
            addr.closing_a = detail::draw_canonical_phase(rng, max_den);
            for (auto& c : addr.coeffs_b) c = detail::draw_canonical_coeff(rng, max_den);
            addr.closing_b = detail::draw_canonical_phase(rng, max_den);
            auto atom = build_product(addr, dims);
            if (!atom) continue;  // normalization budget violated, redraw
            rho += atom->projector * cplx(w[k]);
            out.atoms.push_back(std::move(*atom));
            out.addresses.push_back(std::move(addr));
            break;
        }
    }
    out.weights = std::move(w);
    out.state = validate(rho, dims);
    return out;
}

inline DensityMatrix random_rational_separable(std::uint64_t seed, std::size_t count,
                                               BipartiteDims dims, std::uint32_t max_den = 4) {
    return random_rational_separable_sample(seed, count, dims, max_den).state;
}

// ---------------------------------------------------------------------------
// vector geometry

/// sqrt(2 (1 - Re<psi|phi>)), the phase-sensitive vector distance; range [0,2].
inline double vector_distance(std::span<const cplx> psi, std::span<const cplx> phi) {
    if (psi.size() != phi.size())
        throw std::invalid_argument("vector_distance: dimension mismatch");
    cplx ip = 0.0;
    for (std::size_t i = 0; i < psi.size(); ++i) ip += std::conj(psi[i]) * phi[i];
    const double re = std::real(ip);
    return std::sqrt(std::max(0.0, 2.0 * (1.0 - re)));
}

inline double vector_distance(const PureState& psi, const PureState& phi) {
    if (!(psi.dims == phi.dims))
        throw std::invalid_argument("vector_distance: dimension mismatch");
    return vector_distance(std::span<const cplx>(psi.amp), std::span<const cplx>(phi.amp));
}

/// Tr_B |u><w| as an n x n matrix.
inline ComplexMatrix reduced_a_outer(std::span<const cplx> u, std::span<const cplx> w,
                                     BipartiteDims dims) {
    if (u.size() != dims.total() || w.size() != dims.total())
        throw std::invalid_argument("reduced_a_outer: dimension mismatch");
    ComplexMatrix out(dims.n, dims.n);
    for (std::size_t i = 0; i < dims.n; ++i)
        for (std::size_t j = 0; j < dims.n; ++j) {
            cplx s = 0.0;
            for (std::size_t k = 0; k < dims.m; ++k)
                s += u[i * dims.m + k] * std::conj(w[j * dims.m + k]);
            out(i, j) = s;
        }
    return out;
}

struct ProductCheck {
    bool product = false;
    double purity = 0.0;
};

/// Purity of the reduced state on A; 1 within tol iff |psi> factorizes.
inline ProductCheck is_product(std::span<const cplx> psi, BipartiteDims dims,
                               double tol = 1e-8) {
    ComplexMatrix red = reduced_a_outer(psi, psi, dims);
    double purity = 0.0;
    for (const auto& x : red.a) purity += std::norm(x);
    return {purity >= 1.0 - tol, purity};
}

/// Split a (near-)product vector into its factors; nullopt if the purity test
/// fails. The factor phases are chosen so a x b reproduces psi itself.
inline std::optional<std::pair<std::vector<cplx>, std::vector<cplx>>> factor_product_vector(
    std::span<const cplx> psi, BipartiteDims dims, double tol = 1e-8) {
    if (!is_product(psi, dims, tol).product) return std::nullopt;
    ComplexMatrix red = reduced_a_outer(psi, psi, dims);
    auto eig = hermitian_eig(red);
    std::vector<cplx> a(dims.n);
    for (std::size_t i = 0; i < dims.n; ++i) a[i] = eig.eigenvectors(i, dims.n - 1);
    std::vector<cplx> b(dims.m, 0.0);
    for (std::size_t k = 0; k < dims.m; ++k)
        for (std::size_t i = 0; i < dims.n; ++i) b[k] += std::conj(a[i]) * psi[i * dims.m + k];
    double nb = 0.0;
    for (const auto& c : b) nb += std::norm(c);
    if (nb <= 0.0) return std::nullopt;
    const double inv = 1.0 / std::sqrt(nb);
    for (auto& c : b) c *= inv;
    return std::make_pair(std::move(a), std::move(b));
}

// ---------------------------------------------------------------------------
// nearest grid state

struct NearestGridResult {
    ProductState state;
    ProductIndex address;
    double distance = 2.0;
};

/// Exhaustive scan over all grid addresses with height <= budget. The
/// distance is non-increasing in the budget since larger budgets scan a
/// superset.
inline NearestGridResult nearest_in_grid(const ProductState& target,
                                         std::uint64_t height_budget) {
    BipartiteDims dims = target.dims();
    const std::vector<cplx> tvec = target.vec();
    ProductEnumerator en(dims);
    NearestGridResult best;
    bool found = false;
    while (true) {
        EnumeratedProduct item = en.next();
        if (item.tuple.height() > height_budget) break;
        if (item.skipped()) continue;
        const double d = vector_distance(tvec, item.state->vec());
        if (!found || d < best.distance) {
            found = true;
            best.state = *item.state;
            best.address = item.tuple;
            best.distance = d;
        }
    }
    if (!found) throw std::invalid_argument("nearest_in_grid: budget below minimal height");
    return best;
}

namespace detail {

struct FactorCandidate {
    std::vector<RationalPhaseCoeff> coeffs;
    RationalPhase closing;
    std::vector<cplx> vec;
    cplx overlap;   // <target_factor | candidate>
    double abs_overlap = 0.0;
};

/// All canonical grid factors of one subsystem with denominators <= q_max,
/// with their overlaps against the given target factor.
inline std::vector<FactorCandidate> factor_candidates(const std::vector<cplx>& target,
                                                      std::size_t dim, std::uint32_t q_max) {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> mods, phases;
    for (std::uint32_t q = 1; q <= q_max; ++q)
        for (std::uint32_t p = 0; p <= q; ++p) {
            if (grid::canonical_modulus(p, q)) mods.emplace_back(p, q);
            if (grid::canonical_phase(p, q)) phases.emplace_back(p, q);
        }
    std::vector<FactorCandidate> out;
    std::vector<RationalPhaseCoeff> work(dim - 1);

    auto rec = [&](auto&& self, std::size_t slot) -> void {
        if (slot + 1 == dim) {
            for (auto [r, s] : phases) {
                auto factor = build_grid_factor(work, {r, s}, dim);
                if (!factor) return;  // budget violated regardless of phases
                FactorCandidate cand;
                cand.coeffs = work;
                cand.closing = {r, s};
                cand.vec = std::move(*factor);
                cplx ip = 0.0;
                for (std::size_t i = 0; i < dim; ++i) ip += std::conj(target[i]) * cand.vec[i];
                cand.overlap = ip;
                cand.abs_overlap = std::abs(ip);
                out.push_back(std::move(cand));
            }
            return;
        }
        for (auto [p, q] : mods)
            for (auto [r, s] : phases) {
                work[slot] = {p, q, r, s};
                self(self, slot + 1);
            }
    };
    rec(rec, 0);
    return out;
}

}  // namespace detail

/// Exact nearest grid state under a denominator cap q,s <= q_max, computed by
/// a factorized search: the joint overlap of product vectors splits as
/// z_A * z_B, so candidates are ranked by |z| and pruned once |z_A||z_B|
/// cannot beat the incumbent.
inline NearestGridResult nearest_in_grid_denominators(const ProductState& target,
                                                      std::uint32_t q_max) {
    BipartiteDims dims = target.dims();
    auto ca = detail::factor_candidates(target.a, dims.n, q_max);
    auto cb = detail::factor_candidates(target.b, dims.m, q_max);
    if (ca.empty() || cb.empty())
        throw std::invalid_argument("nearest_in_grid_denominators: empty candidate set");
    auto by_abs = [](const detail::FactorCandidate& x, const detail::FactorCandidate& y) {
        return x.abs_overlap > y.abs_overlap;
    };
    std::stable_sort(ca.begin(), ca.end(), by_abs);
    std::stable_sort(cb.begin(), cb.end(), by_abs);

    double best_re = -1.0;
    std::size_t best_i = 0, best_j = 0;
    for (std::size_t i = 0; i < ca.size(); ++i) {
        if (ca[i].abs_overlap * cb[0].abs_overlap <= best_re) break;
        for (std::size_t j = 0; j < cb.size(); ++j) {
            if (ca[i].abs_overlap * cb[j].abs_overlap <= best_re) break;
            const double re = std::real(ca[i].overlap * cb[j].overlap);
            if (re > best_re) {
                best_re = re;
                best_i = i;
                best_j = j;
            }
        }
    }
    NearestGridResult res;
    res.address.coeffs_a = ca[best_i].coeffs;
    res.address.closing_a = ca[best_i].closing;
    res.address.coeffs_b = cb[best_j].coeffs;
    res.address.closing_b = cb[best_j].closing;
    res.state = make_product_state(ca[best_i].vec, cb[best_j].vec);
    res.distance = std::sqrt(std::max(0.0, 2.0 * (1.0 - best_re)));
    return res;
}

// ---------------------------------------------------------------------------
// rank-deficient mode: product vectors in the range of rho

struct RangeIndex {
    std::vector<RationalPhaseCoeff> coeffs;  // lambda_1 .. lambda_{r-1}
    std::uint32_t root_selector = 0;         // 0..3

    std::uint64_t height() const {
        std::uint64_t h = root_selector;
        for (const auto& c : coeffs) h += c.weight();
        return h;
    }
};

/// Eigenbasis of the numerical range of rho (eigenvalues above the cutoff),
/// ordered by descending eigenvalue.
struct RangeBasis {
    BipartiteDims dims;
    std::size_t rank = 0;
    std::vector<std::vector<cplx>> vectors;

    static RangeBasis from_state(const DensityMatrix& rho, double rank_cutoff = 1e-9) {
        RangeBasis rb;
        rb.dims = rho.dims;
        auto eig = hermitian_eig(rho.mat);
        const std::size_t d = rho.dims.total();
        for (std::size_t k = d; k-- > 0;) {
            if (eig.eigenvalues[k] <= rank_cutoff) break;
            std::vector<cplx> v(d);
            for (std::size_t i = 0; i < d; ++i) v[i] = eig.eigenvectors(i, k);
            rb.vectors.push_back(std::move(v));
        }
        rb.rank = rb.vectors.size();
        return rb;
    }
};

namespace detail {

/// On-circle solutions z = e^{i theta} of purity(u + z v) = 1.
///
/// Writing M(z) = Tr_B |psi><psi| = S + z B + conj(z) B^dag with S = A + C,
/// the condition Tr[M^2] = 1 becomes the self-inversive quartic
///   g z^4 + 2 b z^3 + (T0 - 1) z^2 + 2 conj(b) z + conj(g) = 0,
/// g = Tr[B^2], b = Tr[S B], T0 = Tr[S^2] + 2 Tr[B B^dag]. Roots are found by
/// Durand-Kerner and polished on the circle by golden-section on the
/// residual. `degenerate` reports the identically-satisfied case (every
/// closing phase yields a product vector).
struct ClosingPhaseRoots {
    bool degenerate = false;
    std::vector<double> thetas;  // sorted by (Re z, Im z) ascending
};

inline ClosingPhaseRoots closing_phase_roots(const std::vector<cplx>& u,
                                             const std::vector<cplx>& v, BipartiteDims dims) {
    ComplexMatrix a_mat = reduced_a_outer(u, u, dims);
    ComplexMatrix c_mat = reduced_a_outer(v, v, dims);
    ComplexMatrix b_mat = reduced_a_outer(v, u, dims);
    ComplexMatrix s_mat = a_mat + c_mat;

    auto tr_prod = [](const ComplexMatrix& x, const ComplexMatrix& y) {
        cplx t = 0.0;
        for (std::size_t i = 0; i < x.rows; ++i)
            for (std::size_t k = 0; k < x.cols; ++k) t += x(i, k) * y(k, i);
        return t;
    };
    const cplx g = tr_prod(b_mat, b_mat);
    const cplx b = tr_prod(s_mat, b_mat);
    double bb = 0.0;
    for (const auto& x : b_mat.a) bb += std::norm(x);
    const double t0 = std::real(tr_prod(s_mat, s_mat)) + 2.0 * bb;

    auto residual = [&](double theta) {
        const cplx z(std::cos(theta), std::sin(theta));
        return (t0 - 1.0) + 2.0 * std::real(g * z * z) + 4.0 * std::real(b * z);
    };

    ClosingPhaseRoots out;
    if (std::abs(g) < 1e-12 && std::abs(b) < 1e-12) {
        if (std::abs(t0 - 1.0) < 1e-10) out.degenerate = true;
        return out;  // no phase dependence: either all phases work or none
    }

    // coefficients low -> high degree
    std::vector<cplx> coef = {std::conj(g), 2.0 * std::conj(b), cplx(t0 - 1.0), 2.0 * b, g};
    double cmax = 0.0;
    for (const auto& c : coef) cmax = std::max(cmax, std::abs(c));
    std::size_t deg = 4;
    while (deg > 0 && std::abs(coef[deg]) < 1e-13 * cmax) --deg;
    if (deg == 0) return out;

    // Durand-Kerner
    std::vector<cplx> roots(deg);
    cplx seed(0.4, 0.9);
    cplx acc = 1.0;
    for (auto& r : roots) {
        acc *= seed;
        r = acc;
    }
    auto poly = [&](cplx z) {
        cplx val = coef[deg];
        for (std::size_t k = deg; k-- > 0;) val = val * z + coef[k];
        return val;
    };
    for (int it = 0; it < 256; ++it) {
        double move = 0.0;
        for (std::size_t i = 0; i < deg; ++i) {
            cplx denom = coef[deg];
            for (std::size_t j = 0; j < deg; ++j)
                if (j != i) denom *= roots[i] - roots[j];
            if (std::abs(denom) < 1e-300) continue;
            const cplx delta = poly(roots[i]) / denom;
            roots[i] -= delta;
            move = std::max(move, std::abs(delta));
        }
        if (move < 1e-14) break;
    }

    std::vector<cplx> on_circle;
    for (const auto& z : roots) {
        if (std::abs(std::abs(z) - 1.0) > 1e-4) continue;
        double theta = std::atan2(std::imag(z), std::real(z));
        // golden-section polish of the squared residual
        double lo = theta - 0.05, hi = theta + 0.05;
        const double gr = 0.6180339887498949;
        double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
        double f1 = residual(x1) * residual(x1), f2 = residual(x2) * residual(x2);
        for (int it = 0; it < 60; ++it) {
            if (f1 < f2) {
                hi = x2; x2 = x1; f2 = f1;
                x1 = hi - gr * (hi - lo);
                f1 = residual(x1) * residual(x1);
            } else {
                lo = x1; x1 = x2; f1 = f2;
                x2 = lo + gr * (hi - lo);
                f2 = residual(x2) * residual(x2);
            }
        }
        theta = 0.5 * (lo + hi);
        bool dup = false;
        const cplx zp(std::cos(theta), std::sin(theta));
        for (const auto& existing : on_circle)
            if (std::abs(existing - zp) < 1e-7) dup = true;
        if (!dup) on_circle.push_back(zp);
    }
    std::sort(on_circle.begin(), on_circle.end(), [](cplx x, cplx y) {
        if (std::real(x) != std::real(y)) return std::real(x) < std::real(y);
        return std::imag(x) < std::imag(y);
    });
    for (const auto& z : on_circle)
        out.thetas.push_back(std::atan2(std::imag(z), std::real(z)));
    return out;
}

}  // namespace detail

/// Materialize one range-mode address: |psi> = sum lambda_i |phi_i> with the
/// free coefficients from the grid, the closing modulus from normalization,
/// and the closing phase scanned over the quartic roots. Returns the state
/// only if the purity test passes; everything else is Skip (nullopt).
inline std::optional<ProductState> enumerate_range_product(const RangeBasis& basis,
                                                           const RangeIndex& idx,
                                                           double product_tol = 1e-8) {
    const std::size_t r = basis.rank;
    if (r == 0) throw std::invalid_argument("enumerate_range_product: empty range");
    if (idx.coeffs.size() + 1 != r)
        throw std::invalid_argument("enumerate_range_product: coefficient count != rank-1");
    const std::size_t d = basis.dims.total();

    std::uint64_t num_acc = 0, den_acc = 1;
    for (const auto& c : idx.coeffs) {
        const std::uint64_t q2 = std::uint64_t(c.q) * c.q;
        num_acc = num_acc * q2 + std::uint64_t(c.p) * c.p * den_acc;
        den_acc *= q2;
    }
    if (num_acc > den_acc) return std::nullopt;
    const double closing_mod =
        std::sqrt(static_cast<double>(den_acc - num_acc) / static_cast<double>(den_acc));

    std::vector<cplx> u(d, 0.0), v(d, 0.0);
    for (std::size_t i = 0; i + 1 < r; ++i) {
        const cplx li = idx.coeffs[i].value();
        for (std::size_t k = 0; k < d; ++k) u[k] += li * basis.vectors[i][k];
    }
    for (std::size_t k = 0; k < d; ++k) v[k] = closing_mod * basis.vectors[r - 1][k];

    double theta = 0.0;
    if (closing_mod < 1e-15) {
        // closing coefficient vanishes; the phase is irrelevant
        if (idx.root_selector != 0) return std::nullopt;
    } else {
        auto roots = detail::closing_phase_roots(u, v, basis.dims);
        if (roots.degenerate) {
            theta = idx.root_selector * 1.5707963267948966;
        } else {
            if (idx.root_selector >= roots.thetas.size()) return std::nullopt;
            theta = roots.thetas[idx.root_selector];
        }
    }

    std::vector<cplx> psi(d);
    const cplx z(std::cos(theta), std::sin(theta));
    for (std::size_t k = 0; k < d; ++k) psi[k] = u[k] + z * v[k];
    double n2 = 0.0;
    for (const auto& c : psi) n2 += std::norm(c);
    if (n2 < 1e-12) return std::nullopt;
    const double inv = 1.0 / std::sqrt(n2);
    for (auto& c : psi) c *= inv;

    auto factors = factor_product_vector(psi, basis.dims, product_tol);
    if (!factors) return std::nullopt;
    return make_product_state(std::move(factors->first), std::move(factors->second));
}

/// Spec-level wrapper checking the declared rank against the numerical one.
inline std::optional<ProductState> enumerate_range_product(const DensityMatrix& rho,
                                                           std::size_t declared_rank,
                                                           const RangeIndex& idx,
                                                           double product_tol = 1e-8) {
    RangeBasis basis = RangeBasis::from_state(rho);
    if (basis.rank != declared_rank)
        throw std::invalid_argument("enumerate_range_product: rank mismatch with rho");
    return enumerate_range_product(basis, idx, product_tol);
}

/// Streams RangeIndex values in (height, lex) order; the root selector counts
/// into the height so all four roots of one coefficient tuple appear near
/// each other.
class RangeEnumerator {
public:
    explicit RangeEnumerator(RangeBasis basis, double product_tol = 1e-8)
        : basis_(std::move(basis)), product_tol_(product_tol) {
        if (basis_.rank == 0) throw std::invalid_argument("RangeEnumerator: empty range");
        height_ = 3 * (std::uint64_t(basis_.rank) - 1);
        fill_class();
    }

    struct Item {
        std::uint64_t index = 0;
        RangeIndex address;
        std::optional<ProductState> state;
        bool skipped() const { return !state.has_value(); }
    };

    Item next() {
        // rank 1 has no free coefficients: the address space is the four
        // selector values and the stream is exhausted afterwards
        while (pos_ >= buffer_.size()) {
            if (basis_.rank == 1 && height_ >= 3) {
                Item out;
                out.index = flat_index_++;
                return out;  // skipped
            }
            ++height_;
            fill_class();
        }
        Item out;
        out.index = flat_index_++;
        out.address = buffer_[pos_++];
        out.state = enumerate_range_product(basis_, out.address, product_tol_);
        return out;
    }

    bool exhausted() const { return basis_.rank == 1 && height_ >= 3 && pos_ >= buffer_.size(); }

    const RangeBasis& basis() const { return basis_; }

private:
    void fill_class() {
        buffer_.clear();
        pos_ = 0;
        const std::size_t slots = basis_.rank - 1;
        tables_.ensure(height_ + 1);
        RangeIndex work;
        work.coeffs.resize(slots);

        auto rec = [&](auto&& self, std::size_t slot, std::uint64_t remaining) -> void {
            if (slot == slots) {
                if (remaining <= 3) {
                    work.root_selector = static_cast<std::uint32_t>(remaining);
                    buffer_.push_back(work);
                }
                return;
            }
            const std::uint64_t rest_min = 3 * (slots - slot - 1);
            if (remaining < rest_min + 3) return;
            const std::uint64_t cap = remaining - rest_min;
            for (auto [p, q] : tables_.mods_lex) {
                const std::uint64_t wm = std::uint64_t(p) + q;
                if (wm + 2 > cap) {
                    if (p > cap) break;
                    continue;
                }
                for (auto [r, s] : tables_.phases_lex) {
                    const std::uint64_t w = wm + r + s;
                    if (w > cap) {
                        if (std::uint64_t(r) > cap) break;
                        continue;
                    }
                    work.coeffs[slot] = {p, q, r, s};
                    self(self, slot + 1, remaining - w);
                }
            }
        };
        rec(rec, 0, height_);
    }

    RangeBasis basis_;
    double product_tol_;
    std::uint64_t height_ = 0;
    std::uint64_t flat_index_ = 0;
    std::size_t pos_ = 0;
    std::vector<RangeIndex> buffer_;
    grid::Tables tables_;
};

}  // namespace sepdec
