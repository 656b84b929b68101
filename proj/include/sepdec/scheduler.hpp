// The combined two-way decision loop: per iteration it advances the
// entanglement detector on rho, the separability prover on rho, and the same
// pair on the eta-shifted states rho_e = (1+eta) rho - eta I/d and
// rho_s = (1-eta) rho + eta I/d, maintaining the monotone flags f1/f2 and
// applying the termination rules in order (entangled / separable / border).
//
// The identity in the shifts is trace-normalized (I/d): mixing with the raw
// identity would break trace one.

#pragma once

#include <memory>
#include <unordered_set>

#include "sepdec/dps.hpp"
#include "sepdec/enumeration.hpp"
#include "sepdec/hull.hpp"
#include "sepdec/linalg.hpp"
#include "sepdec/states.hpp"

namespace sepdec {

struct EtaShift {
    double eta = 0.0;
    ComplexMatrix rho_e;      // (1+eta) rho - eta I/d; a state iff `valid`
    DensityMatrix rho_s;      // (1-eta) rho + eta I/d; always a state
    bool valid = false;       // rho_e PSD within -1e-10
    double rho_e_min_eigenvalue = 0.0;
};

inline EtaShift make_shift(const DensityMatrix& rho, double eta) {
    if (!(eta > 0.0 && eta < 1.0))
        throw std::invalid_argument("make_shift: eta must be in (0,1)");
    const std::size_t d = rho.dims.total();
    const double bg = eta / static_cast<double>(d);
    EtaShift out;
    out.eta = eta;
    out.rho_e = rho.mat * cplx(1.0 + eta);
    ComplexMatrix rs = rho.mat * cplx(1.0 - eta);
    for (std::size_t i = 0; i < d; ++i) {
        out.rho_e(i, i) -= bg;
        rs(i, i) += bg;
    }
    out.rho_e_min_eigenvalue = hermitian_eig(out.rho_e).eigenvalues.front();
    out.valid = out.rho_e_min_eigenvalue >= -1e-10;
    out.rho_s = validate(rs, rho.dims);
    return out;
}

enum class A2Mode { GrowingHull, PaperTuple };

struct SchedulerConfig {
    double eta = 0.05;
    std::uint64_t budget = 100000;
    double membership_tol = 1e-8;
    A2Mode mode = A2Mode::GrowingHull;
    DpsConfig dps;                       // level 1 by default
    double rank_cutoff = 1e-9;
    double range_support_tol = 1e-9;
    std::uint64_t range_scan_cap = 4096; // grid addresses scanned per range-mode step

    void check() const {
        if (!(eta > 0.0 && eta < 1.0))
            throw std::invalid_argument("SchedulerConfig: eta must be in (0,1)");
        if (membership_tol <= 0.0)
            throw std::invalid_argument("SchedulerConfig: membership_tol must be positive");
        if (range_scan_cap == 0)
            throw std::invalid_argument("SchedulerConfig: range_scan_cap must be >= 1");
        dps.check();
    }
};

/// One separability-prover stream: owns its enumeration cursor and
/// accumulated pool (growing mode) or tuple odometer (paper mode).
class A2Stream {
public:
    static A2Stream growing(const ComplexMatrix& target, BipartiteDims dims, double tol) {
        A2Stream s(target, dims, tol, A2Mode::GrowingHull, std::nullopt, 0, 0.0);
        return s;
    }

    static A2Stream growing_range(const ComplexMatrix& target, RangeBasis basis, double tol,
                                  std::uint64_t scan_cap, double support_tol) {
        A2Stream s(target, basis.dims, tol, A2Mode::GrowingHull, std::move(basis), scan_cap,
                   support_tol);
        return s;
    }

    static A2Stream paper_tuple(const ComplexMatrix& target, BipartiteDims dims, double tol) {
        A2Stream s(target, dims, tol, A2Mode::PaperTuple, std::nullopt, 0, 0.0);
        return s;
    }

    static A2Stream paper_tuple_range(const ComplexMatrix& target, RangeBasis basis, double tol) {
        A2Stream s(target, basis.dims, tol, A2Mode::PaperTuple, std::move(basis), 0, 0.0);
        return s;
    }

    /// One unit of prover work; a decomposition on success.
    std::optional<SeparableDecomposition> step() {
        ++steps_;
        if (detected_) return certificate_;  // already done; keep returning it
        std::optional<SeparableDecomposition> hit =
            (mode_ == A2Mode::GrowingHull) ? grow_step() : tuple_step();
        if (hit) {
            detected_ = true;
            certificate_ = hit;
            detection_step_ = steps_;
        }
        return hit;
    }

    bool detected() const { return detected_; }
    std::uint64_t steps() const { return steps_; }
    std::uint64_t detection_step() const { return detection_step_; }
    std::uint64_t grid_height() const { return grid_cursor_ ? grid_cursor_->current_height() : 0; }
    double hull_distance() const { return hull_ ? hull_->distance() : 2.0; }
    std::size_t pool_size() const { return pool_.size(); }
    std::uint64_t tuples_skipped() const { return tuples_skipped_; }
    const std::optional<SeparableDecomposition>& certificate() const { return certificate_; }

private:
    A2Stream(const ComplexMatrix& target, BipartiteDims dims, double tol, A2Mode mode,
             std::optional<RangeBasis> basis, std::uint64_t scan_cap, double support_tol)
        : target_(target),
          dims_(dims),
          tol_(tol),
          mode_(mode),
          basis_(std::move(basis)),
          scan_cap_(scan_cap),
          support_tol_(support_tol) {
        atoms_bound_ = basis_ ? basis_->rank * basis_->rank : caratheodory_bound(dims_);
        if (mode_ == A2Mode::GrowingHull)
            hull_ = std::make_unique<GrowingHull>(target_, tol_);
        if (mode_ == A2Mode::PaperTuple) {
            composition_.assign(atoms_bound_, 0);
            composition_sum_ = 0;
        }
        if (basis_ && mode_ == A2Mode::PaperTuple)
            range_cursor_ = std::make_unique<RangeEnumerator>(*basis_, tol_);
        else if (!basis_ || mode_ == A2Mode::GrowingHull)
            grid_cursor_ = std::make_unique<ProductEnumerator>(dims_);
    }

    bool in_range(const std::vector<cplx>& psi) const {
        double mass = 0.0;
        for (const auto& phi : basis_->vectors) {
            cplx ip = 0.0;
            for (std::size_t i = 0; i < psi.size(); ++i) ip += std::conj(phi[i]) * psi[i];
            mass += std::norm(ip);
        }
        return mass >= 1.0 - support_tol_;
    }

    std::uint64_t projector_hash(const std::vector<double>& vec) const {
        std::uint64_t h = 1469598103934665603ull;
        for (double x : vec) {
            const auto q = static_cast<std::int64_t>(std::llround(x * 1e10));
            h ^= static_cast<std::uint64_t>(q);
            h *= 1099511628211ull;
        }
        return h;
    }

    std::optional<SeparableDecomposition> check_detection() {
        if (hull_->distance() > tol_) return std::nullopt;
        return extract_certificate(hull_->weights(), pool_, target_, atoms_bound_, tol_);
    }

    std::optional<SeparableDecomposition> grow_step() {
        if (!basis_) {
            // full-rank mode: exactly one grid address per step
            auto item = grid_cursor_->next();
            if (item.skipped()) return std::nullopt;
            append(std::move(*item.state));
            return check_detection();
        }
        // range mode: bounded scan for the next in-range product state
        for (std::uint64_t scanned = 0; scanned < scan_cap_; ++scanned) {
            auto item = grid_cursor_->next();
            if (item.skipped()) continue;
            const auto psi = item.state->vec();
            if (!in_range(psi)) continue;
            append(std::move(*item.state));
            return check_detection();
        }
        return std::nullopt;
    }

    void append(ProductState state) {
        auto vec = vectorize_hermitian(state.projector);
        if (!seen_.insert(projector_hash(vec)).second) return;  // duplicate projector
        pool_.push_back(std::move(state));
        hull_->append(vec);
    }

    // materialize the grid state with flat index i (memoized stream prefix)
    const std::optional<ProductState>& member(std::uint64_t i) {
        while (memo_.size() <= i) {
            if (range_cursor_)
                memo_.push_back(range_cursor_->next().state);
            else
                memo_.push_back(grid_cursor_->next().state);
        }
        return memo_[i];
    }

    std::optional<SeparableDecomposition> tuple_step() {
        const std::size_t L = atoms_bound_;
        ProjectorTuple tuple;
        bool usable = true;
        for (std::size_t k = 0; k < L && usable; ++k) {
            const auto& m = member(composition_[k]);
            if (!m)
                usable = false;  // a Skip member invalidates the whole tuple
            else
                tuple.elements.push_back(*m);
        }
        std::optional<SeparableDecomposition> hit;
        if (usable && affinely_independent(tuple)) {
            auto res = facet_sign_membership(target_, tuple, 1e-9);
            if (res.kind == MembershipKind::In) {
                try {
                    hit = extract_certificate(*res.weights, tuple.elements, target_, L, tol_);
                } catch (const std::runtime_error&) {
                    // reconstruction missed the tolerance: not a sound detection
                }
            }
        } else {
            ++tuples_skipped_;
        }
        advance_composition();
        return hit;
    }

    void advance_composition() {
        const std::size_t L = composition_.size();
        // next composition of the same sum in lex order; roll to sum+1 when done
        std::uint64_t suffix = 0;
        for (std::size_t j = L; j-- > 1;) {
            suffix += composition_[j];
            if (suffix > 0) {
                composition_[j - 1] += 1;
                for (std::size_t k = j; k < L; ++k) composition_[k] = 0;
                composition_[L - 1] = suffix - 1;
                return;
            }
        }
        composition_sum_ += 1;
        std::fill(composition_.begin(), composition_.end(), 0);
        composition_.back() = composition_sum_;
    }

    ComplexMatrix target_;
    BipartiteDims dims_;
    double tol_;
    A2Mode mode_;
    std::optional<RangeBasis> basis_;
    std::uint64_t scan_cap_;
    double support_tol_;
    std::size_t atoms_bound_ = 0;

    std::unique_ptr<ProductEnumerator> grid_cursor_;
    std::unique_ptr<RangeEnumerator> range_cursor_;
    std::unique_ptr<GrowingHull> hull_;
    std::vector<ProductState> pool_;
    std::unordered_set<std::uint64_t> seen_;

    std::vector<std::optional<ProductState>> memo_;  // paper-tuple member cache
    std::vector<std::uint64_t> composition_;
    std::uint64_t composition_sum_ = 0;
    std::uint64_t tuples_skipped_ = 0;

    bool detected_ = false;
    std::optional<SeparableDecomposition> certificate_;
    std::uint64_t steps_ = 0;
    std::uint64_t detection_step_ = 0;
};

enum class VerdictKind { Separable = 0, Entangled = 1, Border = 2, BudgetExhausted = 3 };

struct StreamStats {
    std::uint64_t steps = 0;
    std::uint64_t detection_step = 0;  // 0 = no detection
};

struct Verdict {
    VerdictKind kind = VerdictKind::BudgetExhausted;
    double eta = 0.0;
    bool f1 = false;
    bool f2 = false;
    std::uint64_t total_steps = 0;
    bool range_mode = false;  // rho_e invalid: streams 3-4 dropped, prover on the range
    std::size_t range_rank = 0;

    std::optional<DpsOutcome> entangled_certificate;
    std::optional<SeparableDecomposition> separable_certificate;

    StreamStats s1, s2, s3, s4;
    SchedulerConfig config;
    // the paper's plain identity is realized as I/d to preserve trace one
    static constexpr const char* identity_convention = "identity normalized to I/d";
};

/// Run the combined algorithm until one termination rule fires or the step
/// budget is exhausted. Deterministic: identical input and config give an
/// identical Verdict including step counts.
inline Verdict run(const DensityMatrix& rho, const SchedulerConfig& cfg = {}) {
    cfg.check();
    Verdict v;
    v.eta = cfg.eta;
    v.config = cfg;

    EtaShift shift = make_shift(rho, cfg.eta);
    RangeBasis basis = RangeBasis::from_state(rho, cfg.rank_cutoff);
    v.range_mode = !shift.valid;
    v.range_rank = basis.rank;

    DpsCarry carry1, carry3;
    std::optional<A2Stream> s2, s4;
    if (v.range_mode) {
        if (cfg.mode == A2Mode::GrowingHull)
            s2.emplace(A2Stream::growing_range(rho.mat, basis, cfg.membership_tol,
                                               cfg.range_scan_cap, cfg.range_support_tol));
        else
            s2.emplace(A2Stream::paper_tuple_range(rho.mat, basis, cfg.membership_tol));
    } else {
        if (cfg.mode == A2Mode::GrowingHull)
            s2.emplace(A2Stream::growing(rho.mat, rho.dims, cfg.membership_tol));
        else
            s2.emplace(A2Stream::paper_tuple(rho.mat, rho.dims, cfg.membership_tol));
        s4.emplace(A2Stream::growing(shift.rho_s.mat, rho.dims, cfg.membership_tol));
    }
    DensityMatrix rho_e_state{rho.dims, shift.rho_e};

    for (std::uint64_t step = 1; step <= cfg.budget; ++step) {
        v.total_steps = step;

        // 1. detector on rho (idle once its verdict is final)
        DpsOutcome out1;
        bool detected1 = false;
        if (!carry1.done) {
            out1 = dps_step(rho, cfg.dps, carry1);
            v.s1.steps += 1;
            detected1 = out1.kind == DpsVerdictKind::EntangledCertified;
            if (detected1 && v.s1.detection_step == 0) v.s1.detection_step = step;
        }

        // 2. prover on rho
        auto det2 = s2->step();
        v.s2.steps += 1;
        if (det2 && v.s2.detection_step == 0) v.s2.detection_step = step;

        // 3. detector on rho_e: sets f1, monotone
        if (!v.range_mode) {
            if (!v.f1) {
                auto out3 = dps_step(rho_e_state, cfg.dps, carry3);
                v.s3.steps += 1;
                if (out3.kind == DpsVerdictKind::EntangledCertified) {
                    v.f1 = true;
                    if (v.s3.detection_step == 0) v.s3.detection_step = step;
                }
            }
            // 4. prover on rho_s: sets f2, monotone
            if (!v.f2) {
                auto det4 = s4->step();
                v.s4.steps += 1;
                if (det4) {
                    v.f2 = true;
                    if (v.s4.detection_step == 0) v.s4.detection_step = step;
                }
            }
        }

        // termination rules, in order
        if (detected1) {
            v.kind = VerdictKind::Entangled;
            v.entangled_certificate = out1;
            return v;
        }
        if (det2) {
            v.kind = VerdictKind::Separable;
            v.separable_certificate = std::move(det2);
            return v;
        }
        if (v.f1 && v.f2) {
            v.kind = VerdictKind::Border;
            return v;
        }
    }
    v.kind = VerdictKind::BudgetExhausted;
    return v;
}

}  // namespace sepdec
