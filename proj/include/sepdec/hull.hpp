// Convex-hull membership machinery over vectorized Hermitian space: the
// facet-sign test on L-tuples, an independent barycentric oracle, and a
// growing-hull nearest-point mode (Wolfe min-norm-point) with certificate
// extraction.

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "sepdec/enumeration.hpp"
#include "sepdec/linalg.hpp"
#include "sepdec/states.hpp"

namespace sepdec {

/// Carathéodory bound: any separable state needs at most (n m)^2 product
/// projectors; r^2 when restricted to a rank-r range.
inline std::size_t caratheodory_bound(BipartiteDims dims) {
    return dims.total() * dims.total();
}

/// An L-tuple of product projectors, the unit the paper's membership test
/// consumes.
struct ProjectorTuple {
    std::vector<ProductState> elements;

    std::size_t size() const { return elements.size(); }
};

enum class MembershipKind { In, Out, Degenerate };

struct SeparatingFacet {
    ComplexMatrix normal;  // Hermitian, unit HS norm
    double offset = 0.0;   // Tr[normal tau] = offset for tau on the hyperplane
};

struct MembershipResult {
    MembershipKind kind = MembershipKind::Degenerate;
    std::optional<std::vector<double>> weights;     // present iff In
    std::optional<SeparatingFacet> facet;           // present iff Out
};

struct SeparableDecomposition {
    std::vector<std::pair<double, ProductState>> pairs;
    double residual = 0.0;  // HS distance of the reconstruction
};

namespace detail {

inline std::vector<std::vector<double>> vectorized_elements(const ProjectorTuple& t) {
    std::vector<std::vector<double>> v;
    v.reserve(t.size());
    for (const auto& e : t.elements) v.push_back(vectorize_hermitian(e.projector));
    return v;
}

inline double dot(std::span<const double> x, std::span<const double> y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

inline double norm(std::span<const double> x) { return std::sqrt(dot(x, x)); }

/// Rank of a set of vectors via the eigenvalues of their Gram matrix;
/// singular values below tol * largest count as zero.
inline std::size_t numeric_rank(const std::vector<std::vector<double>>& vecs, double tol) {
    const std::size_t k = vecs.size();
    if (k == 0) return 0;
    ComplexMatrix gram(k, k);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) gram(i, j) = dot(vecs[i], vecs[j]);
    auto eig = hermitian_eig(gram);
    const double top = std::max(0.0, eig.eigenvalues.back());
    if (top <= 0.0) return 0;
    std::size_t rank = 0;
    for (double lam : eig.eigenvalues)
        if (lam > tol * tol * top) ++rank;
    return rank;
}

}  // namespace detail

/// True iff the differences tau_i - tau_1 have full rank, i.e. the points
/// span a (count-1)-dimensional affine set.
inline bool affinely_independent(const std::vector<std::vector<double>>& vecs,
                                 double tol = 1e-9) {
    if (vecs.empty()) throw std::invalid_argument("affinely_independent: empty tuple");
    if (vecs.size() == 1) return true;
    std::vector<std::vector<double>> diffs;
    diffs.reserve(vecs.size() - 1);
    for (std::size_t i = 1; i < vecs.size(); ++i) {
        std::vector<double> d(vecs[i].size());
        for (std::size_t k = 0; k < d.size(); ++k) d[k] = vecs[i][k] - vecs[0][k];
        diffs.push_back(std::move(d));
    }
    return detail::numeric_rank(diffs, tol) == diffs.size();
}

inline bool affinely_independent(const ProjectorTuple& t, double tol = 1e-9) {
    if (t.size() == 0) throw std::invalid_argument("affinely_independent: empty tuple");
    return affinely_independent(detail::vectorized_elements(t), tol);
}

namespace detail {

/// Orthonormalize `dirs` (modified Gram-Schmidt), dropping near-null vectors.
inline std::vector<std::vector<double>> orthonormal_basis(
    const std::vector<std::vector<double>>& dirs, double drop_tol = 1e-12) {
    std::vector<std::vector<double>> q;
    for (auto dir : dirs) {
        for (const auto& b : q) {
            const double c = dot(dir, b);
            for (std::size_t k = 0; k < dir.size(); ++k) dir[k] -= c * b[k];
        }
        const double n = norm(dir);
        if (n > drop_tol) {
            for (auto& x : dir) x /= n;
            q.push_back(std::move(dir));
        }
    }
    return q;
}

inline void project_out(std::vector<double>& v, const std::vector<std::vector<double>>& q) {
    for (const auto& b : q) {
        const double c = dot(v, b);
        for (std::size_t k = 0; k < v.size(); ++k) v[k] -= c * b[k];
    }
}

/// Unit normal of the facet spanned by all tuple elements except `left_out`,
/// taken inside the affine span of the whole tuple; the normal points toward
/// the left-out element.
inline std::vector<double> facet_normal(const std::vector<std::vector<double>>& vecs,
                                        std::size_t left_out) {
    const std::size_t base = (left_out == 0) ? 1 : 0;
    std::vector<std::vector<double>> facet_dirs;
    for (std::size_t i = 0; i < vecs.size(); ++i) {
        if (i == left_out || i == base) continue;
        std::vector<double> d(vecs[i].size());
        for (std::size_t k = 0; k < d.size(); ++k) d[k] = vecs[i][k] - vecs[base][k];
        facet_dirs.push_back(std::move(d));
    }
    auto q = orthonormal_basis(facet_dirs);
    std::vector<double> w(vecs[left_out].size());
    for (std::size_t k = 0; k < w.size(); ++k) w[k] = vecs[left_out][k] - vecs[base][k];
    project_out(w, q);
    const double n = norm(w);
    if (n < 1e-12)
        throw std::runtime_error("facet_normal: degenerate facet (tuple not affinely independent?)");
    for (auto& x : w) x /= n;
    return w;
}

inline std::vector<double> barycentric_solve(const std::vector<std::vector<double>>& vecs,
                                             std::span<const double> target) {
    // normal equations of [vec(tau_i); 1] w = [vec(rho); 1]
    const std::size_t k = vecs.size();
    std::vector<double> gram(k * k), rhs(k);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) gram[i * k + j] = dot(vecs[i], vecs[j]) + 1.0;
        rhs[i] = dot(vecs[i], target) + 1.0;
    }
    return solve_linear(std::move(gram), std::move(rhs));
}

}  // namespace detail

/// The facet-sign membership test: for each leave-one-out facet of the
/// simplex, compare which side rho is on against the left-out element. In iff
/// all size() checks agree; Degenerate when rho sits within tol of any facet
/// hyperplane. A target outside the tuple's affine span is Out, separated by
/// the out-of-span direction itself.
inline MembershipResult facet_sign_membership(const ComplexMatrix& rho, const ProjectorTuple& t,
                                              double tol = 1e-9) {
    if (t.size() < 2) throw std::invalid_argument("facet_sign_membership: tuple too small");
    if (!affinely_independent(t))
        throw std::invalid_argument("facet_sign_membership: tuple is not affinely independent");
    auto vecs = detail::vectorized_elements(t);
    const std::vector<double> target = vectorize_hermitian(rho);

    // out-of-span component
    {
        std::vector<std::vector<double>> dirs;
        for (std::size_t i = 1; i < vecs.size(); ++i) {
            std::vector<double> d(vecs[i].size());
            for (std::size_t k = 0; k < d.size(); ++k) d[k] = vecs[i][k] - vecs[0][k];
            dirs.push_back(std::move(d));
        }
        auto q = detail::orthonormal_basis(dirs);
        std::vector<double> resid(target.size());
        for (std::size_t k = 0; k < resid.size(); ++k) resid[k] = target[k] - vecs[0][k];
        detail::project_out(resid, q);
        const double out_of_span = detail::norm(resid);
        if (out_of_span > tol) {
            for (auto& x : resid) x /= out_of_span;
            SeparatingFacet f;
            f.normal = devectorize_hermitian(resid, rho.rows);
            f.offset = detail::dot(resid, vecs[0]);
            return {MembershipKind::Out, std::nullopt, std::move(f)};
        }
    }

    bool any_band = false;
    std::optional<SeparatingFacet> out_facet;
    for (std::size_t h = 0; h < t.size(); ++h) {
        auto normal = detail::facet_normal(vecs, h);
        const std::size_t base = (h == 0) ? 1 : 0;
        const double offset = detail::dot(normal, vecs[base]);
        const double rho_side = detail::dot(normal, target) - offset;
        // the normal points toward the left-out element, so its side value is
        // positive by construction
        if (std::abs(rho_side) < tol) {
            any_band = true;
        } else if (rho_side < 0.0 && !out_facet) {
            SeparatingFacet f;
            f.normal = devectorize_hermitian(normal, rho.rows);
            f.offset = offset;
            out_facet = std::move(f);
        }
    }
    if (any_band) return {MembershipKind::Degenerate, std::nullopt, std::nullopt};
    if (out_facet) return {MembershipKind::Out, std::nullopt, std::move(out_facet)};

    auto w = detail::barycentric_solve(vecs, target);
    for (auto& x : w) x = std::max(0.0, x);
    double sum = 0.0;
    for (double x : w) sum += x;
    if (sum > 0.0)
        for (auto& x : w) x /= sum;
    return {MembershipKind::In, std::move(w), std::nullopt};
}

/// Independent oracle: solve the affine system sum w_i vec(tau_i) = vec(rho),
/// sum w_i = 1; In iff every coordinate is >= -1e-10 (then clamped and
/// renormalized). Out when some coordinate is negative beyond that band or
/// when rho leaves the affine span.
inline MembershipResult barycentric_membership(const ComplexMatrix& rho, const ProjectorTuple& t,
                                               double span_tol = 1e-9) {
    if (t.size() < 2) throw std::invalid_argument("barycentric_membership: tuple too small");
    if (!affinely_independent(t))
        throw std::invalid_argument("barycentric_membership: tuple is not affinely independent");
    auto vecs = detail::vectorized_elements(t);
    const std::vector<double> target = vectorize_hermitian(rho);
    auto w = detail::barycentric_solve(vecs, target);

    // residual of the original (unsquared) system detects out-of-span targets
    std::vector<double> rec(target.size(), 0.0);
    double wsum = 0.0;
    for (std::size_t i = 0; i < vecs.size(); ++i) {
        wsum += w[i];
        for (std::size_t k = 0; k < rec.size(); ++k) rec[k] += w[i] * vecs[i][k];
    }
    double resid2 = (wsum - 1.0) * (wsum - 1.0);
    for (std::size_t k = 0; k < rec.size(); ++k)
        resid2 += (rec[k] - target[k]) * (rec[k] - target[k]);
    if (std::sqrt(resid2) > span_tol) {
        // outside the affine span: reuse the perpendicular direction as the
        // separating certificate
        std::vector<double> resid(target.size());
        for (std::size_t k = 0; k < resid.size(); ++k) resid[k] = target[k] - rec[k];
        const double n = detail::norm(resid);
        SeparatingFacet f;
        for (auto& x : resid) x /= n;
        f.normal = devectorize_hermitian(resid, rho.rows);
        f.offset = detail::dot(resid, vecs[0]);
        return {MembershipKind::Out, std::nullopt, std::move(f)};
    }

    double min_w = w[0];
    std::size_t min_i = 0;
    for (std::size_t i = 1; i < w.size(); ++i)
        if (w[i] < min_w) {
            min_w = w[i];
            min_i = i;
        }
    if (min_w >= -1e-10) {
        for (auto& x : w) x = std::max(0.0, x);
        double sum = 0.0;
        for (double x : w) sum += x;
        for (auto& x : w) x /= sum;
        return {MembershipKind::In, std::move(w), std::nullopt};
    }
    // in a simplex, a negative coordinate certifies separation by the facet
    // opposite that vertex
    auto normal = detail::facet_normal(vecs, min_i);
    const std::size_t base = (min_i == 0) ? 1 : 0;
    SeparatingFacet f;
    f.offset = detail::dot(normal, vecs[base]);
    f.normal = devectorize_hermitian(normal, rho.rows);
    return {MembershipKind::Out, std::nullopt, std::move(f)};
}

// ---------------------------------------------------------------------------
// growing-hull mode

/// Nearest point in conv(points) to a fixed target, maintained incrementally
/// as points stream in. Wolfe's min-norm-point algorithm on the shifted set
/// {vec(tau_i) - vec(rho)}: finite termination, and the optimal convex
/// weights double as the separability certificate. Appends are cheap when the
/// new point cannot improve the incumbent (a single inner product decides).
class GrowingHull {
public:
    explicit GrowingHull(std::vector<double> target, double tol = 1e-8)
        : target_(std::move(target)), tol_(tol) {}

    GrowingHull(const ComplexMatrix& rho, double tol = 1e-8)
        : GrowingHull(vectorize_hermitian(rho), tol) {}

    std::size_t size() const { return shifted_.size(); }
    double distance() const { return distance_; }
    const std::vector<double>& target() const { return target_; }

    /// Append one point (vectorized Hermitian). Returns the updated distance.
    double append(std::span<const double> point) {
        std::vector<double> w(point.size());
        for (std::size_t k = 0; k < point.size(); ++k) w[k] = point[k] - target_[k];
        shifted_.push_back(std::move(w));
        const std::size_t j = shifted_.size() - 1;
        if (corral_.empty()) {
            corral_ = {j};
            weights_ = {1.0};
            x_ = shifted_[j];
            distance_ = detail::norm(x_);
            solve();
            return distance_;
        }
        // the new point matters only if it beats the current support plane
        const double xx = detail::dot(x_, x_);
        if (detail::dot(x_, shifted_[j]) >= xx - tol_ * tol_) return distance_;
        solve();
        return distance_;
    }

    double append(const ComplexMatrix& projector) {
        return append(vectorize_hermitian(projector));
    }

    /// Convex weights over all appended points for the current nearest point.
    std::vector<double> weights() const {
        std::vector<double> w(shifted_.size(), 0.0);
        for (std::size_t k = 0; k < corral_.size(); ++k) w[corral_[k]] = weights_[k];
        return w;
    }

private:
    // affine minimizer over the corral; coordinates may be negative
    std::vector<double> affine_weights() const {
        const std::size_t k = corral_.size();
        std::vector<double> gram((k + 1) * (k + 1), 0.0), rhs(k + 1, 0.0);
        for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t j = 0; j < k; ++j)
                gram[i * (k + 1) + j] = detail::dot(shifted_[corral_[i]], shifted_[corral_[j]]);
            gram[i * (k + 1) + k] = 1.0;
            gram[k * (k + 1) + i] = 1.0;
        }
        rhs[k] = 1.0;
        auto sol = solve_linear(std::move(gram), std::move(rhs));
        sol.resize(k);
        return sol;
    }

    void rebuild_x() {
        std::fill(x_.begin(), x_.end(), 0.0);
        x_.resize(target_.size(), 0.0);
        for (std::size_t k = 0; k < corral_.size(); ++k)
            for (std::size_t i = 0; i < x_.size(); ++i)
                x_[i] += weights_[k] * shifted_[corral_[k]][i];
    }

    void solve() {
        const std::size_t dim = target_.size();
        const std::size_t max_major = 16 * (dim + 2) + 8 * shifted_.size();
        for (std::size_t major = 0; major < max_major; ++major) {
            // linear minimization oracle over all points
            const double xx = detail::dot(x_, x_);
            std::size_t best = 0;
            double best_ip = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < shifted_.size(); ++j) {
                const double ip = detail::dot(x_, shifted_[j]);
                if (ip < best_ip) {
                    best_ip = ip;
                    best = j;
                }
            }
            if (best_ip >= xx - tol_ * tol_ * 0.25) break;  // duality gap closed
            bool already = false;
            for (std::size_t c : corral_)
                if (c == best) already = true;
            if (already) break;
            corral_.push_back(best);
            weights_.push_back(0.0);

            // minor cycle: move to the affine minimizer, dropping vertices
            // that would go negative
            bool stalled = false;
            for (int minor = 0; minor < 1000; ++minor) {
                std::vector<double> aff;
                try {
                    aff = affine_weights();
                } catch (const std::runtime_error&) {
                    // numerically dependent corral: drop the newcomer and stop
                    corral_.pop_back();
                    weights_.pop_back();
                    stalled = true;
                    break;
                }
                bool feasible = true;
                for (double a : aff)
                    if (a < -1e-12) feasible = false;
                if (feasible) {
                    weights_ = aff;
                    for (auto& a : weights_) a = std::max(0.0, a);
                    break;
                }
                double theta = 1.0;
                for (std::size_t k = 0; k < aff.size(); ++k)
                    if (aff[k] < 0.0) {
                        const double t = weights_[k] / (weights_[k] - aff[k]);
                        theta = std::min(theta, t);
                    }
                for (std::size_t k = 0; k < aff.size(); ++k)
                    weights_[k] = (1.0 - theta) * weights_[k] + theta * aff[k];
                // drop exhausted vertices
                for (std::size_t k = corral_.size(); k-- > 0;) {
                    if (weights_[k] <= 1e-12) {
                        corral_.erase(corral_.begin() + k);
                        weights_.erase(weights_.begin() + k);
                    }
                }
                if (corral_.empty()) break;  // should not happen
            }
            double sum = 0.0;
            for (double a : weights_) sum += a;
            if (sum > 0.0)
                for (auto& a : weights_) a /= sum;
            rebuild_x();
            if (stalled) break;
        }
        distance_ = detail::norm(x_);
    }

    std::vector<double> target_;
    double tol_;
    std::vector<std::vector<double>> shifted_;
    std::vector<std::size_t> corral_;
    std::vector<double> weights_;  // over corral_, nonnegative, sum 1
    std::vector<double> x_;
    double distance_ = std::numeric_limits<double>::infinity();
};

struct GrowingHullResult {
    double distance = 0.0;
    std::vector<double> weights;
};

/// One-shot convenience wrapper over GrowingHull.
inline GrowingHullResult growing_hull_check(const ComplexMatrix& rho,
                                            const std::vector<ProductState>& points,
                                            double tol = 1e-8) {
    if (points.empty()) throw std::invalid_argument("growing_hull_check: no points");
    GrowingHull hull(rho, tol);
    for (const auto& p : points) hull.append(p.projector);
    return {hull.distance(), hull.weights()};
}

/// Prune zero weights and Carathéodory-reduce the support to at most
/// max_atoms by repeatedly eliminating an affine dependency. The represented
/// point never moves, so the residual is recomputed only for reporting.
inline SeparableDecomposition extract_certificate(const std::vector<double>& weights,
                                                  const std::vector<ProductState>& points,
                                                  const ComplexMatrix& rho,
                                                  std::size_t max_atoms, double tol = 1e-8) {
    if (weights.size() != points.size())
        throw std::invalid_argument("extract_certificate: weight/point count mismatch");
    std::vector<double> w;
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < weights.size(); ++i)
        if (weights[i] > 1e-12) {
            w.push_back(weights[i]);
            idx.push_back(i);
        }
    if (w.empty()) throw std::invalid_argument("extract_certificate: all weights vanish");
    double sum = 0.0;
    for (double x : w) sum += x;
    for (auto& x : w) x /= sum;

    std::vector<std::vector<double>> vecs;
    vecs.reserve(idx.size());
    for (std::size_t i : idx) vecs.push_back(vectorize_hermitian(points[i].projector));

    while (idx.size() > max_atoms) {
        // null vector of [vec(tau_i); 1]: Gaussian elimination on the
        // transposed system, taking the last column as the free variable
        const std::size_t k = idx.size();
        const std::size_t rows = vecs[0].size() + 1;
        std::vector<std::vector<double>> m(rows, std::vector<double>(k));
        for (std::size_t c = 0; c < k; ++c) {
            for (std::size_t r = 0; r < rows - 1; ++r) m[r][c] = vecs[c][r];
            m[rows - 1][c] = 1.0;
        }
        std::vector<double> nu(k, 0.0);
        nu[k - 1] = 1.0;
        // forward elimination with partial pivoting over columns 0..k-2
        std::size_t row = 0;
        std::vector<std::size_t> pivot_row_of_col(k - 1, SIZE_MAX);
        for (std::size_t c = 0; c + 1 < k && row < rows; ++c) {
            std::size_t piv = row;
            for (std::size_t r = row + 1; r < rows; ++r)
                if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
            if (std::abs(m[piv][c]) < 1e-12) continue;
            std::swap(m[row], m[piv]);
            for (std::size_t r = row + 1; r < rows; ++r) {
                const double f = m[r][c] / m[row][c];
                if (f == 0.0) continue;
                for (std::size_t cc = c; cc < k; ++cc) m[r][cc] -= f * m[row][cc];
            }
            pivot_row_of_col[c] = row;
            ++row;
        }
        // back substitution for nu with nu[k-1] = 1
        for (std::size_t c = k - 1; c-- > 0;) {
            const std::size_t pr = pivot_row_of_col[c];
            if (pr == SIZE_MAX) {
                nu[c] = 0.0;
                continue;
            }
            double s = 0.0;
            for (std::size_t cc = c + 1; cc < k; ++cc) s += m[pr][cc] * nu[cc];
            nu[c] = -s / m[pr][c];
        }
        // move along the dependency until a weight hits zero
        double theta = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < k; ++i)
            if (nu[i] > 1e-14) theta = std::min(theta, w[i] / nu[i]);
        if (!std::isfinite(theta)) {
            for (auto& x : nu) x = -x;
            for (std::size_t i = 0; i < k; ++i)
                if (nu[i] > 1e-14) theta = std::min(theta, w[i] / nu[i]);
        }
        if (!std::isfinite(theta))
            throw std::runtime_error("extract_certificate: no usable affine dependency");
        std::size_t drop = k;
        for (std::size_t i = 0; i < k; ++i) {
            w[i] -= theta * nu[i];
            if (w[i] <= 1e-12 && drop == k) drop = i;
        }
        if (drop == k)
            throw std::runtime_error("extract_certificate: dependency elimination stalled");
        w.erase(w.begin() + drop);
        idx.erase(idx.begin() + drop);
        vecs.erase(vecs.begin() + drop);
        double s2 = 0.0;
        for (double x : w) s2 += x;
        for (auto& x : w) x /= s2;
    }

    SeparableDecomposition out;
    ComplexMatrix rec(rho.rows, rho.cols);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        out.pairs.emplace_back(w[i], points[idx[i]]);
        rec += points[idx[i]].projector * cplx(w[i]);
    }
    out.residual = hs_distance(rec, rho);
    if (out.residual > tol)
        throw std::runtime_error("extract_certificate: residual above tolerance after pruning");
    return out;
}

}  // namespace sepdec
