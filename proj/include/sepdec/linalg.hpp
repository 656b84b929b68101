// Dense complex matrix kernel: Hermitian eigendecomposition, tensor-product
// structure operations, and Hilbert-Schmidt geometry. Everything here is a
// pure function of immutable inputs; sizes stay at desk scale (d <= 36), so
// the implementations favor robustness over asymptotics.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sepdec {

using cplx = std::complex<double>;

/// Dense row-major complex matrix. Equality is always tolerance-based and the
/// tolerance is an explicit parameter (see approx_equal); there is no
/// operator==.
struct ComplexMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<cplx> a;

    ComplexMatrix() = default;
    ComplexMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c) {}
    ComplexMatrix(std::size_t r, std::size_t c, std::vector<cplx> entries)
        : rows(r), cols(c), a(std::move(entries)) {
        if (a.size() != rows * cols)
            throw std::invalid_argument("ComplexMatrix: entry count does not match shape");
    }

    cplx& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
    const cplx& operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

    bool square() const { return rows == cols; }

    static ComplexMatrix identity(std::size_t n) {
        ComplexMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static ComplexMatrix zeros(std::size_t r, std::size_t c) { return ComplexMatrix(r, c); }

    ComplexMatrix adjoint() const {
        ComplexMatrix m(cols, rows);
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j) m(j, i) = std::conj((*this)(i, j));
        return m;
    }

    cplx trace() const {
        if (!square()) throw std::invalid_argument("trace: matrix not square");
        cplx t = 0.0;
        for (std::size_t i = 0; i < rows; ++i) t += (*this)(i, i);
        return t;
    }

    ComplexMatrix& operator+=(const ComplexMatrix& o) {
        if (rows != o.rows || cols != o.cols)
            throw std::invalid_argument("matrix add: shape mismatch");
        for (std::size_t k = 0; k < a.size(); ++k) a[k] += o.a[k];
        return *this;
    }
    ComplexMatrix& operator-=(const ComplexMatrix& o) {
        if (rows != o.rows || cols != o.cols)
            throw std::invalid_argument("matrix sub: shape mismatch");
        for (std::size_t k = 0; k < a.size(); ++k) a[k] -= o.a[k];
        return *this;
    }
    ComplexMatrix& operator*=(cplx s) {
        for (auto& x : a) x *= s;
        return *this;
    }

    friend ComplexMatrix operator+(ComplexMatrix l, const ComplexMatrix& r) { return l += r; }
    friend ComplexMatrix operator-(ComplexMatrix l, const ComplexMatrix& r) { return l -= r; }
    friend ComplexMatrix operator*(ComplexMatrix m, cplx s) { return m *= s; }
    friend ComplexMatrix operator*(cplx s, ComplexMatrix m) { return m *= s; }

    friend ComplexMatrix operator*(const ComplexMatrix& l, const ComplexMatrix& r) {
        if (l.cols != r.rows) throw std::invalid_argument("matrix mul: shape mismatch");
        ComplexMatrix m(l.rows, r.cols);
        for (std::size_t i = 0; i < l.rows; ++i)
            for (std::size_t k = 0; k < l.cols; ++k) {
                const cplx lik = l(i, k);
                if (lik == cplx{}) continue;
                for (std::size_t j = 0; j < r.cols; ++j) m(i, j) += lik * r(k, j);
            }
        return m;
    }
};

/// Declared bipartite structure n x m of a total space of dimension n*m.
struct BipartiteDims {
    std::size_t n = 2;
    std::size_t m = 2;

    BipartiteDims() = default;
    BipartiteDims(std::size_t n_, std::size_t m_) : n(n_), m(m_) {
        if (n < 2 || m < 2)
            throw std::invalid_argument("BipartiteDims: both local dimensions must be >= 2");
    }
    std::size_t total() const { return n * m; }
    friend bool operator==(const BipartiteDims& l, const BipartiteDims& r) {
        return l.n == r.n && l.m == r.m;
    }
};

enum class Subsystem { A, B };

inline double hs_norm(const ComplexMatrix& m) {
    double s = 0.0;
    for (const auto& x : m.a) s += std::norm(x);
    return std::sqrt(s);
}

/// Hilbert-Schmidt distance sqrt(Tr[(a-b)^dag (a-b)]).
inline double hs_distance(const ComplexMatrix& x, const ComplexMatrix& y) {
    if (x.rows != y.rows || x.cols != y.cols)
        throw std::invalid_argument("hs_distance: shape mismatch");
    double s = 0.0;
    for (std::size_t k = 0; k < x.a.size(); ++k) s += std::norm(x.a[k] - y.a[k]);
    return std::sqrt(s);
}

/// Real part of the HS inner product <x,y> = Tr[x^dag y].
inline double hs_inner_re(const ComplexMatrix& x, const ComplexMatrix& y) {
    if (x.rows != y.rows || x.cols != y.cols)
        throw std::invalid_argument("hs_inner_re: shape mismatch");
    double s = 0.0;
    for (std::size_t k = 0; k < x.a.size(); ++k)
        s += std::real(std::conj(x.a[k]) * y.a[k]);
    return s;
}

inline bool approx_equal(const ComplexMatrix& x, const ComplexMatrix& y, double tol) {
    if (x.rows != y.rows || x.cols != y.cols) return false;
    return hs_distance(x, y) <= tol;
}

inline ComplexMatrix kron(const ComplexMatrix& x, const ComplexMatrix& y) {
    ComplexMatrix m(x.rows * y.rows, x.cols * y.cols);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = 0; j < x.cols; ++j) {
            const cplx xij = x(i, j);
            if (xij == cplx{}) continue;
            for (std::size_t k = 0; k < y.rows; ++k)
                for (std::size_t l = 0; l < y.cols; ++l)
                    m(i * y.rows + k, j * y.cols + l) = xij * y(k, l);
        }
    return m;
}

inline void check_bipartite_shape(const ComplexMatrix& rho, BipartiteDims dims, const char* op) {
    if (!rho.square() || rho.rows != dims.total())
        throw std::invalid_argument(std::string(op) + ": matrix shape does not match n*m");
}

/// Reduced operator on the kept subsystem; trace is preserved.
inline ComplexMatrix partial_trace(const ComplexMatrix& rho, BipartiteDims dims, Subsystem keep) {
    check_bipartite_shape(rho, dims, "partial_trace");
    const std::size_t n = dims.n, m = dims.m;
    if (keep == Subsystem::A) {
        ComplexMatrix out(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                cplx s = 0.0;
                for (std::size_t k = 0; k < m; ++k) s += rho(i * m + k, j * m + k);
                out(i, j) = s;
            }
        return out;
    }
    ComplexMatrix out(m, m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            cplx s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += rho(k * m + i, k * m + j);
            out(i, j) = s;
        }
    return out;
}

/// Trace out a trailing tensor factor of dimension `rest` from a square matrix
/// of dimension keep*rest. Used by the symmetric-extension machinery where the
/// kept factor is itself composite.
inline ComplexMatrix trace_out_tail(const ComplexMatrix& x, std::size_t keep, std::size_t rest) {
    if (!x.square() || x.rows != keep * rest)
        throw std::invalid_argument("trace_out_tail: shape mismatch");
    ComplexMatrix out(keep, keep);
    for (std::size_t i = 0; i < keep; ++i)
        for (std::size_t j = 0; j < keep; ++j) {
            cplx s = 0.0;
            for (std::size_t k = 0; k < rest; ++k) s += x(i * rest + k, j * rest + k);
            out(i, j) = s;
        }
    return out;
}

/// Block transpose on the chosen subsystem. Involutive and Hermiticity
/// preserving.
inline ComplexMatrix partial_transpose(const ComplexMatrix& rho, BipartiteDims dims, Subsystem side) {
    check_bipartite_shape(rho, dims, "partial_transpose");
    const std::size_t n = dims.n, m = dims.m;
    ComplexMatrix out(rho.rows, rho.cols);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = 0; k < m; ++k)
                for (std::size_t l = 0; l < m; ++l) {
                    if (side == Subsystem::B)
                        out(i * m + k, j * m + l) = rho(i * m + l, j * m + k);
                    else
                        out(i * m + k, j * m + l) = rho(j * m + k, i * m + l);
                }
    return out;
}

inline double hermitian_defect(const ComplexMatrix& h) {
    if (!h.square()) throw std::invalid_argument("hermitian_defect: matrix not square");
    double s = 0.0;
    for (std::size_t i = 0; i < h.rows; ++i)
        for (std::size_t j = 0; j < h.cols; ++j)
            s += std::norm(h(i, j) - std::conj(h(j, i)));
    return std::sqrt(s) / 2.0;
}

struct HermitianEig {
    std::vector<double> eigenvalues;  // ascending
    ComplexMatrix eigenvectors;       // orthonormal columns, same order
};

namespace detail {

inline double offdiag_norm(const ComplexMatrix& h) {
    double s = 0.0;
    for (std::size_t i = 0; i < h.rows; ++i)
        for (std::size_t j = 0; j < h.cols; ++j)
            if (i != j) s += std::norm(h(i, j));
    return std::sqrt(s);
}

}  // namespace detail

/// Hermitian eigendecomposition by cyclic complex Jacobi rotations.
/// Inputs with a Hermiticity defect below 1e-12*d are symmetrized first;
/// larger defects are rejected. Converges when the off-diagonal HS norm
/// drops below 1e-13*d.
inline HermitianEig hermitian_eig(const ComplexMatrix& input) {
    if (!input.square()) throw std::invalid_argument("hermitian_eig: matrix not square");
    const std::size_t d = input.rows;
    const double defect = hermitian_defect(input);
    if (defect > 1e-12 * static_cast<double>(d))
        throw std::invalid_argument("hermitian_eig: input is not Hermitian (defect " +
                                    std::to_string(defect) + ")");

    ComplexMatrix h(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            h(i, j) = 0.5 * (input(i, j) + std::conj(input(j, i)));

    ComplexMatrix v = ComplexMatrix::identity(d);
    const double target = 1e-13 * static_cast<double>(d);
    const int max_sweeps = 80;

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        if (detail::offdiag_norm(h) <= target) break;
        for (std::size_t p = 0; p + 1 < d; ++p) {
            for (std::size_t q = p + 1; q < d; ++q) {
                const cplx hpq = h(p, q);
                const double alpha = std::abs(hpq);
                if (alpha < 1e-300) continue;
                const cplx phase = hpq / alpha;  // e^{i phi}
                const double app = std::real(h(p, p));
                const double aqq = std::real(h(q, q));
                const double tau = (app - aqq) / (2.0 * alpha);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                const cplx sp = s * std::conj(phase);   // J(q,p)
                const cplx cp = c * std::conj(phase);   // J(q,q)

                // columns: M <- M * J
                for (std::size_t i = 0; i < d; ++i) {
                    const cplx hp = h(i, p), hq = h(i, q);
                    h(i, p) = hp * c + hq * sp;
                    h(i, q) = -hp * s + hq * cp;
                }
                // rows: M <- J^dag * M
                for (std::size_t j = 0; j < d; ++j) {
                    const cplx hp = h(p, j), hq = h(q, j);
                    h(p, j) = c * hp + s * phase * hq;
                    h(q, j) = -s * hp + c * phase * hq;
                }
                for (std::size_t i = 0; i < d; ++i) {
                    const cplx vp = v(i, p), vq = v(i, q);
                    v(i, p) = vp * c + vq * sp;
                    v(i, q) = -vp * s + vq * cp;
                }
                h(p, q) = std::conj(h(q, p));  // keep drift out of the pivot
            }
        }
    }

    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> diag(d);
    for (std::size_t i = 0; i < d; ++i) diag[i] = std::real(h(i, i));
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return diag[x] < diag[y]; });

    HermitianEig out;
    out.eigenvalues.resize(d);
    out.eigenvectors = ComplexMatrix(d, d);
    for (std::size_t k = 0; k < d; ++k) {
        out.eigenvalues[k] = diag[order[k]];
        for (std::size_t i = 0; i < d; ++i) out.eigenvectors(i, k) = v(i, order[k]);
    }
    return out;
}

/// Isometric real coordinates of a Hermitian matrix: diagonal entries as-is,
/// each off-diagonal pair contributing (sqrt2*Re, sqrt2*Im). The Euclidean
/// distance of images equals the HS distance of preimages, which is what lets
/// the hull geometry run in a plain real vector space.
inline std::vector<double> vectorize_hermitian(const ComplexMatrix& h) {
    if (!h.square()) throw std::invalid_argument("vectorize_hermitian: matrix not square");
    const std::size_t d = h.rows;
    if (hermitian_defect(h) > 1e-12 * static_cast<double>(d))
        throw std::invalid_argument("vectorize_hermitian: input is not Hermitian");
    const double rt2 = std::sqrt(2.0);
    std::vector<double> v;
    v.reserve(d * d);
    for (std::size_t i = 0; i < d; ++i) v.push_back(std::real(h(i, i)));
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i + 1; j < d; ++j) {
            const cplx sym = 0.5 * (h(i, j) + std::conj(h(j, i)));
            v.push_back(rt2 * std::real(sym));
            v.push_back(rt2 * std::imag(sym));
        }
    return v;
}

inline ComplexMatrix devectorize_hermitian(std::span<const double> v, std::size_t d) {
    if (v.size() != d * d)
        throw std::invalid_argument("devectorize_hermitian: length must be d^2");
    const double irt2 = 1.0 / std::sqrt(2.0);
    ComplexMatrix h(d, d);
    std::size_t idx = 0;
    for (std::size_t i = 0; i < d; ++i) h(i, i) = v[idx++];
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i + 1; j < d; ++j) {
            const double re = v[idx++] * irt2;
            const double im = v[idx++] * irt2;
            h(i, j) = cplx(re, im);
            h(j, i) = cplx(re, -im);
        }
    return h;
}

/// Solve a small dense real linear system in place (Gaussian elimination with
/// partial pivoting). Throws on singular systems.
inline std::vector<double> solve_linear(std::vector<double> a, std::vector<double> b) {
    const std::size_t k = b.size();
    if (a.size() != k * k) throw std::invalid_argument("solve_linear: shape mismatch");
    double scale = 0.0;
    for (double x : a) scale = std::max(scale, std::abs(x));
    if (scale == 0.0) scale = 1.0;

    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t col = 0; col < k; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < k; ++r)
            if (std::abs(a[perm[r] * k + col]) > std::abs(a[perm[piv] * k + col])) piv = r;
        std::swap(perm[col], perm[piv]);
        const double pivot = a[perm[col] * k + col];
        if (std::abs(pivot) < 1e-13 * scale)
            throw std::runtime_error("solve_linear: singular system");
        for (std::size_t r = col + 1; r < k; ++r) {
            const double f = a[perm[r] * k + col] / pivot;
            if (f == 0.0) continue;
            for (std::size_t c = col; c < k; ++c) a[perm[r] * k + c] -= f * a[perm[col] * k + c];
            b[perm[r]] -= f * b[perm[col]];
        }
    }
    std::vector<double> x(k);
    for (std::size_t ri = k; ri-- > 0;) {
        double s = b[perm[ri]];
        for (std::size_t c = ri + 1; c < k; ++c) s -= a[perm[ri] * k + c] * x[c];
        x[ri] = s / a[perm[ri] * k + ri];
    }
    return x;
}

}  // namespace sepdec
