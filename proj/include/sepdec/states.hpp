// Density-matrix type with validation, canonical test-state generators, and
// the JSON interchange format {"dims":[n,m],"re":[[..]],"im":[[..]]}.
//
// Conventions (documented because they vary across the literature):
//   isotropic(p, n) = p |Phi+><Phi+| + (1-p) I/n^2,  Phi+ = sum_i |ii>/sqrt(n)
//   werner(p, n)    = p rho_anti + (1-p) I/n^2,      rho_anti = (I-SWAP)/(n^2-n)

#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sepdec/linalg.hpp"
#include "sepdec/rng.hpp"

namespace sepdec {

struct PureState {
    BipartiteDims dims;
    std::vector<cplx> amp;  // length n*m, unit norm

    PureState(BipartiteDims d, std::vector<cplx> amplitudes)
        : dims(d), amp(std::move(amplitudes)) {
        if (amp.size() != dims.total())
            throw std::invalid_argument("PureState: amplitude count != n*m");
        double n2 = 0.0;
        for (const auto& c : amp) n2 += std::norm(c);
        if (std::abs(std::sqrt(n2) - 1.0) > 1e-12)
            throw std::invalid_argument("PureState: not unit norm");
    }
};

inline std::vector<cplx> normalized(std::vector<cplx> v) {
    double n2 = 0.0;
    for (const auto& c : v) n2 += std::norm(c);
    if (n2 <= 0.0) throw std::invalid_argument("normalized: zero vector");
    const double inv = 1.0 / std::sqrt(n2);
    for (auto& c : v) c *= inv;
    return v;
}

inline std::vector<cplx> tensor_vec(const std::vector<cplx>& a, const std::vector<cplx>& b) {
    std::vector<cplx> out(a.size() * b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) out[i * b.size() + j] = a[i] * b[j];
    return out;
}

inline ComplexMatrix outer(const std::vector<cplx>& v) {
    ComplexMatrix m(v.size(), v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        for (std::size_t j = 0; j < v.size(); ++j) m(i, j) = v[i] * std::conj(v[j]);
    return m;
}

/// A pure product vector |a> x |b> with its cached rank-1 projector.
struct ProductState {
    std::vector<cplx> a;
    std::vector<cplx> b;
    ComplexMatrix projector;  // |a><a| x |b><b|, idempotent

    BipartiteDims dims() const { return BipartiteDims(a.size(), b.size()); }
    std::vector<cplx> vec() const { return tensor_vec(a, b); }
};

inline ProductState make_product_state(std::vector<cplx> a, std::vector<cplx> b) {
    ProductState p;
    p.a = normalized(std::move(a));
    p.b = normalized(std::move(b));
    p.projector = outer(tensor_vec(p.a, p.b));
    return p;
}

struct DensityMatrix {
    BipartiteDims dims;
    ComplexMatrix mat;
};

struct StateValidationError : std::runtime_error {
    std::vector<std::string> violations;

    explicit StateValidationError(std::vector<std::string> v)
        : std::runtime_error(join(v)), violations(std::move(v)) {}

    static std::string join(const std::vector<std::string>& v) {
        std::string s = "state validation failed:";
        for (const auto& x : v) s += " [" + x + "]";
        return s;
    }
};

/// Checks every invariant (Hermiticity, unit trace, positivity) and reports
/// all violations at once. `tol_scale` loosens the bands for noisy inputs.
inline DensityMatrix validate(const ComplexMatrix& raw, BipartiteDims dims,
                              double tol_scale = 1.0) {
    std::vector<std::string> violations;
    const auto d = static_cast<double>(dims.total());
    if (!raw.square() || raw.rows != dims.total())
        throw std::invalid_argument("validate: matrix shape does not match dims");

    const double defect = hermitian_defect(raw);
    if (defect > 1e-12 * d * tol_scale)
        violations.push_back("NotHermitian: defect " + std::to_string(defect));

    const double tr = std::real(raw.trace());
    const double tr_im = std::imag(raw.trace());
    if (std::abs(tr - 1.0) > 1e-12 * tol_scale || std::abs(tr_im) > 1e-12 * tol_scale)
        violations.push_back("TraceNotOne: trace " + std::to_string(tr));

    // PSD check runs on the symmetrized matrix so a tiny Hermiticity defect
    // cannot mask the real problem.
    ComplexMatrix herm(raw.rows, raw.cols);
    for (std::size_t i = 0; i < raw.rows; ++i)
        for (std::size_t j = 0; j < raw.cols; ++j)
            herm(i, j) = 0.5 * (raw(i, j) + std::conj(raw(j, i)));
    const auto eig = hermitian_eig(herm);
    if (eig.eigenvalues.front() < -1e-10 * tol_scale)
        violations.push_back("NotPositive: min eigenvalue " +
                             std::to_string(eig.eigenvalues.front()));

    if (!violations.empty()) throw StateValidationError(std::move(violations));
    return DensityMatrix{dims, herm};
}

// ---------------------------------------------------------------------------
// generators

enum class BellState { PhiPlus, PhiMinus, PsiPlus, PsiMinus };

inline PureState bell_vector(BellState which) {
    const double s = 1.0 / std::sqrt(2.0);
    std::vector<cplx> v(4, 0.0);
    switch (which) {
        case BellState::PhiPlus:  v[0] = s; v[3] = s; break;
        case BellState::PhiMinus: v[0] = s; v[3] = -s; break;
        case BellState::PsiPlus:  v[1] = s; v[2] = s; break;
        case BellState::PsiMinus: v[1] = s; v[2] = -s; break;
    }
    return PureState(BipartiteDims(2, 2), std::move(v));
}

inline DensityMatrix bell(BellState which) {
    return DensityMatrix{BipartiteDims(2, 2), outer(bell_vector(which).amp)};
}

inline DensityMatrix max_mixed(BipartiteDims dims) {
    const std::size_t d = dims.total();
    return DensityMatrix{dims, ComplexMatrix::identity(d) * cplx(1.0 / static_cast<double>(d))};
}

/// p |Phi+><Phi+| + (1-p) I/n^2 on n x n.
inline DensityMatrix isotropic(double p, std::size_t n = 2) {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("isotropic: p must be in [0,1]");
    std::vector<cplx> phi(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) phi[i * n + i] = 1.0 / std::sqrt(static_cast<double>(n));
    ComplexMatrix rho = outer(phi) * cplx(p);
    const double bg = (1.0 - p) / static_cast<double>(n * n);
    for (std::size_t i = 0; i < n * n; ++i) rho(i, i) += bg;
    return DensityMatrix{BipartiteDims(n, n), std::move(rho)};
}

inline ComplexMatrix swap_operator(std::size_t n) {
    ComplexMatrix s(n * n, n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) s(i * n + j, j * n + i) = 1.0;
    return s;
}

/// p rho_anti + (1-p) I/n^2, with rho_anti the normalized projector onto the
/// antisymmetric subspace (for n=2 this is the singlet).
inline DensityMatrix werner(double p, std::size_t n = 2) {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("werner: p must be in [0,1]");
    const std::size_t d = n * n;
    ComplexMatrix anti = ComplexMatrix::identity(d) - swap_operator(n);
    anti *= cplx(p / static_cast<double>(d - n));  // (I-SWAP)/2 has trace (n^2-n)/2
    const double bg = (1.0 - p) / static_cast<double>(d);
    for (std::size_t i = 0; i < d; ++i) anti(i, i) += bg;
    return DensityMatrix{BipartiteDims(n, n), std::move(anti)};
}

// random_rational_separable lives with the grid machinery in enumeration.hpp;
// it draws canonical grid addresses so its atoms are bit-identical with
// enumerated states.

// ---------------------------------------------------------------------------
// JSON interchange

inline std::string write_state(const DensityMatrix& state) {
    nlohmann::ordered_json j;
    j["dims"] = {state.dims.n, state.dims.m};
    const std::size_t d = state.dims.total();
    nlohmann::ordered_json re = nlohmann::ordered_json::array();
    nlohmann::ordered_json im = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < d; ++i) {
        nlohmann::ordered_json rrow = nlohmann::ordered_json::array();
        nlohmann::ordered_json irow = nlohmann::ordered_json::array();
        for (std::size_t k = 0; k < d; ++k) {
            rrow.push_back(std::real(state.mat(i, k)));
            irow.push_back(std::imag(state.mat(i, k)));
        }
        re.push_back(std::move(rrow));
        im.push_back(std::move(irow));
    }
    j["re"] = std::move(re);
    j["im"] = std::move(im);
    return j.dump();
}

/// Parse and validate a state. `tol_scale` is forwarded to validate().
inline DensityMatrix read_state(std::string_view text, double tol_scale = 1.0) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error(std::string("read_state: JSON parse error: ") + e.what());
    }
    if (!j.contains("dims") || !j["dims"].is_array() || j["dims"].size() != 2)
        throw std::runtime_error("read_state: missing or malformed \"dims\" field");
    if (!j.contains("re") || !j.contains("im"))
        throw std::runtime_error("read_state: missing \"re\" or \"im\" field");

    const std::size_t n = j["dims"][0].get<std::size_t>();
    const std::size_t m = j["dims"][1].get<std::size_t>();
    BipartiteDims dims(n, m);
    const std::size_t d = dims.total();

    const auto& re = j["re"];
    const auto& im = j["im"];
    if (re.size() != d || im.size() != d)
        throw std::runtime_error("read_state: matrix size does not match dims");
    ComplexMatrix mat(d, d);
    for (std::size_t i = 0; i < d; ++i) {
        if (re[i].size() != d || im[i].size() != d)
            throw std::runtime_error("read_state: matrix row size does not match dims");
        for (std::size_t k = 0; k < d; ++k)
            mat(i, k) = cplx(re[i][k].get<double>(), im[i][k].get<double>());
    }
    return validate(mat, dims, tol_scale);
}

}  // namespace sepdec
