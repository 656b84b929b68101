// JSON emission for verdicts, certificates, membership results, and product
// states. Uses ordered serialization throughout so identical runs give
// byte-identical output.

#pragma once

#include <nlohmann/json.hpp>

#include "sepdec/dps.hpp"
#include "sepdec/hull.hpp"
#include "sepdec/scheduler.hpp"

namespace sepdec {

using ojson = nlohmann::ordered_json;

inline ojson complex_vector_json(const std::vector<cplx>& v) {
    ojson re = ojson::array(), im = ojson::array();
    for (const auto& c : v) {
        re.push_back(std::real(c));
        im.push_back(std::imag(c));
    }
    ojson out;
    out["re"] = std::move(re);
    out["im"] = std::move(im);
    return out;
}

inline ojson matrix_json(const ComplexMatrix& m) {
    ojson re = ojson::array(), im = ojson::array();
    for (std::size_t i = 0; i < m.rows; ++i) {
        ojson rrow = ojson::array(), irow = ojson::array();
        for (std::size_t j = 0; j < m.cols; ++j) {
            rrow.push_back(std::real(m(i, j)));
            irow.push_back(std::imag(m(i, j)));
        }
        re.push_back(std::move(rrow));
        im.push_back(std::move(irow));
    }
    ojson out;
    out["re"] = std::move(re);
    out["im"] = std::move(im);
    return out;
}

inline ojson product_state_json(const ProductState& p) {
    ojson out;
    out["a"] = complex_vector_json(p.a);
    out["b"] = complex_vector_json(p.b);
    return out;
}

inline ojson decomposition_json(const SeparableDecomposition& d) {
    ojson atoms = ojson::array();
    for (const auto& [w, atom] : d.pairs) {
        ojson entry;
        entry["weight"] = w;
        entry["a"] = complex_vector_json(atom.a);
        entry["b"] = complex_vector_json(atom.b);
        atoms.push_back(std::move(entry));
    }
    ojson out;
    out["atoms"] = std::move(atoms);
    out["residual"] = d.residual;
    return out;
}

inline ojson ppt_json(const PptResult& r) {
    ojson out;
    out["npt"] = r.npt;
    out["min_eigenvalue"] = r.min_eigenvalue;
    out["eigenvector"] = complex_vector_json(r.eigenvector);
    return out;
}

inline ojson dps_outcome_json(const DpsOutcome& o) {
    ojson out;
    switch (o.kind) {
        case DpsVerdictKind::EntangledCertified: out["kind"] = "EntangledCertified"; break;
        case DpsVerdictKind::NotDetectedAtLevel: out["kind"] = "NotDetectedAtLevel"; break;
        case DpsVerdictKind::InProgress: out["kind"] = "InProgress"; break;
    }
    out["exactness"] = o.exact ? "exact" : "heuristic";
    out["iterations"] = o.iterations;
    out["residual"] = o.residual;
    if (o.ppt) out["ppt"] = ppt_json(*o.ppt);
    if (!o.residual_history.empty()) {
        double window_min = std::numeric_limits<double>::infinity();
        for (double r : o.residual_history) window_min = std::min(window_min, r);
        ojson plateau;
        plateau["history_length"] = o.residual_history.size();
        plateau["final_residual"] = o.residual_history.back();
        plateau["history_min"] = window_min;
        out["plateau"] = std::move(plateau);
    }
    return out;
}

inline const char* verdict_kind_name(VerdictKind k) {
    switch (k) {
        case VerdictKind::Separable: return "Separable";
        case VerdictKind::Entangled: return "Entangled";
        case VerdictKind::Border: return "Border";
        default: return "BudgetExhausted";
    }
}

inline ojson membership_json(const MembershipResult& r) {
    ojson out;
    switch (r.kind) {
        case MembershipKind::In: out["verdict"] = "In"; break;
        case MembershipKind::Out: out["verdict"] = "Out"; break;
        case MembershipKind::Degenerate: out["verdict"] = "Degenerate"; break;
    }
    out["weights"] = r.weights ? ojson(*r.weights) : ojson(nullptr);
    if (r.facet) {
        ojson f;
        f["offset"] = r.facet->offset;
        f["normal"] = matrix_json(r.facet->normal);
        out["facet"] = std::move(f);
    } else {
        out["facet"] = nullptr;
    }
    return out;
}

inline ojson verdict_json(const Verdict& v) {
    ojson out;
    out["kind"] = verdict_kind_name(v.kind);
    out["eta"] = v.eta;
    out["f1"] = v.f1;
    out["f2"] = v.f2;
    out["total_steps"] = v.total_steps;
    out["range_mode"] = v.range_mode;
    out["range_rank"] = v.range_rank;
    out["identity_convention"] = Verdict::identity_convention;

    ojson streams;
    auto stream_json = [](const StreamStats& s) {
        ojson j;
        j["steps"] = s.steps;
        j["detection_step"] = s.detection_step;
        return j;
    };
    streams["detector_rho"] = stream_json(v.s1);
    streams["prover_rho"] = stream_json(v.s2);
    streams["detector_rho_e"] = stream_json(v.s3);
    streams["prover_rho_s"] = stream_json(v.s4);
    out["streams"] = std::move(streams);

    ojson tol;
    tol["membership"] = v.config.membership_tol;
    tol["feasibility"] = v.config.dps.feasibility_tol;
    tol["infeasibility_threshold"] = v.config.dps.infeasibility_threshold;
    tol["rank_cutoff"] = v.config.rank_cutoff;
    tol["range_support"] = v.config.range_support_tol;
    out["tolerances"] = std::move(tol);

    ojson cfg;
    cfg["budget"] = v.config.budget;
    cfg["mode"] = v.config.mode == A2Mode::GrowingHull ? "grow" : "tuple";
    cfg["dps_level"] = v.config.dps.level;
    cfg["impose_ppt_on_extension"] = v.config.dps.impose_ppt_on_extension;
    cfg["range_scan_cap"] = v.config.range_scan_cap;
    out["config"] = std::move(cfg);

    ojson cert;
    switch (v.kind) {
        case VerdictKind::Entangled:
            cert = dps_outcome_json(*v.entangled_certificate);
            break;
        case VerdictKind::Separable:
            cert = decomposition_json(*v.separable_certificate);
            break;
        case VerdictKind::Border:
            cert["eta"] = v.eta;
            cert["f1"] = v.f1;
            cert["f2"] = v.f2;
            break;
        case VerdictKind::BudgetExhausted:
            cert["steps"] = v.total_steps;
            break;
    }
    out["certificate"] = std::move(cert);
    return out;
}

}  // namespace sepdec
