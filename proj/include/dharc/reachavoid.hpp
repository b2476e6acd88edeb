#pragma once

// Reach-avoid barrier functional synthesis for one polynomial DDE mode.
// The functional has the shape H(x_t) = h0(x_t(0)) + integral of h1 over
// the delay window; sublevel membership (H < 0, trajectory safe) certifies
// that the state function reaches the target inside the safe set. The
// defining conditions (a decrease condition on the safe-minus-target
// region, a boundary condition on the safe set's edge, a reach condition,
// and auxiliary bounds tying the delayed Jacobian and the field magnitude
// to helper functions e1..e3 and the constant vector C) are lowered to one
// semidefinite program over polynomial templates; the field bound C is
// minimized in a small preliminary program and then frozen so the main
// program stays linear in the remaining decision variables.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dharc/poly.hpp"
#include "dharc/sos.hpp"

namespace dharc {

struct DegreeConfig {
    int h = 4;  // h0 and h1
    int w = 4;  // reach witness
    int e = 4;  // e1 and e3 components
};

struct RaQuery {
    VectorField vf;
    SemialgebraicSet safe;
    SemialgebraicSet target;
    // retry ladder; empty uses (4,4,4) -> (6,6,4) -> (6,6,6)
    std::vector<DegreeConfig> degrees;
    int verify_samples = 200;
};

struct RabfCertificate {
    Polynomial h0, h1, w;
    PolyVector e1, e2, e3;  // e2 entries are constants
    std::vector<double> c_bound;
    double tau = 0.0;
    std::vector<SosCertificate> sos_witnesses;
    std::vector<std::string> witness_labels;
    // conjunctive over-approximation of closure(safe minus target) used for
    // the doubled-variable conditions and the field-bound sampling check
    SemialgebraicSet domain;
    SemialgebraicSet safe;
    double margin = 0.0;  // strictness margin for membership
};

enum class RaStatus { Valid, Infeasible, NumericalFailure, VerificationFailure };

std::string ra_status_name(RaStatus s);

struct RaResult {
    RaStatus status = RaStatus::Infeasible;
    std::optional<RabfCertificate> cert;
    DegreeConfig used_degrees;
    // grid witness of a member point; absent when the inner approximation
    // came out empty
    std::optional<std::vector<double>> member;
    std::string detail;
};

RaResult synthesize_rabf(const RaQuery& q);

// Constant-history membership: h0(p) + tau*h1(p) <= -margin and p safe.
bool membership_constant(const RabfCertificate& cert,
                         const std::vector<double>& point);

// Sampled-history membership: composite trapezoid over quadrature_nodes
// intervals, decided against margin plus a second-difference error bound.
// Throws if any sample leaves the safe set.
bool membership_function(const RabfCertificate& cert,
                         const std::function<std::vector<double>(double)>& history,
                         int quadrature_nodes);

// Grid scan for some member point of the inner approximation.
std::optional<std::vector<double>> find_member(const RabfCertificate& cert);

nlohmann::json certificate_to_json(const RabfCertificate& cert);
RabfCertificate certificate_from_json(const nlohmann::json& j,
                                      const std::vector<std::string>& var_names);

nlohmann::json set_to_json(const SemialgebraicSet& s,
                           const std::vector<std::string>& names);
SemialgebraicSet set_from_json(const nlohmann::json& j,
                               const std::vector<std::string>& names);

}  // namespace dharc
