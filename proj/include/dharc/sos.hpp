#pragma once

// Sum-of-squares layer: polynomial templates with scalar decision
// variables, Putinar-style lowering of nonnegativity-on-a-domain
// constraints to semidefinite feasibility, certificate extraction, and an
// independent numerical verifier (coefficient residual + Gram eigenvalues
// + quasi-random domain sampling).

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dharc/poly.hpp"
#include "dharc/sdp.hpp"

namespace dharc {

struct DecisionVars {
    std::vector<std::string> names;
    int add(std::string name) {
        names.push_back(std::move(name));
        return static_cast<int>(names.size()) - 1;
    }
    int size() const { return static_cast<int>(names.size()); }
};

// Polynomial whose coefficients are affine in scalar decision variables:
// value(x) = constant(x) + sum_v  u_v * coeff[v](x).
struct LinPoly {
    int nvars = 0;
    Polynomial constant;
    std::map<int, Polynomial> coeff;

    static LinPoly from_poly(Polynomial p);

    int degree() const;
    LinPoly operator+(const LinPoly& o) const;
    LinPoly operator-(const LinPoly& o) const;
    LinPoly operator*(double s) const;
    LinPoly mul(const Polynomial& p) const;
    LinPoly partial(int var_index) const;
    LinPoly rename_vars(int new_nvars, const std::vector<int>& var_map) const;
    // Substitute the ring variables by polynomial images (decision variables
    // are untouched).
    LinPoly substitute(const std::vector<Polynomial>& images) const;
    Polynomial instantiate(const std::vector<double>& assignment) const;
};

struct PolyTemplate {
    int nvars = 0;
    std::vector<Exponents> basis;
    std::vector<int> coeff_ids;

    LinPoly as_linpoly() const;
};

// Full monomial basis of total degree <= degree; ids drawn from the pool,
// named prefix[e1,e2,...].
PolyTemplate make_poly_template(DecisionVars& pool, const std::string& prefix,
                                int nvars, int degree);

std::vector<Exponents> monomials_up_to(int nvars, int degree);

struct SosConstraint {
    LinPoly target;
    SemialgebraicSet domain;
    int multiplier_degree = 0;  // even cap for the inequality multipliers
    int sigma0_degree = 0;      // 0 = auto: target degree rounded up to even
    std::string label;
};

struct DegreeOverflow : std::runtime_error {
    explicit DegreeOverflow(const std::string& what) : std::runtime_error(what) {}
};

// One lowered constraint's bookkeeping inside the shared SDP.
struct LoweredConstraint {
    SosConstraint c;
    int sigma0_block = -1;
    std::vector<Exponents> sigma0_basis;
    // one per domain inequality that received a multiplier (indices into
    // domain.constraints), with Gram block + basis
    std::vector<int> ineq_index;
    std::vector<int> ineq_block;
    std::vector<std::vector<Exponents>> ineq_basis;
    // free multipliers for equalities: var ids per basis monomial
    std::vector<int> eq_index;
    std::vector<std::vector<int>> eq_var_ids;
    std::vector<std::vector<Exponents>> eq_basis;
};

struct SosProgram {
    DecisionVars vars;
    SdpProblem sdp;
    std::vector<LoweredConstraint> lowered;

    // Putinar lowering: target = sigma0 + sum sigma_i * g_i + sum lambda_j * h_j
    // with sigma SOS (Gram blocks) and lambda free, coefficient-matched on
    // every monomial of degree <= sigma0 degree.
    void add_sos(const SosConstraint& c);
    // Plain linear equality over decision variables: expr(point) = rhs.
    void add_point_row(const LinPoly& expr, const std::vector<double>& point,
                       double rhs, const std::string& label);
};

struct SosCertificate {
    Polynomial target;                       // instantiated target polynomial
    std::vector<Polynomial> multipliers;     // sigma0, then sigma_i in order
    std::vector<int> ineq_index;             // domain index per sigma_i
    std::vector<Eigen::MatrixXd> grams;      // parallel to multipliers
    std::vector<std::vector<Exponents>> gram_bases;
    std::vector<Polynomial> eq_multipliers;  // lambda_j in order
    std::vector<int> eq_index;               // domain index per lambda_j
    double residual = 0.0;                   // max |coefficient mismatch|
};

SosCertificate extract_certificate(const SosProgram& prog, size_t index,
                                   const SdpSolution& sol);

struct VerificationReport {
    bool pass = false;
    double residual = 0.0;
    double min_gram_eigenvalue = 0.0;
    double sampled_min = 0.0;
    int samples_used = 0;
    double scale = 1.0;
    std::string fail_reason;
};

// Independent check of a certificate against its constraint: coefficient
// residual <= 1e-6*scale, Gram eigenvalues >= -1e-7, and min of the target
// over quasi-random domain samples >= -1e-6*scale.
VerificationReport verify(const SosCertificate& cert, const SosConstraint& c,
                          int samples);

// Deterministic quasi-random points (Halton sequence) inside a box.
std::vector<std::vector<double>> halton_points(const Box& box, int count,
                                               int skip = 0);

// Sparse text round-trip of the SDP (one line per row entry), for debugging
// and for plugging external solvers.
std::string sdp_to_text(const SdpProblem& p);
SdpProblem sdp_from_text(const std::string& text);

}  // namespace dharc
