#pragma once

// Sparse multivariate polynomials over double coefficients, semialgebraic
// sets as constraint conjunctions, and the vector-field type for dynamics
// with one discrete delay:  x'(t) = f(x(t), x(t - tau)).

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dharc {

using Exponents = std::vector<uint32_t>;

// Coefficients below this magnitude are dropped during normalization; all
// downstream certificates are re-checked numerically, so floats suffice.
constexpr double kCoefEps = 1e-12;

class Polynomial {
public:
    Polynomial() = default;
    explicit Polynomial(int nvars) : nvars_(nvars) {}

    static Polynomial constant(int nvars, double c);
    static Polynomial variable(int nvars, int index);
    static Polynomial monomial(int nvars, Exponents e, double c);
    // Parses the canonical grammar: terms joined by + / -, each term a
    // product of an optional coefficient and var^exp factors, e.g.
    // "0.5*x1^2*x2 - x2 + 1". Variables must appear in `names`.
    static Polynomial parse(const std::string& text,
                            const std::vector<std::string>& names);

    int nvars() const { return nvars_; }
    const std::map<Exponents, double>& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }
    int degree() const;
    double coefficient(const Exponents& e) const;
    double max_abs_coefficient() const;

    void add_term(const Exponents& e, double c);

    Polynomial operator+(const Polynomial& o) const;
    Polynomial operator-(const Polynomial& o) const;
    Polynomial operator-() const;
    Polynomial operator*(const Polynomial& o) const;
    Polynomial operator*(double s) const;
    Polynomial& operator+=(const Polynomial& o);
    Polynomial& operator-=(const Polynomial& o);
    bool same_terms(const Polynomial& o, double tol = 0.0) const;

    Polynomial pow(unsigned k) const;
    Polynomial partial(int var_index) const;
    double eval(const std::vector<double>& point) const;
    // Substitute variable i by images[i]; images share a common nvars.
    Polynomial substitute(const std::vector<Polynomial>& images) const;
    // Reinterpret over a wider/narrower ring: old var i becomes var_map[i].
    Polynomial rename_vars(int new_nvars, const std::vector<int>& var_map) const;

    std::string to_string(const std::vector<std::string>& names) const;

private:
    int nvars_ = 0;
    std::map<Exponents, double> terms_;
};

Polynomial operator*(double s, const Polynomial& p);

struct PolyVector {
    std::vector<Polynomial> entries;

    int size() const { return static_cast<int>(entries.size()); }
    int nvars() const { return entries.empty() ? 0 : entries[0].nvars(); }
    std::vector<double> eval(const std::vector<double>& point) const;
};

enum class Rel { LE, LT, EQ, GE };

std::string rel_to_string(Rel r);
Rel rel_from_string(const std::string& s);

struct SetConstraint {
    Polynomial p;
    Rel rel = Rel::LE;
};

// Conjunction of polynomial constraints (a basic semialgebraic set). An
// empty constraint list denotes the full space.
struct SemialgebraicSet {
    int nvars = 0;
    std::vector<SetConstraint> constraints;

    static SemialgebraicSet full_space(int nvars) { return {nvars, {}}; }

    bool contains(const std::vector<double>& point, double tol = 1e-9) const;
    // Conjunction; duplicate constraints (same poly string, same relation)
    // are kept once so Dom ∩ S does not double identical inequalities.
    SemialgebraicSet conjoin(const SemialgebraicSet& other) const;
    SemialgebraicSet rename_vars(int new_nvars,
                                 const std::vector<int>& var_map) const;
};

struct VectorField {
    int n = 0;                               // state dimension
    std::vector<std::string> current_names;  // x1..xn  -> ring vars 0..n-1
    std::vector<std::string> delayed_names;  // x1_d..  -> ring vars n..2n-1
    PolyVector components;                   // n polys over the 2n-var ring
    double delay = 0.0;                      // tau > 0

    std::vector<double> eval(const std::vector<double>& x,
                             const std::vector<double>& y) const;
    // f(x, x): delayed variables substituted by current ones; n-var ring.
    PolyVector f_current() const;
    bool delayed_part_is_constant_linear() const;
};

// Directional derivative of h along f(x,x):  sum_i dh/dx_i * f_i(x,x).
Polynomial lie_current(const Polynomial& h, const VectorField& vf);

// d f_i / d y_j as polynomials over the doubled (x,y) ring.
std::vector<std::vector<Polynomial>> jacobian_delayed(const VectorField& vf);

// closure(S \ T) over-approximation for a single-inequality T = {g <= 0}:
// {s_i <= 0 all i} ∧ {g >= 0}.
SemialgebraicSet set_closure_of_difference(const SemialgebraicSet& s,
                                           const SemialgebraicSet& t);

// General conjunctive T = {t_1 <= 0, ..., t_k <= 0}: one branch per j,
// S ∧ {t_j >= 0}. The union of branches covers closure(S \ T); T empty
// (full space) yields the single branch S.
std::vector<SemialgebraicSet> closure_difference_branches(
    const SemialgebraicSet& s, const SemialgebraicSet& t);

// ---- grid utilities ----------------------------------------------------

struct Box {
    std::vector<double> lo, hi;
    int dim() const { return static_cast<int>(lo.size()); }
};

// Default grid resolution per axis by dimension (desk-scale scans).
int default_grid_points(int nvars);

// Process-wide override of the default resolution; 0 restores the
// per-dimension defaults. Meant for front-end configuration, set once
// before any parallel work starts.
void set_grid_override(int pts_per_axis);

void for_each_grid_point(const Box& box, int pts_per_axis,
                         const std::function<void(const std::vector<double>&)>& fn);

// Axis-aligned bounding box of a set, found by scanning and doubling an
// initial symmetric box until the sampled points pull away from its faces.
// Returns nullopt when no grid point satisfies the set (numerically empty).
std::optional<Box> bounding_box(const SemialgebraicSet& s,
                                double initial_halfwidth = 1.0,
                                double cap = 16.0, int pts_per_axis = 0);

// First grid point satisfying the set, if any.
std::optional<std::vector<double>> find_grid_point(const SemialgebraicSet& s,
                                                   const Box& box,
                                                   int pts_per_axis = 0);

// Grid point of target ∩ safe maximizing min_j(-t_j(x)) (the "deepest"
// target point); nullopt when the intersection has no strictly interior
// sample (depth <= tol).
std::optional<std::vector<double>> deepest_point(const SemialgebraicSet& safe,
                                                 const SemialgebraicSet& target,
                                                 const Box& box,
                                                 int pts_per_axis = 0,
                                                 double tol = 1e-9);

std::string format_double(double v);

}  // namespace dharc
