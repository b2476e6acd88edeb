#include "dharc/poly.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

namespace dharc {

static void check_dim(int a, int b, const char* what) {
    if (a != b) {
        throw std::invalid_argument(std::string("dimension mismatch in ") + what +
                                    ": " + std::to_string(a) + " vs " +
                                    std::to_string(b));
    }
}

Polynomial Polynomial::constant(int nvars, double c) {
    Polynomial p(nvars);
    p.add_term(Exponents(nvars, 0), c);
    return p;
}

Polynomial Polynomial::variable(int nvars, int index) {
    if (index < 0 || index >= nvars) throw std::out_of_range("variable index");
    Polynomial p(nvars);
    Exponents e(nvars, 0);
    e[index] = 1;
    p.add_term(e, 1.0);
    return p;
}

Polynomial Polynomial::monomial(int nvars, Exponents e, double c) {
    if (static_cast<int>(e.size()) != nvars)
        throw std::invalid_argument("exponent vector length != nvars");
    Polynomial p(nvars);
    p.add_term(e, c);
    return p;
}

void Polynomial::add_term(const Exponents& e, double c) {
    if (static_cast<int>(e.size()) != nvars_)
        throw std::invalid_argument("exponent vector length != nvars");
    auto it = terms_.find(e);
    if (it == terms_.end()) {
        if (std::abs(c) > kCoefEps) terms_.emplace(e, c);
    } else {
        it->second += c;
        if (std::abs(it->second) <= kCoefEps) terms_.erase(it);
    }
}

int Polynomial::degree() const {
    int d = 0;
    for (const auto& [e, c] : terms_) {
        int t = 0;
        for (uint32_t k : e) t += static_cast<int>(k);
        d = std::max(d, t);
    }
    return d;
}

double Polynomial::coefficient(const Exponents& e) const {
    auto it = terms_.find(e);
    return it == terms_.end() ? 0.0 : it->second;
}

double Polynomial::max_abs_coefficient() const {
    double m = 0.0;
    for (const auto& [e, c] : terms_) m = std::max(m, std::abs(c));
    return m;
}

Polynomial Polynomial::operator+(const Polynomial& o) const {
    Polynomial r = *this;
    r += o;
    return r;
}

Polynomial& Polynomial::operator+=(const Polynomial& o) {
    check_dim(nvars_, o.nvars_, "operator+");
    for (const auto& [e, c] : o.terms_) add_term(e, c);
    return *this;
}

Polynomial Polynomial::operator-(const Polynomial& o) const {
    Polynomial r = *this;
    r -= o;
    return r;
}

Polynomial& Polynomial::operator-=(const Polynomial& o) {
    check_dim(nvars_, o.nvars_, "operator-");
    for (const auto& [e, c] : o.terms_) add_term(e, -c);
    return *this;
}

Polynomial Polynomial::operator-() const {
    Polynomial r(nvars_);
    for (const auto& [e, c] : terms_) r.terms_.emplace(e, -c);
    return r;
}

Polynomial Polynomial::operator*(const Polynomial& o) const {
    check_dim(nvars_, o.nvars_, "operator*");
    Polynomial r(nvars_);
    for (const auto& [ea, ca] : terms_) {
        for (const auto& [eb, cb] : o.terms_) {
            Exponents e(nvars_);
            for (int i = 0; i < nvars_; ++i) e[i] = ea[i] + eb[i];
            r.add_term(e, ca * cb);
        }
    }
    return r;
}

Polynomial Polynomial::operator*(double s) const {
    Polynomial r(nvars_);
    for (const auto& [e, c] : terms_) {
        double v = c * s;
        if (std::abs(v) > kCoefEps) r.terms_.emplace(e, v);
    }
    return r;
}

Polynomial operator*(double s, const Polynomial& p) { return p * s; }

bool Polynomial::same_terms(const Polynomial& o, double tol) const {
    if (nvars_ != o.nvars_) return false;
    // Compare as maps with tolerance in both directions.
    for (const auto& [e, c] : terms_)
        if (std::abs(c - o.coefficient(e)) > tol) return false;
    for (const auto& [e, c] : o.terms_)
        if (std::abs(c - coefficient(e)) > tol) return false;
    return true;
}

Polynomial Polynomial::pow(unsigned k) const {
    Polynomial r = Polynomial::constant(nvars_, 1.0);
    for (unsigned i = 0; i < k; ++i) r = r * (*this);
    return r;
}

Polynomial Polynomial::partial(int var_index) const {
    if (var_index < 0 || var_index >= nvars_)
        throw std::out_of_range("partial: variable index");
    Polynomial r(nvars_);
    for (const auto& [e, c] : terms_) {
        if (e[var_index] == 0) continue;
        Exponents d = e;
        d[var_index] -= 1;
        r.add_term(d, c * static_cast<double>(e[var_index]));
    }
    return r;
}

double Polynomial::eval(const std::vector<double>& point) const {
    check_dim(static_cast<int>(point.size()), nvars_, "eval");
    double acc = 0.0;
    for (const auto& [e, c] : terms_) {
        double t = c;
        for (int i = 0; i < nvars_; ++i) {
            uint32_t k = e[i];
            if (k == 0) continue;
            double b = point[i], m = 1.0;
            while (k) {  // square-and-multiply keeps rounding predictable
                if (k & 1u) m *= b;
                b *= b;
                k >>= 1u;
            }
            t *= m;
        }
        acc += t;
    }
    return acc;
}

Polynomial Polynomial::substitute(const std::vector<Polynomial>& images) const {
    check_dim(static_cast<int>(images.size()), nvars_, "substitute");
    int target_n = images.empty() ? 0 : images[0].nvars();
    Polynomial r(target_n);
    for (const auto& [e, c] : terms_) {
        Polynomial t = Polynomial::constant(target_n, c);
        for (int i = 0; i < nvars_; ++i)
            if (e[i] > 0) t = t * images[i].pow(e[i]);
        r += t;
    }
    return r;
}

Polynomial Polynomial::rename_vars(int new_nvars,
                                   const std::vector<int>& var_map) const {
    check_dim(static_cast<int>(var_map.size()), nvars_, "rename_vars");
    Polynomial r(new_nvars);
    for (const auto& [e, c] : terms_) {
        Exponents ne(new_nvars, 0);
        for (int i = 0; i < nvars_; ++i) {
            if (e[i] == 0) continue;
            int j = var_map[i];
            if (j < 0 || j >= new_nvars)
                throw std::out_of_range("rename_vars: target index");
            ne[j] += e[i];
        }
        r.add_term(ne, c);
    }
    return r;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.15g", v);
    if (std::strtod(buf, nullptr) != v)
        std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string Polynomial::to_string(const std::vector<std::string>& names) const {
    check_dim(static_cast<int>(names.size()), nvars_, "to_string");
    if (terms_.empty()) return "0";
    std::ostringstream out;
    bool first = true;
    for (const auto& [e, c] : terms_) {
        double mag = std::abs(c);
        if (first) {
            if (c < 0) out << "-";
            first = false;
        } else {
            out << (c < 0 ? " - " : " + ");
        }
        bool has_vars = false;
        for (int i = 0; i < nvars_; ++i) has_vars = has_vars || e[i] > 0;
        if (!has_vars || mag != 1.0) out << format_double(mag);
        bool lead = !has_vars || mag != 1.0;
        for (int i = 0; i < nvars_; ++i) {
            if (e[i] == 0) continue;
            if (lead) out << "*";
            lead = true;
            out << names[i];
            if (e[i] > 1) out << "^" << e[i];
        }
    }
    return out.str();
}

namespace {

struct Lexer {
    const std::string& s;
    size_t i = 0;
    void skip_ws() {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    }
    bool done() {
        skip_ws();
        return i >= s.size();
    }
    char peek() {
        skip_ws();
        return i < s.size() ? s[i] : '\0';
    }
};

}  // namespace

Polynomial Polynomial::parse(const std::string& text,
                             const std::vector<std::string>& names) {
    int nvars = static_cast<int>(names.size());
    Polynomial result(nvars);
    Lexer lx{text};
    if (lx.done()) throw std::invalid_argument("empty polynomial string");

    bool expect_term = true;
    double sign = 1.0;
    while (!lx.done()) {
        char c = lx.peek();
        if (c == '+' || c == '-') {
            if (expect_term && c == '-') {
                sign = -sign;
                ++lx.i;
                continue;
            }
            if (expect_term) {  // unary plus
                ++lx.i;
                continue;
            }
            sign = (c == '-') ? -1.0 : 1.0;
            ++lx.i;
            expect_term = true;
            continue;
        }
        if (!expect_term)
            throw std::invalid_argument("expected '+' or '-' near position " +
                                        std::to_string(lx.i) + " in: " + text);
        // one term: factors separated by '*'
        double coef = sign;
        Exponents expo(nvars, 0);
        bool more = true;
        bool any_factor = false;
        while (more) {
            lx.skip_ws();
            if (lx.i >= lx.s.size()) break;
            char f = lx.s[lx.i];
            if (std::isdigit(static_cast<unsigned char>(f)) || f == '.') {
                const char* start = lx.s.c_str() + lx.i;
                char* end = nullptr;
                double v = std::strtod(start, &end);
                if (end == start) throw std::invalid_argument("bad number in: " + text);
                lx.i += static_cast<size_t>(end - start);
                coef *= v;
                any_factor = true;
            } else if (std::isalpha(static_cast<unsigned char>(f)) || f == '_') {
                size_t start = lx.i;
                while (lx.i < lx.s.size() &&
                       (std::isalnum(static_cast<unsigned char>(lx.s[lx.i])) ||
                        lx.s[lx.i] == '_'))
                    ++lx.i;
                std::string name = lx.s.substr(start, lx.i - start);
                auto it = std::find(names.begin(), names.end(), name);
                if (it == names.end())
                    throw std::invalid_argument("undeclared variable '" + name +
                                                "' in: " + text);
                uint32_t exp = 1;
                lx.skip_ws();
                if (lx.i < lx.s.size() && lx.s[lx.i] == '^') {
                    ++lx.i;
                    lx.skip_ws();
                    size_t ds = lx.i;
                    while (lx.i < lx.s.size() &&
                           std::isdigit(static_cast<unsigned char>(lx.s[lx.i])))
                        ++lx.i;
                    if (lx.i == ds)
                        throw std::invalid_argument("missing exponent in: " + text);
                    exp = static_cast<uint32_t>(
                        std::stoul(lx.s.substr(ds, lx.i - ds)));
                }
                expo[static_cast<size_t>(it - names.begin())] += exp;
                any_factor = true;
            } else {
                throw std::invalid_argument("unexpected character '" +
                                            std::string(1, f) + "' in: " + text);
            }
            lx.skip_ws();
            if (lx.i < lx.s.size() && lx.s[lx.i] == '*') {
                ++lx.i;
            } else {
                more = false;
            }
        }
        if (!any_factor) throw std::invalid_argument("empty term in: " + text);
        result.add_term(expo, coef);
        sign = 1.0;
        expect_term = false;
    }
    if (expect_term) throw std::invalid_argument("dangling operator in: " + text);
    return result;
}

// ---- PolyVector / VectorField -------------------------------------------

std::vector<double> PolyVector::eval(const std::vector<double>& point) const {
    std::vector<double> r(entries.size());
    for (size_t i = 0; i < entries.size(); ++i) r[i] = entries[i].eval(point);
    return r;
}

std::vector<double> VectorField::eval(const std::vector<double>& x,
                                      const std::vector<double>& y) const {
    check_dim(static_cast<int>(x.size()), n, "VectorField::eval x");
    check_dim(static_cast<int>(y.size()), n, "VectorField::eval y");
    std::vector<double> xy(2 * static_cast<size_t>(n));
    std::copy(x.begin(), x.end(), xy.begin());
    std::copy(y.begin(), y.end(), xy.begin() + n);
    return components.eval(xy);
}

PolyVector VectorField::f_current() const {
    std::vector<Polynomial> images;
    images.reserve(2 * static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) images.push_back(Polynomial::variable(n, i));
    for (int i = 0; i < n; ++i) images.push_back(Polynomial::variable(n, i));
    PolyVector out;
    for (const auto& f : components.entries) out.entries.push_back(f.substitute(images));
    return out;
}

bool VectorField::delayed_part_is_constant_linear() const {
    for (const auto& row : jacobian_delayed(*this))
        for (const auto& p : row)
            if (p.degree() > 0) return false;
    return true;
}

Polynomial lie_current(const Polynomial& h, const VectorField& vf) {
    check_dim(h.nvars(), vf.n, "lie_current");
    PolyVector fxx = vf.f_current();
    Polynomial r(vf.n);
    for (int i = 0; i < vf.n; ++i) r += h.partial(i) * fxx.entries[i];
    return r;
}

std::vector<std::vector<Polynomial>> jacobian_delayed(const VectorField& vf) {
    std::vector<std::vector<Polynomial>> jac(
        static_cast<size_t>(vf.n),
        std::vector<Polynomial>(static_cast<size_t>(vf.n)));
    for (int i = 0; i < vf.n; ++i)
        for (int j = 0; j < vf.n; ++j)
            jac[i][j] = vf.components.entries[i].partial(vf.n + j);
    return jac;
}

// ---- sets ----------------------------------------------------------------

std::string rel_to_string(Rel r) {
    switch (r) {
        case Rel::LE: return "<=";
        case Rel::LT: return "<";
        case Rel::EQ: return "==";
        case Rel::GE: return ">=";
    }
    return "?";
}

Rel rel_from_string(const std::string& s) {
    if (s == "<=") return Rel::LE;
    if (s == "<") return Rel::LT;
    if (s == "==" || s == "=") return Rel::EQ;
    if (s == ">=") return Rel::GE;
    throw std::invalid_argument("unknown relation: " + s);
}

bool SemialgebraicSet::contains(const std::vector<double>& point,
                                double tol) const {
    for (const auto& c : constraints) {
        double v = c.p.eval(point);
        switch (c.rel) {
            case Rel::LE:
            case Rel::LT:
                if (v > tol) return false;
                break;
            case Rel::EQ:
                if (std::abs(v) > tol) return false;
                break;
            case Rel::GE:
                if (v < -tol) return false;
                break;
        }
    }
    return true;
}

SemialgebraicSet SemialgebraicSet::conjoin(const SemialgebraicSet& other) const {
    check_dim(nvars, other.nvars, "SemialgebraicSet::conjoin");
    SemialgebraicSet r = *this;
    for (const auto& c : other.constraints) {
        bool dup = false;
        for (const auto& mine : r.constraints)
            if (mine.rel == c.rel && mine.p.same_terms(c.p)) {
                dup = true;
                break;
            }
        if (!dup) r.constraints.push_back(c);
    }
    return r;
}

SemialgebraicSet SemialgebraicSet::rename_vars(
    int new_nvars, const std::vector<int>& var_map) const {
    SemialgebraicSet r;
    r.nvars = new_nvars;
    for (const auto& c : constraints)
        r.constraints.push_back({c.p.rename_vars(new_nvars, var_map), c.rel});
    return r;
}

SemialgebraicSet set_closure_of_difference(const SemialgebraicSet& s,
                                           const SemialgebraicSet& t) {
    if (t.constraints.empty()) return s;
    if (t.constraints.size() != 1)
        throw std::invalid_argument(
            "set_closure_of_difference expects a single-inequality target; "
            "use closure_difference_branches for conjunctions");
    auto branches = closure_difference_branches(s, t);
    return branches.at(0);
}

std::vector<SemialgebraicSet> closure_difference_branches(
    const SemialgebraicSet& s, const SemialgebraicSet& t) {
    check_dim(s.nvars, t.nvars, "closure_difference_branches");
    if (t.constraints.empty()) return {s};
    std::vector<SemialgebraicSet> out;
    for (const auto& c : t.constraints) {
        Rel flipped;
        switch (c.rel) {
            case Rel::LE:
            case Rel::LT: flipped = Rel::GE; break;
            case Rel::GE: flipped = Rel::LE; break;
            case Rel::EQ:
                // complement of {p = 0} is handled as the union of both
                // closed sides; keep the whole space (sound superset).
                out.push_back(s);
                continue;
        }
        SemialgebraicSet b = s;
        b.constraints.push_back({c.p, flipped});
        out.push_back(std::move(b));
    }
    return out;
}

// ---- grid utilities -------------------------------------------------------

namespace {
std::atomic<int> grid_override{0};
}

void set_grid_override(int pts_per_axis) { grid_override = pts_per_axis; }

int default_grid_points(int nvars) {
    int o = grid_override.load();
    if (o > 0) return o;
    if (nvars <= 2) return 201;
    if (nvars == 3) return 41;
    return 17;
}

void for_each_grid_point(
    const Box& box, int pts_per_axis,
    const std::function<void(const std::vector<double>&)>& fn) {
    int d = box.dim();
    if (d == 0) return;
    std::vector<int> idx(static_cast<size_t>(d), 0);
    std::vector<double> pt(static_cast<size_t>(d));
    const int last = pts_per_axis - 1;
    while (true) {
        for (int i = 0; i < d; ++i) {
            double t = last == 0 ? 0.5 : static_cast<double>(idx[i]) / last;
            pt[i] = box.lo[i] + t * (box.hi[i] - box.lo[i]);
        }
        fn(pt);
        int i = 0;
        while (i < d && ++idx[i] > last) idx[i++] = 0;
        if (i == d) break;
    }
}

std::optional<Box> bounding_box(const SemialgebraicSet& s,
                                double initial_halfwidth, double cap,
                                int pts_per_axis) {
    int n = s.nvars;
    if (pts_per_axis <= 0) pts_per_axis = std::min(default_grid_points(n), 101);
    double r = initial_halfwidth;
    while (true) {
        Box scan;
        scan.lo.assign(static_cast<size_t>(n), -r);
        scan.hi.assign(static_cast<size_t>(n), r);
        std::vector<double> lo(static_cast<size_t>(n), 1e300);
        std::vector<double> hi(static_cast<size_t>(n), -1e300);
        bool any = false;
        for_each_grid_point(scan, pts_per_axis, [&](const std::vector<double>& p) {
            if (!s.contains(p, 1e-9)) return;
            any = true;
            for (int i = 0; i < n; ++i) {
                lo[i] = std::min(lo[i], p[i]);
                hi[i] = std::max(hi[i], p[i]);
            }
        });
        double cell = 2.0 * r / (pts_per_axis - 1);
        bool touches = false;
        if (any)
            for (int i = 0; i < n; ++i)
                touches = touches || lo[i] <= -r + cell / 2 || hi[i] >= r - cell / 2;
        if ((any && !touches) || r >= cap) {
            if (!any) return std::nullopt;
            Box out;
            out.lo.resize(static_cast<size_t>(n));
            out.hi.resize(static_cast<size_t>(n));
            for (int i = 0; i < n; ++i) {
                out.lo[i] = lo[i] - cell;
                out.hi[i] = hi[i] + cell;
            }
            return out;
        }
        r *= 2.0;
    }
}

std::optional<std::vector<double>> find_grid_point(const SemialgebraicSet& s,
                                                   const Box& box,
                                                   int pts_per_axis) {
    if (pts_per_axis <= 0) pts_per_axis = default_grid_points(s.nvars);
    std::optional<std::vector<double>> found;
    for_each_grid_point(box, pts_per_axis, [&](const std::vector<double>& p) {
        if (!found && s.contains(p, 1e-9)) found = p;
    });
    return found;
}

std::optional<std::vector<double>> deepest_point(const SemialgebraicSet& safe,
                                                 const SemialgebraicSet& target,
                                                 const Box& box,
                                                 int pts_per_axis, double tol) {
    if (pts_per_axis <= 0) pts_per_axis = default_grid_points(safe.nvars);
    double best = tol;
    std::optional<std::vector<double>> arg;
    for_each_grid_point(box, pts_per_axis, [&](const std::vector<double>& p) {
        if (!safe.contains(p, 1e-9)) return;
        double depth = 1e300;
        for (const auto& c : target.constraints) {
            double v = c.p.eval(p);
            switch (c.rel) {
                case Rel::LE:
                case Rel::LT: depth = std::min(depth, -v); break;
                case Rel::GE: depth = std::min(depth, v); break;
                case Rel::EQ: depth = std::min(depth, -std::abs(v)); break;
            }
        }
        if (target.constraints.empty()) depth = 1.0;  // full space
        if (depth > best) {
            best = depth;
            arg = p;
        }
    });
    return arg;
}

}  // namespace dharc
