#include "dharc/reachavoid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dharc {

std::string ra_status_name(RaStatus s) {
    switch (s) {
        case RaStatus::Valid: return "valid";
        case RaStatus::Infeasible: return "infeasible";
        case RaStatus::NumericalFailure: return "numerical_failure";
        case RaStatus::VerificationFailure: return "verification_failure";
    }
    return "?";
}

namespace {

int even_ceil(int d) { return (d % 2 == 0) ? d : d + 1; }

std::vector<int> ident_map(int n) {
    std::vector<int> m(n);
    for (int i = 0; i < n; ++i) m[i] = i;
    return m;
}
std::vector<int> shift_map(int n) {
    std::vector<int> m(n);
    for (int i = 0; i < n; ++i) m[i] = n + i;
    return m;
}

LinPoly zero_lin(int n) { return LinPoly::from_poly(Polynomial::constant(n, 0.0)); }

// constraint polynomial re-oriented so the set is {p <= 0}
Polynomial le_form(const SetConstraint& sc) {
    return (sc.rel == Rel::GE) ? sc.p * -1.0 : sc.p;
}

// branch j of closure(safe minus target) with the boundary of safe
// inequality i: {s_i = 0} ∧ {s_l <= 0, l != i} ∧ {t_j >= 0}
SemialgebraicSet boundary_branch(const SemialgebraicSet& safe,
                                 const SemialgebraicSet& target, size_t i,
                                 int j) {
    SemialgebraicSet dom = SemialgebraicSet::full_space(safe.nvars);
    for (size_t l = 0; l < safe.constraints.size(); ++l) {
        if (l == i) {
            dom.constraints.push_back({safe.constraints[l].p, Rel::EQ});
        } else {
            dom.constraints.push_back(safe.constraints[l]);
        }
    }
    if (j >= 0 && target.constraints[static_cast<size_t>(j)].rel != Rel::EQ)
        dom.constraints.push_back(
            {le_form(target.constraints[static_cast<size_t>(j)]), Rel::GE});
    return dom;
}

struct Phase0 {
    RaStatus status = RaStatus::NumericalFailure;
    std::string detail;
    std::vector<double> c;
    std::vector<SosCertificate> witnesses;
    std::vector<std::string> labels;
};

// add a scalar decision variable to both the pool and the SDP, keeping the
// two id spaces identical
int add_scalar_var(SosProgram& prog, const std::string& name, bool nonneg) {
    int v = prog.vars.add(name);
    int s = prog.sdp.add_scalar(name, nonneg);
    if (v != s) throw std::logic_error("decision variable ids out of sync");
    return v;
}

void sync_template_scalars(SosProgram& prog) {
    for (int i = prog.sdp.num_scalars(); i < prog.vars.size(); ++i)
        prog.sdp.add_scalar(prog.vars.names[i]);
}

// minimize sum C_k subject to C_k >= |f_k(x, y)| on every pair of
// closure branches (x from one, y from the other)
Phase0 solve_field_bound(const VectorField& vf,
                         const std::vector<SemialgebraicSet>& branches,
                         int verify_samples) {
    const int n = vf.n;
    std::vector<SemialgebraicSet> pairs;
    for (const auto& bx : branches) {
        SemialgebraicSet sx = bx.rename_vars(2 * n, ident_map(n));
        for (const auto& by : branches)
            pairs.push_back(sx.conjoin(by.rename_vars(2 * n, shift_map(n))));
    }

    int deg_f = 0;
    for (const auto& f : vf.components.entries) deg_f = std::max(deg_f, f.degree());

    Phase0 out;
    for (int bump = 0; bump <= 2; bump += 2) {
        int d0 = std::max(even_ceil(deg_f), 4) + bump;
        SosProgram prog;
        std::vector<int> c_ids(n);
        for (int k = 0; k < n; ++k) {
            c_ids[k] = add_scalar_var(prog, "C[" + std::to_string(k) + "]", true);
            prog.sdp.objective.push_back({c_ids[k], 1.0});
        }
        for (int k = 0; k < n; ++k) {
            for (size_t pi = 0; pi < pairs.size(); ++pi) {
                for (int sign = 0; sign < 2; ++sign) {
                    LinPoly t = zero_lin(2 * n);
                    t.constant = vf.components.entries[k] * (sign ? 1.0 : -1.0);
                    t.coeff.emplace(c_ids[k], Polynomial::constant(2 * n, 1.0));
                    SosConstraint c;
                    c.target = std::move(t);
                    c.domain = pairs[pi];
                    c.sigma0_degree = d0;
                    c.multiplier_degree = d0;
                    c.label = "fb" + std::string(sign ? "+" : "-") +
                              std::to_string(k) + ":p" + std::to_string(pi);
                    prog.add_sos(c);
                }
            }
        }
        auto sol = sdp_solve(prog.sdp);
        if (sol.status == SolveStatus::Feasible) {
            out.c.resize(n);
            for (int k = 0; k < n; ++k) out.c[k] = sol.scalars[c_ids[k]];
            for (size_t i = 0; i < prog.lowered.size(); ++i) {
                auto cert = extract_certificate(prog, i, sol);
                auto rep = verify(cert, prog.lowered[i].c, verify_samples);
                if (!rep.pass) {
                    out.status = RaStatus::VerificationFailure;
                    out.detail = "field bound witness " + prog.lowered[i].c.label +
                                 ": " + rep.fail_reason;
                    return out;
                }
                out.witnesses.push_back(std::move(cert));
                out.labels.push_back(prog.lowered[i].c.label);
            }
            out.status = RaStatus::Valid;
            return out;
        }
        out.status = sol.status == SolveStatus::Infeasible
                         ? RaStatus::Infeasible
                         : RaStatus::NumericalFailure;
        out.detail = "field bound program: " + sol.detail;
    }
    return out;
}

struct Attempt {
    RaStatus status = RaStatus::NumericalFailure;
    std::string detail;
    std::optional<RabfCertificate> cert;
};

Attempt attempt_degrees(const RaQuery& q, const DegreeConfig& deg,
                        const std::vector<SemialgebraicSet>& branches,
                        const std::vector<double>& anchor, const Phase0& fb) {
    const VectorField& vf = q.vf;
    const int n = vf.n;
    const double tau = vf.delay;
    const std::vector<double>& cb = fb.c;

    PolyVector f_cur = vf.f_current();
    auto J = jacobian_delayed(vf);
    const bool separable = vf.delayed_part_is_constant_linear();

    SosProgram prog;
    PolyTemplate h0t = make_poly_template(prog.vars, "h0", n, deg.h);
    PolyTemplate h1t = make_poly_template(prog.vars, "h1", n, deg.h);
    PolyTemplate wt = make_poly_template(prog.vars, "w", n, deg.w);
    std::vector<PolyTemplate> e1t(n), e3t(n);
    for (int k = 0; k < n; ++k) {
        e1t[k] = make_poly_template(prog.vars, "e1_" + std::to_string(k), n, deg.e);
        e3t[k] = make_poly_template(prog.vars, "e3_" + std::to_string(k), n, deg.e);
    }
    sync_template_scalars(prog);
    std::vector<int> e2_ids(n);
    for (int k = 0; k < n; ++k)
        e2_ids[k] = add_scalar_var(prog, "e2[" + std::to_string(k) + "]", false);
    std::vector<int> bp_ids(n, -1), bm_ids(n, -1);
    if (separable) {
        for (int k = 0; k < n; ++k) {
            bp_ids[k] = add_scalar_var(prog, "bp[" + std::to_string(k) + "]", false);
            bm_ids[k] = add_scalar_var(prog, "bm[" + std::to_string(k) + "]", false);
        }
    }

    LinPoly h0l = h0t.as_linpoly();
    LinPoly h1l = h1t.as_linpoly();
    LinPoly wl = wt.as_linpoly();
    std::vector<LinPoly> e1l(n), e3l(n), e2l(n);
    for (int k = 0; k < n; ++k) {
        e1l[k] = e1t[k].as_linpoly();
        e3l[k] = e3t[k].as_linpoly();
        e2l[k] = zero_lin(n);
        e2l[k].coeff.emplace(e2_ids[k], Polynomial::constant(n, 1.0));
    }

    auto add = [&](const std::string& label, LinPoly target,
                   SemialgebraicSet domain) {
        SosConstraint c;
        c.multiplier_degree = std::max(2, even_ceil(target.degree()));
        c.target = std::move(target);
        c.domain = std::move(domain);
        c.label = label;
        prog.add_sos(c);
    };

    // decrease condition: dh0/dx . f(x,x) + tau e1'C <= 0 on each branch
    LinPoly dec = zero_lin(n);
    for (int i = 0; i < n; ++i) dec = dec + h0l.partial(i).mul(f_cur.entries[i]);
    LinPoly e1C = zero_lin(n);
    for (int k = 0; k < n; ++k) e1C = e1C + e1l[k] * cb[k];
    for (size_t j = 0; j < branches.size(); ++j)
        add("dec:b" + std::to_string(j), (dec + e1C * tau) * -1.0, branches[j]);

    // the functional's lower bound over one delay window
    LinPoly window = h0l + h1l * tau;
    for (int k = 0; k < n; ++k)
        window = window - e2l[k] * (0.5 * tau * tau * cb[k]);

    // boundary condition on each face of the safe set
    for (size_t i = 0; i < q.safe.constraints.size(); ++i) {
        if (q.safe.constraints[i].rel == Rel::EQ) continue;
        for (size_t j = 0; j < branches.size(); ++j)
            add("bnd:s" + std::to_string(i) + ":b" + std::to_string(j), window,
                boundary_branch(q.safe, q.target,
                                i, q.target.constraints.empty() ? -1 : static_cast<int>(j)));
    }

    // reach condition
    LinPoly reach = window;
    for (int k = 0; k < n; ++k) reach = reach - e3l[k] * (tau * cb[k]);
    for (int i = 0; i < n; ++i) reach = reach - wl.partial(i).mul(f_cur.entries[i]);
    for (size_t j = 0; j < branches.size(); ++j)
        add("rch:b" + std::to_string(j), reach, branches[j]);

    // e1 dominates |dh1/dy(y) - dh0/dx(x) . df/dy|; e3 the same with w
    if (separable) {
        Exponents zero(2 * n, 0);
        std::vector<std::vector<double>> Jc(n, std::vector<double>(n));
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < n; ++k) Jc[i][k] = J[i][k].coefficient(zero);
        for (int k = 0; k < n; ++k) {
            LinPoly bp = zero_lin(n), bm = zero_lin(n);
            bp.coeff.emplace(bp_ids[k], Polynomial::constant(n, 1.0));
            bm.coeff.emplace(bm_ids[k], Polynomial::constant(n, 1.0));
            LinPoly Ak = zero_lin(n);
            for (int i = 0; i < n; ++i)
                if (Jc[i][k] != 0.0) Ak = Ak + h0l.partial(i) * Jc[i][k];
            LinPoly Bk = zero_lin(n);
            for (int i = 0; i < n; ++i)
                if (Jc[i][k] != 0.0) Bk = Bk + wl.partial(i) * Jc[i][k];
            for (size_t j = 0; j < branches.size(); ++j) {
                std::string sj = std::to_string(k) + ":b" + std::to_string(j);
                add("e1y+:" + sj, bp - h1l.partial(k), branches[j]);
                add("e1y-:" + sj, h1l.partial(k) - bm, branches[j]);
                add("e1x+:" + sj, e1l[k] + Ak - bp, branches[j]);
                add("e1x-:" + sj, e1l[k] - Ak + bm, branches[j]);
                add("e3+:" + sj, e3l[k] - Bk, branches[j]);
                add("e3-:" + sj, e3l[k] + Bk, branches[j]);
            }
        }
    } else {
        std::vector<SemialgebraicSet> xparts, yparts;
        for (const auto& b : branches) {
            xparts.push_back(b.rename_vars(2 * n, ident_map(n)));
            yparts.push_back(b.rename_vars(2 * n, shift_map(n)));
        }
        for (int k = 0; k < n; ++k) {
            LinPoly Gk = zero_lin(2 * n);
            for (int i = 0; i < n; ++i)
                Gk = Gk + h0l.partial(i).rename_vars(2 * n, ident_map(n)).mul(J[i][k]);
            LinPoly Wk = zero_lin(2 * n);
            for (int i = 0; i < n; ++i)
                Wk = Wk + wl.partial(i).rename_vars(2 * n, ident_map(n)).mul(J[i][k]);
            LinPoly h1y = h1l.partial(k).rename_vars(2 * n, shift_map(n));
            for (size_t bi = 0; bi < branches.size(); ++bi) {
                for (size_t bj = 0; bj < branches.size(); ++bj) {
                    SemialgebraicSet dom = xparts[bi].conjoin(yparts[bj]);
                    std::string sj = std::to_string(k) + ":p" + std::to_string(bi) +
                                     std::to_string(bj);
                    LinPoly e1x = e1l[k].rename_vars(2 * n, ident_map(n));
                    LinPoly e3x = e3l[k].rename_vars(2 * n, ident_map(n));
                    add("e1d+:" + sj, e1x - (h1y - Gk), dom);
                    add("e1d-:" + sj, e1x + (h1y - Gk), dom);
                    add("e3d+:" + sj, e3x - Wk, dom);
                    add("e3d-:" + sj, e3x + Wk, dom);
                }
            }
        }
    }

    // e2 dominates |dh1/dx| componentwise on every branch
    for (int k = 0; k < n; ++k) {
        for (size_t j = 0; j < branches.size(); ++j) {
            std::string sj = std::to_string(k) + ":b" + std::to_string(j);
            add("e2+:" + sj, e2l[k] - h1l.partial(k), branches[j]);
            add("e2-:" + sj, e2l[k] + h1l.partial(k), branches[j]);
        }
    }

    // normalization: the functional takes value -1 at the anchor point,
    // ruling out the all-zero certificate
    prog.add_point_row(h0l + h1l * tau, anchor, -1.0, "anchor");

    auto sol = sdp_solve(prog.sdp);
    Attempt out;
    if (sol.status == SolveStatus::Infeasible) {
        out.status = RaStatus::Infeasible;
        out.detail = "main program infeasible: " + sol.detail;
        return out;
    }
    if (sol.status == SolveStatus::NumericalFailure) {
        out.status = RaStatus::NumericalFailure;
        out.detail = "main program: " + sol.detail;
        return out;
    }

    RabfCertificate cert;
    cert.tau = tau;
    cert.safe = q.safe;
    cert.domain = branches.size() == 1 ? branches[0] : q.safe;
    cert.c_bound = cb;
    cert.h0 = h0l.instantiate(sol.scalars);
    cert.h1 = h1l.instantiate(sol.scalars);
    cert.w = wl.instantiate(sol.scalars);
    for (int k = 0; k < n; ++k) {
        cert.e1.entries.push_back(e1l[k].instantiate(sol.scalars));
        cert.e2.entries.push_back(
            Polynomial::constant(n, sol.scalars[e2_ids[k]]));
        cert.e3.entries.push_back(e3l[k].instantiate(sol.scalars));
    }
    cert.sos_witnesses = fb.witnesses;
    cert.witness_labels = fb.labels;
    for (size_t i = 0; i < prog.lowered.size(); ++i) {
        auto wcert = extract_certificate(prog, i, sol);
        auto rep = verify(wcert, prog.lowered[i].c, q.verify_samples);
        if (!rep.pass) {
            out.status = RaStatus::VerificationFailure;
            out.detail = "witness " + prog.lowered[i].c.label + ": " + rep.fail_reason;
            return out;
        }
        cert.sos_witnesses.push_back(std::move(wcert));
        cert.witness_labels.push_back(prog.lowered[i].c.label);
    }

    // strictness margin scaled by the magnitude of h0 over the safe set
    double sup = 0.0;
    if (auto bb = bounding_box(q.safe)) {
        for_each_grid_point(*bb, default_grid_points(n),
                            [&](const std::vector<double>& p) {
                                if (q.safe.contains(p, 1e-9))
                                    sup = std::max(sup, std::fabs(cert.h0.eval(p)));
                            });
    }
    cert.margin = 1e-6 * (1.0 + sup);

    out.status = RaStatus::Valid;
    out.cert = std::move(cert);
    return out;
}

}  // namespace

RaResult synthesize_rabf(const RaQuery& q) {
    RaResult res;
    const int n = q.vf.n;
    if (q.safe.nvars != n || q.target.nvars != n)
        throw std::invalid_argument("synthesize_rabf: dimension mismatch");
    if (q.vf.delay <= 0.0)
        throw std::invalid_argument("synthesize_rabf: delay must be positive");

    auto branches = closure_difference_branches(q.safe, q.target);

    auto bb = bounding_box(q.safe);
    if (!bb) {
        res.status = RaStatus::Infeasible;
        res.detail = "safe set contains no grid point";
        return res;
    }
    auto anchor = deepest_point(q.safe, q.target, *bb);
    if (!anchor) {
        res.status = RaStatus::Infeasible;
        res.detail = "target has no interior point inside the safe set";
        return res;
    }

    Phase0 fb = solve_field_bound(q.vf, branches, q.verify_samples);
    if (fb.status != RaStatus::Valid) {
        res.status = fb.status;
        res.detail = fb.detail;
        return res;
    }

    std::vector<DegreeConfig> ladder = q.degrees;
    if (ladder.empty()) ladder = {{4, 4, 4}, {6, 6, 4}, {6, 6, 6}};

    for (const auto& deg : ladder) {
        Attempt at = attempt_degrees(q, deg, branches, *anchor, fb);
        res.used_degrees = deg;
        res.detail = at.detail;
        if (at.status == RaStatus::Valid) {
            res.status = RaStatus::Valid;
            res.cert = std::move(at.cert);

            // spot-check the frozen field bound over sampled domain pairs
            auto dbb = bounding_box(res.cert->domain);
            if (dbb && 2 * n <= 8) {
                Box dbl;
                dbl.lo = dbb->lo;
                dbl.hi = dbb->hi;
                dbl.lo.insert(dbl.lo.end(), dbb->lo.begin(), dbb->lo.end());
                dbl.hi.insert(dbl.hi.end(), dbb->hi.begin(), dbb->hi.end());
                double slack = 1e-6;
                for (double c : res.cert->c_bound) slack = std::max(slack, 1e-9 * std::fabs(c));
                int checked = 0;
                for (const auto& pt : halton_points(dbl, 20000)) {
                    std::vector<double> x(pt.begin(), pt.begin() + n);
                    std::vector<double> y(pt.begin() + n, pt.end());
                    if (!res.cert->domain.contains(x, 1e-9) ||
                        !res.cert->domain.contains(y, 1e-9))
                        continue;
                    ++checked;
                    auto fv = q.vf.eval(x, y);
                    for (int k = 0; k < n; ++k) {
                        if (std::fabs(fv[k]) > res.cert->c_bound[k] + slack) {
                            res.status = RaStatus::VerificationFailure;
                            res.detail = "field bound violated at a sampled pair";
                            res.cert.reset();
                            return res;
                        }
                    }
                    if (checked >= 10000) break;
                }
            }

            res.member = find_member(*res.cert);
            return res;
        }
        if (at.status == RaStatus::VerificationFailure) {
            res.status = at.status;
            return res;
        }
        res.status = at.status;  // infeasible or numerical: climb the ladder
    }
    return res;
}

bool membership_constant(const RabfCertificate& cert,
                         const std::vector<double>& point) {
    if (static_cast<int>(point.size()) != cert.safe.nvars)
        throw std::invalid_argument("membership_constant: dimension mismatch");
    double H = cert.h0.eval(point) + cert.tau * cert.h1.eval(point);
    return H <= -cert.margin && cert.safe.contains(point, 1e-9);
}

bool membership_function(const RabfCertificate& cert,
                         const std::function<std::vector<double>(double)>& history,
                         int quadrature_nodes) {
    if (quadrature_nodes < 1)
        throw std::invalid_argument("membership_function: need at least one interval");
    const int N = quadrature_nodes;
    const double tau = cert.tau;
    std::vector<double> g(N + 1);
    std::vector<double> last;
    for (int j = 0; j <= N; ++j) {
        double theta = -tau + tau * j / N;
        std::vector<double> v = history(theta);
        if (!cert.safe.contains(v, 1e-9))
            throw std::domain_error("membership_function: history sample outside safe set");
        g[j] = cert.h1.eval(v);
        if (j == N) last = std::move(v);
    }
    double integral = 0.0;
    for (int j = 0; j <= N; ++j)
        integral += (j == 0 || j == N) ? 0.5 * g[j] : g[j];
    integral *= tau / N;
    double curv = 0.0;
    for (int j = 1; j < N; ++j)
        curv = std::max(curv, std::fabs(g[j - 1] - 2 * g[j] + g[j + 1]));
    double err = tau / 12.0 * curv;
    double H = cert.h0.eval(last) + integral;
    return H < -(cert.margin + err);
}

std::optional<std::vector<double>> find_member(const RabfCertificate& cert) {
    auto bb = bounding_box(cert.safe);
    if (!bb) return std::nullopt;
    std::optional<std::vector<double>> hit;
    for_each_grid_point(*bb, default_grid_points(cert.safe.nvars),
                        [&](const std::vector<double>& p) {
                            if (!hit && membership_constant(cert, p)) hit = p;
                        });
    return hit;
}

nlohmann::json set_to_json(const SemialgebraicSet& s,
                           const std::vector<std::string>& names) {
    nlohmann::json out;
    out["nvars"] = s.nvars;
    out["constraints"] = nlohmann::json::array();
    for (const auto& sc : s.constraints)
        out["constraints"].push_back(
            {{"poly", sc.p.to_string(names)}, {"rel", rel_to_string(sc.rel)}});
    return out;
}

SemialgebraicSet set_from_json(const nlohmann::json& j,
                               const std::vector<std::string>& names) {
    SemialgebraicSet s = SemialgebraicSet::full_space(j.at("nvars").get<int>());
    for (const auto& c : j.at("constraints"))
        s.constraints.push_back({Polynomial::parse(c.at("poly").get<std::string>(), names),
                                 rel_from_string(c.at("rel").get<std::string>())});
    return s;
}

namespace {

std::vector<std::string> canonical_names(int n) {
    std::vector<std::string> names;
    for (int i = 0; i < n; ++i) names.push_back("x" + std::to_string(i + 1));
    return names;
}

nlohmann::json witness_to_json(const SosCertificate& w,
                               const std::vector<std::string>& names) {
    nlohmann::json out;
    out["target"] = w.target.to_string(names);
    out["residual"] = w.residual;
    out["ineq_index"] = w.ineq_index;
    out["eq_index"] = w.eq_index;
    out["multipliers"] = nlohmann::json::array();
    for (const auto& m : w.multipliers) out["multipliers"].push_back(m.to_string(names));
    out["eq_multipliers"] = nlohmann::json::array();
    for (const auto& m : w.eq_multipliers)
        out["eq_multipliers"].push_back(m.to_string(names));
    out["grams"] = nlohmann::json::array();
    for (size_t gi = 0; gi < w.grams.size(); ++gi) {
        nlohmann::json g;
        g["dim"] = w.grams[gi].rows();
        g["basis"] = w.gram_bases[gi];
        std::vector<double> data;
        for (int r = 0; r < w.grams[gi].rows(); ++r)
            for (int c = 0; c < w.grams[gi].cols(); ++c) data.push_back(w.grams[gi](r, c));
        g["data"] = data;
        out["grams"].push_back(std::move(g));
    }
    return out;
}

SosCertificate witness_from_json(const nlohmann::json& j,
                                 const std::vector<std::string>& names) {
    SosCertificate w;
    w.target = Polynomial::parse(j.at("target").get<std::string>(), names);
    w.residual = j.at("residual").get<double>();
    w.ineq_index = j.at("ineq_index").get<std::vector<int>>();
    w.eq_index = j.at("eq_index").get<std::vector<int>>();
    for (const auto& m : j.at("multipliers"))
        w.multipliers.push_back(Polynomial::parse(m.get<std::string>(), names));
    for (const auto& m : j.at("eq_multipliers"))
        w.eq_multipliers.push_back(Polynomial::parse(m.get<std::string>(), names));
    for (const auto& g : j.at("grams")) {
        int dim = g.at("dim").get<int>();
        w.gram_bases.push_back(g.at("basis").get<std::vector<Exponents>>());
        Eigen::MatrixXd G(dim, dim);
        const auto& data = g.at("data");
        for (int r = 0; r < dim; ++r)
            for (int c = 0; c < dim; ++c) G(r, c) = data[r * dim + c].get<double>();
        w.grams.push_back(std::move(G));
    }
    return w;
}

}  // namespace

nlohmann::json certificate_to_json(const RabfCertificate& cert) {
    const int n = cert.safe.nvars;
    auto names = canonical_names(n);
    nlohmann::json j;
    j["variables"] = names;
    j["tau"] = cert.tau;
    j["margin"] = cert.margin;
    j["c_bound"] = cert.c_bound;
    j["h0"] = cert.h0.to_string(names);
    j["h1"] = cert.h1.to_string(names);
    j["w"] = cert.w.to_string(names);
    auto vec = [&](const PolyVector& v) {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& p : v.entries) a.push_back(p.to_string(names));
        return a;
    };
    j["e1"] = vec(cert.e1);
    j["e2"] = vec(cert.e2);
    j["e3"] = vec(cert.e3);
    j["safe"] = set_to_json(cert.safe, names);
    j["domain"] = set_to_json(cert.domain, names);
    auto wnames = canonical_names(2 * n);
    j["witnesses"] = nlohmann::json::array();
    for (size_t i = 0; i < cert.sos_witnesses.size(); ++i) {
        const auto& w = cert.sos_witnesses[i];
        // doubled-variable witnesses live in the 2n-variable ring
        const auto& use = (w.target.nvars() == 2 * n) ? wnames : names;
        nlohmann::json wj = witness_to_json(w, use);
        wj["label"] = i < cert.witness_labels.size() ? cert.witness_labels[i] : "";
        wj["nvars"] = w.target.nvars();
        j["witnesses"].push_back(std::move(wj));
    }
    return j;
}

RabfCertificate certificate_from_json(const nlohmann::json& j,
                                      const std::vector<std::string>& var_names) {
    RabfCertificate cert;
    std::vector<std::string> names =
        var_names.empty() ? j.at("variables").get<std::vector<std::string>>()
                          : var_names;
    const int n = static_cast<int>(names.size());
    cert.tau = j.at("tau").get<double>();
    cert.margin = j.at("margin").get<double>();
    cert.c_bound = j.at("c_bound").get<std::vector<double>>();
    cert.h0 = Polynomial::parse(j.at("h0").get<std::string>(), names);
    cert.h1 = Polynomial::parse(j.at("h1").get<std::string>(), names);
    cert.w = Polynomial::parse(j.at("w").get<std::string>(), names);
    for (const auto& p : j.at("e1"))
        cert.e1.entries.push_back(Polynomial::parse(p.get<std::string>(), names));
    for (const auto& p : j.at("e2"))
        cert.e2.entries.push_back(Polynomial::parse(p.get<std::string>(), names));
    for (const auto& p : j.at("e3"))
        cert.e3.entries.push_back(Polynomial::parse(p.get<std::string>(), names));
    cert.safe = set_from_json(j.at("safe"), names);
    cert.domain = set_from_json(j.at("domain"), names);
    auto wnames = canonical_names(2 * n);
    for (const auto& wj : j.at("witnesses")) {
        int wn = wj.at("nvars").get<int>();
        cert.sos_witnesses.push_back(
            witness_from_json(wj, wn == 2 * n ? wnames : names));
        cert.witness_labels.push_back(wj.at("label").get<std::string>());
    }
    return cert;
}

}  // namespace dharc
