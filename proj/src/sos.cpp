#include "dharc/sos.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>

namespace dharc {

LinPoly LinPoly::from_poly(Polynomial p) {
    LinPoly out;
    out.nvars = p.nvars();
    out.constant = std::move(p);
    return out;
}

int LinPoly::degree() const {
    int d = constant.degree();
    for (const auto& [v, p] : coeff) d = std::max(d, p.degree());
    return d;
}

LinPoly LinPoly::operator+(const LinPoly& o) const {
    LinPoly out = *this;
    out.constant = out.constant + o.constant;
    for (const auto& [v, p] : o.coeff) {
        auto it = out.coeff.find(v);
        if (it == out.coeff.end()) {
            out.coeff.emplace(v, p);
        } else {
            it->second = it->second + p;
        }
    }
    return out;
}

LinPoly LinPoly::operator-(const LinPoly& o) const { return *this + o * -1.0; }

LinPoly LinPoly::operator*(double s) const {
    LinPoly out = *this;
    out.constant = out.constant * s;
    for (auto& [v, p] : out.coeff) p = p * s;
    return out;
}

LinPoly LinPoly::mul(const Polynomial& p) const {
    LinPoly out;
    out.nvars = nvars;
    out.constant = constant * p;
    for (const auto& [v, q] : coeff) out.coeff.emplace(v, q * p);
    return out;
}

LinPoly LinPoly::partial(int var_index) const {
    LinPoly out;
    out.nvars = nvars;
    out.constant = constant.partial(var_index);
    for (const auto& [v, p] : coeff) {
        Polynomial d = p.partial(var_index);
        if (!d.is_zero()) out.coeff.emplace(v, std::move(d));
    }
    return out;
}

LinPoly LinPoly::rename_vars(int new_nvars, const std::vector<int>& var_map) const {
    LinPoly out;
    out.nvars = new_nvars;
    out.constant = constant.rename_vars(new_nvars, var_map);
    for (const auto& [v, p] : coeff)
        out.coeff.emplace(v, p.rename_vars(new_nvars, var_map));
    return out;
}

LinPoly LinPoly::substitute(const std::vector<Polynomial>& images) const {
    LinPoly out;
    out.nvars = images.empty() ? 0 : images.front().nvars();
    out.constant = constant.substitute(images);
    for (const auto& [v, p] : coeff) out.coeff.emplace(v, p.substitute(images));
    return out;
}

Polynomial LinPoly::instantiate(const std::vector<double>& assignment) const {
    Polynomial out = constant;
    for (const auto& [v, p] : coeff) {
        if (v < 0 || v >= static_cast<int>(assignment.size()))
            throw std::runtime_error("LinPoly::instantiate: assignment too short");
        out = out + p * assignment[v];
    }
    return out;
}

std::vector<Exponents> monomials_up_to(int nvars, int degree) {
    std::vector<Exponents> out;
    Exponents cur(nvars, 0);
    // graded enumeration: degree 0, 1, ... each level in lexicographic order
    for (int d = 0; d <= degree; ++d) {
        std::function<void(int, int)> rec = [&](int pos, int left) {
            if (pos == nvars - 1) {
                cur[pos] = static_cast<uint32_t>(left);
                out.push_back(cur);
                return;
            }
            for (int take = left; take >= 0; --take) {
                cur[pos] = static_cast<uint32_t>(take);
                rec(pos + 1, left - take);
            }
        };
        if (nvars == 0) {
            if (d == 0) out.push_back(cur);
            continue;
        }
        rec(0, d);
    }
    return out;
}

PolyTemplate make_poly_template(DecisionVars& pool, const std::string& prefix,
                                int nvars, int degree) {
    PolyTemplate t;
    t.nvars = nvars;
    t.basis = monomials_up_to(nvars, degree);
    t.coeff_ids.reserve(t.basis.size());
    for (const auto& e : t.basis) {
        std::string name = prefix + "[";
        for (int i = 0; i < nvars; ++i) {
            if (i) name += ",";
            name += std::to_string(e[i]);
        }
        name += "]";
        t.coeff_ids.push_back(pool.add(name));
    }
    return t;
}

LinPoly PolyTemplate::as_linpoly() const {
    LinPoly out;
    out.nvars = nvars;
    out.constant = Polynomial::constant(nvars, 0.0);
    for (size_t i = 0; i < basis.size(); ++i)
        out.coeff.emplace(coeff_ids[i], Polynomial::monomial(nvars, basis[i], 1.0));
    return out;
}

namespace {

int even_ceil(int d) { return (d % 2 == 0) ? d : d + 1; }
int even_floor(int d) { return (d % 2 == 0) ? d : d - 1; }

std::string monomial_name(const Exponents& e) {
    std::string s;
    for (size_t i = 0; i < e.size(); ++i) {
        if (e[i] == 0) continue;
        if (!s.empty()) s += "*";
        s += "x" + std::to_string(i + 1);
        if (e[i] > 1) s += "^" + std::to_string(e[i]);
    }
    return s.empty() ? "1" : s;
}

Exponents add_exp(const Exponents& a, const Exponents& b) {
    Exponents r(a.size());
    for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
    return r;
}

struct RowAccum {
    std::vector<SdpProblem::MatEntry> mat;
    std::vector<SdpProblem::ScalEntry> lin;
    double rhs = 0.0;
};

}  // namespace

void SosProgram::add_sos(const SosConstraint& c) {
    const int n = c.target.nvars;
    int target_deg = c.target.degree();
    const int D = c.sigma0_degree > 0 ? even_ceil(c.sigma0_degree)
                                      : even_ceil(target_deg);
    // every monomial of the target must be expressible at degree D
    auto check_support = [&](const Polynomial& p) {
        for (const auto& [e, coef] : p.terms()) {
            int d = 0;
            for (auto x : e) d += static_cast<int>(x);
            if (d > D)
                throw DegreeOverflow("constraint '" + c.label + "': monomial " +
                                     monomial_name(e) + " of degree " +
                                     std::to_string(d) +
                                     " exceeds certificate degree " +
                                     std::to_string(D));
        }
    };
    check_support(c.target.constant);
    for (const auto& [v, p] : c.target.coeff) check_support(p);

    LoweredConstraint lc;
    lc.c = c;

    std::map<Exponents, RowAccum> rows;

    // sigma0 Gram block
    lc.sigma0_basis = monomials_up_to(n, D / 2);
    lc.sigma0_block = sdp.add_block(static_cast<int>(lc.sigma0_basis.size()),
                                    c.label + ":sigma0");
    for (size_t p = 0; p < lc.sigma0_basis.size(); ++p) {
        for (size_t q = p; q < lc.sigma0_basis.size(); ++q) {
            Exponents m = add_exp(lc.sigma0_basis[p], lc.sigma0_basis[q]);
            rows[m].mat.push_back({lc.sigma0_block, static_cast<int>(p),
                                   static_cast<int>(q), p == q ? 1.0 : 2.0});
        }
    }

    // domain multipliers
    for (size_t gi = 0; gi < c.domain.constraints.size(); ++gi) {
        const auto& sc = c.domain.constraints[gi];
        if (sc.rel == Rel::EQ) {
            int dl = D - sc.p.degree();
            if (dl < 0) continue;
            auto basis = monomials_up_to(n, dl);
            std::vector<int> ids;
            ids.reserve(basis.size());
            for (size_t l = 0; l < basis.size(); ++l) {
                int v = vars.add(c.label + ":lam" + std::to_string(gi) + "[" +
                                 std::to_string(l) + "]");
                sdp.add_scalar(vars.names[v]);
                ids.push_back(v);
                for (const auto& [eh, ch] : sc.p.terms())
                    rows[add_exp(basis[l], eh)].lin.push_back({v, ch});
            }
            lc.eq_index.push_back(static_cast<int>(gi));
            lc.eq_var_ids.push_back(std::move(ids));
            lc.eq_basis.push_back(std::move(basis));
            continue;
        }
        // inequality: bring to g >= 0 form
        Polynomial g = (sc.rel == Rel::GE) ? sc.p : sc.p * -1.0;
        int dg = g.degree();
        int di = std::min(c.multiplier_degree, D - dg);
        di = even_floor(di);
        if (di < 0) continue;
        auto basis = monomials_up_to(n, di / 2);
        int blk = sdp.add_block(static_cast<int>(basis.size()),
                                c.label + ":sigma" + std::to_string(gi + 1));
        for (size_t p = 0; p < basis.size(); ++p) {
            for (size_t q = p; q < basis.size(); ++q) {
                double w = (p == q) ? 1.0 : 2.0;
                Exponents pq = add_exp(basis[p], basis[q]);
                for (const auto& [eg, cg] : g.terms())
                    rows[add_exp(pq, eg)].mat.push_back(
                        {blk, static_cast<int>(p), static_cast<int>(q), w * cg});
            }
        }
        lc.ineq_index.push_back(static_cast<int>(gi));
        lc.ineq_block.push_back(blk);
        lc.ineq_basis.push_back(std::move(basis));
    }

    // target side: sigma0 + sum sigma_i g_i + sum lam_j h_j - sum u_v P_v = const
    for (const auto& [e, coef] : c.target.constant.terms()) rows[e].rhs += coef;
    for (const auto& [v, p] : c.target.coeff) {
        for (const auto& [e, coef] : p.terms())
            rows[e].lin.push_back({v, -coef});
    }

    for (auto& [e, acc] : rows) {
        SdpProblem::Row row;
        row.mat = std::move(acc.mat);
        row.lin = std::move(acc.lin);
        row.rhs = acc.rhs;
        row.label = c.label + ":" + monomial_name(e);
        sdp.rows.push_back(std::move(row));
    }

    lowered.push_back(std::move(lc));
}

void SosProgram::add_point_row(const LinPoly& expr,
                               const std::vector<double>& point, double rhs,
                               const std::string& label) {
    SdpProblem::Row row;
    row.rhs = rhs - expr.constant.eval(point);
    for (const auto& [v, p] : expr.coeff) {
        double c = p.eval(point);
        if (c != 0.0) row.lin.push_back({v, c});
    }
    row.label = label;
    sdp.rows.push_back(std::move(row));
}

SosCertificate extract_certificate(const SosProgram& prog, size_t index,
                                   const SdpSolution& sol) {
    const LoweredConstraint& lc = prog.lowered.at(index);
    const int n = lc.c.target.nvars;
    SosCertificate cert;
    cert.target = lc.c.target.instantiate(sol.scalars);

    auto gram_poly = [&](const Eigen::MatrixXd& X,
                         const std::vector<Exponents>& basis) {
        Polynomial out = Polynomial::constant(n, 0.0);
        for (int p = 0; p < X.rows(); ++p) {
            for (int q = 0; q < X.cols(); ++q) {
                if (X(p, q) == 0.0) continue;
                out.add_term(add_exp(basis[p], basis[q]), X(p, q));
            }
        }
        return out;
    };

    cert.grams.push_back(sol.blocks.at(lc.sigma0_block));
    cert.gram_bases.push_back(lc.sigma0_basis);
    cert.multipliers.push_back(gram_poly(cert.grams[0], lc.sigma0_basis));
    for (size_t k = 0; k < lc.ineq_block.size(); ++k) {
        cert.grams.push_back(sol.blocks.at(lc.ineq_block[k]));
        cert.gram_bases.push_back(lc.ineq_basis[k]);
        cert.multipliers.push_back(gram_poly(cert.grams.back(), lc.ineq_basis[k]));
        cert.ineq_index.push_back(lc.ineq_index[k]);
    }
    for (size_t k = 0; k < lc.eq_var_ids.size(); ++k) {
        Polynomial lam = Polynomial::constant(n, 0.0);
        for (size_t l = 0; l < lc.eq_var_ids[k].size(); ++l)
            lam.add_term(lc.eq_basis[k][l], sol.scalars.at(lc.eq_var_ids[k][l]));
        cert.eq_multipliers.push_back(std::move(lam));
        cert.eq_index.push_back(lc.eq_index[k]);
    }

    // coefficient residual of the Putinar identity
    Polynomial recon = cert.multipliers[0];
    for (size_t k = 0; k < lc.ineq_block.size(); ++k) {
        const auto& sc = lc.c.domain.constraints[lc.ineq_index[k]];
        Polynomial g = (sc.rel == Rel::GE) ? sc.p : sc.p * -1.0;
        recon = recon + cert.multipliers[k + 1] * g;
    }
    for (size_t k = 0; k < lc.eq_var_ids.size(); ++k)
        recon = recon + cert.eq_multipliers[k] * lc.c.domain.constraints[lc.eq_index[k]].p;
    cert.residual = (cert.target - recon).max_abs_coefficient();
    return cert;
}

std::vector<std::vector<double>> halton_points(const Box& box, int count,
                                               int skip) {
    static const int primes[] = {2, 3, 5, 7, 11, 13, 17, 19};
    const int n = static_cast<int>(box.lo.size());
    if (n > 8) throw std::runtime_error("halton_points: dimension > 8");
    std::vector<std::vector<double>> pts;
    pts.reserve(count);
    for (int idx = skip + 1; idx <= skip + count; ++idx) {
        std::vector<double> p(n);
        for (int d = 0; d < n; ++d) {
            // radical inverse of idx in base primes[d]
            double f = 1.0, r = 0.0;
            int i = idx;
            while (i > 0) {
                f /= primes[d];
                r += f * (i % primes[d]);
                i /= primes[d];
            }
            p[d] = box.lo[d] + r * (box.hi[d] - box.lo[d]);
        }
        pts.push_back(std::move(p));
    }
    return pts;
}

VerificationReport verify(const SosCertificate& cert, const SosConstraint& c,
                          int samples) {
    VerificationReport rep;
    rep.scale = std::max(1.0, cert.target.max_abs_coefficient());

    // recompute the identity residual from scratch, deriving each SOS
    // multiplier from its Gram matrix so the identity and the eigenvalue
    // check certify the same object
    const int n = c.target.nvars;
    auto gram_poly = [&](const Eigen::MatrixXd& X,
                         const std::vector<Exponents>& basis) {
        Polynomial out = Polynomial::constant(n, 0.0);
        for (int p = 0; p < X.rows(); ++p) {
            for (int q = 0; q < X.cols(); ++q) {
                if (X(p, q) == 0.0) continue;
                Exponents e(basis[p].size());
                for (size_t t = 0; t < e.size(); ++t) e[t] = basis[p][t] + basis[q][t];
                out.add_term(e, X(p, q));
            }
        }
        return out;
    };
    Polynomial recon = gram_poly(cert.grams.at(0), cert.gram_bases.at(0));
    for (size_t k = 0; k + 1 < cert.grams.size(); ++k) {
        const auto& sc = c.domain.constraints.at(cert.ineq_index.at(k));
        Polynomial g = (sc.rel == Rel::GE) ? sc.p : sc.p * -1.0;
        recon = recon + gram_poly(cert.grams[k + 1], cert.gram_bases[k + 1]) * g;
    }
    for (size_t k = 0; k < cert.eq_multipliers.size(); ++k) {
        const auto& sc = c.domain.constraints.at(cert.eq_index.at(k));
        recon = recon + cert.eq_multipliers[k] * sc.p;
    }
    rep.residual = (cert.target - recon).max_abs_coefficient();
    if (rep.residual > 1e-6 * rep.scale) {
        rep.fail_reason = "identity residual " + std::to_string(rep.residual) +
                          " exceeds tolerance";
        return rep;
    }

    rep.min_gram_eigenvalue = 0.0;
    for (const auto& G : cert.grams) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
        if (es.info() != Eigen::Success)
            throw std::runtime_error("verify: eigenvalue solve failed");
        rep.min_gram_eigenvalue =
            std::min(rep.min_gram_eigenvalue, es.eigenvalues().minCoeff());
    }
    if (rep.min_gram_eigenvalue < -1e-7) {
        rep.fail_reason = "Gram matrix eigenvalue " +
                          std::to_string(rep.min_gram_eigenvalue) + " below -1e-7";
        return rep;
    }

    // quasi-random sampling of the target over the domain
    rep.sampled_min = 0.0;
    auto bbox = bounding_box(c.domain);
    if (bbox) {
        double best = 1e300;
        int found = 0;
        int attempts = 0;
        int skip = 0;
        const int batch = std::max(64, samples);
        while (found < samples && attempts < 50 * samples) {
            auto pts = halton_points(*bbox, batch, skip);
            skip += batch;
            for (const auto& p : pts) {
                ++attempts;
                if (!c.domain.contains(p, 1e-9)) continue;
                ++found;
                best = std::min(best, cert.target.eval(p));
                if (found >= samples) break;
            }
        }
        rep.samples_used = found;
        rep.sampled_min = (found > 0) ? best : 0.0;
        if (found > 0 && rep.sampled_min < -1e-6 * rep.scale) {
            rep.fail_reason = "target attains " + std::to_string(rep.sampled_min) +
                              " on a domain sample";
            return rep;
        }
    }

    rep.pass = true;
    return rep;
}

std::string sdp_to_text(const SdpProblem& p) {
    std::ostringstream os;
    auto blabel = [&](int i) {
        if (i < static_cast<int>(p.block_labels.size()) &&
            !p.block_labels[i].empty())
            return p.block_labels[i];
        return std::string("b") + std::to_string(i);
    };
    auto slabel = [&](int i) {
        if (i < static_cast<int>(p.scalar_labels.size()) &&
            !p.scalar_labels[i].empty())
            return p.scalar_labels[i];
        return std::string("s") + std::to_string(i);
    };
    for (size_t i = 0; i < p.block_dims.size(); ++i)
        os << "block " << blabel(static_cast<int>(i)) << " " << p.block_dims[i]
           << "\n";
    for (size_t i = 0; i < p.scalar_labels.size(); ++i) {
        os << "scalar " << slabel(static_cast<int>(i));
        if (p.scalar_nonneg[i]) os << " nonneg";
        os << "\n";
    }
    for (const auto& [v, c] : p.objective)
        os << "obj scalar " << slabel(v) << " " << format_double(c) << "\n";
    os << "obj trace " << format_double(p.trace_weight) << "\n";
    for (size_t r = 0; r < p.rows.size(); ++r) {
        std::string id = p.rows[r].label.empty() ? "r" + std::to_string(r)
                                                 : p.rows[r].label;
        // ids with spaces would break the token format
        for (auto& ch : id)
            if (ch == ' ' || ch == '\t') ch = '_';
        os << "row " << id << " rhs " << format_double(p.rows[r].rhs) << "\n";
        for (const auto& e : p.rows[r].mat)
            os << "row " << id << " mat " << blabel(e.block) << " " << e.i << " "
               << e.j << " " << format_double(e.coef) << "\n";
        for (const auto& e : p.rows[r].lin)
            os << "row " << id << " scalar " << slabel(e.var) << " "
               << format_double(e.coef) << "\n";
    }
    return os.str();
}

SdpProblem sdp_from_text(const std::string& text) {
    SdpProblem p;
    std::map<std::string, int> blocks, scalars, rows;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    auto fail = [&](const std::string& why) {
        throw std::runtime_error("sdp_from_text: line " + std::to_string(lineno) +
                                 ": " + why);
    };
    while (std::getline(is, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::vector<std::string> tok;
        std::string t;
        while (ls >> t) tok.push_back(t);
        if (tok.empty() || tok[0][0] == '#') continue;
        if (tok[0] == "block") {
            if (tok.size() != 3) fail("expected: block <label> <dim>");
            blocks[tok[1]] = p.add_block(std::stoi(tok[2]), tok[1]);
        } else if (tok[0] == "scalar") {
            if (tok.size() < 2 || tok.size() > 3 ||
                (tok.size() == 3 && tok[2] != "nonneg"))
                fail("expected: scalar <label> [nonneg]");
            scalars[tok[1]] = p.add_scalar(tok[1], tok.size() == 3);
        } else if (tok[0] == "obj") {
            if (tok.size() == 4 && tok[1] == "scalar") {
                auto it = scalars.find(tok[2]);
                if (it == scalars.end()) fail("unknown scalar " + tok[2]);
                p.objective.push_back({it->second, std::stod(tok[3])});
            } else if (tok.size() == 3 && tok[1] == "trace") {
                p.trace_weight = std::stod(tok[2]);
            } else {
                fail("expected: obj scalar <label> <coef> | obj trace <weight>");
            }
        } else if (tok[0] == "row") {
            if (tok.size() < 4) fail("truncated row line");
            auto it = rows.find(tok[1]);
            if (it == rows.end()) {
                it = rows.emplace(tok[1], static_cast<int>(p.rows.size())).first;
                p.rows.emplace_back();
                p.rows.back().label = tok[1];
            }
            SdpProblem::Row& row = p.rows[it->second];
            if (tok[2] == "rhs" && tok.size() == 4) {
                row.rhs = std::stod(tok[3]);
            } else if (tok[2] == "mat" && tok.size() == 7) {
                auto bi = blocks.find(tok[3]);
                if (bi == blocks.end()) fail("unknown block " + tok[3]);
                row.mat.push_back({bi->second, std::stoi(tok[4]), std::stoi(tok[5]),
                                   std::stod(tok[6])});
            } else if (tok[2] == "scalar" && tok.size() == 5) {
                auto si = scalars.find(tok[3]);
                if (si == scalars.end()) fail("unknown scalar " + tok[3]);
                row.lin.push_back({si->second, std::stod(tok[4])});
            } else {
                fail("expected: row <id> rhs|mat|scalar ...");
            }
        } else {
            fail("unknown directive '" + tok[0] + "'");
        }
    }
    return p;
}

}  // namespace dharc
