#include "dharc/dha.hpp"

#include <algorithm>
#include <atomic>
#include <regex>
#include <thread>

namespace dharc {

const Mode* DelayHybridAutomaton::find_mode(const std::string& id) const {
    for (const auto& m : modes)
        if (m.id == id) return &m;
    return nullptr;
}

std::vector<int> DelayHybridAutomaton::outgoing_edges(const std::string& id) const {
    std::vector<int> out;
    for (size_t i = 0; i < edges.size(); ++i)
        if (edges[i].src == id) out.push_back(static_cast<int>(i));
    return out;
}

const Submode* PartitionResult::find_submode(const std::string& id) const {
    for (const auto& s : submodes)
        if (s.id == id) return &s;
    return nullptr;
}

std::vector<const Submode*> PartitionResult::of_parent(const std::string& parent) const {
    std::vector<const Submode*> out;
    for (const auto& s : submodes)
        if (s.parent == parent) out.push_back(&s);
    return out;
}

// ---- model ingestion -------------------------------------------------------

namespace {

const nlohmann::json& need(const nlohmann::json& j, const char* key,
                           const std::string& ptr) {
    if (!j.is_object() || !j.contains(key))
        throw ModelError(std::string("missing required field '") + key + "'",
                         ptr + "/" + key);
    return j.at(key);
}

std::string need_string(const nlohmann::json& j, const char* key,
                        const std::string& ptr) {
    const auto& v = need(j, key, ptr);
    if (!v.is_string())
        throw ModelError(std::string("field '") + key + "' must be a string",
                         ptr + "/" + key);
    return v.get<std::string>();
}

double need_number(const nlohmann::json& j, const char* key,
                   const std::string& ptr) {
    const auto& v = need(j, key, ptr);
    if (!v.is_number())
        throw ModelError(std::string("field '") + key + "' must be a number",
                         ptr + "/" + key);
    return v.get<double>();
}

Polynomial parse_poly(const std::string& text,
                      const std::vector<std::string>& names,
                      const std::string& ptr) {
    try {
        return Polynomial::parse(text, names);
    } catch (const std::exception& e) {
        throw ModelError(e.what(), ptr);
    }
}

SemialgebraicSet parse_set(const nlohmann::json& j,
                           const std::vector<std::string>& names,
                           const std::string& ptr, int max_constraints,
                           bool allow_eq) {
    const auto& cs = need(j, "constraints", ptr);
    if (!cs.is_array())
        throw ModelError("constraints must be an array", ptr + "/constraints");
    if (cs.empty())
        throw ModelError("set needs at least one constraint", ptr + "/constraints");
    if (max_constraints > 0 && static_cast<int>(cs.size()) > max_constraints)
        throw ModelError("at most " + std::to_string(max_constraints) +
                             " constraints supported here",
                         ptr + "/constraints");
    SemialgebraicSet s = SemialgebraicSet::full_space(static_cast<int>(names.size()));
    for (size_t i = 0; i < cs.size(); ++i) {
        std::string cptr = ptr + "/constraints/" + std::to_string(i);
        Polynomial p = parse_poly(need_string(cs[i], "poly", cptr), names,
                                  cptr + "/poly");
        Rel rel;
        try {
            rel = rel_from_string(need_string(cs[i], "rel", cptr));
        } catch (const std::exception& e) {
            throw ModelError(e.what(), cptr + "/rel");
        }
        if (rel == Rel::EQ && !allow_eq)
            throw ModelError("equality constraints not allowed here",
                             cptr + "/rel");
        s.constraints.push_back({std::move(p), rel});
    }
    return s;
}

Polynomial le_form(const SetConstraint& sc) {
    return (sc.rel == Rel::GE) ? sc.p * -1.0 : sc.p;
}

}  // namespace

DelayHybridAutomaton parse_model(const nlohmann::json& doc) {
    DelayHybridAutomaton h;

    const auto& vars = need(doc, "variables", "");
    if (!vars.is_array() || vars.empty())
        throw ModelError("variables must be a nonempty array", "/variables");
    const std::regex ident("[A-Za-z_][A-Za-z0-9_]*");
    for (size_t i = 0; i < vars.size(); ++i) {
        std::string ptr = "/variables/" + std::to_string(i);
        if (!vars[i].is_string())
            throw ModelError("variable name must be a string", ptr);
        std::string v = vars[i].get<std::string>();
        if (!std::regex_match(v, ident))
            throw ModelError("invalid variable name '" + v + "'", ptr);
        if (std::find(h.variables.begin(), h.variables.end(), v) != h.variables.end())
            throw ModelError("duplicate variable '" + v + "'", ptr);
        h.variables.push_back(std::move(v));
    }
    const int n = static_cast<int>(h.variables.size());
    std::vector<std::string> ring = h.variables;
    for (const auto& v : h.variables) {
        std::string d = v + "_d";
        if (std::find(h.variables.begin(), h.variables.end(), d) != h.variables.end())
            throw ModelError("variable '" + d + "' collides with a delayed name",
                             "/variables");
        ring.push_back(d);
    }

    const auto& modes = need(doc, "modes", "");
    if (!modes.is_array() || modes.empty())
        throw ModelError("modes must be a nonempty array", "/modes");
    for (size_t i = 0; i < modes.size(); ++i) {
        std::string ptr = "/modes/" + std::to_string(i);
        const auto& m = modes[i];
        Mode mode;
        mode.id = need_string(m, "id", ptr);
        if (h.find_mode(mode.id))
            throw ModelError("duplicate mode id '" + mode.id + "'", ptr + "/id");

        double delay = need_number(m, "delay", ptr);
        if (!(delay > 0.0))
            throw ModelError("delay must be positive", ptr + "/delay");

        const auto& dyn = need(m, "dynamics", ptr);
        if (!dyn.is_array() || static_cast<int>(dyn.size()) != n)
            throw ModelError("dynamics must list one polynomial per variable",
                             ptr + "/dynamics");
        mode.vf.n = n;
        mode.vf.delay = delay;
        mode.vf.current_names = h.variables;
        for (const auto& v : h.variables) mode.vf.delayed_names.push_back(v + "_d");
        for (size_t k = 0; k < dyn.size(); ++k) {
            std::string dptr = ptr + "/dynamics/" + std::to_string(k);
            if (!dyn[k].is_string())
                throw ModelError("dynamics entry must be a string", dptr);
            mode.vf.components.entries.push_back(
                parse_poly(dyn[k].get<std::string>(), ring, dptr));
        }

        mode.dom = parse_set(need(m, "dom", ptr), h.variables, ptr + "/dom", 2, true);
        mode.safe = parse_set(need(m, "safe", ptr), h.variables, ptr + "/safe", 0, true);
        mode.target = m.contains("target")
                          ? parse_set(m.at("target"), h.variables, ptr + "/target", 0, true)
                          : SemialgebraicSet::full_space(n);
        if (m.contains("init")) {
            mode.init.kind = InitKind::ExplicitSet;
            mode.init.values =
                parse_set(m.at("init"), h.variables, ptr + "/init", 0, true);
        }
        h.modes.push_back(std::move(mode));
    }

    if (doc.contains("edges")) {
        const auto& edges = doc.at("edges");
        if (!edges.is_array())
            throw ModelError("edges must be an array", "/edges");
        for (size_t i = 0; i < edges.size(); ++i) {
            std::string ptr = "/edges/" + std::to_string(i);
            const auto& e = edges[i];
            Edge edge;
            edge.src = need_string(e, "src", ptr);
            edge.dst = need_string(e, "dst", ptr);
            if (!h.find_mode(edge.src))
                throw ModelError("unknown mode id '" + edge.src + "'", ptr + "/src");
            if (!h.find_mode(edge.dst))
                throw ModelError("unknown mode id '" + edge.dst + "'", ptr + "/dst");
            edge.guard =
                parse_set(need(e, "guard", ptr), h.variables, ptr + "/guard", 2, false);
            edge.switch_duration = need_number(e, "duration", ptr);
            if (edge.switch_duration < 0.0)
                throw ModelError("duration must be nonnegative", ptr + "/duration");
            h.edges.push_back(std::move(edge));
        }
    }
    return h;
}

// ---- guard-cell partition --------------------------------------------------

std::vector<GuardCell> partition_guard_cells(const Mode& mode,
                                             const std::vector<Edge>& outgoing) {
    const int n = mode.vf.n;
    std::vector<GuardCell> cells;
    const int m = static_cast<int>(outgoing.size());
    if (m == 0) return cells;

    std::vector<std::vector<Polynomial>> g_le(m);
    for (int j = 0; j < m; ++j)
        for (const auto& sc : outgoing[j].guard.constraints)
            g_le[j].push_back(le_form(sc));

    for (int mask = 1; mask < (1 << m); ++mask) {
        SemialgebraicSet base = SemialgebraicSet::full_space(n);
        std::vector<int> in_idx, out_idx;
        for (int j = 0; j < m; ++j)
            ((mask >> j) & 1 ? in_idx : out_idx).push_back(j);
        for (int j : in_idx) base = base.conjoin(outgoing[j].guard);

        // one complement branch per excluded guard: branch k keeps the
        // constraints before k and negates k, so branches are disjoint
        std::vector<int> choice(out_idx.size(), 0);
        for (;;) {
            SemialgebraicSet cell = base;
            for (size_t a = 0; a < out_idx.size(); ++a) {
                const auto& ps = g_le[out_idx[a]];
                int k = choice[a];
                for (int l = 0; l < k; ++l) cell.constraints.push_back({ps[l], Rel::LE});
                cell.constraints.push_back({ps[k], Rel::GE});
            }
            if (auto bb = bounding_box(cell)) {
                if (find_grid_point(cell, *bb)) {
                    GuardCell gc;
                    gc.set = std::move(cell);
                    gc.edge_indices = in_idx;
                    for (int j : in_idx) gc.post_modes.push_back(outgoing[j].dst);
                    std::sort(gc.post_modes.begin(), gc.post_modes.end());
                    gc.post_modes.erase(
                        std::unique(gc.post_modes.begin(), gc.post_modes.end()),
                        gc.post_modes.end());
                    cells.push_back(std::move(gc));
                }
            }
            size_t a = 0;
            for (; a < out_idx.size(); ++a) {
                if (++choice[a] < static_cast<int>(g_le[out_idx[a]].size())) break;
                choice[a] = 0;
            }
            if (a == out_idx.size()) break;
        }
    }
    return cells;
}

// ---- mode partition --------------------------------------------------------

namespace {

// grid witness for Init(parent) ∩ RA_in
bool init_intersects(const InitialSet& init, const RabfCertificate& cert) {
    if (init.kind != InitKind::ExplicitSet) return false;
    auto bb = bounding_box(init.values);
    if (!bb) return false;
    bool hit = false;
    for_each_grid_point(*bb, default_grid_points(init.values.nvars),
                        [&](const std::vector<double>& p) {
                            if (!hit && init.values.contains(p, 1e-9) &&
                                membership_constant(cert, p))
                                hit = true;
                        });
    return hit;
}

}  // namespace

PartitionResult mode_partition(const DelayHybridAutomaton& h,
                               const PartitionConfig& cfg) {
    struct Task {
        int mode_idx;
        int cell_idx;  // -1 = target task
        RaQuery q;
    };

    std::vector<std::vector<GuardCell>> cells(h.modes.size());
    std::vector<Task> tasks;
    for (size_t i = 0; i < h.modes.size(); ++i) {
        const Mode& q = h.modes[i];
        SemialgebraicSet safe_eff = q.dom.conjoin(q.safe);
        std::vector<int> eidx = h.outgoing_edges(q.id);
        std::vector<Edge> out;
        for (int e : eidx) out.push_back(h.edges[e]);
        cells[i] = partition_guard_cells(q, out);
        // lift local outgoing positions to original edge indices
        for (auto& c : cells[i])
            for (auto& e : c.edge_indices) e = eidx[e];
        if (!q.target.constraints.empty())
            tasks.push_back({static_cast<int>(i), -1,
                             RaQuery{q.vf, safe_eff, q.target, cfg.degrees,
                                     cfg.verify_samples}});
        for (size_t c = 0; c < cells[i].size(); ++c)
            tasks.push_back({static_cast<int>(i), static_cast<int>(c),
                             RaQuery{q.vf, safe_eff, cells[i][c].set, cfg.degrees,
                                     cfg.verify_samples}});
    }

    std::vector<RaResult> results(tasks.size());
    int jobs = std::max(1, cfg.jobs);
    if (jobs == 1 || tasks.size() <= 1) {
        for (size_t t = 0; t < tasks.size(); ++t)
            results[t] = synthesize_rabf(tasks[t].q);
    } else {
        std::atomic<size_t> next{0};
        auto worker = [&] {
            for (;;) {
                size_t t = next.fetch_add(1);
                if (t >= tasks.size()) return;
                results[t] = synthesize_rabf(tasks[t].q);
            }
        };
        std::vector<std::thread> pool;
        for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
        worker();
        for (auto& th : pool) th.join();
    }

    for (size_t t = 0; t < tasks.size(); ++t) {
        if (results[t].status == RaStatus::VerificationFailure) {
            const Mode& q = h.modes[tasks[t].mode_idx];
            throw VerificationError("certificate verification failed in mode " +
                                    q.id + ": " + results[t].detail);
        }
    }

    PartitionResult out;
    auto task_result = [&](int mode_idx, int cell_idx) -> const RaResult* {
        for (size_t t = 0; t < tasks.size(); ++t)
            if (tasks[t].mode_idx == mode_idx && tasks[t].cell_idx == cell_idx)
                return &results[t];
        return nullptr;
    };

    for (size_t i = 0; i < h.modes.size(); ++i) {
        const Mode& q = h.modes[i];
        size_t before = out.submodes.size();

        if (const RaResult* r = task_result(static_cast<int>(i), -1)) {
            if (r->status == RaStatus::Valid && r->member) {
                Submode s;
                s.id = q.id + "0";
                s.parent = q.id;
                s.index = 0;
                s.cell = SemialgebraicSet::full_space(q.vf.n);
                s.target = q.target;
                s.has_cert = true;
                s.cert = *r->cert;
                s.init_nonempty = init_intersects(q.init, s.cert);
                out.submodes.push_back(std::move(s));
            }
        }
        for (size_t c = 0; c < cells[i].size(); ++c) {
            const RaResult* r = task_result(static_cast<int>(i), static_cast<int>(c));
            if (!r || r->status != RaStatus::Valid || !r->member) continue;
            Submode s;
            s.id = q.id + std::to_string(c + 1);
            s.parent = q.id;
            s.index = static_cast<int>(c + 1);
            s.cell = cells[i][c].set;
            s.target = SemialgebraicSet::full_space(q.vf.n);
            s.post_modes = cells[i][c].post_modes;
            s.edge_indices = cells[i][c].edge_indices;
            s.has_cert = true;
            s.cert = *r->cert;
            s.init_nonempty = init_intersects(q.init, s.cert);
            out.submodes.push_back(std::move(s));
        }

        if (out.submodes.size() == before) {
            bool incoming = false;
            for (const auto& e : h.edges)
                if (e.dst == q.id) incoming = true;
            if (incoming) {
                Submode s;
                s.id = q.id;
                s.parent = q.id;
                s.index = -1;
                s.cell = SemialgebraicSet::full_space(q.vf.n);
                s.target = SemialgebraicSet::full_space(q.vf.n);
                out.submodes.push_back(std::move(s));
            }
        }
    }

    for (const Submode& s : out.submodes) {
        if (s.index < 1) continue;  // only guard submodes jump
        for (const std::string& k : s.post_modes) {
            double dur = 0.0;
            for (const auto& e : h.edges)
                if (e.src == s.parent && e.dst == k) {
                    dur = e.switch_duration;
                    break;
                }
            for (const Submode& t : out.submodes) {
                if (t.parent != k) continue;
                out.edges.push_back(
                    {s.id, t.id, s.cell, dur, t.has_cert ? t.id : std::string()});
            }
        }
    }

    for (const Submode& s : out.submodes) out.provenance[s.id] = s.parent;
    for (size_t i = 0; i < h.modes.size(); ++i)
        out.cells[h.modes[i].id] = std::move(cells[i]);
    return out;
}

}  // namespace dharc
