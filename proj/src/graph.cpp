#include "dharc/graph.hpp"

#include <algorithm>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>

#include "dharc/reachavoid.hpp"

namespace dharc {

bool DiscreteDirectedGraph::has_vertex(const std::string& v) const {
    return std::find(vertices.begin(), vertices.end(), v) != vertices.end();
}

bool DiscreteDirectedGraph::is_target(const std::string& v) const {
    return std::find(vt.begin(), vt.end(), v) != vt.end();
}

std::vector<std::string> DiscreteDirectedGraph::successors(const std::string& v) const {
    std::vector<std::string> out;
    for (const auto& a : arcs)
        if (a.first == v) out.push_back(a.second);
    std::sort(out.begin(), out.end());
    return out;
}

int DiscreteDirectedGraph::out_degree(const std::string& v) const {
    int d = 0;
    for (const auto& a : arcs)
        if (a.first == v) ++d;
    return d;
}

std::vector<std::vector<int>> DiscreteDirectedGraph::adjacency_matrix() const {
    size_t n = vertices.size();
    std::vector<std::vector<int>> m(n, std::vector<int>(n, 0));
    std::map<std::string, size_t> idx;
    for (size_t i = 0; i < n; ++i) idx[vertices[i]] = i;
    for (const auto& a : arcs) m[idx.at(a.first)][idx.at(a.second)] += 1;
    return m;
}

DiscreteDirectedGraph build_ddg(const PartitionResult& pr) {
    DiscreteDirectedGraph g;
    for (const auto& s : pr.submodes) {
        g.vertices.push_back(s.id);
        if (s.init_nonempty) g.v0.push_back(s.id);
        if (s.index == 0) g.vt.push_back(s.id);
    }
    for (const auto& e : pr.edges) {
        Arc a{e.src, e.dst};
        g.arcs.push_back(a);
        g.arc_payload[a] = ArcPayload{e.guard, e.cert_id, e.switch_duration};
    }
    return g;
}

namespace {

// keep vertex and arc order, drop everything touching a removed vertex
DiscreteDirectedGraph restrict_to(const DiscreteDirectedGraph& g,
                                  const std::set<std::string>& alive) {
    DiscreteDirectedGraph out;
    for (const auto& v : g.vertices)
        if (alive.count(v)) out.vertices.push_back(v);
    for (const auto& a : g.arcs)
        if (alive.count(a.first) && alive.count(a.second)) {
            out.arcs.push_back(a);
            out.arc_payload[a] = g.arc_payload.at(a);
        }
    for (const auto& v : g.v0)
        if (alive.count(v)) out.v0.push_back(v);
    for (const auto& v : g.vt)
        if (alive.count(v)) out.vt.push_back(v);
    return out;
}

// first simple cycle in deterministic order: DFS roots scan the vertices
// lexicographically and neighbors are visited lexicographically; a back arc
// onto the active path closes the cycle
std::vector<std::string> find_simple_cycle(const DiscreteDirectedGraph& g) {
    enum Color { White, Gray, Black };
    std::map<std::string, Color> color;
    for (const auto& v : g.vertices) color[v] = White;

    std::vector<std::string> order = g.vertices;
    std::sort(order.begin(), order.end());

    std::vector<std::string> stack;
    std::vector<std::string> cycle;

    std::function<bool(const std::string&)> dfs = [&](const std::string& v) {
        color[v] = Gray;
        stack.push_back(v);
        for (const auto& w : g.successors(v)) {
            if (color[w] == Gray) {
                auto it = std::find(stack.begin(), stack.end(), w);
                cycle.assign(it, stack.end());
                return true;
            }
            if (color[w] == White && dfs(w)) return true;
        }
        stack.pop_back();
        color[v] = Black;
        return false;
    };

    for (const auto& v : order)
        if (color[v] == White && dfs(v)) return cycle;
    return {};
}

}  // namespace

DiscreteDirectedGraph prune_non_target_sinks(DiscreteDirectedGraph g) {
    auto m = g.adjacency_matrix();
    size_t n = g.vertices.size();
    std::vector<char> alive(n, 1), tgt(n, 0);
    for (size_t i = 0; i < n; ++i)
        if (g.is_target(g.vertices[i])) tgt[i] = 1;

    // removing a sink deletes its incoming arcs, which is what restricting
    // the out-degree sum to live columns expresses
    bool changed = true;
    while (changed) {
        changed = false;
        for (size_t s = 0; s < n; ++s) {
            if (!alive[s] || tgt[s]) continue;
            int outdeg = 0;
            for (size_t j = 0; j < n; ++j)
                if (alive[j]) outdeg += m[s][j];
            if (outdeg == 0) {
                alive[s] = 0;
                changed = true;
            }
        }
    }

    std::set<std::string> keep;
    for (size_t i = 0; i < n; ++i)
        if (alive[i]) keep.insert(g.vertices[i]);
    return restrict_to(g, keep);
}

DiscreteDirectedGraph prune_graph(DiscreteDirectedGraph g) {
    size_t guard = g.arcs.size() + 1;
    while (guard-- > 0) {
        auto cycle = find_simple_cycle(g);
        if (cycle.empty()) break;

        // arcs along the cycle; drop the one leaving the greatest vertex
        size_t k = 0;
        for (size_t i = 1; i < cycle.size(); ++i)
            if (cycle[i] > cycle[k]) k = i;
        Arc doomed{cycle[k], cycle[(k + 1) % cycle.size()]};

        size_t before = g.arcs.size();
        g.arcs.erase(std::remove(g.arcs.begin(), g.arcs.end(), doomed), g.arcs.end());
        g.arc_payload.erase(doomed);
        if (g.arcs.size() >= before)
            throw std::logic_error("loop breaking failed to remove an arc");
    }
    if (!find_simple_cycle(g).empty())
        throw std::logic_error("loop breaking did not terminate");
    return prune_non_target_sinks(std::move(g));
}

std::string graph_to_dot(const DiscreteDirectedGraph& g) {
    std::ostringstream os;
    os << "digraph ddg {\n  rankdir=LR;\n  node [shape=circle];\n";
    for (const auto& v : g.vt)
        os << "  \"" << v << "\" [shape=doublecircle];\n";
    for (const auto& v : g.v0) {
        os << "  \"start_" << v << "\" [shape=none, label=\"\"];\n";
        os << "  \"start_" << v << "\" -> \"" << v << "\";\n";
    }
    for (const auto& v : g.vertices)
        os << "  \"" << v << "\";\n";
    for (const auto& a : g.arcs)
        os << "  \"" << a.first << "\" -> \"" << a.second << "\";\n";
    os << "}\n";
    return os.str();
}

nlohmann::json graph_to_json(const DiscreteDirectedGraph& g,
                             const std::vector<std::string>& var_names) {
    nlohmann::json j;
    j["variables"] = var_names;
    j["vertices"] = g.vertices;
    j["v0"] = g.v0;
    j["vt"] = g.vt;
    j["arcs"] = nlohmann::json::array();
    for (const auto& a : g.arcs) {
        const ArcPayload& p = g.arc_payload.at(a);
        j["arcs"].push_back({{"src", a.first},
                             {"dst", a.second},
                             {"cell", set_to_json(p.cell, var_names)},
                             {"cert", p.cert_id},
                             {"duration", p.switch_duration}});
    }
    return j;
}

DiscreteDirectedGraph graph_from_json(const nlohmann::json& j) {
    std::vector<std::string> names = j.at("variables").get<std::vector<std::string>>();
    DiscreteDirectedGraph g;
    g.vertices = j.at("vertices").get<std::vector<std::string>>();
    g.v0 = j.at("v0").get<std::vector<std::string>>();
    g.vt = j.at("vt").get<std::vector<std::string>>();
    for (const auto& aj : j.at("arcs")) {
        Arc a{aj.at("src").get<std::string>(), aj.at("dst").get<std::string>()};
        g.arcs.push_back(a);
        g.arc_payload[a] = ArcPayload{set_from_json(aj.at("cell"), names),
                                      aj.at("cert").get<std::string>(),
                                      aj.at("duration").get<double>()};
    }
    return g;
}

}  // namespace dharc
