#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <set>

#include "dharc/graph.hpp"

using namespace dharc;

namespace {

// hand-built partition shape of the running three-mode example: q1 splits
// into three guard cells, q2 stays bare, q3 has a target submode and one
// guard cell looping back to q1
DiscreteDirectedGraph example_graph() {
    DiscreteDirectedGraph g;
    g.vertices = {"q11", "q12", "q13", "q2", "q30", "q31"};
    g.v0 = {"q11", "q12", "q13"};
    g.vt = {"q30"};
    std::vector<Arc> arcs = {
        {"q11", "q2"},  {"q12", "q30"}, {"q12", "q31"},
        {"q13", "q2"},  {"q13", "q30"}, {"q13", "q31"},
        {"q31", "q11"}, {"q31", "q12"}, {"q31", "q13"},
    };
    for (const auto& a : arcs) {
        g.arcs.push_back(a);
        ArcPayload p;
        p.cell = SemialgebraicSet::full_space(2);
        p.cert_id = g.is_target(a.second) ? a.second : "";
        p.switch_duration = 0.5;
        g.arc_payload[a] = p;
    }
    return g;
}

std::set<Arc> arc_set(const DiscreteDirectedGraph& g) {
    return std::set<Arc>(g.arcs.begin(), g.arcs.end());
}

std::set<std::string> vertex_set(const DiscreteDirectedGraph& g) {
    return std::set<std::string>(g.vertices.begin(), g.vertices.end());
}

// independent fixpoint: rebuild the graph from scratch on every pass
DiscreteDirectedGraph brute_force_sink_prune(DiscreteDirectedGraph g) {
    for (;;) {
        std::set<std::string> doomed;
        for (const auto& v : g.vertices)
            if (!g.is_target(v) && g.out_degree(v) == 0) doomed.insert(v);
        if (doomed.empty()) return g;
        DiscreteDirectedGraph next;
        for (const auto& v : g.vertices)
            if (!doomed.count(v)) next.vertices.push_back(v);
        for (const auto& a : g.arcs)
            if (!doomed.count(a.first) && !doomed.count(a.second)) {
                next.arcs.push_back(a);
                next.arc_payload[a] = g.arc_payload.at(a);
            }
        for (const auto& v : g.v0)
            if (!doomed.count(v)) next.v0.push_back(v);
        next.vt = g.vt;
        g = std::move(next);
    }
}

// exhaustive walk: true iff every maximal path from v ends in a target
bool all_paths_hit_target(const DiscreteDirectedGraph& g, const std::string& v,
                          std::map<std::string, int>& memo) {
    auto it = memo.find(v);
    if (it != memo.end()) return it->second != 0;
    auto succ = g.successors(v);
    bool ok;
    if (succ.empty()) {
        ok = g.is_target(v);
    } else {
        ok = true;
        for (const auto& w : succ)
            if (!all_paths_hit_target(g, w, memo)) ok = false;
    }
    memo[v] = ok ? 1 : 0;
    return ok;
}

bool acyclic(const DiscreteDirectedGraph& g) {
    // Kahn peeling
    std::map<std::string, int> indeg;
    for (const auto& v : g.vertices) indeg[v] = 0;
    for (const auto& a : g.arcs) indeg[a.second]++;
    std::vector<std::string> queue;
    for (const auto& [v, d] : indeg)
        if (d == 0) queue.push_back(v);
    size_t seen = 0;
    while (!queue.empty()) {
        std::string v = queue.back();
        queue.pop_back();
        ++seen;
        for (const auto& a : g.arcs)
            if (a.first == v && --indeg[a.second] == 0) queue.push_back(a.second);
    }
    return seen == g.vertices.size();
}

DiscreteDirectedGraph random_graph(std::mt19937& rng) {
    DiscreteDirectedGraph g;
    std::uniform_int_distribution<int> nv(1, 12);
    int n = nv(rng);
    for (int i = 0; i < n; ++i) {
        char buf[8];
        std::snprintf(buf, sizeof(buf), "v%02d", i);
        g.vertices.push_back(buf);
    }
    std::uniform_int_distribution<int> ntgt(0, 3);
    int t = std::min(ntgt(rng), n);
    std::set<std::string> targets;
    std::uniform_int_distribution<int> pick(0, n - 1);
    while (static_cast<int>(targets.size()) < t)
        targets.insert(g.vertices[pick(rng)]);
    g.vt.assign(targets.begin(), targets.end());

    std::uniform_int_distribution<int> na(0, 30);
    int m = na(rng);
    std::set<Arc> arcs;
    for (int i = 0; i < m; ++i) {
        Arc a{g.vertices[pick(rng)], g.vertices[pick(rng)]};
        if (targets.count(a.first)) continue;  // targets stay sinks
        arcs.insert(a);
    }
    for (const auto& a : arcs) {
        g.arcs.push_back(a);
        ArcPayload p;
        p.cell = SemialgebraicSet::full_space(1);
        g.arc_payload[a] = p;
    }

    for (const auto& v : g.vertices)
        if (pick(rng) % 3 == 0) g.v0.push_back(v);
    return g;
}

}  // namespace

TEST_CASE("graph construction and basic queries", "[graph]") {
    DiscreteDirectedGraph g = example_graph();
    CHECK(g.vertices.size() == 6);
    CHECK(g.arcs.size() == 9);
    CHECK(g.has_vertex("q2"));
    CHECK_FALSE(g.has_vertex("q3"));
    CHECK(g.is_target("q30"));
    CHECK_FALSE(g.is_target("q31"));
    CHECK(g.successors("q31") == std::vector<std::string>{"q11", "q12", "q13"});
    CHECK(g.out_degree("q13") == 3);
    CHECK(g.out_degree("q30") == 0);  // targets have no outgoing arcs

    auto m = g.adjacency_matrix();
    REQUIRE(m.size() == 6);
    int total = 0;
    for (const auto& row : m)
        for (int x : row) total += x;
    CHECK(total == 9);
}

TEST_CASE("sink pruning cascades until fixpoint", "[graph]") {
    DiscreteDirectedGraph g = prune_non_target_sinks(example_graph());

    // q2 is a sink, then q11 loses its only arc and follows it out
    CHECK(vertex_set(g) ==
          std::set<std::string>{"q12", "q13", "q30", "q31"});
    CHECK(arc_set(g) == std::set<Arc>{{"q12", "q30"},
                                      {"q12", "q31"},
                                      {"q13", "q30"},
                                      {"q13", "q31"},
                                      {"q31", "q12"},
                                      {"q31", "q13"}});
    CHECK(g.v0 == std::vector<std::string>{"q12", "q13"});
    CHECK(g.vt == std::vector<std::string>{"q30"});
    CHECK(g.arc_payload.size() == g.arcs.size());

    SECTION("a lone target vertex is untouched") {
        DiscreteDirectedGraph lone;
        lone.vertices = {"t"};
        lone.vt = {"t"};
        DiscreteDirectedGraph out = prune_non_target_sinks(lone);
        CHECK(out.vertices == std::vector<std::string>{"t"});
        CHECK(out.vt == std::vector<std::string>{"t"});
    }
}

TEST_CASE("loop breaking leaves only target-bound arcs", "[graph]") {
    DiscreteDirectedGraph g = prune_graph(example_graph());

    CHECK(arc_set(g) == std::set<Arc>{{"q12", "q30"}, {"q13", "q30"}});
    CHECK(vertex_set(g) == std::set<std::string>{"q12", "q13", "q30"});
    CHECK(g.v0 == std::vector<std::string>{"q12", "q13"});
    CHECK(g.vt == std::vector<std::string>{"q30"});
    CHECK(g.arc_payload.size() == 2);

    SECTION("an already acyclic target-bound graph is unchanged") {
        DiscreteDirectedGraph dag;
        dag.vertices = {"a", "b", "t"};
        dag.v0 = {"a"};
        dag.vt = {"t"};
        dag.arcs = {{"a", "b"}, {"b", "t"}};
        for (const auto& a : dag.arcs) dag.arc_payload[a] = ArcPayload{};
        DiscreteDirectedGraph out = prune_graph(dag);
        CHECK(vertex_set(out) == vertex_set(dag));
        CHECK(arc_set(out) == arc_set(dag));
        CHECK(out.v0 == dag.v0);
    }
}

TEST_CASE("random graphs: sink-prune oracle and path soundness", "[graph]") {
    std::mt19937 rng(20260819);
    for (int trial = 0; trial < 500; ++trial) {
        DiscreteDirectedGraph g = random_graph(rng);

        DiscreteDirectedGraph fast = prune_non_target_sinks(g);
        DiscreteDirectedGraph slow = brute_force_sink_prune(g);
        REQUIRE(vertex_set(fast) == vertex_set(slow));
        REQUIRE(arc_set(fast) == arc_set(slow));
        REQUIRE(fast.v0 == slow.v0);

        DiscreteDirectedGraph pruned = prune_graph(g);
        REQUIRE(acyclic(pruned));
        // no non-target sink survives
        for (const auto& v : pruned.vertices)
            if (!pruned.is_target(v)) REQUIRE(pruned.out_degree(v) > 0);
        // targets are never deleted
        REQUIRE(pruned.vt == g.vt);
        // every maximal path from a surviving initial vertex ends in a target
        std::map<std::string, int> memo;
        for (const auto& v : pruned.v0)
            REQUIRE(all_paths_hit_target(pruned, v, memo));
        REQUIRE(pruned.arc_payload.size() == pruned.arcs.size());
    }
}

TEST_CASE("dot export follows the drawing conventions", "[graph]") {
    std::string dot = graph_to_dot(prune_graph(example_graph()));
    CHECK(dot.find("digraph") != std::string::npos);
    CHECK(dot.find("\"q30\" [shape=doublecircle]") != std::string::npos);
    CHECK(dot.find("\"start_q12\" [shape=none, label=\"\"]") != std::string::npos);
    CHECK(dot.find("\"start_q12\" -> \"q12\"") != std::string::npos);
    CHECK(dot.find("\"q12\" -> \"q30\"") != std::string::npos);
    CHECK(dot.find("\"q13\" -> \"q30\"") != std::string::npos);
}

TEST_CASE("graph json round trip", "[graph]") {
    DiscreteDirectedGraph g = example_graph();
    // give one payload a real cell so polynomial serialization is exercised
    Arc probe{"q12", "q31"};
    g.arc_payload[probe].cell = SemialgebraicSet::full_space(2);
    g.arc_payload[probe].cell.constraints.push_back(
        {Polynomial::parse("x1^2 + x2^2 - 0.25", {"x1", "x2"}), Rel::LE});
    g.arc_payload[probe].cert_id = "q31";

    nlohmann::json j = graph_to_json(g, {"x1", "x2"});
    DiscreteDirectedGraph back = graph_from_json(j);

    CHECK(back.vertices == g.vertices);
    CHECK(back.arcs == g.arcs);
    CHECK(back.v0 == g.v0);
    CHECK(back.vt == g.vt);
    REQUIRE(back.arc_payload.count(probe) == 1);
    const ArcPayload& p = back.arc_payload.at(probe);
    CHECK(p.cert_id == "q31");
    CHECK(p.switch_duration == Catch::Approx(0.5));
    REQUIRE(p.cell.constraints.size() == 1);
    CHECK(p.cell.constraints[0].p.same_terms(
        g.arc_payload.at(probe).cell.constraints[0].p, 1e-12));

    CHECK(graph_to_json(back, {"x1", "x2"}).dump() == j.dump());
}
