#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dharc/dha.hpp"

namespace dharc {

using Arc = std::pair<std::string, std::string>;

struct ArcPayload {
    SemialgebraicSet cell;  // source submode's guard cell
    std::string cert_id;    // destination certificate ref (empty for bare dst)
    double switch_duration = 0.0;
};

// Discrete view of the partitioned automaton: one vertex per submode, one
// arc per rebuilt edge. v0 holds vertices with a nonempty initial set, vt
// the target submodes. Target vertices never have outgoing arcs.
struct DiscreteDirectedGraph {
    std::vector<std::string> vertices;
    std::vector<Arc> arcs;
    std::vector<std::string> v0;
    std::vector<std::string> vt;
    std::map<Arc, ArcPayload> arc_payload;

    bool has_vertex(const std::string& v) const;
    bool is_target(const std::string& v) const;
    // successors in lexicographic order
    std::vector<std::string> successors(const std::string& v) const;
    int out_degree(const std::string& v) const;
    // dense adjacency counts in vertex-list order
    std::vector<std::vector<int>> adjacency_matrix() const;
};

DiscreteDirectedGraph build_ddg(const PartitionResult& pr);

// Drop every non-target vertex without outgoing arcs, cascading until no
// such sink remains. Incoming arcs and initial-vertex membership go with it.
DiscreteDirectedGraph prune_non_target_sinks(DiscreteDirectedGraph g);

// Break simple loops one arc at a time until no cycle remains, then drop
// non-target sinks. Every maximal path in the result ends in a target.
DiscreteDirectedGraph prune_graph(DiscreteDirectedGraph g);

// DOT rendering: targets as double circles, initial vertices marked by an
// unlabeled stub arrow.
std::string graph_to_dot(const DiscreteDirectedGraph& g);

nlohmann::json graph_to_json(const DiscreteDirectedGraph& g,
                             const std::vector<std::string>& var_names);
DiscreteDirectedGraph graph_from_json(const nlohmann::json& j);

}  // namespace dharc
