#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "dharc/graph.hpp"

namespace dharc {

// one reset rule: on leaving the domain while inside `cell` during a stay
// in mode src(edge), the controller may re-enter dst(edge) anywhere in the
// union of the listed certificate inner approximations
struct ResetAssignment {
    int edge_index = -1;  // original edge in the automaton
    std::string src, dst;
    SemialgebraicSet cell;
    ResetKind kind = ResetKind::Empty;
    std::vector<std::string> cert_ids;  // destination-mode certificates
    std::vector<Arc> provenance;        // surviving graph arcs behind this rule
};

// revised initial set of one original mode: Init(mode) restricted to the
// union of the listed certificates' inner approximations
struct ControllerInit {
    std::string mode;
    std::vector<std::string> cert_ids;
};

struct ResetController {
    std::vector<std::string> variables;
    std::vector<ResetAssignment> assignments;
    std::vector<ControllerInit> init;
    std::map<std::string, RabfCertificate> certificates;
};

struct SynthResult {
    bool success = false;  // false means synthesis fail: no initial state
                           // survives pruning
    ResetController controller;
    PartitionResult partition;
    DiscreteDirectedGraph ddg;     // before pruning
    DiscreteDirectedGraph pruned;  // after pruning
};

SynthResult synthesize(const DelayHybridAutomaton& h, const PartitionConfig& cfg);

// graph synthesis and controller assembly on an existing partition; lets
// callers time or reuse the expensive certificate phase separately
SynthResult synthesize_from_partition(const DelayHybridAutomaton& h,
                                      PartitionResult partition);

nlohmann::json controller_to_json(const ResetController& rc);
ResetController controller_from_json(const nlohmann::json& j);

void export_controller(const ResetController& rc, const std::string& path);
ResetController load_controller(const std::string& path);

}  // namespace dharc
