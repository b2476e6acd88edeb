#pragma once

// Delay hybrid automaton data model, model-file ingestion, and the mode
// partition: each mode is split into one submode per disjoint guard cell
// (plus a target submode when the mode has its own target), every submode
// carrying a reach-avoid certificate for its cell. The partitioned
// automaton is represented by the submode list plus rebuilt edges; the
// continuous data (dynamics, domain, safe set) is inherited from the
// parent mode by id.

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dharc/poly.hpp"
#include "dharc/reachavoid.hpp"

namespace dharc {

enum class ResetKind { Unrestricted, CertificateSlice, Empty };

struct ResetMap {
    ResetKind kind = ResetKind::Unrestricted;
    std::vector<std::string> cert_ids;  // CertificateSlice references
};

enum class InitKind { Empty, ExplicitSet };

// Initial states are constant history functions; ExplicitSet restricts
// their value to a semialgebraic set.
struct InitialSet {
    InitKind kind = InitKind::Empty;
    SemialgebraicSet values;
};

struct Mode {
    std::string id;
    VectorField vf;
    SemialgebraicSet dom;
    SemialgebraicSet safe;
    SemialgebraicSet target;  // empty constraint list = no target
    InitialSet init;
};

struct Edge {
    std::string src, dst;
    SemialgebraicSet guard;
    double switch_duration = 0.0;
    ResetMap reset;  // produced by synthesis, never parsed from a model
};

struct DelayHybridAutomaton {
    std::vector<std::string> variables;
    std::vector<Mode> modes;
    std::vector<Edge> edges;

    const Mode* find_mode(const std::string& id) const;
    std::vector<int> outgoing_edges(const std::string& id) const;
};

// Schema or semantic violation in a model document; `pointer` locates the
// offending element as a JSON pointer.
struct ModelError : std::runtime_error {
    std::string pointer;
    ModelError(const std::string& msg, std::string ptr)
        : std::runtime_error(msg + " (at " + ptr + ")"), pointer(std::move(ptr)) {}
};

DelayHybridAutomaton parse_model(const nlohmann::json& doc);

// One nonempty atom of the Boolean algebra generated by a mode's outgoing
// guards: the intersection of the guards in `edge_indices` minus the rest.
// Complements of conjunctions are split into disjoint conjunctive branches,
// so one subset of edges may yield several cells.
struct GuardCell {
    SemialgebraicSet set;
    std::vector<std::string> post_modes;  // sorted, deduplicated
    std::vector<int> edge_indices;        // indices into the outgoing list
};

std::vector<GuardCell> partition_guard_cells(const Mode& mode,
                                             const std::vector<Edge>& outgoing);

struct Submode {
    std::string id;      // parent id + cell index; bare vertices keep the
    std::string parent;  // parent id unchanged
    int index = -1;      // 0 = target submode, >= 1 = guard cell, -1 = bare
    SemialgebraicSet cell;    // guard cell (empty for target and bare)
    SemialgebraicSet target;  // parent target for index 0, empty otherwise
    std::vector<std::string> post_modes;
    std::vector<int> edge_indices;  // original edges whose guard covers the cell
    bool has_cert = false;
    RabfCertificate cert;
    bool init_nonempty = false;  // Init(parent) ∩ RA_in has a grid witness
};

struct SubmodeEdge {
    std::string src, dst;   // submode ids
    SemialgebraicSet guard; // the source submode's cell
    double switch_duration = 0.0;
    std::string cert_id;    // destination certificate (empty for bare dst)
};

struct PartitionResult {
    std::vector<Submode> submodes;
    std::vector<SubmodeEdge> edges;
    std::map<std::string, std::string> provenance;  // submode -> parent
    // every geometric guard cell per mode, certified or not
    std::map<std::string, std::vector<GuardCell>> cells;

    const Submode* find_submode(const std::string& id) const;
    // submode-table view: all submodes of one parent, in index order
    std::vector<const Submode*> of_parent(const std::string& parent) const;
};

struct PartitionConfig {
    std::vector<DegreeConfig> degrees;  // empty = module default ladder
    int jobs = 1;
    int verify_samples = 200;
};

// A synthesized certificate failed its independent numerical check; the
// result must not be trusted or exported.
struct VerificationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Splits every mode on its guard cells, synthesizing one reach-avoid
// certificate per (mode, cell) task; infeasible cells are dropped, modes
// with no surviving submode but an incoming edge keep a bare vertex.
// Throws VerificationError when a certificate fails verification.
PartitionResult mode_partition(const DelayHybridAutomaton& h,
                               const PartitionConfig& cfg);

}  // namespace dharc
