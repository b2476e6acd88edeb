#include "dharc/synth.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "dharc/reachavoid.hpp"

namespace dharc {

SynthResult synthesize(const DelayHybridAutomaton& h, const PartitionConfig& cfg) {
    return synthesize_from_partition(h, mode_partition(h, cfg));
}

SynthResult synthesize_from_partition(const DelayHybridAutomaton& h,
                                      PartitionResult partition) {
    SynthResult res;
    res.partition = std::move(partition);
    res.ddg = build_ddg(res.partition);
    res.pruned = prune_graph(res.ddg);
    res.success = !res.pruned.v0.empty();
    if (!res.success) return res;

    ResetController& rc = res.controller;
    rc.variables = h.variables;

    std::set<std::string> alive(res.pruned.vertices.begin(),
                                res.pruned.vertices.end());
    for (const Submode& s : res.partition.submodes)
        if (s.has_cert && alive.count(s.id))
            rc.certificates[s.id] = s.cert;

    // walk the geometric cells so disabled pairs get an explicit empty rule
    std::set<int> covered;
    for (const Mode& q : h.modes) {
        auto it = res.partition.cells.find(q.id);
        if (it == res.partition.cells.end()) continue;
        const auto& cells = it->second;
        for (size_t c = 0; c < cells.size(); ++c) {
            std::string src_id = q.id + std::to_string(c + 1);
            for (int e : cells[c].edge_indices) {
                const Edge& edge = h.edges[e];
                ResetAssignment a;
                a.edge_index = e;
                a.src = edge.src;
                a.dst = edge.dst;
                a.cell = cells[c].set;
                for (const Arc& arc : res.pruned.arcs) {
                    if (arc.first != src_id) continue;
                    if (res.partition.provenance.at(arc.second) != edge.dst) continue;
                    a.cert_ids.push_back(res.pruned.arc_payload.at(arc).cert_id);
                    a.provenance.push_back(arc);
                }
                std::sort(a.cert_ids.begin(), a.cert_ids.end());
                a.kind = a.cert_ids.empty() ? ResetKind::Empty
                                            : ResetKind::CertificateSlice;
                covered.insert(e);
                rc.assignments.push_back(std::move(a));
            }
        }
    }
    for (size_t e = 0; e < h.edges.size(); ++e) {
        if (covered.count(static_cast<int>(e))) continue;
        // guard never produced a nonempty cell; the edge is plainly disabled
        ResetAssignment a;
        a.edge_index = static_cast<int>(e);
        a.src = h.edges[e].src;
        a.dst = h.edges[e].dst;
        a.cell = h.edges[e].guard;
        a.kind = ResetKind::Empty;
        rc.assignments.push_back(std::move(a));
    }

    for (const Mode& q : h.modes) {
        ControllerInit ci;
        ci.mode = q.id;
        for (const Submode& s : res.partition.submodes)
            if (s.parent == q.id && s.init_nonempty && alive.count(s.id))
                ci.cert_ids.push_back(s.id);
        if (!ci.cert_ids.empty()) rc.init.push_back(std::move(ci));
    }
    return res;
}

nlohmann::json controller_to_json(const ResetController& rc) {
    nlohmann::json j;
    j["variables"] = rc.variables;

    j["edges"] = nlohmann::json::array();
    for (const auto& a : rc.assignments) {
        nlohmann::json e;
        e["edge"] = a.edge_index;
        e["src"] = a.src;
        e["dst"] = a.dst;
        e["cell"] = set_to_json(a.cell, rc.variables);
        if (a.kind == ResetKind::Empty) {
            e["assignment"] = {{"kind", "empty"}};
        } else {
            e["assignment"] = {{"kind", "certificates"},
                               {"certificates", a.cert_ids}};
        }
        e["provenance"] = nlohmann::json::array();
        for (const Arc& arc : a.provenance)
            e["provenance"].push_back({arc.first, arc.second});
        j["edges"].push_back(std::move(e));
    }

    j["init"] = nlohmann::json::array();
    for (const auto& ci : rc.init)
        j["init"].push_back({{"mode", ci.mode}, {"certificates", ci.cert_ids}});

    j["certificates"] = nlohmann::json::object();
    for (const auto& [id, cert] : rc.certificates)
        j["certificates"][id] = certificate_to_json(cert);
    return j;
}

ResetController controller_from_json(const nlohmann::json& j) {
    ResetController rc;
    rc.variables = j.at("variables").get<std::vector<std::string>>();
    for (const auto& e : j.at("edges")) {
        ResetAssignment a;
        a.edge_index = e.at("edge").get<int>();
        a.src = e.at("src").get<std::string>();
        a.dst = e.at("dst").get<std::string>();
        a.cell = set_from_json(e.at("cell"), rc.variables);
        const auto& as = e.at("assignment");
        if (as.at("kind").get<std::string>() == "empty") {
            a.kind = ResetKind::Empty;
        } else {
            a.kind = ResetKind::CertificateSlice;
            a.cert_ids = as.at("certificates").get<std::vector<std::string>>();
        }
        if (e.contains("provenance"))
            for (const auto& arc : e.at("provenance"))
                a.provenance.push_back(
                    {arc.at(0).get<std::string>(), arc.at(1).get<std::string>()});
        rc.assignments.push_back(std::move(a));
    }
    for (const auto& ci : j.at("init"))
        rc.init.push_back({ci.at("mode").get<std::string>(),
                           ci.at("certificates").get<std::vector<std::string>>()});
    for (const auto& [id, doc] : j.at("certificates").items())
        rc.certificates[id] = certificate_from_json(doc, rc.variables);
    return rc;
}

void export_controller(const ResetController& rc, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << controller_to_json(rc).dump(2) << "\n";
}

ResetController load_controller(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read " + path);
    nlohmann::json j;
    is >> j;
    return controller_from_json(j);
}

}  // namespace dharc
