#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dharc/dha.hpp"
#include "dharc/graph.hpp"
#include "dharc/poly.hpp"
#include "dharc/reachavoid.hpp"
#include "dharc/sim.hpp"
#include "dharc/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dharc;

namespace {

// exit codes shared by all subcommands
constexpr int kFail = 1;    // synthesis fail, infeasible query, bad validation
constexpr int kVerify = 2;  // a certificate failed its independent check
constexpr int kIo = 3;      // unreadable files, schema violations, bad flags

struct CliError : std::runtime_error {
    int code;
    CliError(int c, const std::string& msg) : std::runtime_error(msg), code(c) {}
};

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CliError(kIo, "cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw CliError(kIo, path + ": " + e.what());
    }
}

DelayHybridAutomaton load_model(const std::string& path) {
    try {
        return parse_model(load_json_file(path));
    } catch (const ModelError& e) {
        throw CliError(kIo, path + ": " + e.what());
    }
}

void write_file(const fs::path& path, const std::string& body) {
    std::ofstream out(path);
    if (!out) throw CliError(kIo, "cannot write " + path.string());
    out << body;
}

// "--degrees h,w,e;h,w,e" -> retry ladder
std::vector<DegreeConfig> parse_degrees(const std::string& spec) {
    std::vector<DegreeConfig> out;
    if (spec.empty()) return out;
    std::istringstream rungs(spec);
    std::string rung;
    while (std::getline(rungs, rung, ';')) {
        DegreeConfig d;
        char c1, c2;
        std::istringstream fields(rung);
        if (!(fields >> d.h >> c1 >> d.w >> c2 >> d.e) || c1 != ',' || c2 != ',')
            throw CliError(kIo, "bad --degrees rung '" + rung +
                                    "' (want h,w,e;h,w,e;...)");
        if (d.h <= 0 || d.w < 0 || d.e < 0 || d.h % 2 != 0)
            throw CliError(kIo, "bad --degrees rung '" + rung +
                                    "' (h must be positive and even)");
        out.push_back(d);
    }
    return out;
}

std::vector<double> parse_point(const std::string& spec, size_t n) {
    std::vector<double> p;
    std::istringstream in(spec);
    std::string tok;
    while (std::getline(in, tok, ',')) p.push_back(std::stod(tok));
    if (p.size() != n)
        throw CliError(kIo, "--start needs " + std::to_string(n) +
                                " comma-separated coordinates");
    return p;
}

double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now() - t0)
        .count();
}

// shared flags gathered per subcommand
struct Options {
    std::string model, out, controller, mode, degrees, start;
    double tau = 0.0, horizon = 50.0, dt = 0.0;
    unsigned seed = 0;
    int samples = 100, jobs = 1, grid = 0;
};

int cmd_synth(const Options& o) {
    DelayHybridAutomaton h = load_model(o.model);
    fs::create_directories(o.out);

    PartitionConfig cfg;
    cfg.degrees = parse_degrees(o.degrees);
    cfg.jobs = o.jobs;

    auto t0 = std::chrono::steady_clock::now();
    PartitionResult partition = mode_partition(h, cfg);
    double time1 = ms_since(t0);

    auto t1 = std::chrono::steady_clock::now();
    SynthResult sr = synthesize_from_partition(h, std::move(partition));
    double time2 = ms_since(t1);

    write_file(fs::path(o.out) / "ddg_pre.dot", graph_to_dot(sr.ddg));
    write_file(fs::path(o.out) / "ddg_post.dot", graph_to_dot(sr.pruned));
    json timing = {{"time1_ms", time1}, {"time2_ms", time2}};
    write_file(fs::path(o.out) / "timing.json", timing.dump(2) + "\n");

    std::cout << "time 1 (mode partition): " << time1 / 1000.0 << " s\n"
              << "time 2 (graph synthesis): " << time2 << " ms\n";
    if (!sr.success) {
        std::cout << "Synthesis fail\n";
        return kFail;
    }
    export_controller(sr.controller, (fs::path(o.out) / "controller.json").string());
    std::cout << "controller: " << (fs::path(o.out) / "controller.json").string()
              << " (" << sr.controller.assignments.size() << " assignments, "
              << sr.controller.certificates.size() << " certificates)\n";
    return 0;
}

int cmd_check_ra(const Options& o) {
    DelayHybridAutomaton h = load_model(o.model);
    const Mode* m = h.find_mode(o.mode);
    if (!m) throw CliError(kIo, "unknown mode: " + o.mode);
    if (m->target.constraints.empty())
        throw CliError(kIo, "mode " + o.mode + " has no target set");

    RaQuery q;
    q.vf = m->vf;
    if (o.tau != 0.0) {
        if (o.tau < 0.0) throw CliError(kIo, "--tau must be positive");
        q.vf.delay = o.tau;
    }
    if (q.vf.delay <= 0.0) throw CliError(kIo, "the delay must be positive");
    q.safe = m->dom.conjoin(m->safe);
    q.target = m->target;
    q.degrees = parse_degrees(o.degrees);

    auto t0 = std::chrono::steady_clock::now();
    RaResult r = synthesize_rabf(q);
    double wall = ms_since(t0);

    bool valid = r.status == RaStatus::Valid && r.member.has_value();
    json report = {{"mode", o.mode},
                   {"tau", q.vf.delay},
                   {"status", ra_status_name(r.status)},
                   {"valid", valid},
                   {"detail", r.detail},
                   {"wall_ms", wall}};
    if (r.status == RaStatus::Valid) {
        report["degrees"] = {{"h", r.used_degrees.h},
                            {"w", r.used_degrees.w},
                            {"e", r.used_degrees.e}};
        if (r.member) report["member"] = *r.member;
        if (r.cert) report["certificate"] = certificate_to_json(*r.cert);
    }
    if (!o.out.empty()) write_file(o.out, report.dump(2) + "\n");

    std::cout << "mode " << o.mode << ", tau " << q.vf.delay << ": "
              << (valid ? "valid" : ra_status_name(r.status)) << " ("
              << wall / 1000.0 << " s)\n";
    if (r.status == RaStatus::VerificationFailure) return kVerify;
    return valid ? 0 : kFail;
}

int cmd_validate(const Options& o) {
    DelayHybridAutomaton h = load_model(o.model);
    ResetController rc;
    try {
        rc = load_controller(o.controller);
    } catch (const json::exception& e) {
        throw CliError(kIo, o.controller + ": " + e.what());
    } catch (const std::runtime_error& e) {
        throw CliError(kIo, o.controller + ": " + e.what());
    }

    HybridOptions hopt;
    hopt.horizon = o.horizon;
    hopt.dt = o.dt;
    ValidationReport rep =
        validate_controller(h, rc, o.samples, o.seed, hopt, o.jobs);

    json report = report_to_json(rep);
    std::cout << report.dump(2) << "\n";
    if (!o.out.empty()) write_file(o.out, report.dump(2) + "\n");

    double hit = rep.samples > 0
                     ? static_cast<double>(rep.target_hit) / rep.samples
                     : 0.0;
    std::cerr << rep.samples << " runs: " << rep.target_hit << " reached the target, "
              << rep.safety_violation << " left the safe set, worst margin "
              << rep.worst_margin << "\n";
    if (rep.vacuous || rep.safety_violation > 0 || hit < 0.99) return kFail;
    return 0;
}

int cmd_simulate(const Options& o) {
    DelayHybridAutomaton h = load_model(o.model);
    const Mode* m = h.find_mode(o.mode);
    if (!m) throw CliError(kIo, "unknown mode: " + o.mode);

    std::vector<double> start;
    if (!o.start.empty()) {
        start = parse_point(o.start, h.variables.size());
    } else {
        // deepest interior point of the initial set, else of the domain
        const SemialgebraicSet& s = m->init.kind == InitKind::ExplicitSet
                                        ? m->init.values
                                        : m->dom;
        std::optional<Box> bb = bounding_box(s);
        std::optional<std::vector<double>> p;
        if (bb) p = deepest_point(s, s, *bb);
        if (!p)
            throw CliError(kIo,
                           "no sampleable start in mode " + o.mode +
                               "; give one with --start x1,x2,...");
        start = *p;
    }

    HybridExecution ex;
    if (!o.controller.empty()) {
        ResetController rc = load_controller(o.controller);
        HybridOptions hopt;
        hopt.horizon = o.horizon;
        hopt.dt = o.dt;
        hopt.seed = o.seed;
        ex = run_hybrid(h, rc, o.mode, start, hopt);
    } else {
        // open loop: integrate the single mode over the horizon
        Segment seg;
        seg.mode = o.mode;
        seg.traj = integrate_dde(m->vf, constant_history(start), o.horizon,
                                 o.dt);
        ex.segments.push_back(std::move(seg));
        ex.outcome = ex.segments[0].traj.blew_up ? ExecOutcome::BlowUp
                                                 : ExecOutcome::HorizonExceeded;
        ex.final_time = o.horizon;
    }

    std::ofstream csv(o.out);
    if (!csv) throw CliError(kIo, "cannot write " + o.out);
    write_trajectory_csv(csv, ex, h.variables);

    fs::path stem = fs::path(o.out).replace_extension();
    if (!o.controller.empty()) {
        std::ofstream events(stem.string() + "_events.csv");
        write_events_csv(events, ex);
        if (h.variables.size() == 2)
            write_file(stem.string() + ".svg", phase_plane_svg(h, ex));
    }

    std::cout << "outcome: " << exec_outcome_name(ex.outcome) << " at t = "
              << ex.final_time << " (" << ex.jumps.size() << " jumps, margin "
              << ex.min_margin << ")\n";
    return 0;
}

int cmd_export_dot(const Options& o) {
    DelayHybridAutomaton h = load_model(o.model);
    fs::create_directories(o.out);

    PartitionConfig cfg;
    cfg.degrees = parse_degrees(o.degrees);
    cfg.jobs = o.jobs;

    PartitionResult partition = mode_partition(h, cfg);
    DiscreteDirectedGraph ddg = build_ddg(partition);
    DiscreteDirectedGraph pruned = prune_graph(ddg);

    write_file(fs::path(o.out) / "ddg_pre.dot", graph_to_dot(ddg));
    write_file(fs::path(o.out) / "ddg_post.dot", graph_to_dot(pruned));
    std::cout << "wrote " << (fs::path(o.out) / "ddg_pre.dot").string() << " ("
              << ddg.arcs.size() << " arcs) and "
              << (fs::path(o.out) / "ddg_post.dot").string() << " ("
              << pruned.arcs.size() << " arcs)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"reach-avoid controller synthesis for delay hybrid automata"};
    app.require_subcommand(0, 1);

    Options o;

    auto add_common = [&](CLI::App* c, bool needs_out) {
        c->add_option("--model", o.model, "model file (JSON)")
            ->required();
        auto* out = c->add_option("--out", o.out, "output path");
        if (needs_out) out->required();
        c->add_option("--grid", o.grid,
                      "grid points per axis for set scans (0 = default)");
    };

    CLI::App* synth = app.add_subcommand(
        "synth", "synthesize a reset controller for a full model");
    add_common(synth, true);
    synth->add_option("--degrees", o.degrees, "retry ladder, h,w,e;h,w,e;...");
    synth->add_option("--jobs", o.jobs, "parallel certificate solves");

    CLI::App* checkra = app.add_subcommand(
        "check-ra", "solve the reach-avoid problem for a single mode");
    add_common(checkra, false);
    checkra->add_option("--mode", o.mode, "mode id")->required();
    checkra->add_option("--tau", o.tau, "override the mode's delay");
    checkra->add_option("--degrees", o.degrees, "retry ladder, h,w,e;h,w,e;...");

    CLI::App* validate = app.add_subcommand(
        "validate", "Monte-Carlo validation of a synthesized controller");
    add_common(validate, false);
    validate->add_option("--controller", o.controller, "controller file (JSON)")
        ->required();
    validate->add_option("--samples", o.samples, "number of runs");
    validate->add_option("--seed", o.seed, "sampler seed");
    validate->add_option("--horizon", o.horizon, "time budget per run");
    validate->add_option("--dt", o.dt, "step size (0 = delay/64 per mode)");
    validate->add_option("--jobs", o.jobs, "parallel runs");

    CLI::App* simulate = app.add_subcommand(
        "simulate", "integrate one execution and write a trajectory CSV");
    add_common(simulate, true);
    simulate->add_option("--mode", o.mode, "start mode")->required();
    simulate->add_option("--controller", o.controller,
                         "closed-loop controller file (open loop if absent)");
    simulate->add_option("--start", o.start, "start point x1,x2,...");
    simulate->add_option("--seed", o.seed, "reset sampler seed");
    simulate->add_option("--horizon", o.horizon, "time budget");
    simulate->add_option("--dt", o.dt, "step size (0 = delay/64)");

    CLI::App* exportdot = app.add_subcommand(
        "export-dot", "partition a model and write its graphs as DOT");
    add_common(exportdot, true);
    exportdot->add_option("--degrees", o.degrees, "retry ladder");
    exportdot->add_option("--jobs", o.jobs, "parallel certificate solves");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kIo;
    }

    if (app.get_subcommands().empty()) {
        std::cout << app.help();
        return 0;
    }

    try {
        if (o.grid > 0) set_grid_override(o.grid);
        if (synth->parsed()) return cmd_synth(o);
        if (checkra->parsed()) return cmd_check_ra(o);
        if (validate->parsed()) return cmd_validate(o);
        if (simulate->parsed()) return cmd_simulate(o);
        if (exportdot->parsed()) return cmd_export_dot(o);
    } catch (const CliError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.code;
    } catch (const VerificationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kVerify;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    }
    return 0;
}
