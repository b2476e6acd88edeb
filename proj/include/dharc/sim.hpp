#pragma once

// Delay differential equation integrator: classical RK4 by the method of
// steps, with the step size snapped so the delay is an exact multiple of
// it. Delayed reads between knots use cubic Hermite interpolation over
// stored state/derivative pairs, so derivative breakpoints at multiples of
// the delay always coincide with knots and each step stays inside one
// smooth segment.

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "dharc/synth.hpp"

namespace dharc {

using HistoryFn = std::function<std::vector<double>(double)>;

HistoryFn constant_history(std::vector<double> x0);

// Growing knot storage plus one-step advance; the hybrid runner drives this
// directly so it can bisect around events with the dense output.
class DdeStepper {
  public:
    DdeStepper(const VectorField& vf, const HistoryFn& history, double dt_request);

    // advance one knot; returns false once the state norm exceeds the
    // blow-up bound
    bool step();

    double dt() const { return dt_; }
    double tau() const { return tau_; }
    int delay_steps() const { return k_; }
    // time of the newest knot
    double now() const;
    const std::vector<double>& current() const { return states_.back(); }
    // dense output on [-tau, now()]
    std::vector<double> state_at(double t) const;
    int knots() const { return static_cast<int>(states_.size()); }
    double time_of(int i) const { return -tau_ + i * dt_; }
    const std::vector<double>& state_of(int i) const { return states_[i]; }

    static constexpr double kBlowUp = 1e8;

  private:
    std::vector<double> f_eval(const std::vector<double>& x,
                               const std::vector<double>& xd) const;

    const VectorField* vf_;
    double tau_, dt_;
    int k_;  // tau = k * dt
    std::vector<std::vector<double>> states_, derivs_;
    // left-sided derivative at the t = 0 knot (the history's), used when
    // interpolating the last history segment
    std::vector<double> hist_d_zero_;
};

struct DdeResult {
    double dt = 0.0;
    double tau = 0.0;
    int delay_steps = 0;
    bool blew_up = false;
    // knot i sits at time -tau + i*dt; index delay_steps is t = 0
    std::vector<double> times;
    std::vector<std::vector<double>> states;
};

// Integrate from the constant-history start to the horizon. dt_request 0
// picks tau/64; otherwise the request is snapped to divide tau exactly.
DdeResult integrate_dde(const VectorField& vf, const HistoryFn& history,
                        double horizon, double dt_request = 0.0);

struct ExecEvent {
    double t = 0.0;  // hybrid time
    std::string kind;  // guard_hit | dom_exit | target_hit
};

struct Segment {
    std::string mode;
    double entry_time = 0.0;
    DdeResult traj;  // local clock, history knots from -tau
    std::vector<ExecEvent> events;
};

struct JumpRecord {
    int edge_index = -1;
    double t = 0.0;  // hybrid time of the domain exit
    std::vector<double> reset_point;
};

enum class ExecOutcome { TargetHit, Blocked, HorizonExceeded, MaxJumps, BlowUp };

const char* exec_outcome_name(ExecOutcome o);

struct HybridExecution {
    std::vector<Segment> segments;
    std::vector<JumpRecord> jumps;
    ExecOutcome outcome = ExecOutcome::HorizonExceeded;
    double final_time = 0.0;
    // min over all sampled states of -s(x), s = signed safe-set violation;
    // negative means the execution left the safe set
    double min_margin = 0.0;
    std::string detail;
};

struct HybridOptions {
    double horizon = 50.0;
    int max_jumps = 64;
    unsigned seed = 0;
    double dt = 0.0;  // 0 picks delay/64 per mode
};

// Execute the closed loop from a constant history: integrate inside the
// current mode, jump when the state leaves Dom inside a guard cell whose
// assignment is enabled, freeze for the switch duration, and re-enter the
// destination at a seeded sample of the assignment's certificate slice.
HybridExecution run_hybrid(const DelayHybridAutomaton& h,
                           const ResetController& rc,
                           const std::string& start_mode,
                           const std::vector<double>& start,
                           const HybridOptions& opt);

struct ValidationReport {
    int samples = 0;
    int target_hit = 0;
    int safety_violation = 0;
    int blocked = 0;
    int horizon_exceeded = 0;
    bool vacuous = false;  // nothing to sample from
    std::vector<double> min_margins;  // one per run
    double worst_margin = 0.0;
};

// Monte-Carlo validation: draw start points from the controller's revised
// initial slices and run the closed loop on each. Runs may fan out over a
// thread pool; start points and per-run sampler seeds are fixed up front
// so the report does not depend on the job count.
ValidationReport validate_controller(const DelayHybridAutomaton& h,
                                     const ResetController& rc, int n_samples,
                                     unsigned seed, const HybridOptions& opt,
                                     int jobs = 1);

nlohmann::json report_to_json(const ValidationReport& r);

// header t,x1,...,xn,mode; the first segment includes its history knots
void write_trajectory_csv(std::ostream& os, const HybridExecution& ex,
                          const std::vector<std::string>& vars);
// header t,kind,mode
void write_events_csv(std::ostream& os, const HybridExecution& ex);

// phase-plane picture for two-dimensional models: domain and target
// outlines per mode plus the executed trajectory, one color per mode
std::string phase_plane_svg(const DelayHybridAutomaton& h,
                            const HybridExecution& ex);

}  // namespace dharc
