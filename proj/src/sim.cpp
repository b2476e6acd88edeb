#include "dharc/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "dharc/reachavoid.hpp"

namespace dharc {

HistoryFn constant_history(std::vector<double> x0) {
    return [x0 = std::move(x0)](double) { return x0; };
}

namespace {

// 4th-order finite-difference derivative of the history callback at theta,
// with the stencil pushed inside [lo, hi]
std::vector<double> history_derivative(const HistoryFn& h, double theta,
                                       double lo, double hi, double eps) {
    auto sample = [&](double t) { return h(std::clamp(t, lo, hi)); };
    std::vector<double> d;
    if (theta - 2 * eps >= lo && theta + 2 * eps <= hi) {
        auto a = sample(theta - 2 * eps), b = sample(theta - eps);
        auto c = sample(theta + eps), e = sample(theta + 2 * eps);
        d.resize(a.size());
        for (size_t i = 0; i < d.size(); ++i)
            d[i] = (a[i] - 8 * b[i] + 8 * c[i] - e[i]) / (12 * eps);
    } else {
        double dir = (theta + 2 * eps > hi) ? -1.0 : 1.0;
        auto f0 = sample(theta);
        auto f1 = sample(theta + dir * eps);
        auto f2 = sample(theta + dir * 2 * eps);
        auto f3 = sample(theta + dir * 3 * eps);
        auto f4 = sample(theta + dir * 4 * eps);
        d.resize(f0.size());
        for (size_t i = 0; i < d.size(); ++i)
            d[i] = dir *
                   (-25 * f0[i] + 48 * f1[i] - 36 * f2[i] + 16 * f3[i] - 3 * f4[i]) /
                   (12 * eps);
    }
    return d;
}

}  // namespace

DdeStepper::DdeStepper(const VectorField& vf, const HistoryFn& history,
                       double dt_request)
    : vf_(&vf), tau_(vf.delay) {
    if (tau_ <= 0.0) throw std::invalid_argument("DdeStepper: delay must be positive");
    double want = dt_request > 0.0 ? dt_request : tau_ / 64.0;
    k_ = std::max(1, static_cast<int>(std::lround(tau_ / want)));
    dt_ = tau_ / k_;

    states_.reserve(4 * k_);
    derivs_.reserve(4 * k_);
    const double eps = dt_ / 8.0;
    for (int i = 0; i <= k_; ++i) {
        double theta = -tau_ + i * dt_;
        states_.push_back(history(theta));
        if (static_cast<int>(states_.back().size()) != vf.n)
            throw std::invalid_argument("DdeStepper: history dimension mismatch");
        derivs_.push_back(history_derivative(history, theta, -tau_, 0.0, eps));
    }
    // the derivative jumps at t = 0: the history's left derivative serves
    // the segment [-dt, 0], the vector field value serves [0, dt]
    hist_d_zero_ = derivs_.back();
    derivs_.back() = f_eval(states_.back(), states_.front());
}

std::vector<double> DdeStepper::f_eval(const std::vector<double>& x,
                                       const std::vector<double>& xd) const {
    return vf_->eval(x, xd);
}

double DdeStepper::now() const { return -tau_ + (knots() - 1) * dt_; }

std::vector<double> DdeStepper::state_at(double t) const {
    double lo = -tau_, hi = now();
    if (t <= lo) return states_.front();
    if (t >= hi) return states_.back();
    double pos = (t - lo) / dt_;
    int i = std::min(static_cast<int>(pos), knots() - 2);
    double s = pos - i;
    if (s < 1e-13) return states_[i];
    double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
    double h10 = s * (1 - s) * (1 - s);
    double h01 = s * s * (3 - 2 * s);
    double h11 = s * s * (s - 1);
    const auto &x0 = states_[i], &x1 = states_[i + 1];
    const auto& d0 = derivs_[i];
    const auto& d1 = (i + 1 == k_) ? hist_d_zero_ : derivs_[i + 1];
    std::vector<double> out(x0.size());
    for (size_t c = 0; c < out.size(); ++c)
        out[c] = h00 * x0[c] + h10 * dt_ * d0[c] + h01 * x1[c] + h11 * dt_ * d1[c];
    return out;
}

bool DdeStepper::step() {
    const int i = knots() - 1;  // current knot index
    const double t = time_of(i);
    const int n = vf_->n;
    const auto& x = states_[i];

    // delayed reads: stage offsets 0, dt/2, dt/2, dt relative to t, shifted
    // back by tau = k*dt; all of them lie in the already-computed span
    const auto& y0 = states_[i - k_];
    std::vector<double> yh = state_at(t + 0.5 * dt_ - tau_);
    const auto& y1 = states_[i - k_ + 1];

    std::vector<double> k1 = f_eval(x, y0);
    std::vector<double> xs(n);
    for (int c = 0; c < n; ++c) xs[c] = x[c] + 0.5 * dt_ * k1[c];
    std::vector<double> k2 = f_eval(xs, yh);
    for (int c = 0; c < n; ++c) xs[c] = x[c] + 0.5 * dt_ * k2[c];
    std::vector<double> k3 = f_eval(xs, yh);
    for (int c = 0; c < n; ++c) xs[c] = x[c] + dt_ * k3[c];
    std::vector<double> k4 = f_eval(xs, y1);

    std::vector<double> next(n);
    for (int c = 0; c < n; ++c)
        next[c] = x[c] + dt_ / 6.0 * (k1[c] + 2 * k2[c] + 2 * k3[c] + k4[c]);

    double norm = 0.0;
    for (double v : next) norm = std::max(norm, std::fabs(v));
    if (!std::isfinite(norm) || norm > kBlowUp) return false;

    derivs_.push_back(f_eval(next, states_[i - k_ + 1]));
    states_.push_back(std::move(next));
    return true;
}

DdeResult integrate_dde(const VectorField& vf, const HistoryFn& history,
                        double horizon, double dt_request) {
    DdeStepper st(vf, history, dt_request);
    DdeResult out;
    out.dt = st.dt();
    out.tau = st.tau();
    out.delay_steps = st.delay_steps();
    int steps = static_cast<int>(std::ceil(horizon / st.dt() - 1e-9));
    for (int s = 0; s < steps; ++s) {
        if (!st.step()) {
            out.blew_up = true;
            break;
        }
    }
    out.times.reserve(st.knots());
    out.states.reserve(st.knots());
    for (int i = 0; i < st.knots(); ++i) {
        out.times.push_back(st.time_of(i));
        out.states.push_back(st.state_of(i));
    }
    return out;
}

const char* exec_outcome_name(ExecOutcome o) {
    switch (o) {
        case ExecOutcome::TargetHit: return "target_hit";
        case ExecOutcome::Blocked: return "blocked";
        case ExecOutcome::HorizonExceeded: return "horizon_exceeded";
        case ExecOutcome::MaxJumps: return "max_jumps";
        case ExecOutcome::BlowUp: return "blow_up";
    }
    return "unknown";
}

namespace {

// signed violation of a set at a point: the worst constraint in <=-form,
// so <= 0 means the point satisfies every constraint
double set_violation(const SemialgebraicSet& s, const std::vector<double>& x) {
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& c : s.constraints) {
        double v = c.p.eval(x);
        switch (c.rel) {
            case Rel::GE: v = -v; break;
            case Rel::EQ: v = std::fabs(v); break;
            default: break;
        }
        worst = std::max(worst, v);
    }
    return worst;
}

std::vector<double> sample_in_box(const Box& box, std::mt19937& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> p(box.lo.size());
    for (size_t d = 0; d < p.size(); ++d)
        p[d] = box.lo[d] + u(rng) * (box.hi[d] - box.lo[d]);
    return p;
}

// does the destination slice of this assignment admit the point?
bool slice_admits(const ResetAssignment& a, const ResetController& rc,
                  const Mode& dst, const std::vector<double>& p) {
    if (!dst.dom.contains(p, 1e-9) || !dst.safe.contains(p, 1e-9)) return false;
    if (a.kind == ResetKind::Unrestricted) return true;
    for (const auto& id : a.cert_ids)
        if (membership_constant(rc.certificates.at(id), p)) return true;
    return false;
}

constexpr int kRejectionCap = 100000;

}  // namespace

HybridExecution run_hybrid(const DelayHybridAutomaton& h,
                           const ResetController& rc,
                           const std::string& start_mode,
                           const std::vector<double>& start,
                           const HybridOptions& opt) {
    HybridExecution ex;
    ex.min_margin = std::numeric_limits<double>::infinity();
    std::mt19937 rng(opt.seed);

    std::string mode_id = start_mode;
    std::vector<double> point = start;
    double t0 = 0.0;  // hybrid time at which the current segment starts

    for (;;) {
        const Mode* m = h.find_mode(mode_id);
        if (!m) throw std::invalid_argument("unknown mode: " + mode_id);
        double dt = opt.dt > 0 ? opt.dt : m->vf.delay / 64.0;

        // assignments leaving this mode, and whether we start inside each cell
        std::vector<const ResetAssignment*> rules;
        for (const auto& a : rc.assignments)
            if (a.src == mode_id) rules.push_back(&a);
        std::vector<char> in_cell(rules.size());
        for (size_t i = 0; i < rules.size(); ++i)
            in_cell[i] = rules[i]->cell.contains(point, 1e-9);

        DdeStepper st(m->vf, constant_history(point), dt);
        Segment seg;
        seg.mode = mode_id;
        seg.entry_time = t0;

        bool has_target = !m->target.constraints.empty();
        double remaining = opt.horizon - t0;

        // how the segment ended
        enum class End { Horizon, Target, Jump, Blocked, BlowUp };
        End end = End::Horizon;
        double exit_local = remaining;
        const ResetAssignment* fired = nullptr;
        std::vector<double> exit_state;

        // refine an event time inside (lo, hi]: pred is false at lo, true
        // at hi; returns the hi end of an interval no wider than dt/1000
        auto bisect = [&](double lo, double hi, auto&& pred) {
            double tol = dt * 1e-3;
            while (hi - lo > tol) {
                double mid = 0.5 * (lo + hi);
                if (pred(st.state_at(mid))) hi = mid;
                else lo = mid;
            }
            return hi;
        };

        if (has_target && set_violation(m->target, point) <= 0.0) {
            // already at the goal; no integration needed
            seg.events.push_back({t0, "target_hit"});
            end = End::Target;
            exit_local = 0.0;
        }

        while (end == End::Horizon) {
            double t_prev = st.now();
            if (t_prev >= remaining - 1e-12) {
                exit_local = remaining;
                break;
            }
            if (!st.step()) {
                end = End::BlowUp;
                exit_local = st.now();
                ex.detail = "state norm blew up in mode " + mode_id;
                break;
            }
            double t_cur = st.now();
            const std::vector<double>& x = st.current();

            if (has_target && set_violation(m->target, x) <= 0.0) {
                double thit = bisect(t_prev, t_cur, [&](const std::vector<double>& y) {
                    return set_violation(m->target, y) <= 0.0;
                });
                seg.events.push_back({t0 + thit, "target_hit"});
                end = End::Target;
                exit_local = thit;
                break;
            }

            if (set_violation(m->dom, x) > 0.0) {
                double tex = bisect(t_prev, t_cur, [&](const std::vector<double>& y) {
                    return set_violation(m->dom, y) > 0.0;
                });
                seg.events.push_back({t0 + tex, "dom_exit"});
                std::vector<double> xs = st.state_at(tex);
                // pick the enabled assignment whose cell holds the exit
                // state; cells are disjoint, but be deterministic anyway
                const ResetAssignment* best = nullptr;
                for (const auto* r : rules) {
                    if (r->kind == ResetKind::Empty) continue;
                    if (!r->cell.contains(xs, 1e-7)) continue;
                    if (!best || r->dst < best->dst) best = r;
                }
                if (!best) {
                    end = End::Blocked;
                    exit_local = tex;
                    ex.detail = "left the domain of " + mode_id +
                                " with no enabled assignment";
                    break;
                }
                end = End::Jump;
                fired = best;
                exit_state = std::move(xs);
                exit_local = tex;
                break;
            }

            // cell entries are informational events
            for (size_t i = 0; i < rules.size(); ++i) {
                bool inside = rules[i]->cell.contains(x, 1e-9);
                if (inside && !in_cell[i]) {
                    double tg = bisect(t_prev, t_cur, [&](const std::vector<double>& y) {
                        return rules[i]->cell.contains(y, 1e-9);
                    });
                    seg.events.push_back({t0 + tg, "guard_hit"});
                }
                in_cell[i] = inside;
            }
        }

        // harvest the knots computed so far, clipped to the exit time; a
        // knot past a bisected exit is an integration artifact and must not
        // enter the trajectory or the safety margin
        seg.traj.dt = st.dt();
        seg.traj.tau = st.tau();
        seg.traj.delay_steps = st.delay_steps();
        seg.traj.blew_up = (end == End::BlowUp);
        for (int i = 0; i < st.knots() && st.time_of(i) <= exit_local + 1e-12; ++i) {
            seg.traj.times.push_back(st.time_of(i));
            seg.traj.states.push_back(st.state_of(i));
            if (st.time_of(i) >= 0.0)
                ex.min_margin = std::min(
                    ex.min_margin, -set_violation(m->safe, st.state_of(i)));
        }
        if (end == End::Target || end == End::Jump || end == End::Blocked) {
            std::vector<double> xe =
                end == End::Jump ? exit_state : st.state_at(exit_local);
            ex.min_margin =
                std::min(ex.min_margin, -set_violation(m->safe, xe));
        }
        ex.segments.push_back(std::move(seg));

        switch (end) {
            case End::Target:
                ex.outcome = ExecOutcome::TargetHit;
                ex.final_time = t0 + exit_local;
                return ex;
            case End::Blocked:
                ex.outcome = ExecOutcome::Blocked;
                ex.final_time = t0 + exit_local;
                return ex;
            case End::BlowUp:
                ex.outcome = ExecOutcome::BlowUp;
                ex.final_time = t0 + exit_local;
                ex.min_margin = -std::numeric_limits<double>::infinity();
                return ex;
            case End::Horizon:
                ex.outcome = ExecOutcome::HorizonExceeded;
                ex.final_time = opt.horizon;
                return ex;
            case End::Jump:
                break;
        }

        if (static_cast<int>(ex.jumps.size()) >= opt.max_jumps) {
            ex.outcome = ExecOutcome::MaxJumps;
            ex.final_time = t0 + exit_local;
            ex.detail = "jump budget exhausted";
            return ex;
        }

        const Edge& edge = h.edges[fired->edge_index];
        const Mode* dst = h.find_mode(fired->dst);
        if (!dst) throw std::invalid_argument("unknown mode: " + fired->dst);

        // draw the reset point from the destination slice by rejection over
        // the domain's bounding box
        std::optional<Box> bb = bounding_box(dst->dom);
        std::vector<double> reset;
        bool got = false;
        if (bb) {
            for (int trial = 0; trial < kRejectionCap && !got; ++trial) {
                std::vector<double> p = sample_in_box(*bb, rng);
                if (slice_admits(*fired, rc, *dst, p)) {
                    reset = std::move(p);
                    got = true;
                }
            }
        }
        if (!got) {
            ex.outcome = ExecOutcome::Blocked;
            ex.final_time = t0 + exit_local;
            ex.detail = "reset slice on edge " + std::to_string(fired->edge_index) +
                        " is numerically empty";
            return ex;
        }
        ex.jumps.push_back({fired->edge_index, t0 + exit_local, reset});

        // the plant holds still while the switch is in progress
        t0 += exit_local + edge.switch_duration;
        if (t0 >= opt.horizon) {
            ex.outcome = ExecOutcome::HorizonExceeded;
            ex.final_time = opt.horizon;
            return ex;
        }
        mode_id = fired->dst;
        point = std::move(reset);
    }
}

ValidationReport validate_controller(const DelayHybridAutomaton& h,
                                     const ResetController& rc, int n_samples,
                                     unsigned seed, const HybridOptions& opt,
                                     int jobs) {
    ValidationReport rep;

    // one slice per (mode, certificate) pair in the revised initial sets
    struct Slice {
        const Mode* mode;
        const RabfCertificate* cert;
        Box box;
    };
    std::vector<Slice> slices;
    for (const auto& ci : rc.init) {
        const Mode* m = h.find_mode(ci.mode);
        if (!m || m->init.kind != InitKind::ExplicitSet) continue;
        std::optional<Box> bb = bounding_box(m->init.values);
        if (!bb) continue;
        for (const auto& id : ci.cert_ids)
            slices.push_back({m, &rc.certificates.at(id), *bb});
    }
    if (slices.empty() || n_samples <= 0) {
        rep.vacuous = true;
        return rep;
    }

    // fix all start points up front so the job count cannot reshuffle them
    struct Start {
        std::string mode;
        std::vector<double> x;
    };
    std::vector<Start> starts;
    std::mt19937 rng(seed);
    std::uniform_int_distribution<size_t> pick(0, slices.size() - 1);
    for (int i = 0; i < n_samples; ++i) {
        bool got = false;
        for (int trial = 0; trial < kRejectionCap && !got; ++trial) {
            const Slice& s = slices[pick(rng)];
            std::vector<double> p = sample_in_box(s.box, rng);
            if (!s.mode->init.values.contains(p, 1e-9)) continue;
            if (!membership_constant(*s.cert, p)) continue;
            starts.push_back({s.mode->id, std::move(p)});
            got = true;
        }
        if (!got) break;  // slices too thin to sample; report what we have
    }
    if (starts.empty()) {
        rep.vacuous = true;
        return rep;
    }

    std::vector<HybridExecution> runs(starts.size());
    auto work = [&](size_t i) {
        HybridOptions o = opt;
        // splitmix-style spread so per-run streams are independent of i's
        // neighbours and of the master stream
        o.seed = static_cast<unsigned>(
            (static_cast<uint64_t>(seed) + 0x9e3779b97f4a7c15ull * (i + 1)) >> 16);
        runs[i] = run_hybrid(h, rc, starts[i].mode, starts[i].x, o);
    };
    if (jobs <= 1) {
        for (size_t i = 0; i < starts.size(); ++i) work(i);
    } else {
        std::atomic<size_t> next{0};
        auto drain = [&] {
            for (size_t i = next++; i < starts.size(); i = next++) work(i);
        };
        std::vector<std::thread> pool;
        for (int j = 1; j < jobs; ++j) pool.emplace_back(drain);
        drain();
        for (auto& th : pool) th.join();
    }

    rep.samples = static_cast<int>(starts.size());
    rep.worst_margin = std::numeric_limits<double>::infinity();
    for (const auto& r : runs) {
        rep.min_margins.push_back(r.min_margin);
        rep.worst_margin = std::min(rep.worst_margin, r.min_margin);
        if (r.min_margin < -1e-6) ++rep.safety_violation;
        switch (r.outcome) {
            case ExecOutcome::TargetHit: ++rep.target_hit; break;
            case ExecOutcome::Blocked:
            case ExecOutcome::BlowUp: ++rep.blocked; break;
            case ExecOutcome::HorizonExceeded:
            case ExecOutcome::MaxJumps: ++rep.horizon_exceeded; break;
        }
    }
    return rep;
}

nlohmann::json report_to_json(const ValidationReport& r) {
    double n = r.samples > 0 ? static_cast<double>(r.samples) : 1.0;
    return nlohmann::json{
        {"samples", r.samples},
        {"vacuous", r.vacuous},
        {"counts",
         {{"target_hit", r.target_hit},
          {"safety_violation", r.safety_violation},
          {"blocked", r.blocked},
          {"horizon_exceeded", r.horizon_exceeded}}},
        {"fractions",
         {{"target_hit", r.target_hit / n},
          {"safety_violation", r.safety_violation / n},
          {"blocked", r.blocked / n},
          {"horizon_exceeded", r.horizon_exceeded / n}}},
        {"worst_margin", r.worst_margin},
        {"min_margins", r.min_margins},
    };
}

void write_trajectory_csv(std::ostream& os, const HybridExecution& ex,
                          const std::vector<std::string>& vars) {
    os << "t";
    for (const auto& v : vars) os << "," << v;
    os << ",mode\n";
    os.precision(12);
    bool first = true;
    for (const auto& seg : ex.segments) {
        for (size_t i = 0; i < seg.traj.times.size(); ++i) {
            double tl = seg.traj.times[i];
            if (!first && tl < 0.0) continue;  // re-entry history is synthetic
            os << seg.entry_time + tl;
            for (double x : seg.traj.states[i]) os << "," << x;
            os << "," << seg.mode << "\n";
        }
        first = false;
    }
}

void write_events_csv(std::ostream& os, const HybridExecution& ex) {
    os << "t,kind,mode\n";
    os.precision(12);
    for (const auto& seg : ex.segments)
        for (const auto& e : seg.events)
            os << e.t << "," << e.kind << "," << seg.mode << "\n";
}

namespace {

struct View {
    double minx, maxx, miny, maxy;
    double w = 640, hgt = 640, pad = 40;
    double sx(double x) const {
        return pad + (x - minx) / (maxx - minx) * (w - 2 * pad);
    }
    double sy(double y) const {
        return hgt - pad - (y - miny) / (maxy - miny) * (hgt - 2 * pad);
    }
};

// trace the zero level set of f on a grid and emit one SVG line per
// crossing cell (plain marching squares, saddle cells split arbitrarily)
void contour_lines(std::ostringstream& svg, const View& vw,
                   const std::function<double(double, double)>& f,
                   const std::string& style) {
    const int N = 160;
    double dx = (vw.maxx - vw.minx) / N, dy = (vw.maxy - vw.miny) / N;
    std::vector<std::vector<double>> val(N + 1, std::vector<double>(N + 1));
    for (int i = 0; i <= N; ++i)
        for (int j = 0; j <= N; ++j)
            val[i][j] = f(vw.minx + i * dx, vw.miny + j * dy);
    for (int i = 0; i < N; ++i) {
        for (int j = 0; j < N; ++j) {
            double x0 = vw.minx + i * dx, y0 = vw.miny + j * dy;
            struct Pt {
                double x, y;
            };
            Pt pts[4];
            int np = 0;
            auto cross = [&](double xa, double ya, double va, double xb,
                             double yb, double vb) {
                if ((va <= 0) == (vb <= 0)) return;
                double s = va / (va - vb);
                pts[np++] = {xa + s * (xb - xa), ya + s * (yb - ya)};
            };
            double v00 = val[i][j], v10 = val[i + 1][j];
            double v01 = val[i][j + 1], v11 = val[i + 1][j + 1];
            cross(x0, y0, v00, x0 + dx, y0, v10);
            cross(x0 + dx, y0, v10, x0 + dx, y0 + dy, v11);
            cross(x0 + dx, y0 + dy, v11, x0, y0 + dy, v01);
            cross(x0, y0 + dy, v01, x0, y0, v00);
            for (int k = 0; k + 1 < np; k += 2) {
                svg << "<line x1=\"" << vw.sx(pts[k].x) << "\" y1=\""
                    << vw.sy(pts[k].y) << "\" x2=\"" << vw.sx(pts[k + 1].x)
                    << "\" y2=\"" << vw.sy(pts[k + 1].y) << "\" " << style
                    << "/>\n";
            }
        }
    }
}

}  // namespace

std::string phase_plane_svg(const DelayHybridAutomaton& h,
                            const HybridExecution& ex) {
    if (h.variables.size() != 2)
        throw std::invalid_argument("phase plane plots need a 2-d model");

    View vw{1e300, -1e300, 1e300, -1e300};
    auto widen = [&](double x, double y) {
        vw.minx = std::min(vw.minx, x);
        vw.maxx = std::max(vw.maxx, x);
        vw.miny = std::min(vw.miny, y);
        vw.maxy = std::max(vw.maxy, y);
    };
    for (const auto& m : h.modes) {
        if (std::optional<Box> bb = bounding_box(m.dom)) {
            widen(bb->lo[0], bb->lo[1]);
            widen(bb->hi[0], bb->hi[1]);
        }
    }
    for (const auto& seg : ex.segments)
        for (const auto& x : seg.traj.states)
            if (std::fabs(x[0]) < 1e6 && std::fabs(x[1]) < 1e6) widen(x[0], x[1]);
    if (vw.minx > vw.maxx) {
        vw.minx = vw.miny = -1;
        vw.maxx = vw.maxy = 1;
    }
    double spanx = vw.maxx - vw.minx, spany = vw.maxy - vw.miny;
    if (spanx <= 0) spanx = 1;
    if (spany <= 0) spany = 1;
    vw.minx -= 0.08 * spanx;
    vw.maxx += 0.08 * spanx;
    vw.miny -= 0.08 * spany;
    vw.maxy += 0.08 * spany;

    static const char* kColors[] = {"#1f77b4", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#17becf"};
    auto mode_color = [&](const std::string& id) {
        for (size_t i = 0; i < h.modes.size(); ++i)
            if (h.modes[i].id == id) return kColors[i % 6];
        return "#333333";
    };

    std::ostringstream svg;
    svg.precision(6);
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << vw.w
        << "\" height=\"" << vw.hgt << "\" viewBox=\"0 0 " << vw.w << " "
        << vw.hgt << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    for (const auto& m : h.modes) {
        contour_lines(svg, vw,
                      [&](double x, double y) {
                          return set_violation(m.dom, {x, y});
                      },
                      "stroke=\"#aaaaaa\" stroke-width=\"1\"");
        if (!m.target.constraints.empty())
            contour_lines(svg, vw,
                          [&](double x, double y) {
                              return set_violation(m.target, {x, y});
                          },
                          "stroke=\"#2ca02c\" stroke-width=\"1.5\"");
    }

    const std::vector<double>* prev_end = nullptr;
    for (const auto& seg : ex.segments) {
        std::ostringstream poly;
        const std::vector<double>* first_pt = nullptr;
        for (size_t i = 0; i < seg.traj.times.size(); ++i) {
            if (seg.traj.times[i] < -1e-12) continue;
            const auto& x = seg.traj.states[i];
            if (std::fabs(x[0]) > 1e6 || std::fabs(x[1]) > 1e6) break;
            if (!first_pt) first_pt = &x;
            poly << vw.sx(x[0]) << "," << vw.sy(x[1]) << " ";
        }
        if (prev_end && first_pt) {
            svg << "<line x1=\"" << vw.sx((*prev_end)[0]) << "\" y1=\""
                << vw.sy((*prev_end)[1]) << "\" x2=\"" << vw.sx((*first_pt)[0])
                << "\" y2=\"" << vw.sy((*first_pt)[1])
                << "\" stroke=\"#888888\" stroke-width=\"1\" "
                   "stroke-dasharray=\"4 3\"/>\n";
        }
        svg << "<polyline points=\"" << poly.str() << "\" fill=\"none\" stroke=\""
            << mode_color(seg.mode) << "\" stroke-width=\"1.8\"/>\n";
        if (!seg.traj.states.empty()) prev_end = &seg.traj.states.back();
    }

    if (!ex.segments.empty()) {
        const auto& s0 = ex.segments.front().traj;
        if (!s0.states.empty()) {
            const auto& p = s0.states[std::min<size_t>(s0.delay_steps,
                                                       s0.states.size() - 1)];
            svg << "<circle cx=\"" << vw.sx(p[0]) << "\" cy=\"" << vw.sy(p[1])
                << "\" r=\"4\" fill=\"black\"/>\n";
        }
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace dharc
