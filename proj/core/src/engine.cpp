#include "msr/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "msr/parallel.hpp"
#include "msr/stats.hpp"

namespace msr {

namespace {

bool any_ready(const SimState& x) {
    for (std::size_t i = 0; i < x.K(); ++i) {
        if (x.e[i] && x.q[i] > 0) return true;
    }
    return false;
}

class SampleClock {
public:
    SampleClock(const SimOptions& opt) : opt_(opt) {}

    // Time of the next pending observation, +inf when none remain.
    double next() const {
        switch (opt_.sampling) {
            case SampleMode::Grid: return static_cast<double>(k_) * opt_.sample_dt;
            case SampleMode::Times:
                return k_ < opt_.sample_times.size() ? opt_.sample_times[k_]
                                                     : std::numeric_limits<double>::infinity();
            default: return std::numeric_limits<double>::infinity();
        }
    }
    void advance() { ++k_; }

private:
    const SimOptions& opt_;
    std::size_t k_ = 0;
};

void push_sample(Trajectory& tr, double t, const SimState& x) {
    tr.samples.push_back({t, x.q, x.e, x.c});
}

}  // namespace

Trajectory simulate(const SystemParams& params, const DecisionSetting& setting,
                    const Policy& policy, const SimState& initial, double horizon,
                    std::uint64_t seed, const SimOptions& opt) {
    params.validate();
    validate(setting);
    const std::size_t k = params.K();
    validate(policy, k);
    initial.validate(k);
    if (!(horizon > 0.0)) throw SimulationError("horizon must be positive");
    if (std::isinf(horizon) && opt.max_events == 0) {
        throw SimulationError("an infinite horizon needs max_events");
    }
    if (opt.sampling == SampleMode::Grid && !(opt.sample_dt > 0.0)) {
        throw SimulationError("grid sampling needs sample_dt > 0");
    }
    if (opt.sampling == SampleMode::Times &&
        !std::is_sorted(opt.sample_times.begin(), opt.sample_times.end())) {
        throw SimulationError("sample_times must be ascending");
    }

    Engine rng = make_stream(seed, 0);
    SimState x = initial;
    if (environment_frozen(setting)) std::fill(x.e.begin(), x.e.end(), std::uint8_t{1});

    Trajectory tr;
    tr.busy_time.assign(k, 0.0);
    tr.connected_time.assign(k, 0.0);
    tr.effective_time.assign(k, 0.0);
    tr.q_integral.assign(k, 0.0);
    tr.arrivals.assign(k, 0);
    tr.departures.assign(k, 0);

    const bool class_p = is_class_P(policy);
    const bool setting_one = std::holds_alternative<SettingI>(setting);
    const bool setting_two = std::holds_alternative<SettingII>(setting);

    auto choose = [&] {
        const bool ready = any_ready(x);
        Assignment a = decide(policy, x, uniform01(rng));
        ++tr.decisions;
        if (opt.check_invariants && class_p) {
            if (a && !x.e[*a]) throw SimulationError("class-P policy chose a disconnected queue");
            if (ready && !(a && x.q[*a] > 0)) {
                throw SimulationError("class-P policy idled with a connected non-empty queue");
            }
        }
        return a;
    };
    auto committed = [&](const Assignment& a) { return a && x.e[*a] && x.q[*a] > 0; };

    // Setting II: true while a task is in service and the assignment frozen.
    bool in_service = false;
    if (setting_one) {
        x.c = choose();
    } else if (setting_two) {
        in_service = x.c && x.q[*x.c] > 0;
        if (!in_service) {
            x.c = choose();
            in_service = committed(x.c);
        }
    }
    tr.initial_state = x;

    SampleClock clock(opt);
    if (opt.sampling == SampleMode::EveryEvent) push_sample(tr, 0.0, x);

    double t = 0.0;
    while (opt.max_events == 0 || tr.events_processed < opt.max_events) {
        const double rate = total_rate(params, setting, x);
        const double t_next =
            rate > 0.0 ? t + exponential(rng, rate) : std::numeric_limits<double>::infinity();
        const bool stop = t_next > horizon;
        const double end = stop ? horizon : t_next;

        const double dt = end - t;
        for (std::size_t i = 0; i < k; ++i) tr.q_integral[i] += static_cast<double>(x.q[i]) * dt;
        if (x.c) {
            const std::size_t c = *x.c;
            tr.busy_time[c] += dt;
            if (x.e[c]) {
                tr.connected_time[c] += dt;
                if (x.q[c] > 0) tr.effective_time[c] += dt;
            }
        }
        for (double g = clock.next(); stop ? g <= end : g < end; g = clock.next()) {
            push_sample(tr, g, x);
            clock.advance();
        }
        t = end;
        if (stop) break;

        const Event ev = select_event(params, setting, x, rate, uniform01(rng));
        const Assignment before = x.c;
        const bool departed = apply_event(x, ev);
        if (ev.type == EventType::Arrival) ++tr.arrivals[ev.queue];
        if (departed) ++tr.departures[ev.queue];

        bool epoch = false;
        if (setting_one) {
            x.c = choose();
            epoch = true;
        } else if (setting_two) {
            if (departed) in_service = false;
            if (!in_service) {
                x.c = choose();
                epoch = true;
                in_service = committed(x.c);
            }
        } else if (ev.type == EventType::GammaTick) {
            x.c = choose();
            epoch = true;
        }

        ++tr.events_processed;
        if (opt.keep_log) tr.log.push_back({t, ev, before, x.c, epoch, departed});
        if (opt.sampling == SampleMode::EveryEvent) push_sample(tr, t, x);
    }

    tr.final_time = t;
    tr.final_state = x;
    if (opt.check_invariants) {
        for (std::size_t i = 0; i < k; ++i) {
            const auto expected = tr.initial_state.q[i] + static_cast<std::int64_t>(tr.arrivals[i]) -
                                  static_cast<std::int64_t>(tr.departures[i]);
            if (expected != x.q[i]) throw SimulationError("queue-length balance violated");
        }
    }
    return tr;
}

double effective_fraction(const Trajectory& traj, std::size_t i) {
    if (i >= traj.K()) throw SimulationError("queue index out of range");
    if (!(traj.busy_time[i] > 0.0)) {
        throw SimulationError("queue " + std::to_string(i + 1) + " was never served");
    }
    return traj.connected_time[i] / traj.busy_time[i];
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
    const std::size_t k = traj.K();
    out << "t";
    for (std::size_t i = 1; i <= k; ++i) out << ",q" << i;
    for (std::size_t i = 1; i <= k; ++i) out << ",e" << i;
    out << ",c\n";
    char buf[64];
    for (const auto& s : traj.samples) {
        std::snprintf(buf, sizeof buf, "%.17g", s.t);
        out << buf;
        for (auto v : s.q) out << ',' << v;
        for (auto v : s.e) out << ',' << static_cast<int>(v);
        out << ',' << (s.c ? *s.c + 1 : 0) << '\n';
    }
}

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::Stable: return "Stable";
        case Verdict::Unstable: return "Unstable";
        default: return "Inconclusive";
    }
}

SimState fluid_initial_state(const SystemParams& params, const DecisionSetting& setting,
                             const InitialCondition& initial, std::int64_t n, Engine& rng) {
    const std::size_t k = params.K();
    SimState x{std::vector<std::int64_t>(k, 0), std::vector<std::uint8_t>(k, 1), std::nullopt};
    if (initial.shape == InitialShape::Balanced) {
        std::fill(x.q.begin(), x.q.end(), n);
    } else {
        if (initial.queue >= k) throw SimulationError("initial queue index out of range");
        x.q[initial.queue] = n;
    }
    for (std::size_t i = 0; i < k; ++i) {
        const double u = uniform01(rng);
        x.e[i] = environment_frozen(setting) || u < env_stationary(params, i).pi1 ? 1 : 0;
    }
    return x;
}

namespace {

double fluid_max(const Sample& s, double n) {
    const auto m = *std::max_element(s.q.begin(), s.q.end());
    return static_cast<double>(m) / n;
}

}  // namespace

DriftReport drift_estimate(const SystemParams& params, const DecisionSetting& setting,
                           const Policy& policy, const DriftConfig& cfg) {
    if (cfg.scale_n < 100) throw SimulationError("drift estimation needs scale_n >= 100");
    if (cfg.reps < 10) throw SimulationError("drift estimation needs reps >= 10");
    if (!(cfg.t1 >= 0.0 && cfg.t2 > cfg.t1)) {
        throw SimulationError("drift window must satisfy 0 <= t1 < t2");
    }
    const auto n = static_cast<double>(cfg.scale_n);
    SimOptions opt;
    opt.sampling = SampleMode::Times;
    opt.sample_times = {n * cfg.t1, n * cfg.t2};

    std::vector<double> slopes(cfg.reps);
    parallel_for(cfg.reps, cfg.threads, [&](std::size_t r) {
        Engine init_rng = make_stream(cfg.seed, 2 * r);
        const SimState x0 = fluid_initial_state(params, setting, cfg.initial, cfg.scale_n, init_rng);
        const auto tr = simulate(params, setting, policy, x0, n * cfg.t2,
                                 stream_seed(cfg.seed, 2 * r + 1), opt);
        slopes[r] = (fluid_max(tr.samples.at(1), n) - fluid_max(tr.samples.at(0), n)) /
                    (cfg.t2 - cfg.t1);
    });

    const MeanCi ci = mean_ci(slopes, cfg.confidence);
    DriftReport rep;
    rep.scale_n = cfg.scale_n;
    rep.slope = ci.mean;
    rep.ci_lo = ci.lo;
    rep.ci_hi = ci.hi;
    rep.verdict = ci.hi < 0.0   ? Verdict::Stable
                  : ci.lo > 0.0 ? Verdict::Unstable
                                : Verdict::Inconclusive;
    rep.rep_slopes = std::move(slopes);
    return rep;
}

nlohmann::json to_json(const DriftReport& r) {
    return {{"scale_n", r.scale_n},
            {"slope", r.slope},
            {"ci_lo", r.ci_lo},
            {"ci_hi", r.ci_hi},
            {"verdict", to_string(r.verdict)}};
}

TflReport tfl_empirical(const SystemParams& params, const DecisionSetting& setting,
                        const Policy& policy, const TflConfig& cfg) {
    if (!(cfg.delta > 0.0)) throw SimulationError("TFL needs a positive delta candidate");
    if (cfg.scale_n < 1 || cfg.reps < 1) throw SimulationError("TFL needs scale_n, reps >= 1");
    if (!(cfg.grid_dt > 0.0 && cfg.horizon > cfg.grid_dt)) {
        throw SimulationError("TFL needs 0 < grid_dt < horizon");
    }
    if (!(cfg.slack >= 0.0 && cfg.slack < 1.0)) throw SimulationError("slack must lie in [0,1)");

    const auto n = static_cast<double>(cfg.scale_n);
    const double bound = -(1.0 - cfg.slack) * cfg.delta;
    SimOptions opt;
    opt.sampling = SampleMode::Grid;
    opt.sample_dt = n * cfg.grid_dt;

    std::vector<std::vector<TflWindow>> per_rep(cfg.reps);
    parallel_for(cfg.reps, cfg.threads, [&](std::size_t r) {
        Engine init_rng = make_stream(cfg.seed, 2 * r);
        const SimState x0 = fluid_initial_state(params, setting, cfg.initial, cfg.scale_n, init_rng);
        const auto tr = simulate(params, setting, policy, x0, n * cfg.horizon,
                                 stream_seed(cfg.seed, 2 * r + 1), opt);

        const std::size_t m = tr.samples.size();
        std::vector<double> fluid_m(m);
        std::vector<std::uint32_t> leaders(m, 0);
        for (std::size_t j = 0; j < m; ++j) {
            const auto& s = tr.samples[j];
            fluid_m[j] = fluid_max(s, n);
            if (fluid_m[j] <= 0.0) continue;
            const double cut = (1.0 - cfg.leader_tol) * fluid_m[j] * n;
            for (std::size_t i = 0; i < s.q.size(); ++i) {
                if (static_cast<double>(s.q[i]) >= cut) leaders[j] |= (1u << i);
            }
        }
        for (std::size_t a = 0; a < m;) {
            std::size_t b = a;
            while (b + 1 < m && leaders[b + 1] == leaders[a]) ++b;
            const double t1 = tr.samples[a].t / n;
            const double t2 = tr.samples[b].t / n;
            if (leaders[a] != 0 && t2 - t1 >= cfg.min_window - 1e-12) {
                const double slope = (fluid_m[b] - fluid_m[a]) / (t2 - t1);
                per_rep[r].push_back({r, t1, t2, leaders[a], slope, bound - slope, slope <= bound});
            }
            a = b + 1;
        }
    });

    TflReport rep;
    rep.delta = cfg.delta;
    rep.bound = bound;
    for (auto& ws : per_rep) {
        for (auto& w : ws) {
            if (!w.ok) ++rep.failures;
            rep.windows.push_back(w);
        }
    }
    rep.no_window = rep.windows.empty();
    rep.passed = !rep.no_window && rep.failures == 0;
    return rep;
}

nlohmann::json to_json(const TflReport& r) {
    nlohmann::json windows = nlohmann::json::array();
    for (const auto& w : r.windows) {
        nlohmann::json leaders = nlohmann::json::array();
        for (std::size_t i = 0; i < 32; ++i) {
            if (w.leaders & (1u << i)) leaders.push_back(i + 1);
        }
        windows.push_back({{"rep", w.rep},
                           {"t1", w.t1},
                           {"t2", w.t2},
                           {"leaders", leaders},
                           {"slope", w.slope},
                           {"margin", w.margin},
                           {"ok", w.ok}});
    }
    return {{"delta", r.delta},     {"bound", r.bound},   {"failures", r.failures},
            {"no_window", r.no_window}, {"passed", r.passed}, {"windows", windows}};
}

}  // namespace msr
