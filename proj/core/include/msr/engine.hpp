#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

#include <nlohmann/json.hpp>

#include "msr/model.hpp"
#include "msr/policies.hpp"

namespace msr {

class SimulationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Sample {
    double t;
    std::vector<std::int64_t> q;
    std::vector<std::uint8_t> e;
    Assignment c;
};

enum class SampleMode : std::uint8_t {
    None,
    EveryEvent,  // the initial state plus the state after every event
    Grid,        // the state at t = 0, dt, 2dt, ... <= horizon
    Times,       // the state at each of `sample_times` (ascending, <= horizon)
};

struct SimOptions {
    SampleMode sampling = SampleMode::EveryEvent;
    double sample_dt = 1.0;
    std::vector<double> sample_times;
    std::uint64_t max_events = 0;  // 0 = stop only at the horizon
    bool keep_log = false;
    bool check_invariants = true;
};

struct LogEntry {
    double t;
    Event event;
    Assignment c_before;
    Assignment c_after;
    bool decision_epoch;  // decide() ran after this event
    bool departed;        // a task left the system
};

struct Trajectory {
    std::vector<Sample> samples;
    std::uint64_t events_processed = 0;
    std::uint64_t decisions = 0;
    double final_time = 0.0;
    SimState initial_state;
    SimState final_state;
    std::vector<double> busy_time;       // time with c = i
    std::vector<double> connected_time;  // time with c = i and e_i = 1
    std::vector<double> effective_time;  // time with c = i, e_i = 1, q_i > 0
    std::vector<double> q_integral;      // integral of q_i over [0, final_time]
    std::vector<std::uint64_t> arrivals;
    std::vector<std::uint64_t> departures;
    std::vector<LogEntry> log;

    std::size_t K() const noexcept { return busy_time.size(); }
};

// Exact sample path of the CTMC up to `horizon` (or until max_events), with
// decision epochs per setting:
//   I    decide after every event;
//   II   decide whenever no task is in service (after an effective departure,
//        and after every event while the window stays open); a task enters
//        service when the chosen queue is connected and non-empty, and the
//        assignment is then frozen until that task departs;
//   III  decide at decision-clock ticks only;
//   0    as III with all environments permanently connected.
Trajectory simulate(const SystemParams& params, const DecisionSetting& setting,
                    const Policy& policy, const SimState& initial, double horizon,
                    std::uint64_t seed, const SimOptions& options = {});

// Fraction of the time dedicated to queue i during which it was connected.
double effective_fraction(const Trajectory& traj, std::size_t i);

// Columns t,q1..qK,e1..eK,c; c is 1-based with 0 for the idle mark.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);

enum class Verdict : std::uint8_t { Stable, Unstable, Inconclusive };
std::string to_string(Verdict v);

enum class InitialShape : std::uint8_t {
    SingleQueue,  // q_queue = n, all others empty
    Balanced,     // every queue holds n tasks
};

struct InitialCondition {
    InitialShape shape = InitialShape::SingleQueue;
    std::size_t queue = 0;
};

// Fluid-scale start with sup-norm n: environments drawn from their stationary
// laws (all connected in Setting 0) and the server idle.
SimState fluid_initial_state(const SystemParams& params, const DecisionSetting& setting,
                             const InitialCondition& initial, std::int64_t n, Engine& rng);

struct DriftConfig {
    std::int64_t scale_n = 10000;
    std::size_t reps = 20;
    double t1 = 0.1;
    double t2 = 0.6;
    std::uint64_t seed = 1;
    double confidence = 0.95;
    InitialCondition initial{};
    unsigned threads = 0;
};

struct DriftReport {
    std::int64_t scale_n = 0;
    double slope = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    Verdict verdict = Verdict::Inconclusive;
    std::vector<double> rep_slopes;
};

// Mean slope of the fluid-scaled max function over [t1, t2] across
// independent replications, with a Student-t interval.
DriftReport drift_estimate(const SystemParams& params, const DecisionSetting& setting,
                           const Policy& policy, const DriftConfig& cfg);

nlohmann::json to_json(const DriftReport& report);

struct TflConfig {
    double delta = 0.0;
    std::int64_t scale_n = 10000;
    std::size_t reps = 20;
    std::uint64_t seed = 1;
    double horizon = 1.0;     // fluid time
    double grid_dt = 0.01;    // fluid time between observations
    double leader_tol = 0.02; // relative band defining the leader set
    double min_window = 0.1;  // shortest window that is tested
    double slack = 0.5;       // required drift is -(1 - slack) * delta
    InitialCondition initial{};
    unsigned threads = 0;
};

struct TflWindow {
    std::size_t rep;
    double t1;
    double t2;
    std::uint32_t leaders;
    double slope;
    double margin;  // bound - slope; negative means the window failed
    bool ok;
};

struct TflReport {
    double delta = 0.0;
    double bound = 0.0;  // -(1 - slack) * delta
    std::size_t failures = 0;
    bool no_window = false;
    bool passed = false;
    std::vector<TflWindow> windows;
};

// Empirical drift test on maximal windows where the leader set (queues within
// leader_tol of the fluid max) is constant: every window must satisfy
// slope <= -(1 - slack) * delta.
TflReport tfl_empirical(const SystemParams& params, const DecisionSetting& setting,
                        const Policy& policy, const TflConfig& cfg);

nlohmann::json to_json(const TflReport& report);

}  // namespace msr
