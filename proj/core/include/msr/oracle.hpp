#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

#include "msr/engine.hpp"
#include "msr/model.hpp"
#include "msr/policies.hpp"

namespace msr {

class OracleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kOracleMaxStates = 2'000'000;

struct Transition {
    std::size_t from;
    std::size_t to;
    double rate;
};

// Finite projection of the CTMC with every queue capped at `cap`; arrivals to
// a full queue are lost. States are (q, e, c) indexed by
// ((q_index * 2^K + e_mask) * (K + 1) + c_index), where c_index = K is idle.
struct TruncatedChain {
    std::size_t k = 0;
    std::int64_t cap = 0;
    std::size_t num_states = 0;
    std::vector<Transition> transitions;  // off-diagonal, no self-loops
    std::vector<double> exit_rate;        // minus the diagonal of the generator
    std::vector<bool> reachable;          // from the empty, connected, idle state
    std::size_t start = 0;

    SimState state(std::size_t index) const;
    std::size_t index(const SimState& state) const;
};

// Decisions follow the simulator exactly: Setting I re-decides after every
// event, Setting III (and 0) on decision-clock transitions, and Setting II
// whenever no task is in service. Setting II needs a class-P policy, since
// then "in service" is the state predicate c set and q_c > 0.
TruncatedChain build_chain(const SystemParams& params, const DecisionSetting& setting,
                           const Policy& policy, std::int64_t cap);

// Largest |row sum| of the generator.
double generator_row_sum_error(const TruncatedChain& chain);

enum class StationaryMethod : std::uint8_t { SparseLU, Power };

struct StationaryOptions {
    StationaryMethod method = StationaryMethod::SparseLU;
    double tol = 1e-12;                   // power iteration: L1 change per sweep
    std::uint64_t max_iterations = 2'000'000;
};

struct Stationary {
    std::vector<double> pi;  // one entry per state; zero off the reachable set
    double residual = 0.0;   // max |(pi Q)_j|
    std::uint64_t iterations = 0;
};

// Solves pi Q = 0, sum pi = 1 on the reachable states.
Stationary solve_stationary(const TruncatedChain& chain, const StationaryOptions& opts = {});

// Stationary mass of states with max_i q_i >= threshold.
double stationary_tail_mass(const TruncatedChain& chain, const Stationary& st,
                            std::int64_t threshold);
double stationary_tail_mass(const TruncatedChain& chain, std::int64_t threshold);

std::vector<double> stationary_mean_q(const TruncatedChain& chain, const Stationary& st);

struct OracleStability {
    Verdict verdict = Verdict::Inconclusive;
    std::vector<std::int64_t> caps;
    std::vector<double> tail;  // mass with max q >= cap / 2, per cap
};

// Stable when the tail mass falls with every increase of the cap, unstable
// when it grows with every increase; steps at round-off distance from 0 (or
// from 1) count as falling (or growing).
OracleStability oracle_stability(const SystemParams& params, const DecisionSetting& setting,
                                 const Policy& policy, const std::vector<std::int64_t>& caps);

// `from to rate` lines, diagonal included.
void write_triplets(std::ostream& out, const TruncatedChain& chain);
// `index q_1..q_K e_1..e_K c probability` lines for the reachable states.
void write_stationary(std::ostream& out, const TruncatedChain& chain, const Stationary& st);

}  // namespace msr
