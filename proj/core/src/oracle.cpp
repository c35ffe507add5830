#include "msr/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <iomanip>
#include <limits>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

namespace msr {

SimState TruncatedChain::state(std::size_t index) const {
    if (index >= num_states) throw OracleError("state index out of range");
    SimState x;
    x.q.resize(k);
    x.e.resize(k);
    const std::size_t c_index = index % (k + 1);
    index /= k + 1;
    const std::size_t emask = index % (std::size_t{1} << k);
    std::size_t q_index = index >> k;
    for (std::size_t i = 0; i < k; ++i) {
        x.q[i] = static_cast<std::int64_t>(q_index % static_cast<std::size_t>(cap + 1));
        q_index /= static_cast<std::size_t>(cap + 1);
        x.e[i] = (emask >> i) & 1u;
    }
    if (c_index < k) x.c = c_index;
    return x;
}

std::size_t TruncatedChain::index(const SimState& x) const {
    std::size_t q_index = 0;
    for (std::size_t i = k; i-- > 0;) {
        if (x.q[i] < 0 || x.q[i] > cap) throw OracleError("queue length outside the truncation");
        q_index = q_index * static_cast<std::size_t>(cap + 1) + static_cast<std::size_t>(x.q[i]);
    }
    const std::size_t c_index = x.c ? *x.c : k;
    return ((q_index << k) + x.connectivity_mask()) * (k + 1) + c_index;
}

TruncatedChain build_chain(const SystemParams& params, const DecisionSetting& setting,
                           const Policy& policy, std::int64_t cap) {
    params.validate();
    validate(setting);
    const std::size_t k = params.K();
    validate(policy, k);
    if (!is_deterministic(policy)) throw OracleError("the oracle needs a deterministic policy");
    if (std::holds_alternative<SettingII>(setting) && !is_class_P(policy)) {
        throw OracleError("the Setting II oracle needs a class-P policy");
    }
    if (cap < 0) throw OracleError("cap must be non-negative");

    double count = static_cast<double>(k + 1);
    for (std::size_t i = 0; i < k; ++i) count *= 2.0 * static_cast<double>(cap + 1);
    if (count > static_cast<double>(kOracleMaxStates)) {
        throw OracleError("state space of " + std::to_string(static_cast<long long>(count)) +
                          " states exceeds the oracle limit");
    }

    TruncatedChain chain;
    chain.k = k;
    chain.cap = cap;
    chain.num_states = static_cast<std::size_t>(count);
    chain.exit_rate.assign(chain.num_states, 0.0);

    const bool setting_one = std::holds_alternative<SettingI>(setting);
    const bool setting_two = std::holds_alternative<SettingII>(setting);
    const auto gamma = gamma_clock(setting);
    const bool env_moves = !environment_frozen(setting);

    std::vector<std::pair<std::size_t, double>> row;
    for (std::size_t from = 0; from < chain.num_states; ++from) {
        const SimState x = chain.state(from);
        const bool frozen = x.c && x.q[*x.c] > 0;
        row.clear();
        auto add = [&](SimState y, double rate, bool departed) {
            if (!(rate > 0.0)) return;
            if (setting_one || (setting_two && (departed || !frozen))) y.c = decide(policy, y, 0.0);
            const std::size_t to = chain.index(y);
            if (to == from) return;
            for (auto& [j, r] : row) {
                if (j == to) {
                    r += rate;
                    return;
                }
            }
            row.emplace_back(to, rate);
        };
        for (std::size_t i = 0; i < k; ++i) {
            if (x.q[i] < cap) {
                SimState y = x;
                ++y.q[i];
                add(std::move(y), params.lambda[i], false);
            }
            if (env_moves) {
                SimState y = x;
                y.e[i] ^= 1u;
                add(std::move(y), x.e[i] ? params.mu_p[i] : params.lambda_p[i], false);
            }
        }
        if (effective_service(x)) {
            SimState y = x;
            --y.q[*x.c];
            add(std::move(y), params.mu[*x.c], true);
        }
        if (gamma) {
            SimState y = x;
            y.c = decide(policy, x, 0.0);
            add(std::move(y), *gamma, false);
        }
        std::sort(row.begin(), row.end());
        for (const auto& [to, rate] : row) {
            chain.transitions.push_back({from, to, rate});
            chain.exit_rate[from] += rate;
        }
    }

    SimState start;
    start.q.assign(k, 0);
    start.e.assign(k, 1);
    chain.start = chain.index(start);

    // Transitions are grouped by source, so row offsets give adjacency.
    std::vector<std::size_t> offset(chain.num_states + 1, 0);
    for (const auto& t : chain.transitions) ++offset[t.from + 1];
    for (std::size_t s = 0; s < chain.num_states; ++s) offset[s + 1] += offset[s];
    chain.reachable.assign(chain.num_states, false);
    std::deque<std::size_t> frontier{chain.start};
    chain.reachable[chain.start] = true;
    while (!frontier.empty()) {
        const std::size_t s = frontier.front();
        frontier.pop_front();
        for (std::size_t j = offset[s]; j < offset[s + 1]; ++j) {
            const std::size_t to = chain.transitions[j].to;
            if (!chain.reachable[to]) {
                chain.reachable[to] = true;
                frontier.push_back(to);
            }
        }
    }
    return chain;
}

double generator_row_sum_error(const TruncatedChain& chain) {
    std::vector<double> sums(chain.num_states, 0.0);
    for (const auto& t : chain.transitions) sums[t.from] += t.rate;
    double worst = 0.0;
    for (std::size_t s = 0; s < chain.num_states; ++s) {
        worst = std::max(worst, std::abs(sums[s] - chain.exit_rate[s]));
    }
    return worst;
}

namespace {

double balance_residual(const TruncatedChain& chain, const std::vector<double>& pi) {
    std::vector<double> flow(chain.num_states, 0.0);
    for (const auto& t : chain.transitions) flow[t.to] += pi[t.from] * t.rate;
    double worst = 0.0;
    for (std::size_t s = 0; s < chain.num_states; ++s) {
        worst = std::max(worst, std::abs(flow[s] - pi[s] * chain.exit_rate[s]));
    }
    return worst;
}

Stationary solve_lu(const TruncatedChain& chain) {
    std::vector<std::ptrdiff_t> local(chain.num_states, -1);
    std::vector<std::size_t> global;
    for (std::size_t s = 0; s < chain.num_states; ++s) {
        if (chain.reachable[s]) {
            local[s] = static_cast<std::ptrdiff_t>(global.size());
            global.push_back(s);
        }
    }
    const auto m = static_cast<Eigen::Index>(global.size());

    // Balance equations Q^T pi = 0 with the last one replaced by sum pi = 1.
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(chain.transitions.size() + 2 * global.size());
    const Eigen::Index last = m - 1;
    for (const auto& t : chain.transitions) {
        if (local[t.from] < 0) continue;
        const auto row = static_cast<Eigen::Index>(local[t.to]);
        if (row != last) entries.emplace_back(row, local[t.from], t.rate);
    }
    for (Eigen::Index j = 0; j < m; ++j) {
        if (j != last) entries.emplace_back(j, j, -chain.exit_rate[global[j]]);
        entries.emplace_back(last, j, 1.0);
    }
    Eigen::SparseMatrix<double> a(m, m);
    a.setFromTriplets(entries.begin(), entries.end());
    a.makeCompressed();

    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success) throw OracleError("sparse LU factorization failed");
    Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
    b[last] = 1.0;
    const Eigen::VectorXd x = lu.solve(b);
    if (lu.info() != Eigen::Success) throw OracleError("sparse LU solve failed");

    Stationary st;
    st.pi.assign(chain.num_states, 0.0);
    for (Eigen::Index j = 0; j < m; ++j) st.pi[global[j]] = std::max(x[j], 0.0);
    double total = 0.0;
    for (double p : st.pi) total += p;
    for (double& p : st.pi) p /= total;
    st.iterations = 1;
    return st;
}

Stationary solve_power(const TruncatedChain& chain, const StationaryOptions& opts) {
    double lambda = 0.0;
    std::size_t m = 0;
    for (std::size_t s = 0; s < chain.num_states; ++s) {
        if (chain.reachable[s]) {
            lambda = std::max(lambda, chain.exit_rate[s]);
            ++m;
        }
    }
    Stationary st;
    st.pi.assign(chain.num_states, 0.0);
    for (std::size_t s = 0; s < chain.num_states; ++s) {
        if (chain.reachable[s]) st.pi[s] = 1.0 / static_cast<double>(m);
    }
    if (lambda == 0.0) return st;
    // Uniformized chain with a self-loop everywhere, hence aperiodic.
    lambda *= 1.05;
    std::vector<double> next(chain.num_states);
    for (st.iterations = 1; st.iterations <= opts.max_iterations; ++st.iterations) {
        for (std::size_t s = 0; s < chain.num_states; ++s) {
            next[s] = st.pi[s] * (1.0 - chain.exit_rate[s] / lambda);
        }
        for (const auto& t : chain.transitions) next[t.to] += st.pi[t.from] * t.rate / lambda;
        double change = 0.0;
        double total = 0.0;
        for (std::size_t s = 0; s < chain.num_states; ++s) total += next[s];
        for (std::size_t s = 0; s < chain.num_states; ++s) {
            next[s] /= total;
            change += std::abs(next[s] - st.pi[s]);
        }
        st.pi.swap(next);
        if (change < opts.tol) return st;
    }
    throw OracleError("power iteration did not converge");
}

}  // namespace

Stationary solve_stationary(const TruncatedChain& chain, const StationaryOptions& opts) {
    if (chain.num_states == 0) throw OracleError("empty chain");
    Stationary st = opts.method == StationaryMethod::SparseLU ? solve_lu(chain)
                                                              : solve_power(chain, opts);
    st.residual = balance_residual(chain, st.pi);
    return st;
}

double stationary_tail_mass(const TruncatedChain& chain, const Stationary& st,
                            std::int64_t threshold) {
    double mass = 0.0;
    for (std::size_t s = 0; s < chain.num_states; ++s) {
        if (st.pi[s] == 0.0) continue;
        const SimState x = chain.state(s);
        if (*std::max_element(x.q.begin(), x.q.end()) >= threshold) mass += st.pi[s];
    }
    return std::min(mass, 1.0);
}

double stationary_tail_mass(const TruncatedChain& chain, std::int64_t threshold) {
    return stationary_tail_mass(chain, solve_stationary(chain), threshold);
}

std::vector<double> stationary_mean_q(const TruncatedChain& chain, const Stationary& st) {
    std::vector<double> mean(chain.k, 0.0);
    for (std::size_t s = 0; s < chain.num_states; ++s) {
        if (st.pi[s] == 0.0) continue;
        const SimState x = chain.state(s);
        for (std::size_t i = 0; i < chain.k; ++i) mean[i] += st.pi[s] * static_cast<double>(x.q[i]);
    }
    return mean;
}

namespace {
// Masses closer than this to 0 (or 1) are solver round-off.
constexpr double kTailFloor = 1e-10;
}  // namespace

OracleStability oracle_stability(const SystemParams& params, const DecisionSetting& setting,
                                 const Policy& policy, const std::vector<std::int64_t>& caps) {
    if (caps.size() < 2 || !std::is_sorted(caps.begin(), caps.end()) ||
        std::adjacent_find(caps.begin(), caps.end()) != caps.end() || caps.front() < 2) {
        throw OracleError("need at least two increasing caps >= 2");
    }
    OracleStability out;
    out.caps = caps;
    for (auto cap : caps) {
        out.tail.push_back(stationary_tail_mass(build_chain(params, setting, policy, cap), cap / 2));
    }
    bool falling = true;
    bool rising = true;
    for (std::size_t j = 1; j < out.tail.size(); ++j) {
        falling = falling && (out.tail[j] < out.tail[j - 1] || out.tail[j] < kTailFloor);
        rising = rising && (out.tail[j] > out.tail[j - 1] || 1.0 - out.tail[j] < kTailFloor);
    }
    out.verdict = falling ? Verdict::Stable : rising ? Verdict::Unstable : Verdict::Inconclusive;
    return out;
}

void write_triplets(std::ostream& out, const TruncatedChain& chain) {
    out << "# states " << chain.num_states << " K " << chain.k << " cap " << chain.cap << '\n';
    out << std::setprecision(17);
    std::size_t j = 0;
    for (std::size_t s = 0; s < chain.num_states; ++s) {
        bool diagonal = false;
        for (; j < chain.transitions.size() && chain.transitions[j].from == s; ++j) {
            const auto& t = chain.transitions[j];
            if (!diagonal && t.to > s) {
                out << s << ' ' << s << ' ' << -chain.exit_rate[s] << '\n';
                diagonal = true;
            }
            out << t.from << ' ' << t.to << ' ' << t.rate << '\n';
        }
        if (!diagonal) out << s << ' ' << s << ' ' << -chain.exit_rate[s] << '\n';
    }
}

void write_stationary(std::ostream& out, const TruncatedChain& chain, const Stationary& st) {
    out << "# index";
    for (std::size_t i = 1; i <= chain.k; ++i) out << " q" << i;
    for (std::size_t i = 1; i <= chain.k; ++i) out << " e" << i;
    out << " c probability\n" << std::setprecision(17);
    for (std::size_t s = 0; s < chain.num_states; ++s) {
        if (!chain.reachable[s]) continue;
        const SimState x = chain.state(s);
        out << s;
        for (auto v : x.q) out << ' ' << v;
        for (auto v : x.e) out << ' ' << static_cast<int>(v);
        out << ' ' << (x.c ? *x.c + 1 : 0) << ' ' << st.pi[s] << '\n';
    }
}

}  // namespace msr
