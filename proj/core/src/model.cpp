#include "msr/model.hpp"

#include <cmath>

namespace msr {

namespace {

void require_positive(const std::vector<double>& v, const char* name) {
    for (double x : v) {
        if (!(x > 0.0) || !std::isfinite(x)) {
            throw ModelError(std::string(name) + " must contain finite positive rates");
        }
    }
}

}  // namespace

std::vector<double> SystemParams::rho_vector() const {
    std::vector<double> r(K());
    for (std::size_t i = 0; i < K(); ++i) r[i] = rho(i);
    return r;
}

void SystemParams::validate() const {
    const std::size_t k = K();
    if (k == 0) throw ModelError("K must be at least 1");
    if (k > 31) throw ModelError("K must be at most 31");
    if (mu.size() != k || lambda_p.size() != k || mu_p.size() != k) {
        throw ModelError("lambda, mu, lambda_p and mu_p must all have length K");
    }
    for (double x : lambda) {
        if (!(x >= 0.0) || !std::isfinite(x)) {
            throw ModelError("lambda must contain finite non-negative rates");
        }
    }
    require_positive(mu, "mu");
    require_positive(lambda_p, "lambda_p");
    require_positive(mu_p, "mu_p");
}

SystemParams SystemParams::from_rho(const std::vector<double>& rho,
                                    const std::vector<double>& lambda_p,
                                    const std::vector<double>& mu_p) {
    SystemParams p{rho, std::vector<double>(rho.size(), 1.0), lambda_p, mu_p};
    p.validate();
    return p;
}

EnvStationary env_stationary(const SystemParams& params, std::size_t i) {
    if (i >= params.K()) throw ModelError("queue index out of range");
    const double sum = params.lambda_p[i] + params.mu_p[i];
    const double pi1 = params.lambda_p[i] / sum;
    return {1.0 - pi1, pi1};
}

SystemParams scale_environment(const SystemParams& params, double alpha) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
        throw ModelError("environment speed factor must be positive");
    }
    SystemParams out = params;
    for (auto& x : out.lambda_p) x *= alpha;
    for (auto& x : out.mu_p) x *= alpha;
    return out;
}

void validate(const DecisionSetting& setting) {
    if (auto g = gamma_clock(setting); g && !(*g > 0.0 && std::isfinite(*g))) {
        throw ModelError("gamma must be a finite positive rate");
    }
}

std::optional<double> gamma_clock(const DecisionSetting& setting) noexcept {
    if (auto* s = std::get_if<SettingZero>(&setting)) return s->gamma;
    if (auto* s = std::get_if<SettingIII>(&setting)) return s->gamma;
    return std::nullopt;
}

bool environment_frozen(const DecisionSetting& setting) noexcept {
    return std::holds_alternative<SettingZero>(setting);
}

std::string setting_name(const DecisionSetting& setting) {
    switch (setting.index()) {
        case 0: return "zero";
        case 1: return "one";
        case 2: return "two";
        default: return "three";
    }
}

std::uint32_t SimState::connectivity_mask() const noexcept {
    std::uint32_t m = 0;
    for (std::size_t i = 0; i < e.size(); ++i) {
        if (e[i]) m |= (1u << i);
    }
    return m;
}

void SimState::validate(std::size_t k) const {
    if (q.size() != k || e.size() != k) throw ModelError("state dimension does not match K");
    for (auto x : q) {
        if (x < 0) throw ModelError("queue lengths must be non-negative");
    }
    for (auto x : e) {
        if (x > 1) throw ModelError("connectivity flags must be 0 or 1");
    }
    if (c && *c >= k) throw ModelError("server assignment out of range");
}

bool effective_service(const SimState& s) noexcept {
    return s.c && s.e[*s.c] && s.q[*s.c] > 0;
}

double total_rate(const SystemParams& params, const DecisionSetting& setting,
                  const SimState& state) {
    double r = 0.0;
    const bool env = !environment_frozen(setting);
    for (std::size_t i = 0; i < params.K(); ++i) {
        r += params.lambda[i];
        if (env) r += state.e[i] ? params.mu_p[i] : params.lambda_p[i];
    }
    if (effective_service(state)) r += params.mu[*state.c];
    if (auto g = gamma_clock(setting)) r += *g;
    return r;
}

Event select_event(const SystemParams& params, const DecisionSetting& setting,
                   const SimState& state, double total, double u) {
    // Clocks are visited in a fixed order: arrivals, environments, service,
    // decision clock. If rounding carries x past the end, the last active
    // clock is returned.
    double x = u * total;
    Event last{EventType::Arrival, 0};
    auto rings = [&](double rate, Event ev) {
        if (!(rate > 0.0)) return false;
        last = ev;
        if (x < rate) return true;
        x -= rate;
        return false;
    };
    const std::size_t k = params.K();
    for (std::size_t i = 0; i < k; ++i) {
        if (rings(params.lambda[i], {EventType::Arrival, i})) return last;
    }
    if (!environment_frozen(setting)) {
        for (std::size_t i = 0; i < k; ++i) {
            const bool up = state.e[i] != 0;
            if (rings(up ? params.mu_p[i] : params.lambda_p[i],
                      {up ? EventType::Disconnect : EventType::Connect, i})) {
                return last;
            }
        }
    }
    if (effective_service(state) &&
        rings(params.mu[*state.c], {EventType::Departure, *state.c})) {
        return last;
    }
    if (auto g = gamma_clock(setting)) rings(*g, {EventType::GammaTick, 0});
    return last;
}

bool apply_event(SimState& state, const Event& ev) {
    switch (ev.type) {
        case EventType::Arrival:
            ++state.q[ev.queue];
            return false;
        case EventType::Departure:
            if (state.c == ev.queue && effective_service(state)) {
                --state.q[ev.queue];
                return true;
            }
            return false;
        case EventType::Connect:
            state.e[ev.queue] = 1;
            return false;
        case EventType::Disconnect:
            state.e[ev.queue] = 0;
            return false;
        case EventType::GammaTick:
            return false;
    }
    return false;
}

}  // namespace msr
