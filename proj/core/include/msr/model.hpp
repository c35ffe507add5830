#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "msr/rng.hpp"

namespace msr {

// Thrown for malformed parameters, settings, states or configs.
class ModelError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Rates of a K-queue system. Queue indices are 0-based in code and 1-based in
// every user-facing format (configs, CSV headers, JSON subset lists).
struct SystemParams {
    std::vector<double> lambda;    // arrival rates
    std::vector<double> mu;        // service rates
    std::vector<double> lambda_p;  // environment 0 -> 1 (connect) rates
    std::vector<double> mu_p;      // environment 1 -> 0 (disconnect) rates

    std::size_t K() const noexcept { return lambda.size(); }
    double rho(std::size_t i) const { return lambda.at(i) / mu.at(i); }
    std::vector<double> rho_vector() const;

    // Throws ModelError unless all sequences have length K >= 1, mu and the
    // environment rates are strictly positive and arrival rates are >= 0.
    void validate() const;

    static SystemParams from_rho(const std::vector<double>& rho,
                                 const std::vector<double>& lambda_p,
                                 const std::vector<double>& mu_p);
};

struct EnvStationary {
    double pi0;
    double pi1;
};

EnvStationary env_stationary(const SystemParams& params, std::size_t i);

// Copy with every environment rate multiplied by alpha > 0.
SystemParams scale_environment(const SystemParams& params, double alpha);

struct SettingZero {
    double gamma;
};
struct SettingI {};
struct SettingII {};
struct SettingIII {
    double gamma;
};

using DecisionSetting = std::variant<SettingZero, SettingI, SettingII, SettingIII>;

void validate(const DecisionSetting& setting);
// Rate of the independent decision clock; nullopt for Settings I and II.
std::optional<double> gamma_clock(const DecisionSetting& setting) noexcept;
bool environment_frozen(const DecisionSetting& setting) noexcept;  // Setting 0
std::string setting_name(const DecisionSetting& setting);          // zero|one|two|three

// Server assignment: a queue index or the idle mark (nullopt).
using Assignment = std::optional<std::size_t>;

struct SimState {
    std::vector<std::int64_t> q;
    std::vector<std::uint8_t> e;  // 1 = connected
    Assignment c;

    std::size_t K() const noexcept { return q.size(); }
    std::uint32_t connectivity_mask() const noexcept;

    void validate(std::size_t k) const;

    bool operator==(const SimState&) const = default;
};

enum class EventType : std::uint8_t { Arrival, Departure, Connect, Disconnect, GammaTick };

struct Event {
    EventType type;
    std::size_t queue = 0;  // unused for GammaTick

    bool operator==(const Event&) const = default;
};

// A departure clock only runs while the served queue is connected and
// non-empty.
bool effective_service(const SimState& state) noexcept;

// Sum of all active exponential clock rates in `state`.
double total_rate(const SystemParams& params, const DecisionSetting& setting,
                  const SimState& state);

// Samples which clock rings first given that one of them does. `u` is uniform
// on [0,1).
Event select_event(const SystemParams& params, const DecisionSetting& setting,
                   const SimState& state, double total, double u);

// Applies the queue/environment effect of `event`; the assignment is left to
// the decision layer. Departures that are not effective leave the state
// unchanged. Returns true if a task left the system.
bool apply_event(SimState& state, const Event& event);

}  // namespace msr
