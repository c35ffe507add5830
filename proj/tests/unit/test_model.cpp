#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <map>

#include "msr/model.hpp"
#include "msr/rng.hpp"

using namespace msr;

namespace {

SystemParams two_queue() {
    return {{0.3, 0.2}, {1.0, 2.0}, {1.0, 0.5}, {2.0, 1.5}};
}

}  // namespace

TEST(Model, EnvStationaryMatchesTwoStateBalance) {
    const auto p = two_queue();
    // pi(1) = lambda' / (lambda' + mu')
    EXPECT_DOUBLE_EQ(env_stationary(p, 0).pi1, 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(env_stationary(p, 0).pi0, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(env_stationary(p, 1).pi1, 0.25);
    EXPECT_THROW(env_stationary(p, 2), ModelError);
}

TEST(Model, ValidateRejectsBadRates) {
    auto p = two_queue();
    EXPECT_NO_THROW(p.validate());
    p.mu[1] = 0.0;
    EXPECT_THROW(p.validate(), ModelError);
    p = two_queue();
    p.lambda[0] = -0.1;
    EXPECT_THROW(p.validate(), ModelError);
    p = two_queue();
    p.lambda_p.pop_back();
    EXPECT_THROW(p.validate(), ModelError);
    p = two_queue();
    p.mu_p[0] = std::nan("");
    EXPECT_THROW(p.validate(), ModelError);
    EXPECT_THROW(SystemParams{}.validate(), ModelError);
}

TEST(Model, ZeroArrivalRateIsAllowed) {
    SystemParams p{{0.0}, {1.0}, {1.0}, {1.0}};
    EXPECT_NO_THROW(p.validate());
}

TEST(Model, FromRhoUsesUnitServiceRates) {
    const auto p = SystemParams::from_rho({0.3, 0.1}, {1, 1}, {1, 1});
    EXPECT_EQ(p.mu, (std::vector<double>{1.0, 1.0}));
    EXPECT_EQ(p.rho_vector(), (std::vector<double>{0.3, 0.1}));
}

TEST(Model, ScaleEnvironmentKeepsStationaryLaw) {
    const auto p = two_queue();
    const auto q = scale_environment(p, 7.5);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_NEAR(env_stationary(q, i).pi1, env_stationary(p, i).pi1, 1e-15);
        EXPECT_DOUBLE_EQ(q.lambda_p[i], 7.5 * p.lambda_p[i]);
    }
    EXPECT_THROW(scale_environment(p, 0.0), ModelError);
}

TEST(Model, SettingValidationAndNames) {
    EXPECT_THROW(validate(DecisionSetting{SettingIII{0.0}}), ModelError);
    EXPECT_THROW(validate(DecisionSetting{SettingZero{-1.0}}), ModelError);
    EXPECT_NO_THROW(validate(DecisionSetting{SettingIII{2.0}}));
    EXPECT_EQ(setting_name(SettingZero{1.0}), "zero");
    EXPECT_EQ(setting_name(SettingI{}), "one");
    EXPECT_EQ(setting_name(SettingII{}), "two");
    EXPECT_EQ(setting_name(SettingIII{1.0}), "three");
    EXPECT_FALSE(gamma_clock(SettingI{}).has_value());
    EXPECT_EQ(*gamma_clock(SettingIII{3.0}), 3.0);
    EXPECT_TRUE(environment_frozen(SettingZero{1.0}));
    EXPECT_FALSE(environment_frozen(SettingIII{1.0}));
}

TEST(Model, StateValidation) {
    SimState s{{1, 0}, {1, 0}, 1};
    EXPECT_NO_THROW(s.validate(2));
    EXPECT_EQ(s.connectivity_mask(), 1u);
    EXPECT_THROW(s.validate(3), ModelError);
    s.c = 2;
    EXPECT_THROW(s.validate(2), ModelError);
    s = {{-1, 0}, {1, 0}, {}};
    EXPECT_THROW(s.validate(2), ModelError);
    s = {{0, 0}, {2, 0}, {}};
    EXPECT_THROW(s.validate(2), ModelError);
}

TEST(Model, EffectiveServiceNeedsConnectedNonEmptyQueue) {
    EXPECT_TRUE(effective_service({{1, 0}, {1, 0}, 0}));
    EXPECT_FALSE(effective_service({{1, 0}, {0, 1}, 0}));
    EXPECT_FALSE(effective_service({{0, 3}, {1, 1}, 0}));
    EXPECT_FALSE(effective_service({{2, 3}, {1, 1}, {}}));
}

TEST(Model, TotalRateSumsActiveClocks) {
    const auto p = two_queue();
    const SimState s{{2, 0}, {1, 0}, 0};
    // arrivals 0.5, env: queue 1 connected -> mu'_1 = 2, queue 2 off -> lambda'_2 = 0.5,
    // service mu_1 = 1
    EXPECT_DOUBLE_EQ(total_rate(p, SettingI{}, s), 0.5 + 2.0 + 0.5 + 1.0);
    EXPECT_DOUBLE_EQ(total_rate(p, SettingIII{3.0}, s), 0.5 + 2.0 + 0.5 + 1.0 + 3.0);
    // permanent connectivity: no environment clocks
    const SimState z{{2, 0}, {1, 1}, 0};
    EXPECT_DOUBLE_EQ(total_rate(p, SettingZero{3.0}, z), 0.5 + 1.0 + 3.0);
    // service paused while disconnected
    const SimState d{{2, 0}, {0, 0}, 0};
    EXPECT_DOUBLE_EQ(total_rate(p, SettingI{}, d), 0.5 + 1.0 + 0.5);
}

TEST(Model, SelectEventFrequenciesFollowRates) {
    const auto p = two_queue();
    const SimState s{{2, 1}, {1, 0}, 0};
    const DecisionSetting setting = SettingIII{1.5};
    const double total = total_rate(p, setting, s);
    std::map<std::pair<int, std::size_t>, int> counts;
    Engine rng = make_stream(9, 0);
    const int n = 200000;
    for (int j = 0; j < n; ++j) {
        const auto ev = select_event(p, setting, s, total, uniform01(rng));
        ++counts[{static_cast<int>(ev.type), ev.queue}];
    }
    const std::map<std::pair<int, std::size_t>, double> rates{
        {{static_cast<int>(EventType::Arrival), 0}, 0.3},
        {{static_cast<int>(EventType::Arrival), 1}, 0.2},
        {{static_cast<int>(EventType::Disconnect), 0}, 2.0},
        {{static_cast<int>(EventType::Connect), 1}, 0.5},
        {{static_cast<int>(EventType::Departure), 0}, 1.0},
        {{static_cast<int>(EventType::GammaTick), 0}, 1.5},
    };
    int seen = 0;
    for (const auto& [key, rate] : rates) {
        const double expected = n * rate / total;
        EXPECT_NEAR(counts[key], expected, 5.0 * std::sqrt(expected)) << key.first << "/" << key.second;
        seen += counts[key];
    }
    EXPECT_EQ(seen, n);
}

TEST(Model, SelectEventEdgeDraws) {
    const auto p = two_queue();
    const SimState s{{0, 0}, {1, 1}, {}};
    const double total = total_rate(p, SettingI{}, s);
    EXPECT_EQ(select_event(p, SettingI{}, s, total, 0.0).type, EventType::Arrival);
    const auto last = select_event(p, SettingI{}, s, total, std::nextafter(1.0, 0.0));
    EXPECT_EQ(last.type, EventType::Disconnect);
    EXPECT_EQ(last.queue, 1u);
}

TEST(Model, ApplyEventEffects) {
    SimState s{{1, 0}, {1, 1}, 0};
    EXPECT_FALSE(apply_event(s, {EventType::Arrival, 1}));
    EXPECT_EQ(s.q[1], 1);
    EXPECT_TRUE(apply_event(s, {EventType::Departure, 0}));
    EXPECT_EQ(s.q[0], 0);
    EXPECT_FALSE(apply_event(s, {EventType::Departure, 0}));
    EXPECT_EQ(s.q[0], 0);
    EXPECT_FALSE(apply_event(s, {EventType::Disconnect, 1}));
    EXPECT_EQ(s.e[1], 0);
    EXPECT_FALSE(apply_event(s, {EventType::Connect, 1}));
    EXPECT_EQ(s.e[1], 1);
    const SimState before = s;
    EXPECT_FALSE(apply_event(s, {EventType::GammaTick, 0}));
    EXPECT_EQ(s, before);
}

TEST(Rng, StreamsAreDeterministicAndDistinct) {
    Engine a = make_stream(5, 0), b = make_stream(5, 0), c = make_stream(5, 1);
    EXPECT_EQ(a(), b());
    EXPECT_NE(make_stream(5, 0)(), c());
    Engine u = make_stream(1, 2);
    for (int j = 0; j < 1000; ++j) {
        const double x = uniform01(u);
        ASSERT_GE(x, 0.0);
        ASSERT_LT(x, 1.0);
    }
}

TEST(Rng, ExponentialMean) {
    Engine e = make_stream(3, 3);
    double sum = 0.0;
    const int n = 200000;
    for (int j = 0; j < n; ++j) sum += exponential(e, 2.5);
    EXPECT_NEAR(sum / n, 0.4, 5.0 * 0.4 / std::sqrt(n));
}
