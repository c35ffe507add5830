#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "msr/engine.hpp"
#include "msr/regions.hpp"

using namespace msr;

namespace {

SystemParams sym(double rho, std::size_t k = 2) {
    return SystemParams::from_rho(std::vector<double>(k, rho), std::vector<double>(k, 1.0),
                                  std::vector<double>(k, 1.0));
}

SimState empty_state(std::size_t k) {
    return {std::vector<std::int64_t>(k, 0), std::vector<std::uint8_t>(k, 1), {}};
}

SimOptions logged() {
    SimOptions o;
    o.keep_log = true;
    return o;
}

}  // namespace

TEST(Engine, SameSeedSamePath) {
    const auto p = sym(0.3, 3);
    const auto a = simulate(p, SettingIII{1.0}, Slc{}, empty_state(3), 200.0, 42);
    const auto b = simulate(p, SettingIII{1.0}, Slc{}, empty_state(3), 200.0, 42);
    ASSERT_EQ(a.samples.size(), b.samples.size());
    for (std::size_t j = 0; j < a.samples.size(); ++j) {
        ASSERT_EQ(a.samples[j].t, b.samples[j].t);
        ASSERT_EQ(a.samples[j].q, b.samples[j].q);
        ASSERT_EQ(a.samples[j].c, b.samples[j].c);
    }
    const auto c = simulate(p, SettingIII{1.0}, Slc{}, empty_state(3), 200.0, 43);
    EXPECT_NE(a.events_processed + a.samples.back().q[0], c.events_processed + c.samples.back().q[0]);
}

TEST(Engine, QueueBalanceAndTimeAccounting) {
    const auto p = sym(0.3, 3);
    for (const DecisionSetting s : {DecisionSetting{SettingZero{1.0}}, DecisionSetting{SettingI{}},
                                    DecisionSetting{SettingII{}}, DecisionSetting{SettingIII{2.0}}}) {
        const auto tr = simulate(p, s, Slc{}, empty_state(3), 500.0, 7);
        EXPECT_DOUBLE_EQ(tr.final_time, 500.0);
        for (std::size_t i = 0; i < 3; ++i) {
            EXPECT_EQ(tr.final_state.q[i], static_cast<std::int64_t>(tr.arrivals[i]) -
                                               static_cast<std::int64_t>(tr.departures[i]));
            EXPECT_LE(tr.effective_time[i], tr.connected_time[i]);
            EXPECT_LE(tr.connected_time[i], tr.busy_time[i]);
        }
        double busy = 0.0;
        for (double b : tr.busy_time) busy += b;
        EXPECT_LE(busy, 500.0 + 1e-9);
    }
}

TEST(Engine, SettingIDecidesAfterEveryEvent) {
    const auto tr = simulate(sym(0.3), SettingI{}, Slc{}, empty_state(2), 300.0, 1, logged());
    ASSERT_FALSE(tr.log.empty());
    EXPECT_EQ(tr.decisions, tr.events_processed + 1);
    for (std::size_t j = 0; j < tr.log.size(); ++j) {
        ASSERT_TRUE(tr.log[j].decision_epoch);
        // the state after the event satisfies the SLC rule
        const auto& s = tr.samples[j + 1];
        const SimState x{s.q, s.e, s.c};
        ASSERT_EQ(s.c, decide(Slc{}, x, 0.0));
    }
}

TEST(Engine, SettingIIFreezesWhileInService) {
    const auto tr = simulate(sym(0.3), SettingII{}, Slc{}, empty_state(2), 2000.0, 2, logged());
    std::size_t frozen_steps = 0;
    for (std::size_t j = 0; j < tr.log.size(); ++j) {
        const auto& before = tr.samples[j];
        const auto& entry = tr.log[j];
        const bool in_service = before.c && before.q[*before.c] > 0;
        if (in_service && !entry.departed) {
            ++frozen_steps;
            ASSERT_FALSE(entry.decision_epoch);
            ASSERT_EQ(entry.c_after, before.c);
        }
        if (entry.departed) ASSERT_TRUE(entry.decision_epoch);
    }
    EXPECT_GT(frozen_steps, 100u);
}

TEST(Engine, SettingIIIChangesAssignmentOnlyAtTicks) {
    const auto tr = simulate(sym(0.2), SettingIII{0.5}, Slc{}, empty_state(2), 2000.0, 3, logged());
    std::size_t ticks = 0;
    for (const auto& entry : tr.log) {
        const bool tick = entry.event.type == EventType::GammaTick;
        ticks += tick;
        ASSERT_EQ(entry.decision_epoch, tick);
        if (!tick) ASSERT_EQ(entry.c_after, entry.c_before);
    }
    EXPECT_EQ(tr.decisions, ticks);
    // ticks form a Poisson process of rate gamma
    EXPECT_NEAR(static_cast<double>(ticks), 1000.0, 5.0 * std::sqrt(1000.0));
}

TEST(Engine, SettingZeroKeepsEveryQueueConnected) {
    SimState init = empty_state(2);
    init.e = {0, 0};
    const auto tr = simulate(sym(0.3), SettingZero{1.0}, Slc{}, init, 300.0, 4);
    for (const auto& s : tr.samples) ASSERT_EQ(s.e, (std::vector<std::uint8_t>{1, 1}));
}

TEST(Engine, SettingZeroSingleQueueIsMM1) {
    // After the first tick the server stays on the only queue: an M/M/1
    // queue with load 1/2 and mean length 1.
    SystemParams p = sym(0.5, 1);
    SimOptions o;
    o.sampling = SampleMode::None;
    const auto tr = simulate(p, SettingZero{5.0}, Slc{}, empty_state(1), 4e5, 5, o);
    EXPECT_NEAR(tr.q_integral[0] / tr.final_time, 1.0, 0.05);
}

TEST(Engine, EffectiveFractionMatchesTheta) {
    // A saturated single queue under Setting III is connected for a fraction
    // theta of the time it is served.
    SystemParams p = sym(0.0, 1);
    SimState init{{1'000'000}, {1}, {}};
    SimOptions o;
    o.sampling = SampleMode::None;
    for (double g : {0.5, 1.0, 4.0}) {
        const auto tr = simulate(p, SettingIII{g}, Slc{}, init, 2e5, 6, o);
        EXPECT_NEAR(effective_fraction(tr, 0), theta(p, 0, g), 0.01) << g;
    }
    EXPECT_THROW(effective_fraction(simulate(p, SettingIII{1.0}, Slc{}, init, 1.0, 6, o), 3),
                 SimulationError);
}

TEST(Engine, SamplingModes) {
    const auto p = sym(0.3);
    SimOptions grid;
    grid.sampling = SampleMode::Grid;
    grid.sample_dt = 0.5;
    const auto g = simulate(p, SettingI{}, Slc{}, empty_state(2), 10.0, 8, grid);
    ASSERT_EQ(g.samples.size(), 21u);
    EXPECT_DOUBLE_EQ(g.samples.back().t, 10.0);

    SimOptions times;
    times.sampling = SampleMode::Times;
    times.sample_times = {0.0, 1.0, 9.5};
    const auto t = simulate(p, SettingI{}, Slc{}, empty_state(2), 10.0, 8, times);
    ASSERT_EQ(t.samples.size(), 3u);
    EXPECT_EQ(t.samples[1].t, 1.0);
    // grid and time sampling observe the same path
    EXPECT_EQ(t.samples[1].q, g.samples[2].q);

    times.sample_times = {2.0, 1.0};
    EXPECT_THROW(simulate(p, SettingI{}, Slc{}, empty_state(2), 10.0, 8, times), SimulationError);

    SimOptions capped;
    capped.max_events = 50;
    const auto m = simulate(p, SettingI{}, Slc{}, empty_state(2), 1e9, 8, capped);
    EXPECT_EQ(m.events_processed, 50u);
    EXPECT_EQ(m.samples.size(), 51u);
    EXPECT_THROW(simulate(p, SettingI{}, Slc{}, empty_state(2), 0.0, 8), SimulationError);
}

TEST(Engine, InvalidInitialStateIsRejected) {
    SimState bad{{0, 0, 0}, {1, 1, 1}, {}};
    EXPECT_ANY_THROW(simulate(sym(0.3), SettingI{}, Slc{}, bad, 1.0, 1));
}

TEST(Engine, TrajectoryCsv) {
    SimOptions o;
    o.max_events = 3;
    const auto tr = simulate(sym(0.3), SettingI{}, Slc{}, empty_state(2), 1e9, 9, o);
    std::ostringstream out;
    write_trajectory_csv(out, tr);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "t,q1,q2,e1,e2,c");
    std::getline(in, line);
    EXPECT_EQ(line, "0,0,0,1,1,1");
    int rows = 1;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 4);
}

TEST(Engine, FluidInitialState) {
    Engine rng = make_stream(1, 1);
    const auto p = sym(0.3, 3);
    const auto b = fluid_initial_state(p, SettingI{}, {InitialShape::Balanced, 0}, 500, rng);
    EXPECT_EQ(b.q, (std::vector<std::int64_t>{500, 500, 500}));
    EXPECT_FALSE(b.c.has_value());
    const auto s = fluid_initial_state(p, SettingZero{1.0}, {InitialShape::SingleQueue, 2}, 500, rng);
    EXPECT_EQ(s.q, (std::vector<std::int64_t>{0, 0, 500}));
    EXPECT_EQ(s.e, (std::vector<std::uint8_t>{1, 1, 1}));
    EXPECT_THROW(fluid_initial_state(p, SettingI{}, {InitialShape::SingleQueue, 3}, 5, rng),
                 SimulationError);
    // environments follow their stationary law
    int on = 0;
    for (int j = 0; j < 4000; ++j) {
        on += fluid_initial_state(p, SettingI{}, {}, 10, rng).e[0];
    }
    EXPECT_NEAR(on / 4000.0, 0.5, 0.04);
}

TEST(Engine, DriftSeparatesInsideFromOutside) {
    DriftConfig cfg;
    cfg.initial.shape = InitialShape::Balanced;
    const auto in = drift_estimate(sym(0.3), SettingI{}, Slc{}, cfg);
    EXPECT_EQ(in.verdict, Verdict::Stable);
    EXPECT_LT(in.ci_hi, 0.0);
    EXPECT_EQ(in.rep_slopes.size(), 20u);
    const auto out = drift_estimate(sym(0.45), SettingI{}, Slc{}, cfg);
    EXPECT_EQ(out.verdict, Verdict::Unstable);
    EXPECT_GT(out.ci_lo, 0.0);
    // the fluid slope inside is about -2 delta
    EXPECT_NEAR(in.slope, -0.075, 0.02);

    cfg.threads = 1;
    const auto serial = drift_estimate(sym(0.3), SettingI{}, Slc{}, cfg);
    EXPECT_EQ(serial.rep_slopes, in.rep_slopes);

    cfg.reps = 5;
    EXPECT_THROW(drift_estimate(sym(0.3), SettingI{}, Slc{}, cfg), SimulationError);
    cfg.reps = 20;
    cfg.scale_n = 10;
    EXPECT_THROW(drift_estimate(sym(0.3), SettingI{}, Slc{}, cfg), SimulationError);
}

TEST(Engine, TflPassesInsideTheRegion) {
    TflConfig cfg;
    cfg.initial.shape = InitialShape::Balanced;
    cfg.delta = tfl_delta(sym(0.3), SettingI{});
    const auto r = tfl_empirical(sym(0.3), SettingI{}, Slc{}, cfg);
    EXPECT_TRUE(r.passed);
    EXPECT_EQ(r.failures, 0u);
    EXPECT_FALSE(r.windows.empty());
    EXPECT_DOUBLE_EQ(r.bound, -0.5 * cfg.delta);
    // outside the region the same candidate fails
    const auto out = tfl_empirical(sym(0.45), SettingI{}, Slc{}, cfg);
    EXPECT_FALSE(out.passed);
    cfg.delta = 0.0;
    EXPECT_THROW(tfl_empirical(sym(0.3), SettingI{}, Slc{}, cfg), SimulationError);
}

TEST(Engine, VerdictNamesAndJson) {
    EXPECT_EQ(to_string(Verdict::Stable), "Stable");
    EXPECT_EQ(to_string(Verdict::Unstable), "Unstable");
    EXPECT_EQ(to_string(Verdict::Inconclusive), "Inconclusive");
    DriftReport d;
    d.verdict = Verdict::Stable;
    EXPECT_EQ(to_json(d)["verdict"], "Stable");
}
