#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "msr/oracle.hpp"

using namespace msr;

namespace {

SystemParams sym(double rho, std::size_t k) {
    return SystemParams::from_rho(std::vector<double>(k, rho), std::vector<double>(k, 1.0),
                                  std::vector<double>(k, 1.0));
}

// Dense Gaussian elimination for pi Q = 0, sum pi = 1.
std::vector<double> dense_stationary(std::vector<std::vector<double>> q) {
    const std::size_t n = q.size();
    // transpose so that rows are balance equations
    std::vector<std::vector<double>> a(n, std::vector<double>(n + 1, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) a[j][i] = q[i][j];
    }
    for (std::size_t j = 0; j < n; ++j) a[n - 1][j] = 1.0;
    a[n - 1][n] = 1.0;
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r) {
            if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
        }
        std::swap(a[c], a[piv]);
        for (std::size_t r = 0; r < n; ++r) {
            if (r == c) continue;
            const double f = a[r][c] / a[c][c];
            for (std::size_t j = c; j <= n; ++j) a[r][j] -= f * a[c][j];
        }
    }
    std::vector<double> pi(n);
    for (std::size_t i = 0; i < n; ++i) pi[i] = a[i][n] / a[i][i];
    return pi;
}

}  // namespace

TEST(Oracle, IndexRoundTrip) {
    const auto chain = build_chain(sym(0.2, 2), SettingI{}, Slc{}, 4);
    EXPECT_EQ(chain.num_states, 25u * 4u * 3u);
    for (std::size_t s = 0; s < chain.num_states; ++s) ASSERT_EQ(chain.index(chain.state(s)), s);
    EXPECT_EQ(chain.state(chain.start), (SimState{{0, 0}, {1, 1}, {}}));
}

TEST(Oracle, GeneratorRowsSumToZero) {
    for (const DecisionSetting s : {DecisionSetting{SettingZero{1.0}}, DecisionSetting{SettingI{}},
                                    DecisionSetting{SettingII{}}, DecisionSetting{SettingIII{2.0}}}) {
        const auto chain = build_chain(sym(0.2, 2), s, Slc{}, 6);
        EXPECT_LT(generator_row_sum_error(chain), 1e-12);
        for (const auto& t : chain.transitions) {
            ASSERT_NE(t.from, t.to);
            ASSERT_GT(t.rate, 0.0);
        }
    }
}

TEST(Oracle, SettingZeroSingleQueueIsTruncatedMM1) {
    const double rho = 0.6;
    const std::int64_t cap = 12;
    const auto chain = build_chain(sym(rho, 1), SettingZero{3.0}, Slc{}, cap);
    const auto st = solve_stationary(chain);
    double norm = 0.0;
    for (std::int64_t n = 0; n <= cap; ++n) norm += std::pow(rho, static_cast<double>(n));
    std::vector<double> marginal(cap + 1, 0.0);
    for (std::size_t s = 0; s < chain.num_states; ++s) marginal[chain.state(s).q[0]] += st.pi[s];
    for (std::int64_t n = 0; n <= cap; ++n) {
        EXPECT_NEAR(marginal[n], std::pow(rho, static_cast<double>(n)) / norm, 1e-12) << n;
    }
    EXPECT_NEAR(stationary_mean_q(chain, st)[0],
                [&] {
                    double m = 0.0;
                    for (std::int64_t n = 0; n <= cap; ++n) m += n * std::pow(rho, n) / norm;
                    return m;
                }(),
                1e-10);
}

TEST(Oracle, SettingIMatchesHandBuiltGenerator) {
    // K = 1 under SLC in Setting I: served exactly while connected.
    const SystemParams p{{0.3}, {1.0}, {0.7}, {1.3}};
    const std::int64_t cap = 10;
    const std::size_t n = 2 * (cap + 1);
    auto idx = [](std::int64_t q, int e) { return static_cast<std::size_t>(2 * q + e); };
    std::vector<std::vector<double>> q(n, std::vector<double>(n, 0.0));
    auto add = [&](std::size_t a, std::size_t b, double r) {
        q[a][b] += r;
        q[a][a] -= r;
    };
    for (std::int64_t x = 0; x <= cap; ++x) {
        for (int e = 0; e < 2; ++e) {
            if (x < cap) add(idx(x, e), idx(x + 1, e), p.lambda[0]);
            add(idx(x, e), idx(x, 1 - e), e ? p.mu_p[0] : p.lambda_p[0]);
            if (e && x > 0) add(idx(x, e), idx(x - 1, e), p.mu[0]);
        }
    }
    const auto ref = dense_stationary(q);

    const auto chain = build_chain(p, SettingI{}, Slc{}, cap);
    for (const auto method : {StationaryMethod::SparseLU, StationaryMethod::Power}) {
        StationaryOptions opts;
        opts.method = method;
        opts.tol = 1e-14;
        const auto st = solve_stationary(chain, opts);
        std::vector<double> got(n, 0.0);
        for (std::size_t s = 0; s < chain.num_states; ++s) {
            const auto x = chain.state(s);
            got[idx(x.q[0], x.e[0])] += st.pi[s];
        }
        for (std::size_t j = 0; j < n; ++j) EXPECT_NEAR(got[j], ref[j], 1e-9) << j;
        EXPECT_LT(st.residual, 1e-9);
    }
}

TEST(Oracle, EnvironmentMarginalIsExact) {
    const SystemParams p{{0.1, 0.2}, {1.0, 1.0}, {0.5, 2.0}, {1.5, 1.0}};
    for (const DecisionSetting s :
         {DecisionSetting{SettingI{}}, DecisionSetting{SettingII{}}, DecisionSetting{SettingIII{1.0}}}) {
        const auto chain = build_chain(p, s, Slc{}, 5);
        const auto st = solve_stationary(chain);
        double on0 = 0.0, on1 = 0.0;
        for (std::size_t j = 0; j < chain.num_states; ++j) {
            const auto x = chain.state(j);
            on0 += x.e[0] * st.pi[j];
            on1 += x.e[1] * st.pi[j];
        }
        EXPECT_NEAR(on0, 0.25, 1e-10);
        EXPECT_NEAR(on1, 2.0 / 3.0, 1e-10);
    }
}

TEST(Oracle, TailMassDecreasesInside) {
    const auto chain = build_chain(sym(0.2, 1), SettingI{}, Slc{}, 40);
    const auto st = solve_stationary(chain);
    EXPECT_NEAR(stationary_tail_mass(chain, st, 0), 1.0, 1e-12);
    double prev = 1.0;
    for (std::int64_t t = 1; t <= 40; ++t) {
        const double m = stationary_tail_mass(chain, st, t);
        ASSERT_LE(m, prev + 1e-15);
        prev = m;
    }
    EXPECT_NEAR(stationary_tail_mass(chain, 20), stationary_tail_mass(chain, st, 20), 1e-14);
}

TEST(Oracle, StabilityVerdicts) {
    const std::vector<std::int64_t> caps{25, 50, 100, 200};
    EXPECT_EQ(oracle_stability(sym(0.3, 1), SettingI{}, Slc{}, caps).verdict, Verdict::Stable);
    EXPECT_EQ(oracle_stability(sym(0.7, 1), SettingI{}, Slc{}, caps).verdict, Verdict::Unstable);
    // single queue, Setting III with gamma = 2: bound theta * pi(1) = 0.375
    EXPECT_EQ(oracle_stability(sym(0.3, 1), SettingIII{2.0}, Slc{}, caps).verdict, Verdict::Stable);
    EXPECT_EQ(oracle_stability(sym(0.45, 1), SettingIII{2.0}, Slc{}, caps).verdict, Verdict::Unstable);
    const auto r = oracle_stability(sym(0.3, 1), SettingII{}, Slc{}, caps);
    EXPECT_EQ(r.caps, caps);
    EXPECT_EQ(r.tail.size(), caps.size());
    EXPECT_THROW(oracle_stability(sym(0.3, 1), SettingI{}, Slc{}, {25}), OracleError);
    EXPECT_THROW(oracle_stability(sym(0.3, 1), SettingI{}, Slc{}, {50, 25}), OracleError);
}

TEST(Oracle, RejectsUnsupportedInputs) {
    EXPECT_THROW(build_chain(sym(0.2, 2), SettingI{}, Slc{TieBreak::Random}, 5), OracleError);
    EXPECT_THROW(build_chain(sym(0.2, 2), SettingII{}, SlcPlus{}, 5), OracleError);
    EXPECT_NO_THROW(build_chain(sym(0.2, 2), SettingIII{1.0}, SlcPlus{}, 5));
    EXPECT_THROW(build_chain(sym(0.2, 2), SettingI{}, Slc{}, -1), OracleError);
    EXPECT_THROW(build_chain(sym(0.01, 8), SettingI{}, Slc{}, 10), OracleError);
}

TEST(Oracle, ExportFormats) {
    const auto chain = build_chain(sym(0.2, 1), SettingI{}, Slc{}, 2);
    std::ostringstream t;
    write_triplets(t, chain);
    std::istringstream in(t.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "# states 12 K 1 cap 2");
    std::size_t from, to;
    double rate, diag = 0.0, off = 0.0;
    std::size_t lines = 0;
    while (in >> from >> to >> rate) {
        ++lines;
        (from == to ? diag : off) += rate;
    }
    EXPECT_NEAR(diag + off, 0.0, 1e-12);
    EXPECT_EQ(lines, chain.transitions.size() + chain.num_states);

    std::ostringstream s;
    write_stationary(s, chain, solve_stationary(chain));
    std::istringstream sin(s.str());
    std::getline(sin, line);
    EXPECT_EQ(line.rfind("# index", 0), 0u);
    double total = 0.0;
    std::size_t rows = 0;
    while (std::getline(sin, line)) {
        std::istringstream row(line);
        double v = 0.0, last = 0.0;
        while (row >> v) last = v;
        total += last;
        ++rows;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    std::size_t reachable = 0;
    for (bool r : chain.reachable) reachable += r;
    EXPECT_EQ(rows, reachable);
}
