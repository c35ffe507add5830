#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "msr/parallel.hpp"
#include "msr/stats.hpp"

using namespace msr;

TEST(Stats, QuantilesMatchTables) {
    EXPECT_NEAR(student_t_quantile(0.975, 9), 2.262157, 1e-6);
    EXPECT_NEAR(student_t_quantile(0.975, 19), 2.093024, 1e-6);
    EXPECT_NEAR(normal_quantile(0.975), 1.959964, 1e-6);
    EXPECT_NEAR(normal_quantile(0.5), 0.0, 1e-15);
}

TEST(Stats, MeanCiByHand) {
    const std::vector<double> xs{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    const auto ci = mean_ci(xs);
    EXPECT_DOUBLE_EQ(ci.mean, 5.5);
    // sample variance 55/6
    const double se = std::sqrt(55.0 / 6.0 / 10.0);
    EXPECT_NEAR(ci.se, se, 1e-14);
    EXPECT_NEAR(ci.hi - ci.mean, 2.262157 * se, 1e-5);
    EXPECT_NEAR(ci.mean - ci.lo, ci.hi - ci.mean, 1e-14);
    const auto one = mean_ci(std::vector<double>{3.0});
    EXPECT_EQ(one.lo, 3.0);
    EXPECT_THROW(mean_ci(std::vector<double>{}), std::invalid_argument);
    EXPECT_THROW(mean_ci(xs, 1.0), std::invalid_argument);
}

TEST(Stats, ParallelForFillsEverySlot) {
    for (unsigned threads : {1u, 3u, 8u}) {
        std::vector<int> out(1000, 0);
        parallel_for(out.size(), threads, [&](std::size_t i) { out[i] = static_cast<int>(i) * 2; });
        for (std::size_t i = 0; i < out.size(); ++i) ASSERT_EQ(out[i], static_cast<int>(i) * 2);
    }
}

TEST(Stats, ParallelForRethrows) {
    EXPECT_THROW(parallel_for(100, 4,
                              [](std::size_t i) {
                                  if (i == 57) throw std::runtime_error("boom");
                              }),
                 std::runtime_error);
}
