#pragma once

#include <cstddef>
#include <span>

namespace msr {

struct MeanCi {
    double mean = 0.0;
    double se = 0.0;  // standard error of the mean
    double lo = 0.0;
    double hi = 0.0;
};

// Two-sided Student-t confidence interval for the mean of `xs`. Summation is
// in index order so results are reproducible bit for bit.
MeanCi mean_ci(std::span<const double> xs, double confidence = 0.95);

double student_t_quantile(double p, double dof);
double normal_quantile(double p);

}  // namespace msr
