#include "msr/stats.hpp"

#include <cmath>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

namespace msr {

double student_t_quantile(double p, double dof) {
    return boost::math::quantile(boost::math::students_t_distribution<double>(dof), p);
}

double normal_quantile(double p) {
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

MeanCi mean_ci(std::span<const double> xs, double confidence) {
    if (xs.empty()) throw std::invalid_argument("mean_ci needs at least one value");
    if (!(confidence > 0.0 && confidence < 1.0)) {
        throw std::invalid_argument("confidence must lie in (0,1)");
    }
    const auto n = static_cast<double>(xs.size());
    double sum = 0.0;
    for (double x : xs) sum += x;
    MeanCi out;
    out.mean = sum / n;
    if (xs.size() < 2) {
        out.lo = out.hi = out.mean;
        return out;
    }
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.se = std::sqrt(ss / (n - 1.0) / n);
    const double t = student_t_quantile(0.5 + confidence / 2.0, n - 1.0);
    out.lo = out.mean - t * out.se;
    out.hi = out.mean + t * out.se;
    return out;
}

}  // namespace msr
