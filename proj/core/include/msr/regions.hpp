#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "msr/model.hpp"

namespace msr {

class RegionError : public ModelError {
public:
    using ModelError::ModelError;
};

// Subsets of [K] are bitmasks: bit i set means queue i+1 belongs to L.
using SubsetMask = std::uint32_t;

struct SubsetConstraint {
    SubsetMask subset;
    double lhs;
    double rhs;
    double slack;  // rhs - lhs
};

struct RegionVerdict {
    bool inside = false;
    std::vector<SubsetConstraint> constraints;
    std::size_t binding = 0;     // index of the constraint with minimal slack
    bool necessary_only = false; // only a sample of the subsets was checked
};

struct RegionOptions {
    std::size_t max_exact_k = 16;    // enumerate all 2^K - 1 subsets up to this K
    std::size_t sampled_subsets = 0; // beyond it, check this many random subsets
    std::uint64_t seed = 1;
};

// Open polytope in load space {rho >= 0 : sum_{i in L} w_i rho_i < b_L for
// every listed L}. All stability regions handled here have this form.
class SubsetPolytope {
public:
    SubsetPolytope(std::vector<double> weights, std::vector<SubsetMask> subsets,
                   std::vector<double> rhs, bool necessary_only = false);

    std::size_t K() const noexcept { return weights_.size(); }
    const std::vector<double>& weights() const noexcept { return weights_; }
    const std::vector<SubsetMask>& subsets() const noexcept { return subsets_; }
    const std::vector<double>& rhs() const noexcept { return rhs_; }
    bool necessary_only() const noexcept { return necessary_only_; }

    bool contains(std::span<const double> rho) const;
    RegionVerdict verdict(std::span<const double> rho) const;

    // Per-coordinate upper bounds of a box [0, u] containing the region.
    std::vector<double> bounding_box() const;

private:
    std::vector<double> weights_;
    std::vector<SubsetMask> subsets_;
    std::vector<double> rhs_;
    bool necessary_only_;
    bool all_subsets_;  // subsets_ == 1, 2, ..., 2^K - 1
};

double pi_L0(const SystemParams& params, SubsetMask subset);
double theta(const SystemParams& params, std::size_t i, double gamma);
// Share of a disconnected-start decision interval that SLC-plus still uses.
double slc_plus_epsilon(const SystemParams& params, double gamma);

SubsetPolytope region_msr_I(const SystemParams& params, const RegionOptions& opts = {});
SubsetPolytope region_msr_II(const SystemParams& params);
SubsetPolytope region_msr_III_P(const SystemParams& params, double gamma,
                                const RegionOptions& opts = {});
SubsetPolytope region_msr_III_overhead(const SystemParams& params, double gamma, double c,
                                       const RegionOptions& opts = {});
SubsetPolytope region_slc_plus_polytope(const SystemParams& params, double gamma,
                                        const RegionOptions& opts = {});

enum class LimitRegime { AlphaOverGammaToZero, AlphaOverGammaToInfinity };
SubsetPolytope limit_region(const SystemParams& params, LimitRegime regime,
                            const RegionOptions& opts = {});

RegionVerdict msr_I(const SystemParams& params, const RegionOptions& opts = {});
RegionVerdict msr_II(const SystemParams& params);
RegionVerdict msr_III_P(const SystemParams& params, double gamma, const RegionOptions& opts = {});
RegionVerdict msr_III_overhead(const SystemParams& params, double gamma, double c,
                               const RegionOptions& opts = {});
RegionVerdict region_slc_plus(const SystemParams& params, double gamma,
                              const RegionOptions& opts = {});

struct VolumeEstimate {
    enum class Method { Exact, MonteCarlo };
    double value = 0.0;
    double ci_halfwidth = 0.0;  // 95% normal-approximation binomial interval
    Method method = Method::Exact;
    std::uint64_t samples = 0;
    std::uint64_t hits = 0;
};

// Volume of the simplex sum rho_i / pi_i(1) < 1.
VolumeEstimate vol_exact_II(const SystemParams& params);
VolumeEstimate vol_exact_I_K2(const SystemParams& params);

// Hit-or-miss estimate over the box [0, box_i]; an empty box means the
// region's own bounding box. The same (box, samples, seed) always draws the
// same points, so estimates of nested regions share their randomness.
VolumeEstimate vol_mc(const SubsetPolytope& region, std::span<const double> box,
                      std::uint64_t samples, std::uint64_t seed, unsigned threads = 0);

// 1 - vol(inner) / vol(outer) from common points drawn in outer's box; the
// interval is the conditional binomial one. `inner` must lie inside `outer`.
VolumeEstimate reduction_mc(const SubsetPolytope& outer, const SubsetPolytope& inner,
                            std::uint64_t samples, std::uint64_t seed, unsigned threads = 0);

double sr_II(const SystemParams& params);  // closed form, K = 2
VolumeEstimate sr_II_mc(const SystemParams& params, std::uint64_t samples, std::uint64_t seed);
double sr_III(const SystemParams& params, double gamma);

struct GammaSolve {
    double gamma = 0.0;
    bool finite = false;
    std::string status;
};

inline constexpr double kGammaLowerBracket = 1e-9;
inline constexpr double kGammaUpperLimit = 1e12;

// Smallest decision rate for which the point lies in the class-P Setting III
// region. Infinite when the point is outside the Setting I region.
GammaSolve gamma0(const SystemParams& params, double tol = 1e-9);
// Smallest decision rate with sr_III <= R.
GammaSolve gamma1(const SystemParams& params, double R, double tol = 1e-9);
// Positive root of theta_1 theta_2 = 1 - R written as a quadratic in gamma.
double gamma1_quadratic_k2(const SystemParams& params, double R);

struct GammaOptConfig {
    double gamma_lo = 1e-3;
    double gamma_hi = 1e4;
    std::size_t grid = 61;  // log-spaced scan points
    std::uint64_t samples = 200000;
    std::uint64_t seed = 7;
    double tol = 1e-4;      // golden-section stop width in log(gamma)
    unsigned threads = 0;
};

struct GammaOptResult {
    double gamma_star = 0.0;
    VolumeEstimate volume;
    bool bracketed = false;  // false when the scan maximum sits on the grid edge
    std::vector<std::pair<double, double>> scan;  // (gamma, volume)
};

// Decision rate maximizing the volume of the overhead region.
GammaOptResult gamma_opt(const SystemParams& params, double c, const GammaOptConfig& cfg = {});

// Drift constant of the fluid-limit test for SLC under `setting`; positive
// exactly when the loads lie in the corresponding region.
double tfl_delta(const SystemParams& params, const DecisionSetting& setting);

nlohmann::json to_json(const RegionVerdict& verdict);
nlohmann::json to_json(const VolumeEstimate& estimate);

}  // namespace msr
