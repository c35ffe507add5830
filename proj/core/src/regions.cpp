#include "msr/regions.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <limits>

#include "msr/parallel.hpp"
#include "msr/rng.hpp"
#include "msr/stats.hpp"

namespace msr {

namespace {

constexpr std::uint64_t kBlockSize = 1u << 16;

SubsetMask full_mask(std::size_t k) {
    return k >= 32 ? ~SubsetMask{0} : static_cast<SubsetMask>((1ull << k) - 1);
}

std::vector<SubsetMask> subset_list(std::size_t k, const RegionOptions& opts, bool& sampled) {
    std::vector<SubsetMask> out;
    if (k <= opts.max_exact_k) {
        sampled = false;
        out.resize(full_mask(k));
        for (SubsetMask m = 1; m <= full_mask(k); ++m) out[m - 1] = m;
        return out;
    }
    if (opts.sampled_subsets == 0) {
        throw RegionError("K = " + std::to_string(k) + " exceeds the exact subset cap of " +
                          std::to_string(opts.max_exact_k) + "; enable sampled subsets");
    }
    sampled = true;
    for (std::size_t i = 0; i < k; ++i) out.push_back(SubsetMask{1} << i);
    out.push_back(full_mask(k));
    Engine rng = make_stream(opts.seed, 0x5b5e7);
    for (std::size_t s = 0; s < opts.sampled_subsets; ++s) {
        SubsetMask m = 0;
        while (m == 0) m = static_cast<SubsetMask>(rng()) & full_mask(k);
        out.push_back(m);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

SubsetPolytope build(const SystemParams& params, std::vector<double> weights,
                     const std::function<double(SubsetMask)>& rhs_of, const RegionOptions& opts) {
    params.validate();
    bool sampled = false;
    auto subsets = subset_list(params.K(), opts, sampled);
    std::vector<double> rhs(subsets.size());
    for (std::size_t j = 0; j < subsets.size(); ++j) rhs[j] = rhs_of(subsets[j]);
    return SubsetPolytope(std::move(weights), std::move(subsets), std::move(rhs), sampled);
}

std::vector<double> inverse_pi1(const SystemParams& params) {
    std::vector<double> w(params.K());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = 1.0 / env_stationary(params, i).pi1;
    return w;
}

std::vector<double> inverse_theta(const SystemParams& params, double gamma) {
    std::vector<double> w(params.K());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = 1.0 / theta(params, i, gamma);
    return w;
}

void require_gamma(double gamma) {
    if (!(gamma > 0.0) || std::isnan(gamma)) throw RegionError("gamma must be positive");
}

double box_volume(std::span<const double> box) {
    double v = 1.0;
    for (double b : box) v *= std::max(b, 0.0);
    return v;
}

// Hit counts of `regions` over common uniform points in the box.
std::vector<std::uint64_t> count_hits(const std::vector<const SubsetPolytope*>& regions,
                                      std::span<const double> box, std::uint64_t samples,
                                      std::uint64_t seed, unsigned threads) {
    const std::size_t k = box.size();
    const std::size_t blocks = (samples + kBlockSize - 1) / kBlockSize;
    std::vector<std::vector<std::uint64_t>> per_block(blocks,
                                                      std::vector<std::uint64_t>(regions.size()));
    parallel_for(blocks, threads, [&](std::size_t b) {
        Engine rng = make_stream(seed, b);
        const std::uint64_t begin = b * kBlockSize;
        const std::uint64_t end = std::min<std::uint64_t>(samples, begin + kBlockSize);
        std::vector<double> point(k);
        for (std::uint64_t s = begin; s < end; ++s) {
            for (std::size_t i = 0; i < k; ++i) point[i] = uniform01(rng) * box[i];
            for (std::size_t r = 0; r < regions.size(); ++r) {
                if (regions[r]->contains(point)) ++per_block[b][r];
            }
        }
    });
    std::vector<std::uint64_t> total(regions.size(), 0);
    for (const auto& counts : per_block) {
        for (std::size_t r = 0; r < counts.size(); ++r) total[r] += counts[r];
    }
    return total;
}

double z95() {
    static const double z = normal_quantile(0.975);
    return z;
}

}  // namespace

SubsetPolytope::SubsetPolytope(std::vector<double> weights, std::vector<SubsetMask> subsets,
                               std::vector<double> rhs, bool necessary_only)
    : weights_(std::move(weights)),
      subsets_(std::move(subsets)),
      rhs_(std::move(rhs)),
      necessary_only_(necessary_only),
      all_subsets_(false) {
    if (subsets_.size() != rhs_.size()) throw RegionError("one rhs per subset required");
    if (subsets_.empty()) throw RegionError("a region needs at least one constraint");
    const SubsetMask full = full_mask(K());
    for (auto m : subsets_) {
        if (m == 0 || (m & ~full)) throw RegionError("subset mask out of range");
    }
    if (K() <= 20 && subsets_.size() == full) {
        all_subsets_ = true;
        for (SubsetMask m = 1; m <= full && all_subsets_; ++m) all_subsets_ = subsets_[m - 1] == m;
    }
}

bool SubsetPolytope::contains(std::span<const double> rho) const {
    const std::size_t k = K();
    if (rho.size() != k) throw RegionError("point dimension does not match the region");
    if (all_subsets_) {
        thread_local std::vector<double> sums;
        sums.resize(std::size_t{1} << k);
        sums[0] = 0.0;
        for (SubsetMask m = 1; m < (SubsetMask{1} << k); ++m) {
            const int i = std::countr_zero(m);
            sums[m] = sums[m & (m - 1)] + weights_[i] * rho[i];
            if (!(sums[m] < rhs_[m - 1])) return false;
        }
        return true;
    }
    for (std::size_t j = 0; j < subsets_.size(); ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            if (subsets_[j] & (SubsetMask{1} << i)) s += weights_[i] * rho[i];
        }
        if (!(s < rhs_[j])) return false;
    }
    return true;
}

RegionVerdict SubsetPolytope::verdict(std::span<const double> rho) const {
    const std::size_t k = K();
    if (rho.size() != k) throw RegionError("point dimension does not match the region");
    RegionVerdict v;
    v.necessary_only = necessary_only_;
    v.inside = true;
    v.constraints.reserve(subsets_.size());
    double min_slack = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < subsets_.size(); ++j) {
        double lhs = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            if (subsets_[j] & (SubsetMask{1} << i)) lhs += weights_[i] * rho[i];
        }
        const bool strict = lhs < rhs_[j];
        const double slack = strict ? rhs_[j] - lhs : std::min(0.0, rhs_[j] - lhs);
        v.inside = v.inside && strict;
        v.constraints.push_back({subsets_[j], lhs, rhs_[j], slack});
        if (slack < min_slack) {
            min_slack = slack;
            v.binding = j;
        }
    }
    return v;
}

std::vector<double> SubsetPolytope::bounding_box() const {
    std::vector<double> box(K(), std::numeric_limits<double>::infinity());
    for (std::size_t j = 0; j < subsets_.size(); ++j) {
        for (std::size_t i = 0; i < K(); ++i) {
            if (subsets_[j] & (SubsetMask{1} << i)) {
                box[i] = std::min(box[i], std::max(rhs_[j], 0.0) / weights_[i]);
            }
        }
    }
    return box;
}

double pi_L0(const SystemParams& params, SubsetMask subset) {
    if (subset == 0) throw RegionError("pi_L0 needs a non-empty subset");
    if (subset & ~full_mask(params.K())) throw RegionError("subset mask out of range");
    double p = 1.0;
    for (std::size_t i = 0; i < params.K(); ++i) {
        if (subset & (SubsetMask{1} << i)) p *= env_stationary(params, i).pi0;
    }
    return p;
}

double theta(const SystemParams& params, std::size_t i, double gamma) {
    require_gamma(gamma);
    if (i >= params.K()) throw RegionError("queue index out of range");
    const double up = gamma + params.lambda_p[i];
    return up / (up + params.mu_p[i]);
}

double slc_plus_epsilon(const SystemParams& params, double gamma) {
    require_gamma(gamma);
    double eps = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < params.K(); ++i) {
        eps = std::min(eps, params.lambda_p[i] / (gamma + params.lambda_p[i]));
    }
    return eps;
}

SubsetPolytope region_msr_I(const SystemParams& params, const RegionOptions& opts) {
    return build(params, std::vector<double>(params.K(), 1.0),
                 [&](SubsetMask m) { return 1.0 - pi_L0(params, m); }, opts);
}

SubsetPolytope region_msr_II(const SystemParams& params) {
    params.validate();
    return SubsetPolytope(inverse_pi1(params), {full_mask(params.K())}, {1.0});
}

SubsetPolytope region_msr_III_P(const SystemParams& params, double gamma,
                                const RegionOptions& opts) {
    require_gamma(gamma);
    return build(params, inverse_theta(params, gamma),
                 [&](SubsetMask m) { return 1.0 - pi_L0(params, m); }, opts);
}

SubsetPolytope region_msr_III_overhead(const SystemParams& params, double gamma, double c,
                                       const RegionOptions& opts) {
    require_gamma(gamma);
    if (!(c >= 0.0) || !std::isfinite(c)) throw RegionError("overhead must be non-negative");
    const double factor = 1.0 + gamma * c;
    return build(params, inverse_theta(params, gamma),
                 [&](SubsetMask m) { return (1.0 - pi_L0(params, m)) / factor; }, opts);
}

SubsetPolytope region_slc_plus_polytope(const SystemParams& params, double gamma,
                                        const RegionOptions& opts) {
    const double eps = slc_plus_epsilon(params, gamma);
    return build(params, inverse_theta(params, gamma),
                 [&](SubsetMask m) { return 1.0 - pi_L0(params, m) * (1.0 - eps); }, opts);
}

SubsetPolytope limit_region(const SystemParams& params, LimitRegime regime,
                            const RegionOptions& opts) {
    if (regime == LimitRegime::AlphaOverGammaToZero) return region_msr_I(params, opts);
    return build(params, inverse_pi1(params),
                 [&](SubsetMask m) { return 1.0 - pi_L0(params, m); }, opts);
}

RegionVerdict msr_I(const SystemParams& params, const RegionOptions& opts) {
    return region_msr_I(params, opts).verdict(params.rho_vector());
}

RegionVerdict msr_II(const SystemParams& params) {
    return region_msr_II(params).verdict(params.rho_vector());
}

RegionVerdict msr_III_P(const SystemParams& params, double gamma, const RegionOptions& opts) {
    return region_msr_III_P(params, gamma, opts).verdict(params.rho_vector());
}

RegionVerdict msr_III_overhead(const SystemParams& params, double gamma, double c,
                               const RegionOptions& opts) {
    return region_msr_III_overhead(params, gamma, c, opts).verdict(params.rho_vector());
}

RegionVerdict region_slc_plus(const SystemParams& params, double gamma, const RegionOptions& opts) {
    return region_slc_plus_polytope(params, gamma, opts).verdict(params.rho_vector());
}

VolumeEstimate vol_exact_II(const SystemParams& params) {
    params.validate();
    double v = 1.0;
    for (std::size_t i = 0; i < params.K(); ++i) {
        v *= env_stationary(params, i).pi1 / static_cast<double>(i + 1);
    }
    return {v, 0.0, VolumeEstimate::Method::Exact, 0, 0};
}

VolumeEstimate vol_exact_I_K2(const SystemParams& params) {
    params.validate();
    if (params.K() != 2) throw RegionError("closed-form Setting I volume needs K = 2");
    const double p = env_stationary(params, 0).pi1 * env_stationary(params, 1).pi1;
    return {p - p * p / 2.0, 0.0, VolumeEstimate::Method::Exact, 0, 0};
}

VolumeEstimate vol_mc(const SubsetPolytope& region, std::span<const double> box,
                      std::uint64_t samples, std::uint64_t seed, unsigned threads) {
    if (samples == 0) throw RegionError("Monte Carlo volume needs samples > 0");
    std::vector<double> own;
    if (box.empty()) {
        own = region.bounding_box();
        box = own;
    }
    if (box.size() != region.K()) throw RegionError("box dimension does not match the region");
    for (double b : box) {
        if (!(b >= 0.0) || !std::isfinite(b)) throw RegionError("box bounds must be finite");
    }
    const auto hits = count_hits({&region}, box, samples, seed, threads)[0];
    const double n = static_cast<double>(samples);
    const double p = static_cast<double>(hits) / n;
    const double vbox = box_volume(box);
    return {p * vbox, z95() * std::sqrt(p * (1.0 - p) / n) * vbox,
            VolumeEstimate::Method::MonteCarlo, samples, hits};
}

VolumeEstimate reduction_mc(const SubsetPolytope& outer, const SubsetPolytope& inner,
                            std::uint64_t samples, std::uint64_t seed, unsigned threads) {
    if (samples == 0) throw RegionError("Monte Carlo reduction needs samples > 0");
    if (outer.K() != inner.K()) throw RegionError("regions must have the same dimension");
    const auto box = outer.bounding_box();
    const auto hits = count_hits({&outer, &inner}, box, samples, seed, threads);
    if (hits[0] == 0) throw RegionError("no sample hit the reference region");
    const double r = static_cast<double>(hits[1]) / static_cast<double>(hits[0]);
    return {1.0 - r, z95() * std::sqrt(r * (1.0 - r) / static_cast<double>(hits[0])),
            VolumeEstimate::Method::MonteCarlo, samples, hits[0]};
}

double sr_II(const SystemParams& params) {
    params.validate();
    if (params.K() != 2) throw RegionError("closed-form Setting II reduction needs K = 2");
    const double p = env_stationary(params, 0).pi1 * env_stationary(params, 1).pi1;
    return (1.0 - p) / (2.0 - p);
}

VolumeEstimate sr_II_mc(const SystemParams& params, std::uint64_t samples, std::uint64_t seed) {
    return reduction_mc(region_msr_I(params), region_msr_II(params), samples, seed);
}

double sr_III(const SystemParams& params, double gamma) {
    // Only the environment rates enter, so K is not bounded by the subset masks.
    const std::size_t k = params.K();
    if (k == 0 || params.lambda_p.size() != k || params.mu_p.size() != k) {
        throw RegionError("lambda_p and mu_p must have length K >= 1");
    }
    for (std::size_t i = 0; i < k; ++i) {
        if (!(params.lambda_p[i] > 0.0) || !(params.mu_p[i] > 0.0) ||
            !std::isfinite(params.lambda_p[i] + params.mu_p[i])) {
            throw RegionError("environment rates must be positive and finite");
        }
    }
    double prod = 1.0;
    for (std::size_t i = 0; i < params.K(); ++i) prod *= theta(params, i, gamma);
    return 1.0 - prod;
}

namespace {

// Smallest gamma with pred(gamma) true, for a predicate monotone in gamma.
GammaSolve monotone_threshold(const std::function<bool(double)>& pred, double tol) {
    if (!(tol > 0.0)) throw RegionError("tolerance must be positive");
    if (pred(kGammaLowerBracket)) {
        return {kGammaLowerBracket, true, "satisfied at the lower bracket"};
    }
    double hi = 1.0;
    while (!pred(hi)) {
        hi *= 2.0;
        if (hi > kGammaUpperLimit) {
            return {std::numeric_limits<double>::infinity(), false, "no finite rate up to 1e12"};
        }
    }
    double lo = hi > 1.0 ? hi / 2.0 : kGammaLowerBracket;
    while (hi - lo > tol * hi) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (pred(mid) ? hi : lo) = mid;
    }
    return {hi, true, "ok"};
}

}  // namespace

GammaSolve gamma0(const SystemParams& params, double tol) {
    if (!msr_I(params).inside) {
        return {std::numeric_limits<double>::infinity(), false, "outside the Setting I region"};
    }
    const auto rho = params.rho_vector();
    return monotone_threshold(
        [&](double g) { return region_msr_III_P(params, g).contains(rho); }, tol);
}

GammaSolve gamma1(const SystemParams& params, double R, double tol) {
    if (!(R > 0.0 && R < 1.0)) throw RegionError("target reduction must lie in (0,1)");
    params.validate();
    return monotone_threshold([&](double g) { return sr_III(params, g) <= R; }, tol);
}

double gamma1_quadratic_k2(const SystemParams& params, double R) {
    params.validate();
    if (params.K() != 2) throw RegionError("the quadratic route needs K = 2");
    if (!(R > 0.0 && R < 1.0)) throw RegionError("target reduction must lie in (0,1)");
    // (g + a1)(g + a2) = (1 - R)(g + b1)(g + b2) with a = lambda', b = lambda' + mu'.
    const double a1 = params.lambda_p[0], a2 = params.lambda_p[1];
    const double b1 = a1 + params.mu_p[0], b2 = a2 + params.mu_p[1];
    const double qa = R;
    const double qb = (a1 + a2) - (1.0 - R) * (b1 + b2);
    const double qc = a1 * a2 - (1.0 - R) * b1 * b2;
    if (qc >= 0.0) return 0.0;  // already satisfied as gamma -> 0
    const double disc = std::sqrt(qb * qb - 4.0 * qa * qc);
    // Larger root, written to avoid cancellation.
    return qb > 0.0 ? (2.0 * qc) / (-qb - disc) : (-qb + disc) / (2.0 * qa);
}

GammaOptResult gamma_opt(const SystemParams& params, double c, const GammaOptConfig& cfg) {
    if (!(c > 0.0) || !std::isfinite(c)) throw RegionError("overhead c must be positive");
    if (!(cfg.gamma_lo > 0.0 && cfg.gamma_hi > cfg.gamma_lo) || cfg.grid < 3) {
        throw RegionError("gamma search needs 0 < gamma_lo < gamma_hi and at least 3 grid points");
    }
    // Every overhead region lies inside the Setting I region, so one fixed box
    // (and fixed seed) makes the objective a deterministic function of gamma.
    const auto box = region_msr_I(params).bounding_box();
    auto volume = [&](double g) {
        return vol_mc(region_msr_III_overhead(params, g, c), box, cfg.samples, cfg.seed,
                      cfg.threads);
    };

    GammaOptResult res;
    const double llo = std::log(cfg.gamma_lo), lhi = std::log(cfg.gamma_hi);
    std::size_t best = 0;
    for (std::size_t j = 0; j < cfg.grid; ++j) {
        const double g =
            std::exp(llo + (lhi - llo) * static_cast<double>(j) / static_cast<double>(cfg.grid - 1));
        res.scan.emplace_back(g, volume(g).value);
        if (res.scan[j].second > res.scan[best].second) best = j;
    }
    if (best == 0 || best + 1 == cfg.grid) {
        res.gamma_star = res.scan[best].first;
        res.volume = volume(res.gamma_star);
        res.bracketed = false;
        return res;
    }

    // Golden-section search on log(gamma).
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = std::log(res.scan[best - 1].first), b = std::log(res.scan[best + 1].first);
    double x1 = b - inv_phi * (b - a), x2 = a + inv_phi * (b - a);
    double f1 = volume(std::exp(x1)).value, f2 = volume(std::exp(x2)).value;
    while (b - a > cfg.tol) {
        if (f1 >= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = volume(std::exp(x1)).value;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = volume(std::exp(x2)).value;
        }
    }
    res.gamma_star = std::exp(0.5 * (a + b));
    res.volume = volume(res.gamma_star);
    res.bracketed = true;
    return res;
}

double tfl_delta(const SystemParams& params, const DecisionSetting& setting) {
    params.validate();
    const std::size_t k = params.K();
    double inv_rate_sum = 0.0;
    double numerator = 0.0;
    const auto rho = params.rho_vector();
    if (std::holds_alternative<SettingI>(setting)) {
        for (std::size_t i = 0; i < k; ++i) inv_rate_sum += 1.0 / params.mu[i];
        const auto v = region_msr_I(params).verdict(rho);
        numerator = v.constraints[v.binding].rhs - v.constraints[v.binding].lhs;
    } else if (std::holds_alternative<SettingII>(setting)) {
        double load = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            const double rate = params.mu[i] * env_stationary(params, i).pi1;
            inv_rate_sum += 1.0 / rate;
            load += params.lambda[i] / rate;
        }
        numerator = 1.0 - load;
    } else if (const auto* s3 = std::get_if<SettingIII>(&setting)) {
        for (std::size_t i = 0; i < k; ++i) {
            inv_rate_sum += 1.0 / (params.mu[i] * theta(params, i, s3->gamma));
        }
        const auto v = region_msr_III_P(params, s3->gamma).verdict(rho);
        numerator = v.constraints[v.binding].rhs - v.constraints[v.binding].lhs;
    } else {
        double load = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            inv_rate_sum += 1.0 / params.mu[i];
            load += rho[i];
        }
        numerator = 1.0 - load;
    }
    return numerator / inv_rate_sum;
}

nlohmann::json to_json(const RegionVerdict& v) {
    nlohmann::json constraints = nlohmann::json::array();
    for (const auto& c : v.constraints) {
        nlohmann::json members = nlohmann::json::array();
        for (std::size_t i = 0; i < 32; ++i) {
            if (c.subset & (SubsetMask{1} << i)) members.push_back(i + 1);
        }
        constraints.push_back({{"mask", c.subset},
                               {"subset", members},
                               {"lhs", c.lhs},
                               {"rhs", c.rhs},
                               {"slack", c.slack}});
    }
    return {{"inside", v.inside},
            {"necessary_only", v.necessary_only},
            {"binding", v.constraints.empty() ? nlohmann::json(nullptr)
                                              : nlohmann::json(v.constraints[v.binding].subset)},
            {"constraints", constraints}};
}

nlohmann::json to_json(const VolumeEstimate& e) {
    nlohmann::json out{{"value", e.value},
                       {"ci", e.ci_halfwidth},
                       {"method", e.method == VolumeEstimate::Method::Exact ? "exact" : "monte_carlo"}};
    if (e.method == VolumeEstimate::Method::MonteCarlo) {
        out["samples"] = e.samples;
        out["hits"] = e.hits;
    }
    return out;
}

}  // namespace msr
