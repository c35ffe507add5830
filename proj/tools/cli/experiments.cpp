#include "experiments.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <set>

#include "msr/config.hpp"
#include "msr/parallel.hpp"
#include "msr/policies.hpp"
#include "msr/rng.hpp"
#include "msr/stats.hpp"

namespace msr::cli {

double max_coordinate(const SubsetPolytope& region, std::span<const double> rho, std::size_t i) {
    double best = std::numeric_limits<double>::infinity();
    const auto& w = region.weights();
    for (std::size_t j = 0; j < region.subsets().size(); ++j) {
        const SubsetMask m = region.subsets()[j];
        if (!(m & (SubsetMask{1} << i))) continue;
        double rest = 0.0;
        for (std::size_t l = 0; l < region.K(); ++l) {
            if (l != i && (m & (SubsetMask{1} << l))) rest += w[l] * rho[l];
        }
        best = std::min(best, (region.rhs()[j] - rest) / w[i]);
    }
    return std::max(best, 0.0);
}

double max_scale(const SubsetPolytope& region, std::span<const double> direction) {
    if (direction.size() != region.K()) throw RegionError("direction dimension mismatch");
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < region.subsets().size(); ++j) {
        double load = 0.0;
        for (std::size_t i = 0; i < region.K(); ++i) {
            if (region.subsets()[j] & (SubsetMask{1} << i)) load += region.weights()[i] * direction[i];
        }
        if (load > 0.0) best = std::min(best, region.rhs()[j] / load);
    }
    return best;
}

SubsetPolytope setting_region(const SystemParams& params, const DecisionSetting& setting) {
    if (std::holds_alternative<SettingI>(setting)) return region_msr_I(params);
    if (std::holds_alternative<SettingII>(setting)) return region_msr_II(params);
    if (const auto* s = std::get_if<SettingIII>(&setting)) return region_msr_III_P(params, s->gamma);
    // With permanent connectivity only the total load matters.
    std::vector<double> w(params.K(), 1.0);
    return SubsetPolytope(w, {static_cast<SubsetMask>((1ull << params.K()) - 1)}, {1.0});
}

namespace {

SystemParams with_loads(const SystemParams& base, const std::vector<double>& rho) {
    SystemParams p = base;
    p.lambda.resize(rho.size());
    for (std::size_t i = 0; i < rho.size(); ++i) p.lambda[i] = rho[i] * p.mu[i];
    return p;
}

nlohmann::json params_json(const SystemParams& p) {
    return {{"lambda", p.lambda},
            {"mu", p.mu},
            {"lambda_p", p.lambda_p},
            {"mu_p", p.mu_p},
            {"rho", p.rho_vector()}};
}

}  // namespace

Prop41Result run_prop41(const Prop41Config& cfg) {
    const std::size_t k = cfg.base.K();
    if (k < 2) throw ModelError("the priority construction needs K >= 2");
    if (!(cfg.rho1 >= 0.0)) throw ModelError("rho1 must be non-negative");
    if (std::holds_alternative<SettingZero>(cfg.setting)) {
        throw ModelError("the priority construction needs random connectivity");
    }
    if (!(cfg.pilot_horizon > 0.0)) throw ModelError("pilot horizon must be positive");

    Prop41Result res;
    std::vector<double> rho(k, 0.0);
    rho[0] = cfg.rho1;
    SystemParams p = with_loads(cfg.base, rho);
    p.validate();

    Priority priority;
    for (std::size_t i = 0; i < k; ++i) priority.order.push_back(i);
    SimOptions quiet;
    quiet.sampling = SampleMode::None;

    if (std::holds_alternative<SettingI>(cfg.setting)) {
        // Queue 1 evolves on its own under priority, so its effective fraction
        // comes from a single-queue run.
        res.pilot = "single-queue";
        SystemParams alone{{p.lambda[0]}, {p.mu[0]}, {p.lambda_p[0]}, {p.mu_p[0]}};
        const SimState x0{{0}, {1}, std::nullopt};
        const auto tr = simulate(alone, SettingI{}, Slc{}, x0, cfg.pilot_horizon, cfg.pilot_seed, quiet);
        res.eps1 = tr.effective_time[0] / tr.final_time;
        res.lower = env_stationary(p, 1).pi1 * (1.0 - res.eps1);
    } else {
        // Keep queue 2 saturated and measure the service share it gets.
        res.pilot = "saturated";
        SimState x0{std::vector<std::int64_t>(k, 0), std::vector<std::uint8_t>(k, 1), std::nullopt};
        x0.q[1] = static_cast<std::int64_t>(4.0 * cfg.pilot_horizon * p.mu[1]) + 1000;
        const auto tr = simulate(p, cfg.setting, priority, x0, cfg.pilot_horizon, cfg.pilot_seed, quiet);
        res.lower = tr.effective_time[1] / tr.final_time;
        res.eps1 = tr.effective_time[0] / tr.final_time;
    }

    const auto region = setting_region(p, cfg.setting);
    res.upper = max_coordinate(region, rho, 1);
    res.found = res.lower < res.upper;
    rho[1] = res.found ? 0.5 * (res.lower + res.upper) : res.upper;
    res.params = with_loads(cfg.base, rho);
    res.inside_region = setting_region(res.params, cfg.setting).contains(res.params.rho_vector());
    if (!res.found) return res;

    DriftConfig drift = cfg.drift;
    drift.initial = {InitialShape::SingleQueue, 1};
    res.priority = drift_estimate(res.params, cfg.setting, priority, drift);
    res.slc = drift_estimate(res.params, cfg.setting, Slc{}, drift);
    res.reproduced = res.inside_region && res.priority.verdict == Verdict::Unstable &&
                     res.slc.verdict == Verdict::Stable;
    return res;
}

nlohmann::json to_json(const Prop41Result& r) {
    nlohmann::json out{{"pilot", r.pilot},
                       {"eps1", r.eps1},
                       {"rho2_lower", r.lower},
                       {"rho2_upper", r.upper},
                       {"found", r.found},
                       {"params", params_json(r.params)},
                       {"inside_region", r.inside_region},
                       {"reproduced", r.reproduced}};
    if (r.found) {
        out["priority"] = to_json(r.priority);
        out["slc"] = to_json(r.slc);
    }
    return out;
}

SlcPlusGapResult run_slc_plus_gap(const SlcPlusGapConfig& cfg) {
    const std::size_t k = cfg.base.K();
    std::vector<double> d = cfg.direction.empty() ? std::vector<double>(k, 1.0) : cfg.direction;
    if (d.size() != k) throw ModelError("direction must have K entries");
    for (double v : d) {
        if (!(v >= 0.0)) throw ModelError("direction entries must be non-negative");
    }
    SystemParams probe = with_loads(cfg.base, d);
    probe.validate();

    SlcPlusGapResult res;
    res.s_class_p = max_scale(region_msr_III_P(probe, cfg.gamma), d);
    res.s_slc_plus = max_scale(region_slc_plus_polytope(probe, cfg.gamma), d);
    const double s = 0.5 * (res.s_class_p + res.s_slc_plus);
    std::vector<double> rho(k);
    for (std::size_t i = 0; i < k; ++i) rho[i] = s * d[i];
    res.params = with_loads(cfg.base, rho);
    res.outside_class_p = !msr_III_P(res.params, cfg.gamma).inside;
    res.inside_slc_plus = region_slc_plus(res.params, cfg.gamma).inside;

    const DecisionSetting setting = SettingIII{cfg.gamma};
    res.slc_plus = drift_estimate(res.params, setting, SlcPlus{}, cfg.drift);
    res.slc = drift_estimate(res.params, setting, Slc{}, cfg.drift);
    res.witnessed = res.outside_class_p && res.inside_slc_plus &&
                    res.slc_plus.verdict == Verdict::Stable && res.slc.slope >= 0.0;
    return res;
}

nlohmann::json to_json(const SlcPlusGapResult& r) {
    return {{"scale_class_p_bound", r.s_class_p},
            {"scale_slc_plus_bound", r.s_slc_plus},
            {"params", params_json(r.params)},
            {"outside_class_p", r.outside_class_p},
            {"inside_slc_plus", r.inside_slc_plus},
            {"slc_plus", to_json(r.slc_plus)},
            {"slc", to_json(r.slc)},
            {"witnessed", r.witnessed}};
}

std::vector<OracleGridRow> oracle_grid_check(const OracleGridConfig& cfg) {
    std::vector<double> factors = cfg.factors;
    if (factors.empty()) {
        for (int j = 1; j <= 9; ++j) factors.push_back(0.1 * j);
        for (int j = 11; j <= 19; ++j) factors.push_back(0.1 * j);
    }
    const std::vector<DecisionSetting> settings{SettingI{}, SettingII{}, SettingIII{cfg.gamma}};
    std::vector<OracleGridRow> rows(settings.size() * factors.size());
    parallel_for(rows.size(), cfg.threads, [&](std::size_t j) {
        const auto& setting = settings[j / factors.size()];
        const double f = factors[j % factors.size()];
        SystemParams one{{0.0}, {1.0}, {cfg.lambda_p}, {cfg.mu_p}};
        double bound = env_stationary(one, 0).pi1;
        if (const auto* s3 = std::get_if<SettingIII>(&setting)) bound *= theta(one, 0, s3->gamma);
        one.lambda[0] = f * bound;
        OracleGridRow row{setting_name(setting), f, f * bound, bound,
                          f < 1.0 ? Verdict::Stable : Verdict::Unstable, {}, false};
        row.oracle = oracle_stability(one, setting, Slc{}, cfg.caps);
        row.agree = row.oracle.verdict == row.expected;
        rows[j] = std::move(row);
    });
    return rows;
}

std::vector<OracleSimRow> oracle_sim_check(const OracleSimConfig& cfg) {
    if (cfg.batches < 2) throw ModelError("need at least two batches");
    std::vector<OracleSimRow> rows(cfg.instances);
    parallel_for(cfg.instances, cfg.threads, [&](std::size_t n) {
        Engine rng = make_stream(cfg.seed, n);
        auto between = [&](double a, double b) { return a + (b - a) * uniform01(rng); };
        SystemParams p;
        for (std::size_t i = 0; i < 2; ++i) {
            p.lambda_p.push_back(between(0.5, 2.0));
            p.mu_p.push_back(between(0.5, 2.0));
            p.mu.push_back(1.0);
            p.lambda.push_back(0.0);
        }
        DecisionSetting setting = SettingI{};
        if (n % 3 == 1) setting = SettingII{};
        if (n % 3 == 2) setting = SettingIII{between(1.0, 4.0)};
        for (std::size_t i = 0; i < 2; ++i) {
            double share = env_stationary(p, i).pi1;
            if (const auto* s3 = std::get_if<SettingIII>(&setting)) share *= theta(p, i, s3->gamma);
            p.lambda[i] = between(0.1, 0.3) * share * p.mu[i];
        }

        OracleSimRow row;
        row.instance = n;
        row.params = p;
        row.setting = setting;
        const auto chain = build_chain(p, setting, Slc{}, cfg.cap);
        const auto st = solve_stationary(chain);
        row.oracle_mean = stationary_mean_q(chain, st);
        row.truncation_tail = stationary_tail_mass(chain, st, cfg.cap);

        SimOptions opt;
        opt.sampling = SampleMode::None;
        const double chunk = cfg.horizon / static_cast<double>(cfg.batches);
        SimState x{{0, 0}, {1, 1}, std::nullopt};
        const std::uint64_t sim_seed = stream_seed(cfg.seed, 1000 + n);
        x = simulate(p, setting, Slc{}, x, 0.05 * cfg.horizon, stream_seed(sim_seed, 0), opt).final_state;
        std::vector<std::vector<double>> means(2, std::vector<double>(cfg.batches));
        for (std::size_t b = 0; b < cfg.batches; ++b) {
            const auto tr = simulate(p, setting, Slc{}, x, chunk, stream_seed(sim_seed, b + 1), opt);
            for (std::size_t i = 0; i < 2; ++i) means[i][b] = tr.q_integral[i] / tr.final_time;
            x = tr.final_state;
        }
        row.agree = true;
        for (std::size_t i = 0; i < 2; ++i) {
            const auto ci = mean_ci(means[i]);
            row.sim_mean.push_back(ci.mean);
            row.sim_se.push_back(ci.se);
            row.agree = row.agree &&
                        std::abs(ci.mean - row.oracle_mean[i]) <= cfg.tolerance_se * ci.se;
        }
        rows[n] = std::move(row);
    });
    return rows;
}

nlohmann::json to_json(const OracleGridRow& r) {
    return {{"setting", r.setting},
            {"factor", r.factor},
            {"rho", r.rho},
            {"bound", r.bound},
            {"expected", to_string(r.expected)},
            {"verdict", to_string(r.oracle.verdict)},
            {"caps", r.oracle.caps},
            {"tail_mass", r.oracle.tail},
            {"agree", r.agree}};
}

nlohmann::json to_json(const OracleSimRow& r) {
    nlohmann::json out{{"instance", r.instance},
                       {"params", params_json(r.params)},
                       {"setting", setting_name(r.setting)},
                       {"oracle_mean", r.oracle_mean},
                       {"truncation_tail", r.truncation_tail},
                       {"sim_mean", r.sim_mean},
                       {"sim_se", r.sim_se},
                       {"agree", r.agree}};
    if (auto g = gamma_clock(r.setting)) out["gamma"] = *g;
    return out;
}

namespace {

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
    if (!(lo > 0.0 && hi > lo) || n < 2) throw ModelError("invalid log grid");
    std::vector<double> g(n);
    for (std::size_t j = 0; j < n; ++j) {
        g[j] = std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * static_cast<double>(j) /
                                           static_cast<double>(n - 1));
    }
    return g;
}

std::vector<double> lin_grid(double lo, double hi, std::size_t n) {
    if (!(hi > lo) || n < 2) throw ModelError("invalid grid");
    std::vector<double> g(n);
    for (std::size_t j = 0; j < n; ++j) {
        g[j] = lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(n - 1);
    }
    return g;
}

SystemParams env_only(const std::vector<double>& lambda_p, const std::vector<double>& mu_p,
                      double alpha = 1.0) {
    if (lambda_p.size() != mu_p.size()) throw ModelError("lambda_p and mu_p differ in length");
    SystemParams p;
    for (std::size_t i = 0; i < lambda_p.size(); ++i) {
        p.lambda.push_back(0.0);
        p.mu.push_back(1.0);
        p.lambda_p.push_back(alpha * lambda_p[i]);
        p.mu_p.push_back(alpha * mu_p[i]);
    }
    p.validate();
    return p;
}

std::string alpha_label(double a) { return "alpha=" + format_double(a); }

}  // namespace

std::vector<SeriesPoint> sweep_fig3(const Fig3Config& cfg) {
    std::vector<SeriesPoint> out;
    for (double a : cfg.alphas) {
        const auto p = env_only(cfg.lambda_p, cfg.mu_p, a);
        for (double g : log_grid(cfg.gamma_lo, cfg.gamma_hi, cfg.gamma_points)) {
            out.push_back({"sr_vs_gamma", alpha_label(a), g, sr_III(p, g)});
        }
    }
    for (double r : lin_grid(cfg.rho_lo, cfg.rho_hi, cfg.rho_points)) {
        const auto p = SystemParams::from_rho({r, r}, {1.0, 1.0}, {1.0, 1.0});
        const auto g0 = gamma0(p);
        out.push_back({"gamma0_vs_rho", "symmetric", r,
                       g0.finite ? g0.gamma : std::numeric_limits<double>::infinity()});
    }
    return out;
}

SystemParams random_family(std::size_t k, std::uint64_t seed) {
    SystemParams p;
    for (std::size_t i = 0; i < k; ++i) {
        Engine rng = make_stream(seed, i);
        p.lambda.push_back(0.0);
        p.mu.push_back(1.0);
        // (0, 1] keeps the rates strictly positive.
        p.lambda_p.push_back(1.0 - uniform01(rng));
        p.mu_p.push_back(1.0 - uniform01(rng));
    }
    return p;
}

std::vector<SeriesPoint> sweep_fig4(const Fig4Config& cfg) {
    std::vector<SeriesPoint> out;
    for (double a : cfg.alphas) {
        const auto p = env_only(cfg.lambda_p, cfg.mu_p, a);
        double u = 0.0;
        for (std::size_t i = 0; i < p.K(); ++i) u += p.lambda_p[i] + p.mu_p[i];
        for (double r : lin_grid(cfg.r_lo, cfg.r_hi, cfg.r_points)) {
            const double g1 = p.K() == 2 ? gamma1_quadratic_k2(p, r) : gamma1(p, r).gamma;
            out.push_back({"gamma1_vs_R", alpha_label(a), r, (g1 - u) / u});
        }
    }
    for (std::size_t k = 1; k <= cfg.k_max; ++k) {
        const auto p = random_family(k, cfg.seed);
        const double kk = static_cast<double>(k);
        out.push_back({"sr_vs_K", "gamma=c", kk, sr_III(p, cfg.gamma_base)});
        out.push_back({"sr_vs_K", "gamma=c*sqrt(K)", kk, sr_III(p, cfg.gamma_base * std::sqrt(kk))});
        out.push_back({"sr_vs_K", "gamma=c*K", kk, sr_III(p, cfg.gamma_base * kk)});
    }
    return out;
}

std::vector<SeriesPoint> sweep_fig5(const Fig5Config& cfg) {
    std::vector<SeriesPoint> out;
    const auto p = env_only(cfg.lambda_p, cfg.mu_p);
    const auto box = region_msr_I(p).bounding_box();
    const auto gammas = log_grid(cfg.gamma_lo, cfg.gamma_hi, cfg.gamma_points);
    for (double c : cfg.overheads) {
        std::vector<double> vols(gammas.size());
        parallel_for(gammas.size(), cfg.opt.threads, [&](std::size_t j) {
            vols[j] = vol_mc(region_msr_III_overhead(p, gammas[j], c), box, cfg.opt.samples,
                             cfg.opt.seed, 1)
                          .value;
        });
        for (std::size_t j = 0; j < gammas.size(); ++j) {
            out.push_back({"volume_vs_gamma", "c=" + format_double(c), gammas[j], vols[j]});
        }
    }
    const auto cs = cfg.c_grid.empty() ? log_grid(1e-3, 1e-1, 9) : cfg.c_grid;
    std::vector<double> stars(cs.size());
    parallel_for(cs.size(), cfg.opt.threads, [&](std::size_t j) {
        GammaOptConfig opt = cfg.opt;
        opt.threads = 1;
        stars[j] = gamma_opt(p, cs[j], opt).gamma_star;
    });
    for (std::size_t j = 0; j < cs.size(); ++j) {
        out.push_back({"gamma_star_vs_c", "optimal", cs[j], stars[j]});
    }
    return out;
}

void write_series_csv(std::ostream& out, const std::vector<SeriesPoint>& points) {
    out << "panel,series,x,y\n";
    for (const auto& p : points) {
        out << p.panel << ',' << p.series << ',' << format_double(p.x) << ','
            << (std::isfinite(p.y) ? format_double(p.y) : std::string("inf")) << '\n';
    }
}

void write_gnuplot(std::ostream& out, const std::vector<SeriesPoint>& points,
                   const std::string& csv_path, const std::string& title) {
    std::vector<std::string> panels;
    std::map<std::string, std::vector<std::string>> series;
    for (const auto& p : points) {
        if (std::find(panels.begin(), panels.end(), p.panel) == panels.end()) panels.push_back(p.panel);
        auto& s = series[p.panel];
        if (std::find(s.begin(), s.end(), p.series) == s.end()) s.push_back(p.series);
    }
    out << "set datafile separator ','\n";
    out << "set terminal pngcairo size " << 640 * panels.size() << ",480\n";
    out << "set output '" << title << ".png'\n";
    out << "set multiplot layout 1," << panels.size() << " title '" << title << "'\n";
    for (const auto& panel : panels) {
        const bool logx = panel != "gamma1_vs_R" && panel != "gamma0_vs_rho" && panel != "sr_vs_K";
        out << (logx ? "set logscale x\n" : "unset logscale x\n");
        out << "set title '" << panel << "'\n";
        out << "plot ";
        const auto& s = series[panel];
        for (std::size_t j = 0; j < s.size(); ++j) {
            out << (j ? ", \\\n     " : "") << "'" << csv_path << "' using "
                << "(strcol(1) eq '" << panel << "' && strcol(2) eq '" << s[j]
                << "' ? $3 : 1/0):4 with linespoints title '" << s[j] << "'";
        }
        out << '\n';
    }
    out << "unset multiplot\n";
}

}  // namespace msr::cli
