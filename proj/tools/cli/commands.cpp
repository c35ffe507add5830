#include "commands.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "experiments.hpp"
#include "msr/engine.hpp"
#include "msr/oracle.hpp"
#include "msr/policies.hpp"
#include "msr/regions.hpp"

namespace msr::cli {

namespace {

using json = nlohmann::json;

void def(Config& cfg, const std::string& key, const std::string& value) {
    if (!cfg.has(key)) cfg.set(key, value);
}

// Rates from the config, written back in canonical form. Commands that only
// look at the environments accept configs without loads.
SystemParams load_params(Config& cfg, bool need_loads) {
    if (!need_loads && !cfg.has("lambda") && !cfg.has("rho")) {
        cfg.set("rho", format_vector(std::vector<double>(cfg.get_vector("lambda_p").size(), 0.0)));
    }
    const SystemParams p = params_from_config(cfg);
    params_to_config(p, cfg);
    return p;
}

DecisionSetting load_setting(Config& cfg) {
    def(cfg, "setting", "one");
    const auto s = setting_from_config(cfg);
    setting_to_config(s, cfg);
    return s;
}

Policy load_policy(Config& cfg, std::size_t k, const RunContext& ctx) {
    def(cfg, "policy", "slc");
    return policy_from_string(cfg.get_string("policy"), k, ctx.base_dir);
}

InitialCondition load_initial(Config& cfg, const std::string& fallback, std::size_t k) {
    def(cfg, "initial", fallback);
    def(cfg, "initial_queue", "1");
    const auto shape = cfg.get_string("initial");
    InitialCondition ic;
    if (shape == "single") {
        ic.shape = InitialShape::SingleQueue;
    } else if (shape == "balanced") {
        ic.shape = InitialShape::Balanced;
    } else {
        throw ModelError("initial must be 'single' or 'balanced'");
    }
    const auto q = cfg.get_int("initial_queue");
    if (q < 1 || static_cast<std::size_t>(q) > k) throw ModelError("initial_queue out of range");
    ic.queue = static_cast<std::size_t>(q - 1);
    return ic;
}

DriftConfig load_drift(Config& cfg, const RunContext& ctx, std::size_t k,
                       const std::string& initial = "single") {
    def(cfg, "scale_n", "10000");
    def(cfg, "reps", "20");
    def(cfg, "t1", "0.1");
    def(cfg, "t2", "0.6");
    def(cfg, "seed", "1");
    def(cfg, "confidence", "0.95");
    DriftConfig d;
    d.scale_n = cfg.get_int("scale_n");
    d.reps = static_cast<std::size_t>(cfg.get_int("reps"));
    d.t1 = cfg.get_double("t1");
    d.t2 = cfg.get_double("t2");
    d.seed = cfg.get_seed("seed", 1);
    d.confidence = cfg.get_double("confidence");
    d.initial = load_initial(cfg, initial, k);
    d.threads = ctx.threads;
    return d;
}

void emit_json(std::ostream& out, const std::string& name, const Config& cfg, json result) {
    json doc;
    doc["command"] = name;
    doc["config"] = json::object();
    for (const auto& [k, v] : cfg.entries()) doc["config"][k] = v;
    doc["result"] = std::move(result);
    out << doc.dump(2) << '\n';
}

void emit_csv_header(std::ostream& out, const std::string& name, const Config& cfg) {
    out << "# msr " << name << '\n' << cfg.to_text("# ");
}

double require_gamma(const Config& cfg, const std::string& region) {
    if (!cfg.has("gamma")) throw ModelError("region " + region + " needs gamma");
    return cfg.get_double("gamma");
}

std::string default_region(const Config& cfg) {
    const auto s = cfg.get_string("setting", "one");
    if (s == "two" || s == "II") return "II";
    if (s == "three" || s == "III") return "III";
    return "I";
}

SubsetPolytope pick_region(const Config& cfg, const SystemParams& p) {
    const auto name = cfg.get_string("region");
    if (name == "I") return region_msr_I(p);
    if (name == "II") return region_msr_II(p);
    if (name == "III") return region_msr_III_P(p, require_gamma(cfg, name));
    if (name == "III-overhead") {
        if (!cfg.has("overhead_c")) throw ModelError("region III-overhead needs overhead_c");
        return region_msr_III_overhead(p, require_gamma(cfg, name), cfg.get_double("overhead_c"));
    }
    if (name == "slc-plus") return region_slc_plus_polytope(p, require_gamma(cfg, name));
    throw ModelError("unknown region '" + name + "' (expected I|II|III|III-overhead|slc-plus)");
}

int cmd_region(Config& cfg, std::ostream& out, const RunContext&) {
    def(cfg, "region", default_region(cfg));
    const auto p = load_params(cfg, true);
    const auto v = pick_region(cfg, p).verdict(p.rho_vector());
    emit_json(out, "region", cfg, {{"region", cfg.get_string("region")}, {"verdict", to_json(v)}});
    return kExitOk;
}

int cmd_vol(Config& cfg, std::ostream& out, const RunContext& ctx) {
    def(cfg, "region", default_region(cfg));
    def(cfg, "samples", "1000000");
    def(cfg, "seed", "1");
    const auto p = load_params(cfg, false);
    const auto region = pick_region(cfg, p);
    const auto name = cfg.get_string("region");
    json result{{"region", name}};
    result["monte_carlo"] = to_json(vol_mc(region, {}, static_cast<std::uint64_t>(cfg.get_int("samples")),
                                           cfg.get_seed("seed", 1), ctx.threads));
    if (name == "II") result["exact"] = to_json(vol_exact_II(p));
    if (name == "I" && p.K() == 2) result["exact"] = to_json(vol_exact_I_K2(p));
    emit_json(out, "vol", cfg, result);
    return kExitOk;
}

int cmd_sr(Config& cfg, std::ostream& out, const RunContext& ctx) {
    def(cfg, "samples", "1000000");
    def(cfg, "seed", "1");
    const auto p = load_params(cfg, false);
    const auto samples = static_cast<std::uint64_t>(cfg.get_int("samples"));
    const auto seed = cfg.get_seed("seed", 1);
    const auto outer = region_msr_I(p);
    json result;
    json two;
    if (p.K() == 2) two["closed_form"] = sr_II(p);
    two["monte_carlo"] = to_json(reduction_mc(outer, region_msr_II(p), samples, seed, ctx.threads));
    result["II"] = two;
    if (cfg.has("gamma")) {
        const double g = cfg.get_double("gamma");
        result["III"] = {{"gamma", g},
                         {"closed_form", sr_III(p, g)},
                         {"monte_carlo", to_json(reduction_mc(outer, region_msr_III_P(p, g), samples,
                                                              seed, ctx.threads))}};
    }
    emit_json(out, "sr", cfg, result);
    return kExitOk;
}

json solve_json(const GammaSolve& s) {
    return {{"gamma", s.finite ? json(s.gamma) : json("inf")}, {"finite", s.finite}, {"status", s.status}};
}

int cmd_gamma0(Config& cfg, std::ostream& out, const RunContext&) {
    def(cfg, "tol", "1e-09");
    const auto p = load_params(cfg, true);
    const auto s = gamma0(p, cfg.get_double("tol"));
    emit_json(out, "gamma0", cfg, solve_json(s));
    return s.finite ? kExitOk : kExitInfeasible;
}

int cmd_gamma1(Config& cfg, std::ostream& out, const RunContext&) {
    def(cfg, "tol", "1e-12");
    if (!cfg.has("R")) throw ModelError("gamma1 needs R");
    const auto p = load_params(cfg, false);
    const double r = cfg.get_double("R");
    const auto s = gamma1(p, r, cfg.get_double("tol"));
    json result = solve_json(s);
    if (p.K() == 2) result["quadratic"] = gamma1_quadratic_k2(p, r);
    emit_json(out, "gamma1", cfg, result);
    return s.finite ? kExitOk : kExitInfeasible;
}

GammaOptConfig load_gamma_opt(Config& cfg, const RunContext& ctx) {
    GammaOptConfig g;
    def(cfg, "gamma_lo", format_double(g.gamma_lo));
    def(cfg, "gamma_hi", format_double(g.gamma_hi));
    def(cfg, "grid", std::to_string(g.grid));
    def(cfg, "samples", std::to_string(g.samples));
    def(cfg, "seed", std::to_string(g.seed));
    def(cfg, "search_tol", format_double(g.tol));
    g.gamma_lo = cfg.get_double("gamma_lo");
    g.gamma_hi = cfg.get_double("gamma_hi");
    g.grid = static_cast<std::size_t>(cfg.get_int("grid"));
    g.samples = static_cast<std::uint64_t>(cfg.get_int("samples"));
    g.seed = cfg.get_seed("seed", 7);
    g.tol = cfg.get_double("search_tol");
    g.threads = ctx.threads;
    return g;
}

int cmd_gamma_opt(Config& cfg, std::ostream& out, const RunContext& ctx) {
    if (!cfg.has("overhead_c")) throw ModelError("gamma-opt needs overhead_c");
    const auto p = load_params(cfg, false);
    const auto g = load_gamma_opt(cfg, ctx);
    const auto r = gamma_opt(p, cfg.get_double("overhead_c"), g);
    json scan = json::array();
    for (const auto& [x, v] : r.scan) scan.push_back({x, v});
    emit_json(out, "gamma-opt", cfg,
              {{"gamma_star", r.gamma_star},
               {"volume", to_json(r.volume)},
               {"bracketed", r.bracketed},
               {"scan", scan}});
    return r.bracketed || !ctx.strict ? kExitOk : kExitInconclusive;
}

int verdict_exit(const RunContext& ctx, std::initializer_list<Verdict> vs) {
    if (!ctx.strict) return kExitOk;
    for (auto v : vs) {
        if (v == Verdict::Inconclusive) return kExitInconclusive;
    }
    return kExitOk;
}

int cmd_simulate(Config& cfg, std::ostream& out, const RunContext& ctx) {
    const auto p = load_params(cfg, true);
    const auto setting = load_setting(cfg);
    const auto policy = load_policy(cfg, p.K(), ctx);
    def(cfg, "horizon", "1000");
    def(cfg, "seed", "1");
    def(cfg, "max_events", "0");
    def(cfg, "q0", format_vector(std::vector<double>(p.K(), 0.0)));
    def(cfg, "e0", format_vector(std::vector<double>(p.K(), 1.0)));
    def(cfg, "c0", "0");
    def(cfg, "drift", "1");

    SimState x0;
    for (double v : cfg.get_vector("q0")) x0.q.push_back(static_cast<std::int64_t>(v));
    for (double v : cfg.get_vector("e0")) x0.e.push_back(v != 0.0 ? 1 : 0);
    const auto c0 = cfg.get_int("c0");
    if (c0 < 0 || static_cast<std::size_t>(c0) > p.K()) throw ModelError("c0 out of range");
    if (c0 > 0) x0.c = static_cast<std::size_t>(c0 - 1);
    x0.validate(p.K());

    SimOptions opt;
    opt.max_events = static_cast<std::uint64_t>(cfg.get_int("max_events"));
    if (cfg.has("sample_dt")) {
        opt.sampling = SampleMode::Grid;
        opt.sample_dt = cfg.get_double("sample_dt");
    }
    if (ctx.trajectory_path.empty()) opt.sampling = SampleMode::None;
    const auto tr = simulate(p, setting, policy, x0, cfg.get_double("horizon"),
                             cfg.get_seed("seed", 1), opt);

    json result{{"events", tr.events_processed},
                {"decisions", tr.decisions},
                {"final_time", tr.final_time},
                {"final_q", tr.final_state.q},
                {"busy_time", tr.busy_time},
                {"connected_time", tr.connected_time},
                {"effective_time", tr.effective_time},
                {"mean_q", [&] {
                     std::vector<double> m;
                     for (double v : tr.q_integral) m.push_back(v / tr.final_time);
                     return m;
                 }()},
                {"arrivals", tr.arrivals},
                {"departures", tr.departures}};
    Verdict verdict = Verdict::Stable;
    if (cfg.get_int("drift") != 0) {
        const auto d = drift_estimate(p, setting, policy, load_drift(cfg, ctx, p.K()));
        result["drift"] = to_json(d);
        verdict = d.verdict;
    }
    if (!ctx.trajectory_path.empty()) {
        std::ofstream f(ctx.trajectory_path);
        if (!f) throw ModelError("cannot write " + ctx.trajectory_path.string());
        emit_csv_header(f, "simulate", cfg);
        write_trajectory_csv(f, tr);
    }
    emit_json(out, "simulate", cfg, result);
    return verdict_exit(ctx, {verdict});
}

int cmd_drift(Config& cfg, std::ostream& out, const RunContext& ctx) {
    const auto p = load_params(cfg, true);
    const auto setting = load_setting(cfg);
    const auto policy = load_policy(cfg, p.K(), ctx);
    const auto d = drift_estimate(p, setting, policy, load_drift(cfg, ctx, p.K()));
    json result = to_json(d);
    result["rep_slopes"] = d.rep_slopes;
    emit_json(out, "drift", cfg, result);
    return verdict_exit(ctx, {d.verdict});
}

int cmd_tfl(Config& cfg, std::ostream& out, const RunContext& ctx) {
    const auto p = load_params(cfg, true);
    const auto setting = load_setting(cfg);
    const auto policy = load_policy(cfg, p.K(), ctx);
    TflConfig t;
    def(cfg, "delta", format_double(tfl_delta(p, setting)));
    def(cfg, "scale_n", std::to_string(t.scale_n));
    def(cfg, "reps", std::to_string(t.reps));
    def(cfg, "seed", "1");
    def(cfg, "fluid_horizon", format_double(t.horizon));
    def(cfg, "grid_dt", format_double(t.grid_dt));
    def(cfg, "leader_tol", format_double(t.leader_tol));
    def(cfg, "min_window", format_double(t.min_window));
    def(cfg, "slack", format_double(t.slack));
    t.delta = cfg.get_double("delta");
    if (!(t.delta > 0.0)) {
        emit_json(out, "tfl", cfg, {{"delta", t.delta}, {"passed", false}, {"status", "non-positive delta"}});
        return kExitInfeasible;
    }
    t.scale_n = cfg.get_int("scale_n");
    t.reps = static_cast<std::size_t>(cfg.get_int("reps"));
    t.seed = cfg.get_seed("seed", 1);
    t.horizon = cfg.get_double("fluid_horizon");
    t.grid_dt = cfg.get_double("grid_dt");
    t.leader_tol = cfg.get_double("leader_tol");
    t.min_window = cfg.get_double("min_window");
    t.slack = cfg.get_double("slack");
    t.initial = load_initial(cfg, "single", p.K());
    t.threads = ctx.threads;
    const auto r = tfl_empirical(p, setting, policy, t);
    emit_json(out, "tfl", cfg, to_json(r));
    return ctx.strict && r.no_window ? kExitInconclusive : kExitOk;
}

std::vector<double> vec_or(Config& cfg, const std::string& key, const std::vector<double>& fallback) {
    def(cfg, key, format_vector(fallback));
    return cfg.get_vector(key);
}

void finish_sweep(const std::string& name, Config& cfg, std::ostream& out, const RunContext& ctx,
                  const std::vector<SeriesPoint>& pts) {
    emit_csv_header(out, name, cfg);
    write_series_csv(out, pts);
    if (!ctx.gnuplot_path.empty()) {
        std::ofstream g(ctx.gnuplot_path);
        if (!g) throw ModelError("cannot write " + ctx.gnuplot_path.string());
        const auto csv = ctx.out_path.empty() ? std::string(name + ".csv") : ctx.out_path.string();
        write_gnuplot(g, pts, csv, name);
    }
}

int cmd_sweep_fig3(Config& cfg, std::ostream& out, const RunContext& ctx) {
    Fig3Config f;
    f.lambda_p = vec_or(cfg, "lambda_p", f.lambda_p);
    f.mu_p = vec_or(cfg, "mu_p", f.mu_p);
    f.alphas = vec_or(cfg, "alphas", f.alphas);
    def(cfg, "gamma_lo", format_double(f.gamma_lo));
    def(cfg, "gamma_hi", format_double(f.gamma_hi));
    def(cfg, "gamma_points", std::to_string(f.gamma_points));
    def(cfg, "rho_lo", format_double(f.rho_lo));
    def(cfg, "rho_hi", format_double(f.rho_hi));
    def(cfg, "rho_points", std::to_string(f.rho_points));
    f.gamma_lo = cfg.get_double("gamma_lo");
    f.gamma_hi = cfg.get_double("gamma_hi");
    f.gamma_points = static_cast<std::size_t>(cfg.get_int("gamma_points"));
    f.rho_lo = cfg.get_double("rho_lo");
    f.rho_hi = cfg.get_double("rho_hi");
    f.rho_points = static_cast<std::size_t>(cfg.get_int("rho_points"));
    finish_sweep("sweep-fig3", cfg, out, ctx, sweep_fig3(f));
    return kExitOk;
}

int cmd_sweep_fig4(Config& cfg, std::ostream& out, const RunContext& ctx) {
    Fig4Config f;
    f.lambda_p = vec_or(cfg, "lambda_p", f.lambda_p);
    f.mu_p = vec_or(cfg, "mu_p", f.mu_p);
    f.alphas = vec_or(cfg, "alphas", f.alphas);
    def(cfg, "r_lo", format_double(f.r_lo));
    def(cfg, "r_hi", format_double(f.r_hi));
    def(cfg, "r_points", std::to_string(f.r_points));
    def(cfg, "k_max", std::to_string(f.k_max));
    def(cfg, "gamma_base", format_double(f.gamma_base));
    def(cfg, "seed", std::to_string(f.seed));
    f.r_lo = cfg.get_double("r_lo");
    f.r_hi = cfg.get_double("r_hi");
    f.r_points = static_cast<std::size_t>(cfg.get_int("r_points"));
    f.k_max = static_cast<std::size_t>(cfg.get_int("k_max"));
    f.gamma_base = cfg.get_double("gamma_base");
    f.seed = cfg.get_seed("seed", f.seed);
    finish_sweep("sweep-fig4", cfg, out, ctx, sweep_fig4(f));
    return kExitOk;
}

int cmd_sweep_fig5(Config& cfg, std::ostream& out, const RunContext& ctx) {
    Fig5Config f;
    f.lambda_p = vec_or(cfg, "lambda_p", f.lambda_p);
    f.mu_p = vec_or(cfg, "mu_p", f.mu_p);
    f.overheads = vec_or(cfg, "overheads", f.overheads);
    def(cfg, "curve_gamma_lo", format_double(f.gamma_lo));
    def(cfg, "curve_gamma_hi", format_double(f.gamma_hi));
    def(cfg, "curve_points", std::to_string(f.gamma_points));
    f.gamma_lo = cfg.get_double("curve_gamma_lo");
    f.gamma_hi = cfg.get_double("curve_gamma_hi");
    f.gamma_points = static_cast<std::size_t>(cfg.get_int("curve_points"));
    f.c_grid = vec_or(cfg, "c_grid", f.c_grid);
    f.opt = load_gamma_opt(cfg, ctx);
    finish_sweep("sweep-fig5", cfg, out, ctx, sweep_fig5(f));
    return kExitOk;
}

int cmd_prop41(Config& cfg, std::ostream& out, const RunContext& ctx) {
    def(cfg, "lambda_p", "[1, 1]");
    def(cfg, "mu_p", "[1, 1]");
    cfg.erase("lambda");
    cfg.erase("rho");
    Prop41Config pc;
    pc.base = load_params(cfg, false);
    cfg.erase("lambda");
    pc.setting = load_setting(cfg);
    def(cfg, "rho1", format_double(pc.rho1));
    def(cfg, "pilot_horizon", format_double(pc.pilot_horizon));
    def(cfg, "pilot_seed", std::to_string(pc.pilot_seed));
    pc.rho1 = cfg.get_double("rho1");
    pc.pilot_horizon = cfg.get_double("pilot_horizon");
    pc.pilot_seed = cfg.get_seed("pilot_seed", pc.pilot_seed);
    pc.drift = load_drift(cfg, ctx, pc.base.K());
    cfg.erase("initial");
    cfg.erase("initial_queue");
    const auto r = run_prop41(pc);
    emit_json(out, "prop41", cfg, to_json(r));
    if (!r.found) return kExitInfeasible;
    return verdict_exit(ctx, {r.priority.verdict, r.slc.verdict});
}

int cmd_slc_plus_gap(Config& cfg, std::ostream& out, const RunContext& ctx) {
    def(cfg, "lambda_p", "[1, 1]");
    def(cfg, "mu_p", "[1, 1]");
    cfg.erase("lambda");
    cfg.erase("rho");
    SlcPlusGapConfig gc;
    gc.base = load_params(cfg, false);
    cfg.erase("lambda");
    def(cfg, "gamma", "1");
    gc.gamma = cfg.get_double("gamma");
    gc.direction = vec_or(cfg, "direction", std::vector<double>(gc.base.K(), 1.0));
    gc.drift = load_drift(cfg, ctx, gc.base.K(), "balanced");
    const auto r = run_slc_plus_gap(gc);
    emit_json(out, "slc-plus-gap", cfg, to_json(r));
    return verdict_exit(ctx, {r.slc_plus.verdict});
}

int cmd_oracle_check(Config& cfg, std::ostream& out, const RunContext& ctx) {
    def(cfg, "mode", "both");
    const auto mode = cfg.get_string("mode");
    if (mode != "grid" && mode != "sim" && mode != "both" && mode != "export") {
        throw ModelError("mode must be grid|sim|both|export");
    }
    json result;
    std::size_t disagreements = 0;
    if (mode == "grid" || mode == "both") {
        OracleGridConfig g;
        def(cfg, "grid_lambda_p", format_double(g.lambda_p));
        def(cfg, "grid_mu_p", format_double(g.mu_p));
        def(cfg, "grid_gamma", format_double(g.gamma));
        std::vector<double> caps(g.caps.begin(), g.caps.end());
        caps = vec_or(cfg, "caps", caps);
        g.lambda_p = cfg.get_double("grid_lambda_p");
        g.mu_p = cfg.get_double("grid_mu_p");
        g.gamma = cfg.get_double("grid_gamma");
        g.caps.assign(caps.begin(), caps.end());
        g.threads = ctx.threads;
        json rows = json::array();
        for (const auto& row : oracle_grid_check(g)) {
            disagreements += row.agree ? 0 : 1;
            rows.push_back(to_json(row));
        }
        result["grid"] = rows;
    }
    if (mode == "sim" || mode == "both") {
        OracleSimConfig s;
        def(cfg, "instances", std::to_string(s.instances));
        def(cfg, "seed", std::to_string(s.seed));
        def(cfg, "cap", std::to_string(s.cap));
        def(cfg, "sim_horizon", format_double(s.horizon));
        def(cfg, "batches", std::to_string(s.batches));
        s.instances = static_cast<std::size_t>(cfg.get_int("instances"));
        s.seed = cfg.get_seed("seed", s.seed);
        s.cap = cfg.get_int("cap");
        s.horizon = cfg.get_double("sim_horizon");
        s.batches = static_cast<std::size_t>(cfg.get_int("batches"));
        s.threads = ctx.threads;
        json rows = json::array();
        for (const auto& row : oracle_sim_check(s)) {
            disagreements += row.agree ? 0 : 1;
            rows.push_back(to_json(row));
        }
        result["sim"] = rows;
    }
    if (mode == "export") {
        const auto p = load_params(cfg, true);
        const auto setting = load_setting(cfg);
        const auto policy = load_policy(cfg, p.K(), ctx);
        def(cfg, "cap", "10");
        const auto chain = build_chain(p, setting, policy, cfg.get_int("cap"));
        const auto st = solve_stationary(chain);
        if (!ctx.export_prefix.empty()) {
            std::ofstream t(ctx.export_prefix.string() + ".triplets");
            write_triplets(t, chain);
            std::ofstream s(ctx.export_prefix.string() + ".stationary");
            write_stationary(s, chain, st);
        }
        result["states"] = chain.num_states;
        result["reachable"] = std::count(chain.reachable.begin(), chain.reachable.end(), true);
        result["residual"] = st.residual;
        result["mean_q"] = stationary_mean_q(chain, st);
    }
    result["disagreements"] = disagreements;
    emit_json(out, "oracle-check", cfg, result);
    return ctx.strict && disagreements > 0 ? kExitInconclusive : kExitOk;
}

using Handler = std::function<int(Config&, std::ostream&, const RunContext&)>;

const std::map<std::string, Handler>& handlers() {
    static const std::map<std::string, Handler> h{
        {"region", cmd_region},         {"vol", cmd_vol},
        {"sr", cmd_sr},                 {"gamma0", cmd_gamma0},
        {"gamma1", cmd_gamma1},         {"gamma-opt", cmd_gamma_opt},
        {"simulate", cmd_simulate},     {"drift", cmd_drift},
        {"tfl", cmd_tfl},               {"sweep-fig3", cmd_sweep_fig3},
        {"sweep-fig4", cmd_sweep_fig4}, {"sweep-fig5", cmd_sweep_fig5},
        {"prop41", cmd_prop41},         {"slc-plus-gap", cmd_slc_plus_gap},
        {"oracle-check", cmd_oracle_check},
    };
    return h;
}

// Flags that set config keys; the key is the flag name with '-' -> '_'.
struct KeyFlag {
    const char* flag;
    const char* help;
};

constexpr KeyFlag kKeyFlags[] = {
    {"K", "number of queues (checked against the vectors)"},
    {"lambda", "arrival rates, e.g. \"[0.3, 0.3]\""},
    {"rho", "loads lambda_i / mu_i (alternative to --lambda)"},
    {"mu", "service rates (default all 1)"},
    {"lambda-p", "environment connect rates"},
    {"mu-p", "environment disconnect rates"},
    {"setting", "decision setting: zero|one|two|three"},
    {"gamma", "decision-clock rate"},
    {"policy", "slc|slc_random|slc_plus|priority[:1,2,..]|sss:<file>"},
    {"region", "I|II|III|III-overhead|slc-plus"},
    {"overhead-c", "inactivity per decision epoch"},
    {"samples", "Monte Carlo sample count"},
    {"seed", "master seed"},
    {"R", "tolerable stability reduction"},
    {"horizon", "simulated time"},
    {"scale-n", "fluid scaling n"},
    {"reps", "independent replications"},
    {"delta", "TFL drift constant (default from the closed form)"},
    {"initial", "single|balanced fluid start"},
    {"mode", "oracle-check: grid|sim|both|export"},
    {"cap", "oracle truncation"},
};

}  // namespace

const std::vector<CommandInfo>& commands() {
    static const std::vector<CommandInfo> c{
        {"region", "membership verdict with per-subset slacks"},
        {"vol", "region volume (Monte Carlo, plus closed form where known)"},
        {"sr", "stability reductions of Settings II and III"},
        {"gamma0", "minimal decision rate that stabilizes the loads"},
        {"gamma1", "minimal decision rate meeting a reduction target R"},
        {"gamma-opt", "decision rate maximizing the region under overhead"},
        {"simulate", "one trajectory plus a drift estimate"},
        {"drift", "fluid-scale drift of the longest queue"},
        {"tfl", "empirical fluid-limit drift test"},
        {"sweep-fig3", "reduction vs decision rate; gamma0 vs load"},
        {"sweep-fig4", "normalized gamma1 vs R; reduction vs K"},
        {"sweep-fig5", "overhead volume vs rate; optimal rate vs overhead"},
        {"prop41", "priority instability inside the stability region"},
        {"slc-plus-gap", "point stabilized by SLC-plus but not by class P"},
        {"oracle-check", "truncated-chain cross-checks"},
    };
    return c;
}

int run_command(const std::string& name, Config& cfg, std::ostream& out, const RunContext& ctx) {
    const auto it = handlers().find(name);
    if (it == handlers().end()) throw ModelError("unknown command '" + name + "'");
    return it->second(cfg, out, ctx);
}

Config load_config_any(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ModelError("cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
        json doc;
        try {
            doc = json::parse(text);
        } catch (const json::exception& e) {
            throw ModelError("bad JSON in " + path.string() + ": " + e.what());
        }
        const json& obj = doc.contains("config") ? doc["config"] : doc;
        Config cfg;
        for (const auto& [k, v] : obj.items()) cfg.set(k, v.is_string() ? v.get<std::string>() : v.dump());
        return cfg;
    }
    if (path.extension() == ".csv") {
        std::string body;
        std::istringstream lines(text);
        for (std::string line; std::getline(lines, line);) {
            if (line.rfind("# ", 0) == 0 && line.find(" = ") != std::string::npos) {
                body += line.substr(2) + '\n';
            }
        }
        return Config::parse(body);
    }
    return Config::parse(text);
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Stability regions of a multi-class queue with random connectivity"};
    app.require_subcommand(1);
    app.fallthrough();
    app.footer(
        "Exit codes: 0 ok, 2 config error, 3 infeasible, 4 inconclusive (with --strict).\n"
        "MSR_THREADS sets the default worker count.");

    std::string config_path, out_path, gnuplot_path, trajectory_path, export_prefix;
    std::vector<std::string> sets;
    bool strict = false;
    unsigned threads = 0;
    app.add_option("--config", config_path, "config file, or a previous JSON/CSV output");
    app.add_option("--set", sets, "override a config key: key=value")->take_all();
    app.add_option("-o,--out", out_path, "output file (default stdout)");
    app.add_flag("--strict", strict, "exit 4 when a verdict is inconclusive");
    app.add_option("--threads", threads, "worker threads (default MSR_THREADS or all cores)");
    app.add_option("--gnuplot", gnuplot_path, "sweeps: also write a gnuplot script");
    app.add_option("--trajectory-out", trajectory_path, "simulate: trajectory CSV path");
    app.add_option("--export-prefix", export_prefix, "oracle-check export: chain file prefix");

    std::map<std::string, std::string> flag_values;
    for (const auto& kf : kKeyFlags) {
        std::string key = kf.flag;
        std::replace(key.begin(), key.end(), '-', '_');
        app.add_option(std::string("--") + kf.flag, flag_values[key], kf.help);
    }
    for (const auto& c : commands()) app.add_subcommand(c.name, c.summary);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        Config cfg;
        RunContext ctx;
        if (!config_path.empty()) {
            cfg = load_config_any(config_path);
            ctx.base_dir = std::filesystem::path(config_path).parent_path();
        }
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw ModelError("--set expects key=value, got '" + s + "'");
            cfg.set(s.substr(0, eq), s.substr(eq + 1));
        }
        for (const auto& [k, v] : flag_values) {
            if (!v.empty()) cfg.set(k, v);
        }
        if ((cfg.has("lambda") || cfg.has("rho")) && flag_values["rho"].size() + flag_values["lambda"].size()) {
            cfg.erase(flag_values["rho"].empty() ? "rho" : "lambda");
        }
        ctx.strict = strict;
        ctx.threads = threads;
        ctx.out_path = out_path;
        ctx.gnuplot_path = gnuplot_path;
        ctx.trajectory_path = trajectory_path;
        ctx.export_prefix = export_prefix;

        const std::string name = app.get_subcommands().front()->get_name();
        std::ostringstream buffer;
        const int code = run_command(name, cfg, buffer, ctx);
        if (out_path.empty()) {
            out << buffer.str();
        } else {
            std::ofstream f(out_path);
            if (!f) throw ModelError("cannot write " + out_path);
            f << buffer.str();
        }
        return code;
    } catch (const ModelError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::runtime_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    }
}

}  // namespace msr::cli
