#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "msr/engine.hpp"
#include "msr/model.hpp"
#include "msr/oracle.hpp"
#include "msr/regions.hpp"

namespace msr::cli {

// Largest value of rho_i keeping the point inside `region` with every other
// coordinate fixed (zero when already outside along another constraint).
double max_coordinate(const SubsetPolytope& region, std::span<const double> rho, std::size_t i);

// Largest s with s * direction inside the closure of `region`.
double max_scale(const SubsetPolytope& region, std::span<const double> direction);

// The stability region characterizing `setting` (class P in Setting III).
SubsetPolytope setting_region(const SystemParams& params, const DecisionSetting& setting);

// Priority-instability construction: queue 1 carries a small load, queue 2
// a load strictly between the share priority leaves it and the stability
// bound, all other queues none.
struct Prop41Config {
    SystemParams base;  // rates; only lambda_p, mu_p and mu are used
    double rho1 = 0.15;
    DecisionSetting setting = SettingI{};
    double pilot_horizon = 2e5;
    std::uint64_t pilot_seed = 11;
    DriftConfig drift{};
};

struct Prop41Result {
    std::string pilot;     // "single-queue" or "saturated"
    double eps1 = 0.0;     // effective fraction of queue 1 alone (single-queue pilot)
    double lower = 0.0;    // share of queue 2 under priority
    double upper = 0.0;    // stability bound on rho_2
    bool found = false;
    SystemParams params;
    bool inside_region = false;
    DriftReport priority;
    DriftReport slc;
    bool reproduced = false;  // priority Unstable and SLC Stable
};

Prop41Result run_prop41(const Prop41Config& cfg);
nlohmann::json to_json(const Prop41Result& r);

// Point between the class-P Setting III bound and the SLC-plus bound along a
// load direction, with drift estimates for both policies.
struct SlcPlusGapConfig {
    SystemParams base;  // rates; loads come from `direction`
    std::vector<double> direction;
    double gamma = 1.0;
    DriftConfig drift{};
};

struct SlcPlusGapResult {
    double s_class_p = 0.0;
    double s_slc_plus = 0.0;
    SystemParams params;
    bool outside_class_p = false;
    bool inside_slc_plus = false;
    DriftReport slc_plus;
    DriftReport slc;
    bool witnessed = false;  // SLC-plus Stable, SLC slope >= 0
};

SlcPlusGapResult run_slc_plus_gap(const SlcPlusGapConfig& cfg);
nlohmann::json to_json(const SlcPlusGapResult& r);

// Single-queue truncated-chain verdicts against the closed-form conditions.
struct OracleGridConfig {
    double lambda_p = 1.0;
    double mu_p = 1.0;
    double gamma = 2.0;
    std::vector<double> factors;  // load / bound; default 0.1..0.9, 1.1..1.9
    std::vector<std::int64_t> caps{25, 50, 100, 200, 400};
    unsigned threads = 0;
};

struct OracleGridRow {
    std::string setting;
    double factor;
    double rho;
    double bound;
    Verdict expected;
    OracleStability oracle;
    bool agree;
};

std::vector<OracleGridRow> oracle_grid_check(const OracleGridConfig& cfg);

// Two-queue stationary means against simulated time averages.
struct OracleSimConfig {
    std::size_t instances = 5;
    std::uint64_t seed = 3;
    std::int64_t cap = 30;
    double horizon = 2e5;    // total simulated time per instance
    std::size_t batches = 20;
    double tolerance_se = 3.0;
    unsigned threads = 0;
};

struct OracleSimRow {
    std::size_t instance;
    SystemParams params;
    DecisionSetting setting;
    std::vector<double> oracle_mean;
    double truncation_tail;  // stationary mass with max q >= cap
    std::vector<double> sim_mean;
    std::vector<double> sim_se;
    bool agree;
};

std::vector<OracleSimRow> oracle_sim_check(const OracleSimConfig& cfg);

nlohmann::json to_json(const OracleGridRow& r);
nlohmann::json to_json(const OracleSimRow& r);

// Series behind the figure panels.
struct SeriesPoint {
    std::string panel;
    std::string series;
    double x;
    double y;
};

struct Fig3Config {
    std::vector<double> lambda_p{0.8, 3.0};
    std::vector<double> mu_p{0.2, 1.0};
    std::vector<double> alphas{1.0, 10.0};
    double gamma_lo = 0.01;
    double gamma_hi = 1000.0;
    std::size_t gamma_points = 61;
    double rho_lo = 0.05;
    double rho_hi = 0.37;
    std::size_t rho_points = 33;
};

struct Fig4Config {
    std::vector<double> lambda_p{0.8, 3.0};
    std::vector<double> mu_p{0.2, 1.0};
    std::vector<double> alphas{1.0, 10.0};
    double r_lo = 0.01;
    double r_hi = 0.5;
    std::size_t r_points = 50;
    std::size_t k_max = 50;
    double gamma_base = 5.0;
    std::uint64_t seed = 2024;
};

struct Fig5Config {
    std::vector<double> lambda_p{1.0, 2.0, 3.0};
    std::vector<double> mu_p{3.0, 2.0, 1.0};
    std::vector<double> overheads{0.001, 0.01, 0.05};
    double gamma_lo = 0.1;
    double gamma_hi = 1000.0;
    std::size_t gamma_points = 41;
    std::vector<double> c_grid;  // right panel; default log grid 1e-3..1e-1
    GammaOptConfig opt{};
};

std::vector<SeriesPoint> sweep_fig3(const Fig3Config& cfg);
std::vector<SeriesPoint> sweep_fig4(const Fig4Config& cfg);
std::vector<SeriesPoint> sweep_fig5(const Fig5Config& cfg);

// Environment rates of the first k queues of the random family; prefixes are
// shared across k.
SystemParams random_family(std::size_t k, std::uint64_t seed);

void write_series_csv(std::ostream& out, const std::vector<SeriesPoint>& points);
// gnuplot script plotting each panel of `csv_path` with one line per series.
void write_gnuplot(std::ostream& out, const std::vector<SeriesPoint>& points,
                   const std::string& csv_path, const std::string& title);

}  // namespace msr::cli
