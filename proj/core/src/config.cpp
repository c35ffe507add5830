#include "msr/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace msr {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    double out = 0.0;
    const auto* first = t.data();
    const auto* last = t.data() + t.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc{} || ptr != last) {
        throw ModelError("config key '" + key + "': '" + t + "' is not a number");
    }
    return out;
}

}  // namespace

Config Config::parse(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ModelError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        }
        const std::string key = trim(t.substr(0, eq));
        if (key.empty()) {
            throw ModelError("config line " + std::to_string(lineno) + ": empty key");
        }
        cfg.values_[key] = trim(t.substr(eq + 1));
    }
    return cfg;
}

Config Config::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ModelError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

void Config::merge(const Config& other) {
    for (const auto& [k, v] : other.values_) values_[k] = v;
}

std::string Config::get_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ModelError("missing config key '" + key + "'");
    return it->second;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key) const {
    return parse_double(key, get_string(key));
}

double Config::get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

std::int64_t Config::get_int(const std::string& key) const {
    const std::string t = trim(get_string(key));
    std::int64_t out = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
    if (ec != std::errc{} || ptr != t.data() + t.size()) {
        // Allow integral values written in floating notation, e.g. 1e4.
        const double d = parse_double(key, t);
        if (d != static_cast<double>(static_cast<std::int64_t>(d))) {
            throw ModelError("config key '" + key + "' must be an integer");
        }
        return static_cast<std::int64_t>(d);
    }
    return out;
}

std::int64_t Config::get_int(const std::string& key, std::int64_t fallback) const {
    return has(key) ? get_int(key) : fallback;
}

std::uint64_t Config::get_seed(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const std::string t = trim(get_string(key));
    std::uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
    if (ec != std::errc{} || ptr != t.data() + t.size()) {
        throw ModelError("config key '" + key + "' must be an unsigned integer");
    }
    return out;
}

std::optional<std::vector<double>> Config::find_vector(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return get_vector(key);
}

std::vector<double> Config::get_vector(const std::string& key) const {
    std::string t = trim(get_string(key));
    if (!t.empty() && t.front() == '[') {
        if (t.back() != ']') throw ModelError("config key '" + key + "': unterminated '['");
        t = t.substr(1, t.size() - 2);
    }
    std::vector<double> out;
    if (trim(t).empty()) return out;
    std::stringstream ss(t);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_double(key, item));
    return out;
}

std::string Config::to_text(const std::string& prefix) const {
    std::string out;
    for (const auto& [k, v] : values_) out += prefix + k + " = " + v + "\n";
    return out;
}

std::string format_double(double x) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    (void)ec;
    return std::string(buf, ptr);
}

std::string format_vector(const std::vector<double>& v) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        out += format_double(v[i]);
    }
    return out + "]";
}

SystemParams params_from_config(const Config& cfg) {
    SystemParams p;
    p.lambda_p = cfg.get_vector("lambda_p");
    p.mu_p = cfg.get_vector("mu_p");
    const std::size_t k = p.lambda_p.size();
    if (auto mu = cfg.find_vector("mu")) {
        p.mu = *mu;
    } else {
        p.mu.assign(k, 1.0);
    }
    if (auto lambda = cfg.find_vector("lambda")) {
        p.lambda = *lambda;
    } else if (auto rho = cfg.find_vector("rho")) {
        if (rho->size() != p.mu.size()) throw ModelError("rho and mu must have the same length");
        p.lambda.resize(rho->size());
        for (std::size_t i = 0; i < rho->size(); ++i) p.lambda[i] = (*rho)[i] * p.mu[i];
    } else {
        throw ModelError("config needs 'lambda' or 'rho'");
    }
    if (cfg.has("K") && static_cast<std::size_t>(cfg.get_int("K")) != p.lambda.size()) {
        throw ModelError("K does not match the length of the rate vectors");
    }
    p.validate();
    return p;
}

void params_to_config(const SystemParams& params, Config& cfg) {
    cfg.erase("rho");
    cfg.set("K", std::to_string(params.K()));
    cfg.set("lambda", format_vector(params.lambda));
    cfg.set("mu", format_vector(params.mu));
    cfg.set("lambda_p", format_vector(params.lambda_p));
    cfg.set("mu_p", format_vector(params.mu_p));
}

DecisionSetting setting_from_config(const Config& cfg) {
    const std::string name = cfg.get_string("setting", "one");
    DecisionSetting s;
    if (name == "zero" || name == "0") {
        s = SettingZero{cfg.get_double("gamma")};
    } else if (name == "one" || name == "I") {
        s = SettingI{};
    } else if (name == "two" || name == "II") {
        s = SettingII{};
    } else if (name == "three" || name == "III") {
        s = SettingIII{cfg.get_double("gamma")};
    } else {
        throw ModelError("unknown setting '" + name + "' (expected zero|one|two|three)");
    }
    validate(s);
    return s;
}

void setting_to_config(const DecisionSetting& setting, Config& cfg) {
    cfg.set("setting", setting_name(setting));
    if (auto g = gamma_clock(setting)) cfg.set("gamma", format_double(*g));
}

}  // namespace msr
