#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "msr/model.hpp"

namespace msr {

// Flat `key = value` text config. Lines starting with '#' are comments;
// vectors are written `[a, b, c]`. Keys are kept sorted so serialization is
// canonical.
class Config {
public:
    Config() = default;

    static Config parse(const std::string& text);
    static Config load(const std::filesystem::path& path);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    void erase(const std::string& key) { values_.erase(key); }
    // Keys of `other` override ours.
    void merge(const Config& other);

    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    std::int64_t get_int(const std::string& key) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    std::uint64_t get_seed(const std::string& key, std::uint64_t fallback) const;
    std::vector<double> get_vector(const std::string& key) const;
    std::optional<std::vector<double>> find_vector(const std::string& key) const;

    const std::map<std::string, std::string>& entries() const noexcept { return values_; }

    // Canonical text form; `prefix` is prepended to every line (e.g. "# ").
    std::string to_text(const std::string& prefix = "") const;

private:
    std::map<std::string, std::string> values_;
};

// Shortest round-trip decimal form of a double.
std::string format_double(double x);
std::string format_vector(const std::vector<double>& v);

// Reads K, lambda (or rho), mu (default all 1), lambda_p, mu_p.
SystemParams params_from_config(const Config& cfg);
void params_to_config(const SystemParams& params, Config& cfg);

// Reads `setting = zero|one|two|three` plus `gamma` where needed.
DecisionSetting setting_from_config(const Config& cfg);
void setting_to_config(const DecisionSetting& setting, Config& cfg);

}  // namespace msr
