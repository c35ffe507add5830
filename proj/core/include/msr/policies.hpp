#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "msr/model.hpp"

namespace msr {

enum class TieBreak : std::uint8_t {
    LowestIndex,  // deterministic default
    Random,       // uniform among tied queues, driven by the decision draw
};

// Serve Longest Connected.
struct Slc {
    TieBreak tie_break = TieBreak::LowestIndex;
};

// Strict priority; order[0] is served first.
struct Priority {
    std::vector<std::size_t> order;
};

// SLC, except that when every queue is disconnected the server is dedicated
// to the longest queue instead of idling.
struct SlcPlus {
    TieBreak tie_break = TieBreak::LowestIndex;
};

// Static service split: for each connectivity pattern (bit i set = queue i
// connected) a distribution over the K queues followed by the idle mark.
struct StaticSplit {
    std::map<std::uint32_t, std::vector<double>> table;
    std::string source;  // file the table was read from, if any
};

using Policy = std::variant<Slc, Priority, SlcPlus, StaticSplit>;

class PolicyError : public ModelError {
public:
    using ModelError::ModelError;
};

void validate(const Policy& policy, std::size_t k);

// Assignment chosen at a decision epoch. `draw` is uniform on [0,1) and is
// only consumed by randomized tie-breaks and static splits.
Assignment decide(const Policy& policy, const SimState& state, double draw);

bool is_class_P(const Policy& policy);

// True when decide() never consumes its draw.
bool is_deterministic(const Policy& policy);

// `slc | slc_random | priority:1,2,3 | slc_plus | sss:<path>`; priority lists
// are 1-based. Relative SSS paths are resolved against `base_dir`.
Policy policy_from_string(const std::string& text, std::size_t k,
                          const std::filesystem::path& base_dir = {});
std::string policy_to_string(const Policy& policy);

// Table file: one line per pattern, `101 -> p_1,...,p_K,p_idle`, where the
// pattern's j-th character is the connectivity of queue j (1-based).
StaticSplit parse_static_split(const std::string& text, std::size_t k);
StaticSplit load_static_split(const std::filesystem::path& path, std::size_t k);
std::string format_static_split(const StaticSplit& split, std::size_t k);

}  // namespace msr
