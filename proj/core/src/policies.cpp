#include "msr/policies.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "msr/config.hpp"

namespace msr {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// Index among `candidates` with the largest q, ties resolved per `tie`.
std::size_t argmax_q(const SimState& s, const std::vector<std::size_t>& candidates, TieBreak tie,
                     double draw) {
    std::int64_t best = -1;
    for (auto i : candidates) best = std::max(best, s.q[i]);
    std::vector<std::size_t> ties;
    for (auto i : candidates) {
        if (s.q[i] == best) ties.push_back(i);
    }
    if (tie == TieBreak::LowestIndex || ties.size() == 1) return ties.front();
    auto pick = static_cast<std::size_t>(draw * static_cast<double>(ties.size()));
    return ties[std::min(pick, ties.size() - 1)];
}

Assignment decide_slc(const SimState& s, TieBreak tie, double draw) {
    std::vector<std::size_t> ready;
    std::optional<std::size_t> first_connected;
    for (std::size_t i = 0; i < s.K(); ++i) {
        if (!s.e[i]) continue;
        if (!first_connected) first_connected = i;
        if (s.q[i] > 0) ready.push_back(i);
    }
    if (!ready.empty()) return argmax_q(s, ready, tie, draw);
    return first_connected;
}

Assignment decide_priority(const SimState& s, const Priority& p) {
    std::optional<std::size_t> first_connected;
    for (auto i : p.order) {
        if (!s.e[i]) continue;
        if (s.q[i] > 0) return i;
        if (!first_connected) first_connected = i;
    }
    return first_connected;
}

Assignment decide_slc_plus(const SimState& s, TieBreak tie, double draw) {
    if (s.connectivity_mask() != 0) return decide_slc(s, tie, draw);
    std::vector<std::size_t> all(s.K());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return argmax_q(s, all, tie, draw);
}

Assignment decide_split(const SimState& s, const StaticSplit& split, double draw) {
    const auto mask = s.connectivity_mask();
    auto it = split.table.find(mask);
    if (it == split.table.end()) {
        throw PolicyError("static split table has no entry for connectivity pattern " +
                          std::to_string(mask));
    }
    const auto& probs = it->second;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
        acc += probs[i];
        if (draw < acc) return i;
    }
    if (probs.back() > 0.0) return std::nullopt;
    // Rounding: fall back to the last queue with mass.
    for (std::size_t i = probs.size() - 1; i-- > 0;) {
        if (probs[i] > 0.0) return i;
    }
    return std::nullopt;
}

std::string pattern_string(std::uint32_t mask, std::size_t k) {
    std::string out(k, '0');
    for (std::size_t i = 0; i < k; ++i) {
        if (mask & (1u << i)) out[i] = '1';
    }
    return out;
}

}  // namespace

void validate(const Policy& policy, std::size_t k) {
    std::visit(overloaded{
                   [](const Slc&) {},
                   [](const SlcPlus&) {},
                   [k](const Priority& p) {
                       std::vector<std::size_t> sorted = p.order;
                       std::sort(sorted.begin(), sorted.end());
                       bool ok = sorted.size() == k;
                       for (std::size_t i = 0; ok && i < k; ++i) ok = sorted[i] == i;
                       if (!ok) throw PolicyError("priority order must be a permutation of 1..K");
                   },
                   [k](const StaticSplit& split) {
                       for (const auto& [mask, probs] : split.table) {
                           if (k < 32 && mask >= (1u << k)) {
                               throw PolicyError("static split pattern out of range");
                           }
                           if (probs.size() != k + 1) {
                               throw PolicyError("static split rows need K+1 probabilities");
                           }
                           double sum = 0.0;
                           for (double x : probs) {
                               if (!(x >= 0.0)) throw PolicyError("negative split probability");
                               sum += x;
                           }
                           if (std::abs(sum - 1.0) > 1e-12) {
                               throw PolicyError("static split row for pattern " +
                                                 pattern_string(mask, k) + " does not sum to 1");
                           }
                       }
                   },
               },
               policy);
}

Assignment decide(const Policy& policy, const SimState& state, double draw) {
    return std::visit(overloaded{
                          [&](const Slc& p) { return decide_slc(state, p.tie_break, draw); },
                          [&](const Priority& p) { return decide_priority(state, p); },
                          [&](const SlcPlus& p) { return decide_slc_plus(state, p.tie_break, draw); },
                          [&](const StaticSplit& p) { return decide_split(state, p, draw); },
                      },
                      policy);
}

bool is_class_P(const Policy& policy) {
    return std::visit(overloaded{
                          [](const Slc&) { return true; },
                          [](const Priority&) { return true; },
                          [](const SlcPlus&) { return false; },
                          // A split ignores queue lengths, so it may pick an empty
                          // queue while another connected one has work.
                          [](const StaticSplit&) { return false; },
                      },
                      policy);
}

bool is_deterministic(const Policy& policy) {
    return std::visit(overloaded{
                          [](const Slc& p) { return p.tie_break == TieBreak::LowestIndex; },
                          [](const Priority&) { return true; },
                          [](const SlcPlus& p) { return p.tie_break == TieBreak::LowestIndex; },
                          [](const StaticSplit&) { return false; },
                      },
                      policy);
}

Policy policy_from_string(const std::string& text, std::size_t k,
                          const std::filesystem::path& base_dir) {
    Policy out;
    if (text == "slc") {
        out = Slc{};
    } else if (text == "slc_random") {
        out = Slc{TieBreak::Random};
    } else if (text == "slc_plus") {
        out = SlcPlus{};
    } else if (text.rfind("priority:", 0) == 0) {
        Priority p;
        std::stringstream ss(text.substr(9));
        std::string item;
        while (std::getline(ss, item, ',')) {
            long idx = 0;
            try {
                idx = std::stol(item);
            } catch (const std::exception&) {
                throw PolicyError("bad priority entry '" + item + "'");
            }
            if (idx < 1) throw PolicyError("priority entries are 1-based queue indices");
            p.order.push_back(static_cast<std::size_t>(idx - 1));
        }
        out = std::move(p);
    } else if (text == "priority") {
        Priority p;
        for (std::size_t i = 0; i < k; ++i) p.order.push_back(i);
        out = std::move(p);
    } else if (text.rfind("sss:", 0) == 0) {
        std::filesystem::path path = text.substr(4);
        if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
        auto split = load_static_split(path, k);
        split.source = text.substr(4);
        out = std::move(split);
    } else {
        throw PolicyError("unknown policy '" + text + "'");
    }
    validate(out, k);
    return out;
}

std::string policy_to_string(const Policy& policy) {
    return std::visit(overloaded{
                          [](const Slc& p) {
                              return std::string(p.tie_break == TieBreak::Random ? "slc_random"
                                                                                 : "slc");
                          },
                          [](const SlcPlus&) { return std::string("slc_plus"); },
                          [](const Priority& p) {
                              std::string s = "priority:";
                              for (std::size_t i = 0; i < p.order.size(); ++i) {
                                  if (i) s += ",";
                                  s += std::to_string(p.order[i] + 1);
                              }
                              return s;
                          },
                          [](const StaticSplit& p) { return "sss:" + p.source; },
                      },
                      policy);
}

StaticSplit parse_static_split(const std::string& text, std::size_t k) {
    StaticSplit split;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto arrow = line.find("->");
        if (arrow == std::string::npos) {
            throw PolicyError("split table line " + std::to_string(lineno) + ": expected '->'");
        }
        std::string pattern;
        for (char ch : line.substr(0, arrow)) {
            if (ch == '0' || ch == '1') {
                pattern += ch;
            } else if (ch != ' ' && ch != '\t') {
                throw PolicyError("split table line " + std::to_string(lineno) + ": bad pattern");
            }
        }
        if (pattern.size() != k) {
            throw PolicyError("split table line " + std::to_string(lineno) +
                              ": pattern must have K characters");
        }
        std::uint32_t mask = 0;
        for (std::size_t i = 0; i < k; ++i) {
            if (pattern[i] == '1') mask |= (1u << i);
        }
        Config tmp;
        tmp.set("row", line.substr(arrow + 2));
        split.table[mask] = tmp.get_vector("row");
    }
    return split;
}

StaticSplit load_static_split(const std::filesystem::path& path, std::size_t k) {
    std::ifstream in(path);
    if (!in) throw PolicyError("cannot open split table " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    auto split = parse_static_split(ss.str(), k);
    split.source = path.string();
    return split;
}

std::string format_static_split(const StaticSplit& split, std::size_t k) {
    std::string out;
    for (const auto& [mask, probs] : split.table) {
        out += pattern_string(mask, k) + " -> ";
        for (std::size_t i = 0; i < probs.size(); ++i) {
            if (i) out += ",";
            out += format_double(probs[i]);
        }
        out += "\n";
    }
    return out;
}

}  // namespace msr
