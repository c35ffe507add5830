#pragma once

#include <filesystem>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "msr/config.hpp"

namespace msr::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitConfig = 2,
    kExitInfeasible = 3,
    kExitInconclusive = 4,
};

// Options that shape a run without changing its results.
struct RunContext {
    bool strict = false;
    unsigned threads = 0;
    std::filesystem::path base_dir;         // for relative paths inside the config
    std::filesystem::path out_path;         // empty = the stream passed in
    std::filesystem::path gnuplot_path;     // sweeps only
    std::filesystem::path trajectory_path;  // simulate only
    std::filesystem::path export_prefix;    // oracle-check only
};

struct CommandInfo {
    std::string name;
    std::string summary;
};

const std::vector<CommandInfo>& commands();

// Runs `name` on `cfg`, which is completed in place with every default the
// command used, and writes the result (with the resolved config embedded) to
// `out`. Returns an exit code; invalid input raises msr::ModelError.
int run_command(const std::string& name, Config& cfg, std::ostream& out, const RunContext& ctx);

// Reads a config file, or the config embedded in a JSON or CSV output file.
Config load_config_any(const std::filesystem::path& path);

// Full command-line entry point.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace msr::cli
