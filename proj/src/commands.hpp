#ifndef NOETHER_APP_COMMANDS_HPP
#define NOETHER_APP_COMMANDS_HPP

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

#include "config.hpp"

namespace noether::app {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitDiverged = 3;
inline constexpr int kExitFail = 4;

/// trajectory.csv, trajectory.jsonl, run.json and plot_<monitor>.svg in
/// `out_dir`. Returns kExitDiverged when the run was truncated.
int cmd_run(const Config& cfg, const std::string& out_dir, std::ostream& out);

/// Per-generator invariance, Rund-Trautmann and trajectory checks; table on
/// `out`, full report in check.json.
int cmd_check(const Config& cfg, const std::string& out_dir, std::ostream& out);

/// Width sweep over [ntk].widths; table on `out`, ntk.csv and ntk.json.
int cmd_ntk(const Config& cfg, const std::string& out_dir, std::ostream& out);

/// Loads the config and runs `command` (run, check, ntk). Errors are reported
/// on `err` and mapped to exit codes.
int dispatch(const std::string& command, const std::string& config_path,
             const std::optional<std::string>& out_dir, std::optional<std::uint64_t> seed_override,
             std::ostream& out, std::ostream& err);

}  // namespace noether::app

#endif  // NOETHER_APP_COMMANDS_HPP
