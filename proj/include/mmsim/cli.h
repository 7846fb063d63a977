#pragma once

#include "mmsim/env.h"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mmsim::cli {

enum ExitCode { kOk = 0, kUsage = 1, kConfig = 2, kRuntime = 3 };

enum class PolicyKind { Greedy, Replay };

struct RunManifest {
    std::filesystem::path robot;
    std::optional<std::filesystem::path> worldgen;
    std::optional<std::filesystem::path> env;
    MotionKind motion = MotionKind::Slerp;
    std::vector<std::uint64_t> seeds;
    std::filesystem::path out = "out";
    PolicyKind policy = PolicyKind::Greedy;
    std::optional<std::filesystem::path> replay_dir;

    /// Throws ConfigError on missing files or an empty seed list.
    void validate() const;
};

/// "a..b" (inclusive) or a single seed. Throws ConfigError.
std::vector<std::uint64_t> parse_seeds(const std::string& text);

std::string world_file_name(std::uint64_t seed);
std::string episode_file_name(std::uint64_t seed);
std::string log_file_name(std::uint64_t seed);

/// Writes world and episode files per seed; every episode is re-checked for
/// solvability before it is written.
void cmd_gen(const RunManifest& m, std::ostream& out);

struct RunSummary {
    int episodes = 0;
    int successes = 0;
    int errors = 0;
    double success_rate = 0.0;
    double mean_length = 0.0;  ///< over episodes that ran without error
    double mean_step_seconds = 0.0;
};

/// Runs one episode per seed, writes the logs and summary.json and prints
/// the summary table (including per-step wall time) to `out`.
RunSummary cmd_run(const RunManifest& m, std::ostream& out);

/// Recomputes the summary from log files; wall time is not recorded there.
RunSummary summarize(const std::vector<EpisodeLog>& logs);

/// World occupancy, base path, EE path and start/goal markers.
std::string render_svg(const EpisodeLog& log);
void cmd_plot(const std::filesystem::path& log_path, const std::filesystem::path& svg_path);

/// Entry point of the command-line tool; returns the process exit code.
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mmsim::cli
