#pragma once

// JSON Lines persistence of trajectory records, prompt reconstruction for
// replay, and a human-readable transcript.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "agentloop/model.hpp"

namespace agentloop {

/// One record, no trailing newline. Field order is fixed.
std::string to_json_line(const TrajectoryStep& step);
/// Parsed record or an error message.
std::variant<TrajectoryStep, std::string> from_json_line(std::string_view line);

std::string serialize_trajectory(const std::vector<TrajectoryStep>& steps);
void write_trajectory(const std::filesystem::path& path, const std::vector<TrajectoryStep>& steps);

struct LoadResult {
    std::vector<TrajectoryStep> steps;
    /// 1-based line number of the first corrupt record; reading stops there.
    std::optional<std::size_t> error_line;
    std::string error;
};

LoadResult parse_trajectory(std::string_view text);
LoadResult read_trajectory(const std::filesystem::path& path);

struct DigestMismatch {
    std::string owner;
    int turn = 0;
    std::string recorded;
    std::string rebuilt;
};

/// A context-window change seen while replaying.
struct CompressionReplay {
    std::string owner;
    int turn = 0;
    std::vector<Message> before;
    std::vector<Message> after;
};

struct Reconstruction {
    /// Final window of each owner.
    std::map<std::string, std::vector<Message>> windows;
    std::vector<CompressionReplay> compressions;
    std::vector<DigestMismatch> mismatches;
    std::size_t prompts_checked = 0;
};

/// Rebuilds every prompt from the records alone and compares its digest with
/// the recorded prompt_digest.
Reconstruction reconstruct(const std::vector<TrajectoryStep>& steps, const TokenCounter& counter);

std::string render_transcript(const std::vector<TrajectoryStep>& steps);

}  // namespace agentloop
