#pragma once

// Contextual-capability measurements: information-retention loss across
// context changes, context-change counts and context-length statistics.

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "agentloop/llm_client.hpp"
#include "agentloop/model.hpp"

namespace agentloop {

/// Deduplicated, order-free set of short factual statements. Blank members
/// are rejected; members are stored trimmed.
class InfoUnitSet {
public:
    InfoUnitSet() = default;
    InfoUnitSet(std::initializer_list<std::string> units);

    /// False when the unit is blank or already present.
    bool insert(std::string_view unit);
    bool contains(std::string_view unit) const;
    std::size_t size() const noexcept { return units_.size(); }
    bool empty() const noexcept { return units_.empty(); }
    const std::set<std::string>& units() const noexcept { return units_; }

    friend bool operator==(const InfoUnitSet&, const InfoUnitSet&) = default;

private:
    std::set<std::string> units_;
};

/// 1 - |before ∩ matched| / |before|; nullopt when `before` is empty.
std::optional<double> info_loss(const InfoUnitSet& before, const InfoUnitSet& matched);

/// One unit per non-blank line; "[None]" alone means the empty set. Leading
/// list markers ("- ", "* ", "1. ") are dropped.
InfoUnitSet parse_unit_lines(std::string_view text);

/// Judge-driven extraction; nullopt when the judge fails.
std::optional<InfoUnitSet> extract_units(const std::string& context, const std::string& task,
                                         const CompletionBackend& judge);

/// Units of `a` the judge echoes back; anything not in `a` is discarded.
std::optional<InfoUnitSet> match_units(const InfoUnitSet& a, const InfoUnitSet& b, const CompletionBackend& judge);

enum class ContextChangeKind { Compression, SubthreadReturn };
std::string_view to_string(ContextChangeKind k) noexcept;

struct ContextChangeEvent {
    ContextChangeKind kind = ContextChangeKind::Compression;
    std::string thread;
    int turn = 0;
    std::size_t before_tokens = 0;
    std::size_t after_tokens = 0;
};

struct RetentionEvent {
    ContextChangeEvent change;
    std::size_t before_units = 0;
    std::size_t matched_units = 0;
    /// Absent when the event was skipped; `note` says why.
    std::optional<double> loss;
    std::string note;
};

/// Context changes found in one run: compressions (history before and after)
/// and subthreads (full transcript before, returned result after).
struct ContextChange {
    ContextChangeEvent event;
    std::string before_text;
    std::string after_text;
};

std::vector<ContextChange> context_changes(const std::vector<TrajectoryStep>& steps, const TokenCounter& counter);

std::vector<RetentionEvent> measure_retention(const std::vector<TrajectoryStep>& steps, const std::string& task,
                                              const CompletionBackend& judge, const TokenCounter& counter);

struct SeriesRow {
    int turn = 0;
    /// "Main" or "C1".."Ck"; subthreads take the lowest free slot.
    std::string slot;
    std::size_t tokens = 0;
};

struct RunContextStats {
    std::size_t change_count = 0;
    std::size_t peak_len = 0;
    std::size_t final_len = 0;
    std::size_t turns = 0;
    std::vector<SeriesRow> series;
};

struct ContextStats {
    double change_count = 0.0;
    double avg_peak_len = 0.0;
    double avg_final_len = 0.0;
    double turns = 0.0;
    std::vector<RunContextStats> runs;
    std::vector<std::string> warnings;
};

RunContextStats run_context_stats(const std::vector<TrajectoryStep>& steps);
ContextStats context_stats(const std::vector<std::vector<TrajectoryStep>>& runs);

/// Header "turn,thread_slot,tokens" then one row per (turn, live thread).
std::string series_csv(const std::vector<SeriesRow>& rows);

}  // namespace agentloop
