#pragma once

// RunConfig as a JSON document. Keys mirror the RunConfig field names; the
// optional "rates" object mirrors RateCard.

#include <filesystem>
#include <string>
#include <string_view>

#include "agentloop/model.hpp"

namespace agentloop {

/// Overlays the keys present in `json_text` onto `base`. Unknown keys and
/// ill-typed values throw std::invalid_argument naming the key.
RunConfig load_config_text(std::string_view json_text, RunConfig base = {});
RunConfig load_config_file(const std::filesystem::path& path, RunConfig base = {});

std::string config_json(const RunConfig& config);

}  // namespace agentloop
