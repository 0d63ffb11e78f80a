#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "simalloc/energy.hpp"
#include "simalloc/engine.hpp"

namespace simalloc {

/// Everything a run needs besides the trace.
struct RunConfig {
    SimConfig sim;
    PowerModel power;

    void check() const;
    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Integer with an optional K, M or G suffix (powers of 1024).
std::uint64_t parse_size(std::string_view text);

/// Fully qualified keys (section.key) in canonical order.
const std::vector<std::string>& config_keys();

/// Resolves a bare key to its qualified form when it names exactly one key.
/// Throws ConfigError for unknown or ambiguous keys.
std::string resolve_key(std::string_view key);

void apply_setting(RunConfig& config, std::string_view key, std::string_view value);
std::string get_setting(const RunConfig& config, std::string_view key);

/// Parses `section.key=value` lines; '#' starts a comment. Unknown keys and
/// repeated keys are errors. Starts from the defaults.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::string& path);
/// Canonical dump: every key, one per line, in config_keys() order.
std::string to_config_text(const RunConfig& config);

}  // namespace simalloc
