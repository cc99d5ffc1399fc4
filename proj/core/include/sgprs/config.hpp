#pragma once

#include <sgprs/scenario.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace sgprs {

/// Configuration problem with the 1-based line it was found on (0 if unknown).
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string origin, int line, const std::string& message);

    int line() const { return line_; }

private:
    int line_;
};

/// Parses a scenario file and expands list-valued fields into individual runs.
///
/// The format is a TOML subset: `key = value` lines, `#` comments, and
/// `[scenario.<id>]` / `[curve.<id>]` sections. Keys before the first section
/// are defaults for every scenario. Values are numbers, "strings", booleans,
/// [arrays] (may span lines) and integer ranges `a..b`.
///
/// Expansion order: scenarios in file order, then variants in list order,
/// then n_tasks ascending.
std::vector<Scenario> parse_config(const std::filesystem::path& path);
std::vector<Scenario> parse_config_text(const std::string& text, const std::string& origin = "<config>");

/// Canonical single-run config; parse_config_text(emit_config(s)) yields {s}.
std::string emit_config(const Scenario& s);

}  // namespace sgprs
