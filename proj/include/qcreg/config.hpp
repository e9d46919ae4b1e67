#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "qcreg/optimizer.hpp"

namespace qcreg {

/// Sets one field from its text form. Keys mirror RegistrationConfig
/// (`patches` for patches_per_side, `descriptor` = raw | hog).
/// Throws ConfigError on unknown keys or unparsable values.
void apply_config_entry(RegistrationConfig &config, std::string_view key, std::string_view value);

/// Flat `key = value` lines; `#` starts a comment. Later keys win.
RegistrationConfig parse_config(std::string_view text, RegistrationConfig base = {});
RegistrationConfig load_config(const std::filesystem::path &path, RegistrationConfig base = {});

/// JSON object with every field, beta/gamma/t1..t3 resolved.
std::string config_to_json(const RegistrationConfig &config);

} // namespace qcreg
