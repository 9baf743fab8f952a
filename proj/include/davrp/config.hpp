#pragma once

#include <map>
#include <string>

#include "davrp/trainer.hpp"

namespace davrp {

// Flat `key = value` files; '#' starts a comment, blank lines are skipped.
std::map<std::string, std::string> parse_config_file(const std::string& path);
std::map<std::string, std::string> parse_config_text(const std::string& text);

// Applies keys onto a training configuration; unknown keys are an error.
void apply_config(TrainConfig& cfg, const std::map<std::string, std::string>& kv);

}  // namespace davrp
