#pragma once

#include <set>
#include <string>
#include <vector>

namespace cli {

// Expands `--config FILE` into `--key=value` tokens inserted right after the
// subcommand, so explicit command-line flags win under a take-last policy.
// Config files are flat `key = value` lines with '#' comments; keys are the
// long option names without the leading dashes. Values of keys listed in
// path_keys are resolved relative to the config file's directory.
std::vector<std::string> expand_config(const std::vector<std::string>& args,
                                       const std::set<std::string>& path_keys);

}  // namespace cli
