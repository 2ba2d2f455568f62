#include "config.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace cli {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> read_config_tokens(const std::string& path,
                                            const std::set<std::string>& path_keys) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    const fs::path base = fs::path(path).parent_path();

    std::vector<std::string> tokens;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": empty key");
        if (path_keys.count(key) && !value.empty() && fs::path(value).is_relative())
            value = (base / value).string();
        tokens.push_back("--" + key + "=" + value);
    }
    return tokens;
}

}  // namespace

std::vector<std::string> expand_config(const std::vector<std::string>& args,
                                       const std::set<std::string>& path_keys) {
    // Locate the config flag and the subcommand token.
    std::string config_path;
    std::size_t sub_pos = 0;
    bool have_sub = false;
    for (std::size_t i = 0; i < args.size(); ++i) {
        const std::string& a = args[i];
        if (a.rfind("--config=", 0) == 0) {
            config_path = a.substr(9);
        } else if (a == "--config" && i + 1 < args.size()) {
            config_path = args[i + 1];
            ++i;
        } else if (!have_sub && !a.empty() && a[0] != '-') {
            sub_pos = i;
            have_sub = true;
        }
    }
    if (config_path.empty()) return args;

    const std::vector<std::string> injected = read_config_tokens(config_path, path_keys);
    std::vector<std::string> out;
    out.reserve(args.size() + injected.size());
    for (std::size_t i = 0; i < args.size(); ++i) {
        out.push_back(args[i]);
        if (have_sub && i == sub_pos)
            out.insert(out.end(), injected.begin(), injected.end());
    }
    if (!have_sub) out.insert(out.end(), injected.begin(), injected.end());
    return out;
}

}  // namespace cli
