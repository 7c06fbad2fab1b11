#pragma once

// Plain `key = value` configuration files. `#` starts a comment line, keys
// are case-sensitive, later duplicates override earlier ones.

#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "perfpatch/error.hpp"
#include "perfpatch/util/text.hpp"

namespace perfpatch::util {

class KeyValueConfig {
public:
    static KeyValueConfig parse(std::string_view text, const std::string& origin = "<config>") {
        KeyValueConfig cfg;
        int line_no = 0;
        for (const auto& raw : split_lines(text)) {
            ++line_no;
            std::string_view line = trim_view(raw);
            if (line.empty() || line.front() == '#') continue;
            auto eq = line.find('=');
            if (eq == std::string_view::npos)
                throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
            std::string key = trim(line.substr(0, eq));
            if (key.empty()) throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
            cfg.values_[key] = trim(line.substr(eq + 1));
        }
        return cfg;
    }

    static KeyValueConfig load(const std::filesystem::path& path) {
        if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
        return parse(read_file(path), path.string());
    }

    /// Environment variables named PREFIX + upper(key) win over file values.
    void apply_env_overrides(const std::string& prefix, const std::vector<std::string>& keys) {
        for (const auto& key : keys) {
            std::string env = prefix + to_upper(replace_all(key, "-", "_"));
            if (const char* v = std::getenv(env.c_str())) values_[key] = v;
        }
    }

    std::optional<std::string> get(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) return std::nullopt;
        return it->second;
    }

    std::string get_or(const std::string& key, const std::string& fallback) const {
        return get(key).value_or(fallback);
    }

    double get_real(const std::string& key, double fallback) const {
        auto v = get(key);
        if (!v) return fallback;
        auto list = parse_real_list(*v);
        if (list.size() != 1) throw ConfigError("key '" + key + "' expects one number, got '" + *v + "'");
        return list.front();
    }

    long get_int(const std::string& key, long fallback) const {
        auto v = get(key);
        if (!v) return fallback;
        try {
            std::size_t used = 0;
            long out = std::stol(*v, &used);
            if (used != v->size()) throw std::invalid_argument(*v);
            return out;
        } catch (const std::exception&) {
            throw ConfigError("key '" + key + "' expects an integer, got '" + *v + "'");
        }
    }

    void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

}  // namespace perfpatch::util
