#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "perfpatch/error.hpp"
#include "perfpatch/util/text.hpp"

namespace perfpatch::util {

using json = nlohmann::json;

/// One compact JSON document per line, '\n' terminated. Key order is the
/// sorted order nlohmann::json uses, which keeps artifacts byte-stable.
template <typename T>
std::string to_jsonl(const std::vector<T>& rows) {
    std::string out;
    for (const auto& row : rows) {
        json j = row;
        out += j.dump(-1, ' ', false, json::error_handler_t::replace);
        out += '\n';
    }
    return out;
}

template <typename T>
std::vector<T> from_jsonl(std::string_view text, const std::string& origin = "<jsonl>") {
    std::vector<T> rows;
    int line_no = 0;
    for (const auto& line : split_lines(text)) {
        ++line_no;
        if (trim_view(line).empty()) continue;
        try {
            rows.push_back(json::parse(line).get<T>());
        } catch (const json::exception& e) {
            throw SchemaError(origin + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return rows;
}

template <typename T>
void write_jsonl(const std::filesystem::path& path, const std::vector<T>& rows) {
    write_file(path, to_jsonl(rows));
}

template <typename T>
std::vector<T> read_jsonl(const std::filesystem::path& path) {
    return from_jsonl<T>(read_file(path), path.string());
}

inline std::string dump_pretty(const json& j) {
    return j.dump(2, ' ', false, json::error_handler_t::replace) + "\n";
}

}  // namespace perfpatch::util
