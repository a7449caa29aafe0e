#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "hopforge/errors.hpp"

namespace hopforge {

// Calls fn(parsed_object) for every non-empty line; blames the offending
// line number on parse or schema failures.
template <typename Fn>
void for_each_jsonl_line(const std::string& path, Fn&& fn) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IntegrityError("cannot open " + path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw IntegrityError(path + " line " + std::to_string(line_no) + ": " + e.what());
        }
        try {
            fn(j);
        } catch (const nlohmann::json::exception& e) {
            throw IntegrityError(path + " line " + std::to_string(line_no) + ": " + e.what());
        }
    }
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IntegrityError("cannot open " + path + " for writing");
    out << content;
    out.flush();
    if (!out) throw IntegrityError("failed writing " + path);
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IntegrityError("cannot open " + path);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline nlohmann::json load_json_file(const std::string& path) {
    try {
        return nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError(path + ": " + e.what());
    }
}

} // namespace hopforge
