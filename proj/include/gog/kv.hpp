#pragma once

// Flat `key = value` text files: one entry per line, '#' starts a comment.

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "gog/error.hpp"

namespace gog::kv {

struct Entry {
    std::string key;
    std::string value;
    std::size_t line;
};

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s, char sep = ',') {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, sep)) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

/// Parses entries in file order. Duplicate keys are an error.
inline std::vector<Entry> parse(std::istream& in) {
    std::vector<Entry> out;
    std::map<std::string, std::size_t> seen;
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
        ++no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected 'key = value'", no);
        Entry e{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), no};
        if (e.key.empty()) throw ParseError("empty key", no);
        if (auto it = seen.find(e.key); it != seen.end())
            throw ParseError("duplicate key '" + e.key + "' (first on line " + std::to_string(it->second) + ")", no);
        seen.emplace(e.key, no);
        out.push_back(std::move(e));
    }
    return out;
}

inline std::vector<Entry> parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    return parse(in);
}

inline double to_double(const Entry& e) {
    try {
        std::size_t used = 0;
        const double v = std::stod(e.value, &used);
        if (used != e.value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ParseError("'" + e.key + "' expects a number, got '" + e.value + "'", e.line);
    }
}

inline long long to_int(const Entry& e) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(e.value, &used);
        if (used != e.value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ParseError("'" + e.key + "' expects an integer, got '" + e.value + "'", e.line);
    }
}

}  // namespace gog::kv
