#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace ukan {

// Flat "section.key = value" text. '#' starts a comment; blank lines are
// ignored. Later duplicates override earlier ones.
class KeyValues {
public:
    static KeyValues parse(const std::string& text);
    static KeyValues load(const std::string& path);

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const;
    const std::string& get(const std::string& key) const;
    std::string get_or(const std::string& key, const std::string& fallback) const;

    const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
    std::string to_text() const;

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

std::int64_t parse_int(const std::string& s, const std::string& key);
double parse_double(const std::string& s, const std::string& key);
bool parse_bool(const std::string& s, const std::string& key);
std::vector<std::int64_t> parse_int_list(const std::string& s, const std::string& key);
std::string join_ints(const std::vector<std::int64_t>& v);

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace ukan
