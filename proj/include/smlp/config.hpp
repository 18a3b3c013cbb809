#pragma once

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "smlp/errors.hpp"

namespace smlp {

/** Flat key = value configuration. Lines are `key = value`; blank lines and
 *  `#` comments are ignored. Unknown keys are kept (callers decide what they
 *  read), repeated keys take the last value. */
class Config {
public:
    Config() = default;

    static Config from_stream(std::istream& is, const std::string& origin = "<stream>") {
        Config cfg;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            const std::string_view sv = strip(line);
            if (sv.empty() || sv[0] == '#')
                continue;
            const auto eq = sv.find('=');
            if (eq == std::string_view::npos)
                throw ConfigError(origin + ":" + std::to_string(lineno) +
                                  ": expected key = value");
            const std::string key(strip(sv.substr(0, eq)));
            const std::string value(strip(sv.substr(eq + 1)));
            if (key.empty())
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
            cfg.values_[key] = value;
        }
        return cfg;
    }

    static Config from_file(const std::string& path) {
        std::ifstream is(path);
        if (!is)
            throw ConfigError("cannot open config: " + path);
        return from_stream(is, path);
    }

    static Config from_string(const std::string& text) {
        std::istringstream is(text);
        return from_stream(is, "<string>");
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    double get_real(const std::string& key, double fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end())
            return fallback;
        char* end = nullptr;
        const double x = std::strtod(it->second.c_str(), &end);
        if (end == it->second.c_str() || *end != '\0')
            throw ConfigError(key + ": not a number: '" + it->second + "'");
        return x;
    }

    std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end())
            return fallback;
        char* end = nullptr;
        const long long x = std::strtoll(it->second.c_str(), &end, 10);
        if (end == it->second.c_str() || *end != '\0')
            throw ConfigError(key + ": not an integer: '" + it->second + "'");
        return x;
    }

    bool get_bool(const std::string& key, bool fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end())
            return fallback;
        const std::string& v = it->second;
        if (v == "true" || v == "1" || v == "yes" || v == "on")
            return true;
        if (v == "false" || v == "0" || v == "no" || v == "off")
            return false;
        throw ConfigError(key + ": not a boolean: '" + v + "'");
    }

    /// Comma-separated list of integers, e.g. "20,30,40".
    std::vector<std::int64_t> get_int_list(const std::string& key,
                                           std::vector<std::int64_t> fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end())
            return fallback;
        std::vector<std::int64_t> out;
        std::string_view sv = it->second;
        while (!sv.empty()) {
            const auto comma = sv.find(',');
            const std::string tok(strip(sv.substr(0, comma)));
            char* end = nullptr;
            const long long x = std::strtoll(tok.c_str(), &end, 10);
            if (tok.empty() || end == tok.c_str() || *end != '\0')
                throw ConfigError(key + ": bad list element '" + tok + "'");
            out.push_back(x);
            sv = comma == std::string_view::npos ? std::string_view{} : sv.substr(comma + 1);
        }
        if (out.empty())
            throw ConfigError(key + ": empty list");
        return out;
    }

    const std::map<std::string, std::string>& entries() const { return values_; }

private:
    static std::string_view strip(std::string_view sv) {
        while (!sv.empty() && (sv.front() == ' ' || sv.front() == '\t' || sv.front() == '\r'))
            sv.remove_prefix(1);
        while (!sv.empty() && (sv.back() == ' ' || sv.back() == '\t' || sv.back() == '\r'))
            sv.remove_suffix(1);
        return sv;
    }

    std::map<std::string, std::string> values_;
};

} // namespace smlp
