#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mmgr/error.hpp"

namespace mmgr {

// Flat "key = value" run configuration. Lines starting with '#' and blank
// lines are ignored; later assignments win.
class Config {
public:
    Config() = default;

    static Config from_file(const std::filesystem::path& path) {
        std::ifstream f(path);
        if (!f) throw NotFoundError("config not found: " + path.string());
        Config c;
        std::string line;
        int lineno = 0;
        while (std::getline(f, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            const auto text = trim(line);
            if (text.empty() || text[0] == '#') continue;
            const auto eq = text.find('=');
            if (eq == std::string::npos)
                throw FormatError(path.string() + ":" + std::to_string(lineno) +
                                  ": expected 'key = value', got '" + text + "'");
            const auto key = trim(text.substr(0, eq));
            const auto value = trim(text.substr(eq + 1));
            if (key.empty())
                throw FormatError(path.string() + ":" + std::to_string(lineno) + ": empty key");
            c.values_[key] = value;
        }
        return c;
    }

    static Config from_string(const std::string& text) {
        Config c;
        std::istringstream in(text);
        std::string line;
        while (std::getline(in, line)) {
            const auto t = trim(line);
            if (t.empty() || t[0] == '#') continue;
            const auto eq = t.find('=');
            if (eq == std::string::npos) throw FormatError("config: bad line '" + t + "'");
            c.values_[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
        }
        return c;
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    std::string get(const std::string& key, const std::string& fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    std::string require(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("config: missing key '" + key + "'");
        return it->second;
    }

    long get_int(const std::string& key, long fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        try {
            return std::stol(it->second);
        } catch (...) {
            throw ConfigError("config: key '" + key + "' is not an integer: '" + it->second + "'");
        }
    }

    double get_double(const std::string& key, double fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        try {
            return std::stod(it->second);
        } catch (...) {
            throw ConfigError("config: key '" + key + "' is not a number: '" + it->second + "'");
        }
    }

    bool get_bool(const std::string& key, bool fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        const auto& v = it->second;
        if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
        if (v == "false" || v == "0" || v == "no" || v == "off") return false;
        throw ConfigError("config: key '" + key + "' is not a boolean: '" + v + "'");
    }

    std::vector<long> get_int_list(const std::string& key, std::vector<long> fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        std::vector<long> out;
        std::stringstream ss(it->second);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            try {
                out.push_back(std::stol(trim(tok)));
            } catch (...) {
                throw ConfigError("config: key '" + key + "' has a bad list entry: '" + tok + "'");
            }
        }
        if (out.empty()) throw ConfigError("config: key '" + key + "' is an empty list");
        return out;
    }

    std::vector<double> get_double_list(const std::string& key,
                                        std::vector<double> fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        std::vector<double> out;
        std::stringstream ss(it->second);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            try {
                out.push_back(std::stod(trim(tok)));
            } catch (...) {
                throw ConfigError("config: key '" + key + "' has a bad list entry: '" + tok + "'");
            }
        }
        if (out.empty()) throw ConfigError("config: key '" + key + "' is an empty list");
        return out;
    }

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    static std::string trim(const std::string& s) {
        std::size_t b = s.find_first_not_of(" \t");
        if (b == std::string::npos) return "";
        std::size_t e = s.find_last_not_of(" \t");
        return s.substr(b, e - b + 1);
    }

    std::map<std::string, std::string> values_;
};

} // namespace mmgr
