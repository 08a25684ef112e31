#include "xmc/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace xmc {

namespace {

std::string trim(const std::string& s) {
    const size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace

Config Config::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file: " + path);
    Config cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;
        const size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw UsageError(path + ":" + std::to_string(lineno) + ": expected key=value");
        const std::string key = trim(stripped.substr(0, eq));
        if (key.empty())
            throw UsageError(path + ":" + std::to_string(lineno) + ": empty key");
        cfg.values_[key] = trim(stripped.substr(eq + 1));
    }
    return cfg;
}

void Config::set(const std::string& key, const std::string& value) { values_[key] = value; }

void Config::apply_overrides(const std::vector<std::string>& key_value_args) {
    for (const std::string& arg : key_value_args) {
        const size_t eq = arg.find('=');
        if (eq == std::string::npos || eq == 0)
            throw UsageError("override must be key=value: " + arg);
        values_[trim(arg.substr(0, eq))] = trim(arg.substr(eq + 1));
    }
}

bool Config::has(const std::string& key) const { return values_.count(key) != 0; }

std::string Config::get_string(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw UsageError("missing config key: " + key);
    return it->second;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

int64_t Config::get_int(const std::string& key) const {
    const std::string s = get_string(key);
    try {
        size_t pos = 0;
        const int64_t v = std::stoll(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw UsageError("config key " + key + ": not an integer: " + s);
    }
}

int64_t Config::get_int(const std::string& key, int64_t fallback) const {
    return has(key) ? get_int(key) : fallback;
}

double Config::get_real(const std::string& key) const {
    const std::string s = get_string(key);
    try {
        size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw UsageError("config key " + key + ": not a number: " + s);
    }
}

double Config::get_real(const std::string& key, double fallback) const {
    return has(key) ? get_real(key) : fallback;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string s = get_string(key);
    if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
    if (s == "0" || s == "false" || s == "no" || s == "off") return false;
    throw UsageError("config key " + key + ": not a boolean: " + s);
}

std::vector<int64_t> Config::get_int_list(const std::string& key,
                                          const std::vector<int64_t>& fallback) const {
    if (!has(key)) return fallback;
    const std::string s = get_string(key);
    std::vector<int64_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const std::string t = trim(item);
        if (t.empty()) throw UsageError("config key " + key + ": empty list element");
        try {
            size_t pos = 0;
            out.push_back(std::stoll(t, &pos));
            if (pos != t.size()) throw std::invalid_argument(t);
        } catch (const std::exception&) {
            throw UsageError("config key " + key + ": not an integer list: " + s);
        }
    }
    if (out.empty()) throw UsageError("config key " + key + ": empty list");
    return out;
}

} // namespace xmc
