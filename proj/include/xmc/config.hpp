#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace xmc {

// Line-oriented key=value config with dotted section prefixes (tree.*, train.*, predict.*,
// metrics.*). '#' starts a comment; blank lines are ignored; later assignments win, so
// command-line overrides are applied by re-assigning.
class Config {
  public:
    static Config from_file(const std::string& path);
    void set(const std::string& key, const std::string& value);
    void apply_overrides(const std::vector<std::string>& key_value_args);

    bool has(const std::string& key) const;
    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    int64_t get_int(const std::string& key) const;
    int64_t get_int(const std::string& key, int64_t fallback) const;
    double get_real(const std::string& key) const;
    double get_real(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    // Comma-separated integer list, e.g. "256,128".
    std::vector<int64_t> get_int_list(const std::string& key,
                                      const std::vector<int64_t>& fallback) const;

    const std::map<std::string, std::string>& entries() const { return values_; }

  private:
    std::map<std::string, std::string> values_;
};

// Thrown for malformed config files, bad overrides, and invalid option values; the CLI
// maps it to exit code 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace xmc
