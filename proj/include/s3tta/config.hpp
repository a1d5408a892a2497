#pragma once

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace s3tta {

/// Raised for malformed or inconsistent configuration (CLI exit code 3).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raised when a required input file/checkpoint is missing (CLI exit code 4).
struct MissingArtifact : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Flat `key = value` configuration with # comments. Every key must be
/// consumed by the command (unknown keys are rejected), and each lookup is
/// recorded so the fully-resolved config can be written next to the outputs.
class KVConfig {
  public:
    KVConfig() = default;

    static KVConfig from_file(const std::string& path);
    static KVConfig from_string(const std::string& text);

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_string(const std::string& key, const std::string& def);
    std::string require_string(const std::string& key);
    long long get_int(const std::string& key, long long def);
    double get_double(const std::string& key, double def);
    bool get_bool(const std::string& key, bool def);
    std::vector<double> get_double_list(const std::string& key, const std::vector<double>& def);
    std::vector<int> get_int_list(const std::string& key, const std::vector<int>& def);

    /// Throws ConfigError listing any keys never looked up.
    void reject_unknown_keys() const;

    /// Serializes the resolved view (defaults included), sorted by key.
    std::string resolved_text() const;
    void write_resolved(const std::string& path) const;

  private:
    std::string lookup(const std::string& key, const std::string& def, bool required);

    std::map<std::string, std::string> values_;
    std::set<std::string> consumed_;
    mutable std::map<std::string, std::string> resolved_;
};

}  // namespace s3tta
