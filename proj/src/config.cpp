#include "s3tta/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace s3tta {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

KVConfig KVConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifact("config file not found: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_string(ss.str());
}

KVConfig KVConfig::from_string(const std::string& text) {
    KVConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        if (cfg.values_.count(key))
            throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
        cfg.values_[key] = value;
    }
    return cfg;
}

void KVConfig::set(const std::string& key, const std::string& value) {
    values_[key] = value;
}

std::string KVConfig::lookup(const std::string& key, const std::string& def, bool required) {
    auto it = values_.find(key);
    if (it == values_.end()) {
        if (required) throw ConfigError("missing required config key '" + key + "'");
        resolved_[key] = def;
        return def;
    }
    consumed_.insert(key);
    resolved_[key] = it->second;
    return it->second;
}

std::string KVConfig::get_string(const std::string& key, const std::string& def) {
    return lookup(key, def, false);
}

std::string KVConfig::require_string(const std::string& key) {
    return lookup(key, "", true);
}

long long KVConfig::get_int(const std::string& key, long long def) {
    const std::string v = lookup(key, std::to_string(def), false);
    try {
        std::size_t pos = 0;
        const long long x = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing chars");
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected integer, got '" + v + "'");
    }
}

double KVConfig::get_double(const std::string& key, double def) {
    std::ostringstream d;
    d << def;
    const std::string v = lookup(key, d.str(), false);
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing chars");
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected number, got '" + v + "'");
    }
}

bool KVConfig::get_bool(const std::string& key, bool def) {
    const std::string v = lookup(key, def ? "true" : "false", false);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config key '" + key + "': expected boolean, got '" + v + "'");
}

std::vector<double> KVConfig::get_double_list(const std::string& key,
                                              const std::vector<double>& def) {
    std::ostringstream d;
    for (std::size_t i = 0; i < def.size(); ++i) d << (i ? "," : "") << def[i];
    const std::string v = lookup(key, d.str(), false);
    std::vector<double> out;
    std::istringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw ConfigError("config key '" + key + "': expected number list, got '" + v + "'");
        }
    }
    return out;
}

std::vector<int> KVConfig::get_int_list(const std::string& key, const std::vector<int>& def) {
    std::vector<double> ddef(def.begin(), def.end());
    std::vector<int> out;
    for (double x : get_double_list(key, ddef)) out.push_back(static_cast<int>(x));
    return out;
}

void KVConfig::reject_unknown_keys() const {
    std::string unknown;
    for (const auto& [k, v] : values_) {
        if (!consumed_.count(k)) unknown += (unknown.empty() ? "" : ", ") + k;
    }
    if (!unknown.empty()) throw ConfigError("unknown config keys: " + unknown);
}

std::string KVConfig::resolved_text() const {
    std::string out;
    for (const auto& [k, v] : resolved_) out += k + " = " + v + "\n";
    return out;
}

void KVConfig::write_resolved(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write resolved config: " + path);
    out << resolved_text();
}

}  // namespace s3tta
