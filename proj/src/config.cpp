#include "eegcopilot/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>

namespace eegcopilot {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream ss(s);
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::istream& in, const std::string& source) {
    KeyValueConfig cfg;
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = source + ":" + std::to_string(line_no);
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(where + ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) throw ConfigError(where + ": empty section name");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
        std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(where + ": missing key");
        if (!section.empty()) key = section + "." + key;
        if (cfg.values_.count(key)) {
            throw ConfigError(where + ": duplicate key '" + key + "' (first set at " + cfg.origin_[key] + ")");
        }
        cfg.values_[key] = value;
        cfg.origin_[key] = where;
    }
    return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return parse(in, path);
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
    values_[key] = value;
    origin_[key] = "<override>";
}

std::optional<std::string> KeyValueConfig::raw(const std::string& key) const {
    read_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
    return raw(key).value_or(fallback);
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    const auto v = raw(key);
    if (!v) return fallback;
    std::istringstream ss(*v);
    double d = 0.0;
    char extra = 0;
    if (!(ss >> d) || (ss >> extra)) throw ConfigError(key + ": expected a number, got '" + *v + "'");
    return d;
}

std::int64_t KeyValueConfig::get_int(const std::string& key, std::int64_t fallback) const {
    const auto v = raw(key);
    if (!v) return fallback;
    std::int64_t n = 0;
    const char* end = v->data() + v->size();
    auto [ptr, ec] = std::from_chars(v->data(), end, n);
    if (ec != std::errc() || ptr != end) throw ConfigError(key + ": expected an integer, got '" + *v + "'");
    return n;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
    const auto v = raw(key);
    if (!v) return fallback;
    std::string s = *v;
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError(key + ": expected true or false, got '" + *v + "'");
}

std::vector<double> KeyValueConfig::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
    const auto v = raw(key);
    if (!v) return fallback;
    std::vector<double> out;
    for (const auto& item : split_list(*v)) {
        std::istringstream ss(item);
        double d = 0.0;
        char extra = 0;
        if (!(ss >> d) || (ss >> extra)) throw ConfigError(key + ": expected numbers, got '" + item + "'");
        out.push_back(d);
    }
    return out;
}

std::vector<std::string> KeyValueConfig::get_strings(const std::string& key,
                                                     const std::vector<std::string>& fallback) const {
    const auto v = raw(key);
    if (!v) return fallback;
    return split_list(*v);
}

void KeyValueConfig::reject_unread() const {
    std::string unknown;
    for (const auto& [key, value] : values_) {
        if (!read_.count(key)) unknown += (unknown.empty() ? "" : ", ") + key + " (" + origin_.at(key) + ")";
    }
    if (!unknown.empty()) throw ConfigError("unknown config keys: " + unknown);
}

}  // namespace eegcopilot
