// Key=value run configuration: '#' comments, later keys win, flag overrides
// merged on top. Commands validate through ConfigCheck, which collects every
// problem and reports them in one error before any work starts.
#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "absa/dataset.hpp"
#include "absa/error.hpp"

namespace absa {

namespace detail {

inline std::string trim_copy(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

}  // namespace detail

struct KvConfig {
    std::map<std::string, std::string> values;

    bool has(const std::string& key) const { return values.count(key) > 0; }

    void set(const std::string& key, const std::string& value) { values[key] = value; }

    static KvConfig parse(std::istream& in, const std::string& origin) {
        KvConfig cfg;
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::string trimmed = detail::trim_copy(line);
            if (trimmed.empty()) continue;
            const auto eq = trimmed.find('=');
            require(eq != std::string::npos, origin, ":", line_no,
                    ": expected key=value, got '", trimmed, "'");
            const std::string key = detail::trim_copy(trimmed.substr(0, eq));
            require(!key.empty(), origin, ":", line_no, ": empty key");
            cfg.values[key] = detail::trim_copy(trimmed.substr(eq + 1));
        }
        return cfg;
    }

    static KvConfig parse_file(const std::string& path) {
        std::ifstream in(path);
        require(in.good(), "config: cannot open '", path, "'");
        return parse(in, path);
    }
};

// Collects every configuration problem; finish() raises them all at once.
class ConfigCheck {
public:
    explicit ConfigCheck(const KvConfig& cfg) : cfg_(cfg) {}

    std::string require_str(const std::string& key) {
        if (!cfg_.has(key)) {
            errors_.push_back("missing required key '" + key + "'");
            return {};
        }
        return cfg_.values.at(key);
    }

    std::string require_path(const std::string& key) {
        const std::string value = require_str(key);
        if (!value.empty() && !std::filesystem::exists(value)) {
            errors_.push_back("key '" + key + "': path '" + value + "' does not exist");
        }
        return value;
    }

    std::string str(const std::string& key, const std::string& fallback) {
        return cfg_.has(key) ? cfg_.values.at(key) : fallback;
    }

    std::optional<std::string> opt_path(const std::string& key) {
        if (!cfg_.has(key)) return std::nullopt;
        const std::string value = cfg_.values.at(key);
        if (!std::filesystem::exists(value)) {
            errors_.push_back("key '" + key + "': path '" + value + "' does not exist");
        }
        return value;
    }

    std::optional<std::string> opt_str(const std::string& key) {
        if (!cfg_.has(key)) return std::nullopt;
        return cfg_.values.at(key);
    }

    double number(const std::string& key, double fallback) {
        if (!cfg_.has(key)) return fallback;
        return parse_double(key, cfg_.values.at(key));
    }

    long integer(const std::string& key, long fallback) {
        if (!cfg_.has(key)) return fallback;
        return parse_long(key, cfg_.values.at(key));
    }

    std::uint64_t u64(const std::string& key, std::uint64_t fallback) {
        if (!cfg_.has(key)) return fallback;
        const std::string& value = cfg_.values.at(key);
        try {
            std::size_t pos = 0;
            const std::uint64_t parsed = std::stoull(value, &pos);
            if (pos != value.size()) throw std::invalid_argument(value);
            return parsed;
        } catch (const std::exception&) {
            errors_.push_back("key '" + key + "': '" + value + "' is not an unsigned integer");
            return fallback;
        }
    }

    bool boolean(const std::string& key, bool fallback) {
        if (!cfg_.has(key)) return fallback;
        const std::string& value = cfg_.values.at(key);
        if (value == "true" || value == "1" || value == "yes") return true;
        if (value == "false" || value == "0" || value == "no") return false;
        errors_.push_back("key '" + key + "': '" + value + "' is not a boolean");
        return fallback;
    }

    std::vector<double> number_list(const std::string& key, std::vector<double> fallback) {
        if (!cfg_.has(key)) return fallback;
        std::vector<double> out;
        for (const auto& item : split_list(cfg_.values.at(key))) {
            out.push_back(parse_double(key, item));
        }
        if (out.empty()) errors_.push_back("key '" + key + "': empty list");
        return out;
    }

    std::vector<int> integer_list(const std::string& key, std::vector<int> fallback) {
        if (!cfg_.has(key)) return fallback;
        std::vector<int> out;
        for (const auto& item : split_list(cfg_.values.at(key))) {
            out.push_back(static_cast<int>(parse_long(key, item)));
        }
        if (out.empty()) errors_.push_back("key '" + key + "': empty list");
        return out;
    }

    void check(bool condition, const std::string& message) {
        if (!condition) errors_.push_back(message);
    }

    void finish() const {
        if (errors_.empty()) return;
        std::ostringstream msg;
        msg << "configuration invalid (" << errors_.size() << " problem"
            << (errors_.size() == 1 ? "" : "s") << "):";
        for (const auto& e : errors_) msg << "\n  - " << e;
        fail(msg.str());
    }

private:
    static std::vector<std::string> split_list(const std::string& value) {
        std::vector<std::string> out;
        std::string item;
        std::istringstream stream(value);
        while (std::getline(stream, item, ',')) {
            item = detail::trim_copy(item);
            if (!item.empty()) out.push_back(item);
        }
        return out;
    }

    double parse_double(const std::string& key, const std::string& value) {
        try {
            std::size_t pos = 0;
            const double parsed = std::stod(value, &pos);
            if (pos != value.size()) throw std::invalid_argument(value);
            return parsed;
        } catch (const std::exception&) {
            errors_.push_back("key '" + key + "': '" + value + "' is not a number");
            return 0;
        }
    }

    long parse_long(const std::string& key, const std::string& value) {
        try {
            std::size_t pos = 0;
            const long parsed = std::stol(value, &pos);
            if (pos != value.size()) throw std::invalid_argument(value);
            return parsed;
        } catch (const std::exception&) {
            errors_.push_back("key '" + key + "': '" + value + "' is not an integer");
            return 0;
        }
    }

    const KvConfig& cfg_;
    std::vector<std::string> errors_;
};

}  // namespace absa
