#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <variant>

namespace dam {

// Flat key-path configuration text:
//
//   # comment
//   net.n = 20.0          real (always written with a '.' or exponent)
//   net.max_epochs = 100  integer
//   dataset.kind = "permute"
//   method.si_printed_sign = false
//
// One assignment per line. The value's spelling fixes its type.
using ConfigValue = std::variant<bool, std::int64_t, double, std::string>;

class ConfigFile {
public:
    static ConfigFile parse(const std::string& text, const std::string& origin = "<config>");
    static ConfigFile load(const std::filesystem::path& path);

    // Sorted by key; the output parses back to an equal ConfigFile.
    std::string serialize() const;

    bool contains(const std::string& key) const { return values_.count(key) != 0; }
    const std::map<std::string, ConfigValue>& values() const { return values_; }

    void set(const std::string& key, ConfigValue v) { values_[key] = std::move(v); }
    // Parses `text` with the same literal rules as the file format.
    void set_literal(const std::string& key, const std::string& text);

    // Typed accessors. Integers widen to double; every other mismatch is a
    // ConfigError naming the key.
    bool get_bool(const std::string& key) const;
    std::int64_t get_int(const std::string& key) const;
    double get_real(const std::string& key) const;
    const std::string& get_string(const std::string& key) const;

    friend bool operator==(const ConfigFile&, const ConfigFile&) = default;

private:
    const ConfigValue& at(const std::string& key) const;
    std::map<std::string, ConfigValue> values_;
};

ConfigValue parse_config_literal(const std::string& text);
std::string format_config_value(const ConfigValue& v);

}  // namespace dam
