#include "dam/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dam/errors.hpp"

namespace dam {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Drops a '#' comment that is not inside a quoted string.
std::string strip_comment(const std::string& s) {
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (quoted && s[i] == '\\') ++i;
        else if (s[i] == '"') quoted = !quoted;
        else if (s[i] == '#' && !quoted) return s.substr(0, i);
    }
    return s;
}

bool valid_key(const std::string& k) {
    if (k.empty() || k.front() == '.' || k.back() == '.') return false;
    for (char c : k)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.')) return false;
    return k.find("..") == std::string::npos;
}

std::string unquote(const std::string& text) {
    std::string out;
    for (std::size_t i = 1; i + 1 < text.size(); ++i) {
        char c = text[i];
        if (c == '\\') {
            if (i + 2 >= text.size()) throw ConfigError("dangling escape in " + text);
            const char e = text[++i];
            switch (e) {
                case 'n': c = '\n'; break;
                case 't': c = '\t'; break;
                case '\\': c = '\\'; break;
                case '"': c = '"'; break;
                default: throw ConfigError(std::string("unknown escape \\") + e + " in " + text);
            }
        } else if (c == '"') {
            throw ConfigError("unescaped quote inside " + text);
        }
        out.push_back(c);
    }
    return out;
}

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\\': out += "\\\\"; break;
            case '"': out += "\\\""; break;
            default: out.push_back(c);
        }
    }
    return out + "\"";
}

const char* type_name(const ConfigValue& v) {
    switch (v.index()) {
        case 0: return "bool";
        case 1: return "integer";
        case 2: return "real";
        default: return "string";
    }
}

}  // namespace

ConfigValue parse_config_literal(const std::string& raw) {
    const std::string text = trim(raw);
    if (text.empty()) throw ConfigError("empty value");
    if (text == "true") return true;
    if (text == "false") return false;
    if (text.front() == '"') {
        if (text.size() < 2 || text.back() != '"') throw ConfigError("unterminated string " + text);
        return unquote(text);
    }
    const char* first = text.data();
    const char* last = first + text.size();
    const bool realish = text.find_first_of(".eE") != std::string::npos || text == "inf" ||
                         text == "-inf" || text == "nan";
    if (!realish) {
        std::int64_t i = 0;
        auto [p, ec] = std::from_chars(first, last, i);
        if (ec == std::errc() && p == last) return i;
    } else {
        double d = 0.0;
        auto [p, ec] = std::from_chars(first, last, d);
        if (ec == std::errc() && p == last) return d;
    }
    throw ConfigError("cannot parse value '" + text + "' (strings must be quoted)");
}

std::string format_config_value(const ConfigValue& v) {
    switch (v.index()) {
        case 0: return std::get<bool>(v) ? "true" : "false";
        case 1: return std::to_string(std::get<std::int64_t>(v));
        case 2: {
            const double d = std::get<double>(v);
            if (std::isnan(d)) return "nan";
            if (std::isinf(d)) return d > 0 ? "inf" : "-inf";
            char buf[64];
            auto [p, ec] = std::to_chars(buf, buf + sizeof buf, d);
            std::string s(buf, p);
            if (s.find_first_of(".e") == std::string::npos) s += ".0";
            return s;
        }
        default: return quote(std::get<std::string>(v));
    }
}

ConfigFile ConfigFile::parse(const std::string& text, const std::string& origin) {
    ConfigFile cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(strip_comment(line));
        if (t.empty()) continue;
        const auto eq = t.find('=');
        auto fail = [&](const std::string& why) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + why);
        };
        if (eq == std::string::npos) fail("expected 'key = value'");
        const std::string key = trim(t.substr(0, eq));
        if (!valid_key(key)) fail("bad key '" + key + "'");
        if (cfg.contains(key)) fail("duplicate key '" + key + "'");
        try {
            cfg.values_[key] = parse_config_literal(t.substr(eq + 1));
        } catch (const ConfigError& e) {
            fail(e.what());
        }
    }
    return cfg;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

std::string ConfigFile::serialize() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + format_config_value(v) + "\n";
    return out;
}

void ConfigFile::set_literal(const std::string& key, const std::string& text) {
    if (!valid_key(key)) throw ConfigError("bad key '" + key + "'");
    try {
        values_[key] = parse_config_literal(text);
    } catch (const ConfigError& e) {
        throw ConfigError(key + ": " + e.what());
    }
}

const ConfigValue& ConfigFile::at(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing config key '" + key + "'");
    return it->second;
}

bool ConfigFile::get_bool(const std::string& key) const {
    const auto& v = at(key);
    if (const auto* b = std::get_if<bool>(&v)) return *b;
    throw ConfigError(key + ": expected bool, got " + type_name(v));
}

std::int64_t ConfigFile::get_int(const std::string& key) const {
    const auto& v = at(key);
    if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
    throw ConfigError(key + ": expected integer, got " + type_name(v));
}

double ConfigFile::get_real(const std::string& key) const {
    const auto& v = at(key);
    if (const auto* d = std::get_if<double>(&v)) return *d;
    if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
    throw ConfigError(key + ": expected real, got " + type_name(v));
}

const std::string& ConfigFile::get_string(const std::string& key) const {
    const auto& v = at(key);
    if (const auto* s = std::get_if<std::string>(&v)) return *s;
    throw ConfigError(key + ": expected string, got " + type_name(v));
}

}  // namespace dam
