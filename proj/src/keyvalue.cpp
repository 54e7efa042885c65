#include "co2occ/keyvalue.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "co2occ/core.hpp"

namespace co2occ {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::string where(const std::string& source, int line) {
    return source + ":" + std::to_string(line) + ": ";
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string format_doubles(const std::vector<double>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ' ';
        out += format_double(values[i]);
    }
    return out;
}

double parse_double(std::string_view text, const std::string& context) {
    text = trim(text);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size() || text.empty()) {
        throw ValidationError(context + ": expected a number, got '" + std::string(text) + "'");
    }
    return v;
}

long long parse_int(std::string_view text, const std::string& context) {
    text = trim(text);
    long long v = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size() || text.empty()) {
        throw ValidationError(context + ": expected an integer, got '" + std::string(text) +
                              "'");
    }
    return v;
}

KeyValueDocument KeyValueDocument::parse(std::istream& in, const std::string& source) {
    KeyValueDocument doc;
    doc.source_ = source;
    std::string raw;
    int line = 0;
    Section* current = nullptr;
    while (std::getline(in, raw)) {
        ++line;
        std::string_view text = raw;
        if (const auto hash = text.find('#'); hash != std::string_view::npos) {
            text = text.substr(0, hash);
        }
        text = trim(text);
        if (text.empty()) continue;

        if (text.front() == '[') {
            if (text.back() != ']') {
                throw ValidationError(where(source, line) + "unterminated section header");
            }
            const std::string name(trim(text.substr(1, text.size() - 2)));
            if (name.empty()) throw ValidationError(where(source, line) + "empty section name");
            if (doc.has_section(name)) {
                throw ValidationError(where(source, line) + "duplicate section [" + name + "]");
            }
            current = &doc.add_section(name);
            current->line = line;
            continue;
        }

        const auto eq = text.find('=');
        if (eq == std::string_view::npos) {
            throw ValidationError(where(source, line) + "expected 'key = value'");
        }
        if (current == nullptr) {
            throw ValidationError(where(source, line) + "key outside of any [section]");
        }
        std::string key(trim(text.substr(0, eq)));
        std::string value(trim(text.substr(eq + 1)));
        if (key.empty()) throw ValidationError(where(source, line) + "empty key");
        for (const auto& e : current->entries) {
            if (e.key == key) {
                throw ValidationError(where(source, line) + "duplicate key '" + key +
                                      "' in [" + current->name + "]");
            }
        }
        current->entries.push_back({std::move(key), std::move(value), line});
    }
    return doc;
}

KeyValueDocument KeyValueDocument::parse_string(std::string_view text,
                                                const std::string& source) {
    std::istringstream in{std::string(text)};
    return parse(in, source);
}

KeyValueDocument KeyValueDocument::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    return parse(in, path);
}

void KeyValueDocument::write(std::ostream& out) const {
    bool first = true;
    for (const auto& s : sections_) {
        if (!first) out << '\n';
        first = false;
        out << '[' << s.name << "]\n";
        for (const auto& e : s.entries) out << e.key << " = " << e.value << '\n';
    }
}

void KeyValueDocument::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    write(out);
    if (!out) throw IoError("write failed for '" + path + "'");
}

bool KeyValueDocument::has_section(std::string_view name) const {
    return section(name) != nullptr;
}

const KeyValueDocument::Section* KeyValueDocument::section(std::string_view name) const {
    for (const auto& s : sections_) {
        if (s.name == name) return &s;
    }
    return nullptr;
}

KeyValueDocument::Section& KeyValueDocument::add_section(std::string name) {
    sections_.push_back({std::move(name), {}, 0});
    return sections_.back();
}

void KeyValueDocument::set(std::string_view section, std::string key, std::string value) {
    Section* target = nullptr;
    for (auto& s : sections_) {
        if (s.name == section) target = &s;
    }
    if (target == nullptr) target = &add_section(std::string(section));
    for (auto& e : target->entries) {
        if (e.key == key) {
            e.value = std::move(value);
            return;
        }
    }
    target->entries.push_back({std::move(key), std::move(value), 0});
}

std::optional<std::string> KeyValueDocument::find(std::string_view section,
                                                  std::string_view key) const {
    const Section* s = this->section(section);
    if (s == nullptr) return std::nullopt;
    for (const auto& e : s->entries) {
        if (e.key == key) return e.value;
    }
    return std::nullopt;
}

std::string KeyValueDocument::get(std::string_view section, std::string_view key) const {
    auto v = find(section, key);
    if (!v) {
        throw ValidationError(source_ + ": missing key " + std::string(section) + "." +
                              std::string(key));
    }
    return *v;
}

double KeyValueDocument::get_double(std::string_view section, std::string_view key) const {
    return parse_double(get(section, key),
                        source_ + ": " + std::string(section) + "." + std::string(key));
}

double KeyValueDocument::get_double(std::string_view section, std::string_view key,
                                    double fallback) const {
    return find(section, key) ? get_double(section, key) : fallback;
}

long long KeyValueDocument::get_int(std::string_view section, std::string_view key) const {
    return parse_int(get(section, key),
                     source_ + ": " + std::string(section) + "." + std::string(key));
}

long long KeyValueDocument::get_int(std::string_view section, std::string_view key,
                                    long long fallback) const {
    return find(section, key) ? get_int(section, key) : fallback;
}

bool KeyValueDocument::get_bool(std::string_view section, std::string_view key,
                                bool fallback) const {
    auto v = find(section, key);
    if (!v) return fallback;
    if (*v == "true" || *v == "on" || *v == "yes" || *v == "1") return true;
    if (*v == "false" || *v == "off" || *v == "no" || *v == "0") return false;
    throw ValidationError(source_ + ": " + std::string(section) + "." + std::string(key) +
                          ": expected a boolean, got '" + *v + "'");
}

std::vector<double> KeyValueDocument::get_doubles(std::string_view section,
                                                  std::string_view key) const {
    std::string text = get(section, key);
    std::replace(text.begin(), text.end(), ',', ' ');
    const std::string context = source_ + ": " + std::string(section) + "." + std::string(key);
    std::vector<double> out;
    std::istringstream in(text);
    std::string token;
    while (in >> token) {
        out.push_back(parse_double(token, context));
    }
    return out;
}

}  // namespace co2occ
