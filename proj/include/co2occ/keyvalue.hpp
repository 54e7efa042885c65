// Sectioned plain-text key-value documents.
//
//   # comment
//   [section]
//   key = value
//
// Used for both model files and experiment configs. Keys are unique within a
// section; section and key order are preserved on write.
#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace co2occ {

class KeyValueDocument {
  public:
    struct Entry {
        std::string key;
        std::string value;
        int line = 0;
    };
    struct Section {
        std::string name;
        std::vector<Entry> entries;
        int line = 0;
    };

    /// Throws ValidationError("<source>:<line>: ...") on malformed input.
    static KeyValueDocument parse(std::istream& in, const std::string& source = "<input>");
    static KeyValueDocument parse_string(std::string_view text,
                                         const std::string& source = "<input>");
    /// Throws IoError if the file cannot be opened.
    static KeyValueDocument load(const std::string& path);

    void write(std::ostream& out) const;
    void save(const std::string& path) const;

    bool has_section(std::string_view name) const;
    const Section* section(std::string_view name) const;
    Section& add_section(std::string name);
    void set(std::string_view section, std::string key, std::string value);

    std::optional<std::string> find(std::string_view section, std::string_view key) const;
    std::string get(std::string_view section, std::string_view key) const;

    double get_double(std::string_view section, std::string_view key) const;
    double get_double(std::string_view section, std::string_view key, double fallback) const;
    long long get_int(std::string_view section, std::string_view key) const;
    long long get_int(std::string_view section, std::string_view key, long long fallback) const;
    bool get_bool(std::string_view section, std::string_view key, bool fallback) const;
    std::vector<double> get_doubles(std::string_view section, std::string_view key) const;

    const std::vector<Section>& sections() const { return sections_; }

  private:
    std::vector<Section> sections_;
    std::string source_ = "<input>";
};

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);
std::string format_doubles(const std::vector<double>& values);

double parse_double(std::string_view text, const std::string& context);
long long parse_int(std::string_view text, const std::string& context);

}  // namespace co2occ
