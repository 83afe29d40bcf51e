#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace qcd::config {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Parses the key-value config dialect into a JSON object. The dialect:
//   # comment
//   name = "run1"
//   [pair]
//   f0 = {kind="gaussian", mean=0.0, var=1.0}
//   thresholds = [4.0, 6.0, 8.0]
// Values: double-quoted strings, numbers, true/false, arrays, inline tables.
// Infinities are written as the string "inf".
nlohmann::json parse_kv(const std::string& text);

// Loads a config file; a .json extension selects plain JSON, anything else
// the key-value dialect. Both encode the same schema.
nlohmann::json load_file(const std::string& path);

// FNV-1a 64-bit over the canonical (sorted-key) JSON dump, as a hex string.
std::string config_hash(const nlohmann::json& j);

// Read-only view into a JSON document that reports the full field path in
// every error message.
class Cursor {
  public:
    Cursor(const nlohmann::json& j, std::string path);

    Cursor at(const std::string& key) const;                  // throws if missing
    std::optional<Cursor> maybe(const std::string& key) const;
    bool has(const std::string& key) const;

    double number() const;
    std::int64_t integer() const;
    std::string str() const;
    bool boolean() const;
    double number_or_inf() const;  // accepts the string "inf"

    std::size_t size() const;  // array length
    Cursor index(std::size_t i) const;

    std::vector<double> number_array() const;

    const nlohmann::json& raw() const { return *j_; }
    const std::string& path() const { return path_; }

    [[noreturn]] void fail(const std::string& what) const;

  private:
    const nlohmann::json* j_;
    std::string path_;
};

}  // namespace qcd::config
