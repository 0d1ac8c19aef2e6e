#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ma2 {

// Flat key=value configuration with '#' comments. Values keep their raw
// text; typed accessors parse on demand.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(const std::string& text);
  static KeyValueConfig load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;

  double get_double(const std::string& key) const;
  double get_double_or(const std::string& key, double fallback) const;
  long get_int(const std::string& key) const;
  long get_int_or(const std::string& key, long fallback) const;

  // Whitespace-separated list of reals, e.g. a 12-number pose block.
  std::vector<double> get_doubles(const std::string& key) const;

  void set(const std::string& key, const std::string& value);
  void set_double(const std::string& key, double value);
  void set_int(const std::string& key, long value);

  // Canonical serialization: keys sorted, "key=value\n". Used for hashing.
  std::string serialize() const;
  void save(const std::string& path) const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

// FNV-1a, the hash used to stamp datasets/checkpoints/results with the
// configuration they were produced from.
std::uint64_t fnv1a(const std::string& data);

inline std::uint64_t config_hash(const KeyValueConfig& cfg) {
  return fnv1a(cfg.serialize());
}

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Canonical shortest round-trip formatting for reals, so serialized
// configs and CSV reports are byte-stable.
std::string format_double(double v);

}  // namespace ma2
