#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>

namespace sdrnn {

// Flat key=value config file. '#' starts a comment, blank lines ignored.
// Typed getters record which keys were consumed; unknown_keys() after reading
// everything a command understands yields the hard-error leftovers.
class KVConfig {
 public:
  static KVConfig from_file(const std::string& path);
  static KVConfig from_string(const std::string& text);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& dflt);
  double get_double(const std::string& key, double dflt);
  std::int64_t get_int(const std::string& key, std::int64_t dflt);
  std::uint64_t get_u64(const std::string& key, std::uint64_t dflt);
  bool get_bool(const std::string& key, bool dflt);

  void set(const std::string& key, const std::string& value);

  // keys present in the file but never consumed by a getter
  std::set<std::string> unknown_keys() const;
  // throws std::invalid_argument naming the first unknown key
  void reject_unknown_keys() const;

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
  mutable std::set<std::string> consumed_;
};

}  // namespace sdrnn
