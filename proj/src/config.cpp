#include "sdrnn/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sdrnn {

static std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

KVConfig KVConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream ss;
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
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key=value, got '" + line + "'");
    }
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": empty key");
    }
    cfg.kv_[key] = val;
  }
  return cfg;
}

bool KVConfig::has(const std::string& key) const { return kv_.count(key) > 0; }

std::string KVConfig::get_string(const std::string& key,
                                 const std::string& dflt) {
  consumed_.insert(key);
  auto it = kv_.find(key);
  return it == kv_.end() ? dflt : it->second;
}

double KVConfig::get_double(const std::string& key, double dflt) {
  consumed_.insert(key);
  auto it = kv_.find(key);
  if (it == kv_.end()) return dflt;
  try {
    std::size_t pos = 0;
    double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw std::invalid_argument("config key '" + key + "': '" + it->second +
                                "' is not a real number");
  }
}

std::int64_t KVConfig::get_int(const std::string& key, std::int64_t dflt) {
  consumed_.insert(key);
  auto it = kv_.find(key);
  if (it == kv_.end()) return dflt;
  try {
    std::size_t pos = 0;
    std::int64_t v = std::stoll(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw std::invalid_argument("config key '" + key + "': '" + it->second +
                                "' is not an integer");
  }
}

std::uint64_t KVConfig::get_u64(const std::string& key, std::uint64_t dflt) {
  consumed_.insert(key);
  auto it = kv_.find(key);
  if (it == kv_.end()) return dflt;
  try {
    std::size_t pos = 0;
    std::uint64_t v = std::stoull(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw std::invalid_argument("config key '" + key + "': '" + it->second +
                                "' is not an unsigned integer");
  }
}

bool KVConfig::get_bool(const std::string& key, bool dflt) {
  consumed_.insert(key);
  auto it = kv_.find(key);
  if (it == kv_.end()) return dflt;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("config key '" + key + "': '" + v +
                              "' is not a boolean");
}

void KVConfig::set(const std::string& key, const std::string& value) {
  kv_[key] = value;
}

std::set<std::string> KVConfig::unknown_keys() const {
  std::set<std::string> out;
  for (const auto& [k, v] : kv_) {
    if (!consumed_.count(k)) out.insert(k);
  }
  return out;
}

void KVConfig::reject_unknown_keys() const {
  auto unknown = unknown_keys();
  if (!unknown.empty()) {
    throw std::invalid_argument("unknown config key: '" + *unknown.begin() +
                                "'");
  }
}

}  // namespace sdrnn
