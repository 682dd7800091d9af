#pragma once

// key = value text files. '#' starts a comment, repeated keys are kept in order.

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace revcomp {

class KeyValueFile {
 public:
  KeyValueFile() = default;

  static KeyValueFile parse(std::istream& in, const std::string& origin = "<stream>") {
    KeyValueFile kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      auto eq = line.find('=');
      if (eq == std::string::npos)
        throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
      std::string key = trim(line.substr(0, eq));
      std::string val = trim(line.substr(eq + 1));
      if (key.empty())
        throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": empty key");
      kv.entries_.emplace_back(key, val);
    }
    return kv;
  }

  static KeyValueFile load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    auto kv = parse(in, path.string());
    kv.dir_ = path.parent_path();
    return kv;
  }

  bool has(const std::string& key) const {
    for (auto& e : entries_)
      if (e.first == key) return true;
    return false;
  }

  // last occurrence wins for scalar lookups
  std::string get(const std::string& key) const {
    const std::string* v = nullptr;
    for (auto& e : entries_)
      if (e.first == key) v = &e.second;
    if (!v) throw std::runtime_error("missing key '" + key + "'");
    return *v;
  }
  std::string get(const std::string& key, const std::string& fallback) const {
    return has(key) ? get(key) : fallback;
  }

  double number(const std::string& key) const {
    auto s = get(key);
    try {
      size_t pos = 0;
      double v = std::stod(s, &pos);
      if (trim(s.substr(pos)).size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw std::runtime_error("key '" + key + "' is not a number: " + s);
    }
  }
  double number(const std::string& key, double fallback) const {
    return has(key) ? number(key) : fallback;
  }

  std::vector<std::string> all(const std::string& key) const {
    std::vector<std::string> out;
    for (auto& e : entries_)
      if (e.first == key) out.push_back(e.second);
    return out;
  }

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  // paths in the file are relative to the file itself
  std::filesystem::path resolve(const std::string& p) const {
    std::filesystem::path path(p);
    if (path.is_relative() && !dir_.empty()) return dir_ / path;
    return path;
  }

  static std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
  std::filesystem::path dir_;
};

}  // namespace revcomp
