#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace lel {

// Flat structured text: `key = value` lines, optional `[section]` headers,
// `#` comments. Keys outside any section belong to section "".
class KvDocument {
 public:
  static KvDocument parse(const std::string& text);

  bool has(const std::string& section, const std::string& key) const;
  const std::string& get(const std::string& section, const std::string& key) const;
  // Throws ParseError naming the key when missing or not a finite number.
  double number(const std::string& section, const std::string& key) const;
  double number_or(const std::string& section, const std::string& key, double fallback) const;

  void set(const std::string& section, const std::string& key, const std::string& value);
  void set(const std::string& section, const std::string& key, double value);

  std::vector<std::string> sections() const;
  std::string serialize() const;

 private:
  // Sections and keys keep insertion order for stable output.
  std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::string>>>> data_;
  const std::string* find(const std::string& section, const std::string& key) const;
};

// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

}  // namespace lel
