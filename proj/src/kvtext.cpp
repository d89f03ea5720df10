#include "lel/kvtext.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "lel/errors.h"

namespace lel {

namespace {
std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string qualified(const std::string& section, const std::string& key) {
  return section.empty() ? key : section + "." + key;
}
}  // namespace

std::string format_double(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

KvDocument KvDocument::parse(const std::string& text) {
  KvDocument doc;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError("line " + std::to_string(lineno) + ": bad section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError("line " + std::to_string(lineno) + ": empty key");
    if (doc.has(section, key))
      throw ParseError("line " + std::to_string(lineno) + ": duplicate key '" + qualified(section, key) + "'");
    doc.set(section, key, trim(line.substr(eq + 1)));
  }
  return doc;
}

const std::string* KvDocument::find(const std::string& section, const std::string& key) const {
  for (const auto& [name, entries] : data_) {
    if (name != section) continue;
    for (const auto& [k, v] : entries)
      if (k == key) return &v;
  }
  return nullptr;
}

bool KvDocument::has(const std::string& section, const std::string& key) const {
  return find(section, key) != nullptr;
}

const std::string& KvDocument::get(const std::string& section, const std::string& key) const {
  const std::string* v = find(section, key);
  if (!v) throw ParseError("missing field '" + qualified(section, key) + "'");
  return *v;
}

double KvDocument::number(const std::string& section, const std::string& key) const {
  const std::string& text = get(section, key);
  double value = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size() || !std::isfinite(value))
    throw ParseError("field '" + qualified(section, key) + "' is not a finite number: '" + text + "'");
  return value;
}

double KvDocument::number_or(const std::string& section, const std::string& key, double fallback) const {
  return has(section, key) ? number(section, key) : fallback;
}

void KvDocument::set(const std::string& section, const std::string& key, const std::string& value) {
  auto it = std::find_if(data_.begin(), data_.end(), [&](const auto& s) { return s.first == section; });
  if (it == data_.end()) {
    data_.push_back({section, {}});
    it = std::prev(data_.end());
  }
  for (auto& [k, v] : it->second) {
    if (k == key) {
      v = value;
      return;
    }
  }
  it->second.push_back({key, value});
}

void KvDocument::set(const std::string& section, const std::string& key, double value) {
  set(section, key, format_double(value));
}

std::vector<std::string> KvDocument::sections() const {
  std::vector<std::string> out;
  for (const auto& s : data_) out.push_back(s.first);
  return out;
}

std::string KvDocument::serialize() const {
  std::ostringstream out;
  // Unsectioned keys first so they are not captured by a later header.
  for (const auto& [name, entries] : data_) {
    if (!name.empty()) continue;
    for (const auto& [k, v] : entries) out << k << " = " << v << "\n";
  }
  for (const auto& [name, entries] : data_) {
    if (name.empty()) continue;
    out << "\n[" << name << "]\n";
    for (const auto& [k, v] : entries) out << k << " = " << v << "\n";
  }
  return out.str();
}

}  // namespace lel
