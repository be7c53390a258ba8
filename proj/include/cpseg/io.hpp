#pragma once

// Text input: one value per line, "position value", or "group position value".
// Fields split on whitespace or commas; '#' starts a comment.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "cpseg/error.hpp"

namespace cpseg {

struct InputGroup {
  std::string name;
  std::vector<double> positions;  // empty for single-column input
  std::vector<double> values;
};

struct InputData {
  int columns = 0;
  std::vector<InputGroup> groups;  // in order of first appearance
  std::string digest;              // FNV-1a 64 of the raw bytes, hex

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& g : groups) n += g.values.size();
    return n;
  }
};

inline std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace detail {
inline bool parse_double(const std::string& tok, double& out) {
  const char* b = tok.data();
  const char* e = b + tok.size();
  if (b != e && *b == '+') ++b;
  auto [p, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && p == e;
}
}  // namespace detail

inline InputData parse_input(std::istream& in) {
  std::stringstream raw;
  raw << in.rdbuf();
  const std::string text = raw.str();
  InputData data;
  data.digest = fnv1a_hex(text);

  std::istringstream lines(text);
  std::string line;
  std::size_t lineno = 0;
  auto group_index = [&](const std::string& name) {
    for (std::size_t g = 0; g < data.groups.size(); ++g)
      if (data.groups[g].name == name) return g;
    data.groups.push_back({name, {}, {}});
    return data.groups.size() - 1;
  };
  while (std::getline(lines, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    for (char& c : line)
      if (c == ',' || c == '\t' || c == '\r') c = ' ';
    std::istringstream fields(line);
    std::vector<std::string> tok;
    for (std::string t; fields >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (tok.size() > 3) throw ParseError(lineno, "expected 1 to 3 fields, found " + std::to_string(tok.size()));
    if (data.columns == 0) data.columns = static_cast<int>(tok.size());
    if (static_cast<int>(tok.size()) != data.columns)
      throw ParseError(lineno, "expected " + std::to_string(data.columns) + " fields, found " +
                                   std::to_string(tok.size()));
    double value = 0.0, pos = 0.0;
    if (!detail::parse_double(tok.back(), value))
      throw ParseError(lineno, "value '" + tok.back() + "' is not a number");
    if (!std::isfinite(value)) throw ParseError(lineno, "value is not finite");
    if (data.columns >= 2 && !detail::parse_double(tok[tok.size() - 2], pos))
      throw ParseError(lineno, "position '" + tok[tok.size() - 2] + "' is not a number");
    auto& g = data.groups[group_index(data.columns == 3 ? tok[0] : std::string{})];
    g.values.push_back(value);
    if (data.columns >= 2) g.positions.push_back(pos);
  }
  if (data.groups.empty()) throw ParseError(lineno, "no data values found");
  return data;
}

inline InputData parse_input_string(const std::string& s) {
  std::istringstream in(s);
  return parse_input(in);
}

}  // namespace cpseg
