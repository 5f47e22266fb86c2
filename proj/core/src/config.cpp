#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <string>

#include "mvq/error.hpp"
#include "mvq/linksim.hpp"

namespace mvq {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

double to_double(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(text, &used);
  } catch (const std::exception&) {
    throw FormatError("config: '" + key + "' expects a number, got '" + text + "'");
  }
  if (used != text.size() || !std::isfinite(x)) {
    throw FormatError("config: '" + key + "' expects a number, got '" + text + "'");
  }
  return x;
}

}  // namespace

ConfigMap parse_config(std::istream& in) {
  ConfigMap config;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError("config: line " + std::to_string(lineno) + " is not of the form key = value");
    }
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw FormatError("config: empty key at line " + std::to_string(lineno));
    config[key] = trim(line.substr(eq + 1));
  }
  return config;
}

ConfigMap read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config file " + path);
  return parse_config(in);
}

double config_double(const ConfigMap& config, const std::string& key, double fallback) {
  const auto it = config.find(key);
  return it == config.end() ? fallback : to_double(key, it->second);
}

long config_int(const ConfigMap& config, const std::string& key, long fallback) {
  const auto it = config.find(key);
  if (it == config.end()) return fallback;
  const double x = to_double(key, it->second);
  if (x != std::floor(x)) throw FormatError("config: '" + key + "' expects an integer");
  return static_cast<long>(x);
}

std::string config_string(const ConfigMap& config, const std::string& key, const std::string& fallback) {
  const auto it = config.find(key);
  return it == config.end() ? fallback : it->second;
}

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  std::string token;
  auto flush = [&] {
    if (!token.empty()) out.push_back(to_double("list", token));
    token.clear();
  };
  for (char c : text) {
    if (c == ',' || std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else {
      token += c;
    }
  }
  flush();
  return out;
}

std::vector<double> config_list(const ConfigMap& config, const std::string& key,
                                const std::vector<double>& fallback) {
  const auto it = config.find(key);
  return it == config.end() ? fallback : parse_number_list(it->second);
}

}  // namespace mvq
