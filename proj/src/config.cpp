#include "nhred/config.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "nhred/errors.hpp"

namespace nhred {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  size_t b = s.find_last_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_number(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    fail(ErrorCode::ConfigError, "key '" + key + "' expects a number, got '" + value + "'");
  }
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  fail(ErrorCode::ConfigError, "key '" + key + "' expects true/false, got '" + value + "'");
}

void apply(ConfigDocument& cfg, const std::string& section, const std::string& key,
           const std::string& value) {
  if (section == "model") {
    if (key == "name")
      cfg.model = value;
    else
      cfg.model_params[key] = to_number("model." + key, value);
    return;
  }
  if (section == "integrator") {
    if (key == "dt") {
      cfg.dt = to_number(key, value);
    } else if (key == "t_end") {
      cfg.t_end = to_number(key, value);
    } else if (key == "on_zero_level") {
      cfg.on_zero_level = to_bool(key, value);
    } else {
      fail(ErrorCode::ConfigError, "unknown key 'integrator." + key + "'");
    }
    return;
  }
  if (section == "sampling") {
    if (key == "samples") {
      cfg.samples = static_cast<int>(to_number(key, value));
    } else if (key == "seed") {
      cfg.seed = static_cast<std::uint64_t>(to_number(key, value));
    } else {
      fail(ErrorCode::ConfigError, "unknown key 'sampling." + key + "'");
    }
    return;
  }
  if (section == "tolerances") {
    cfg.tolerance_overrides[key] = to_number("tolerances." + key, value);
    return;
  }
  if (section == "output") {
    if (key == "path")
      cfg.out_path = value;
    else
      fail(ErrorCode::ConfigError, "unknown key 'output." + key + "'");
    return;
  }
  if (section == "verify") {
    if (key == "suites") {
      cfg.suites = split_list(value);
    } else if (key == "substitute_pi_nh") {
      cfg.substitute_pi_nh = to_bool(key, value);
    } else if (key == "expect_fail") {
      cfg.expect_fail = value;
    } else {
      fail(ErrorCode::ConfigError, "unknown key 'verify." + key + "'");
    }
    return;
  }
  if (section == "reduce") {
    if (key == "mu") {
      cfg.mu.clear();
      for (const auto& item : split_list(value)) cfg.mu.push_back(to_number("reduce.mu", item));
    } else {
      fail(ErrorCode::ConfigError, "unknown key 'reduce." + key + "'");
    }
    return;
  }
  fail(ErrorCode::ConfigError, "unknown section '" + section + "'");
}

ConfigDocument parse_json(const std::string& text) {
  ConfigDocument cfg;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    fail(ErrorCode::ConfigError, std::string("invalid JSON: ") + e.what());
  }
  for (const auto& [section, body] : j.items()) {
    if (!body.is_object()) fail(ErrorCode::ConfigError, "section '" + section + "' must be an object");
    for (const auto& [key, value] : body.items()) {
      std::string text_value;
      if (value.is_string())
        text_value = value.get<std::string>();
      else if (value.is_boolean())
        text_value = value.get<bool>() ? "true" : "false";
      else if (value.is_number()) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.17g", value.get<double>());
        text_value = buf;
      } else if (value.is_array()) {
        std::string acc;
        for (const auto& item : value) {
          if (!acc.empty()) acc += ",";
          if (item.is_string())
            acc += item.get<std::string>();
          else {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.17g", item.get<double>());
            acc += buf;
          }
        }
        text_value = acc;
      } else {
        fail(ErrorCode::ConfigError, "unsupported value type for '" + section + "." + key + "'");
      }
      apply(cfg, section, key, text_value);
    }
  }
  return cfg;
}

}  // namespace

ConfigDocument parse_config_text(const std::string& text) {
  std::string t = trim(text);
  if (!t.empty() && t.front() == '{') return parse_json(text);
  ConfigDocument cfg;
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s.front() == '[') {
      if (s.back() != ']') fail(ErrorCode::ConfigError, "line " + std::to_string(lineno) + ": bad section");
      section = trim(s.substr(1, s.size() - 2));
      continue;
    }
    auto eq = s.find('=');
    if (eq == std::string::npos)
      fail(ErrorCode::ConfigError, "line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    if (section.empty()) fail(ErrorCode::ConfigError, "key '" + key + "' outside any section");
    apply(cfg, section, key, value);
  }
  return cfg;
}

ConfigDocument parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::ConfigError, "cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace nhred
