#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>

#include "fedblock/errors.hpp"
#include "fedblock/harness.hpp"

namespace fedblock {

namespace {

template <typename T>
T parse_number(const std::string& key, std::string_view text) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ConfigError("config key '" + key + "': cannot parse '" + std::string(text) + "'");
  }
  return value;
}

bool parse_bool(const std::string& key, std::string_view text) {
  if (text == "true" || text == "1" || text == "on" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "off" || text == "no") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + std::string(text) + "'");
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Key {
  std::function<void(SimConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const SimConfig&)> get;
};

template <typename T>
Key size_key(T SimConfig::*field) {
  return {[field](SimConfig& c, const std::string& k, const std::string& v) { c.*field = parse_number<T>(k, v); },
          [field](const SimConfig& c) { return std::to_string(c.*field); }};
}

Key real_key(double SimConfig::*field) {
  return {[field](SimConfig& c, const std::string& k, const std::string& v) { c.*field = parse_number<double>(k, v); },
          [field](const SimConfig& c) { return fmt(c.*field); }};
}

Key bool_key(bool SimConfig::*field) {
  return {[field](SimConfig& c, const std::string& k, const std::string& v) { c.*field = parse_bool(k, v); },
          [field](const SimConfig& c) { return std::string(c.*field ? "true" : "false"); }};
}

const std::map<std::string, Key>& keys() {
  static const std::map<std::string, Key> table = {
      {"N", size_key(&SimConfig::n_clients)},
      {"K", size_key(&SimConfig::queue_size)},
      {"M", size_key(&SimConfig::verification_set_size)},
      {"V", size_key(&SimConfig::verifiers)},
      {"L", size_key(&SimConfig::clients_per_verifier)},
      {"rounds", size_key(&SimConfig::rounds)},
      {"verification_regen_every", size_key(&SimConfig::verification_regen_every)},
      {"attacker_ratio", real_key(&SimConfig::attacker_ratio)},
      {"attack",
       {[](SimConfig& c, const std::string&, const std::string& v) { c.attack = parse_attack(v); },
        [](const SimConfig& c) { return std::string(to_string(c.attack)); }}},
      {"pdr", real_key(&SimConfig::pdr)},
      {"target_class", size_key(&SimConfig::target_class)},
      {"trigger_coords",
       {[](SimConfig& c, const std::string& k, const std::string& v) {
          c.trigger_coords.clear();
          std::stringstream ss(v);
          std::string item;
          while (std::getline(ss, item, ',')) {
            const auto b = item.find_first_not_of(' ');
            const auto e = item.find_last_not_of(' ');
            if (b == std::string::npos) continue;
            c.trigger_coords.push_back(parse_number<std::size_t>(k, std::string_view(item).substr(b, e - b + 1)));
          }
        },
        [](const SimConfig& c) {
          std::string out;
          for (std::size_t i = 0; i < c.trigger_coords.size(); ++i) {
            if (i) out += ',';
            out += std::to_string(c.trigger_coords[i]);
          }
          return out;
        }}},
      {"trigger_value", real_key(&SimConfig::trigger_value)},
      {"edge_case", bool_key(&SimConfig::edge_case)},
      {"gamma", real_key(&SimConfig::gamma)},
      {"delta", real_key(&SimConfig::delta)},
      {"delta_scale", real_key(&SimConfig::delta_scale)},
      {"defense", bool_key(&SimConfig::defense)},
      {"verifier_policy",
       {[](SimConfig& c, const std::string&, const std::string& v) { c.verifier_policy = parse_verifier_policy(v); },
        [](const SimConfig& c) { return std::string(to_string(c.verifier_policy)); }}},
      {"bad_verifier_fraction", real_key(&SimConfig::bad_verifier_fraction)},
      {"corruption",
       {[](SimConfig& c, const std::string&, const std::string& v) { c.corruption = parse_corruption_mode(v); },
        [](const SimConfig& c) { return std::string(to_string(c.corruption)); }}},
      {"verify_lag", bool_key(&SimConfig::verify_lag)},
      {"forced_score",
       {[](SimConfig& c, const std::string& k, const std::string& v) {
          if (v.empty() || v == "none") {
            c.forced_score.reset();
          } else {
            c.forced_score = parse_number<double>(k, v);
          }
        },
        [](const SimConfig& c) { return c.forced_score ? fmt(*c.forced_score) : std::string("none"); }}},
      {"non_iid", real_key(&SimConfig::non_iid_degree)},
      {"features", size_key(&SimConfig::features)},
      {"classes", size_key(&SimConfig::classes)},
      {"per_client_size", size_key(&SimConfig::per_client_size)},
      {"test_size", size_key(&SimConfig::test_size)},
      {"separation", real_key(&SimConfig::separation)},
      {"hidden_width", size_key(&SimConfig::hidden_width)},
      {"data",
       {[](SimConfig& c, const std::string&, const std::string& v) {
          if (v.empty()) {
            c.data_csv.reset();
          } else {
            c.data_csv = v;
          }
        },
        [](const SimConfig& c) { return c.data_csv ? c.data_csv->string() : std::string(); }}},
      {"learning_rate",
       {[](SimConfig& c, const std::string& k, const std::string& v) { c.train.learning_rate = parse_number<double>(k, v); },
        [](const SimConfig& c) { return fmt(c.train.learning_rate); }}},
      {"local_epochs",
       {[](SimConfig& c, const std::string& k, const std::string& v) { c.train.local_epochs = parse_number<std::size_t>(k, v); },
        [](const SimConfig& c) { return std::to_string(c.train.local_epochs); }}},
      {"batch_size",
       {[](SimConfig& c, const std::string& k, const std::string& v) { c.train.batch_size = parse_number<std::size_t>(k, v); },
        [](const SimConfig& c) { return std::to_string(c.train.batch_size); }}},
      {"seed", size_key(&SimConfig::seed)},
  };
  return table;
}

}  // namespace

SimConfig parse_config(const std::string& text) {
  // The INI reader only knows ';' comments; accept '#' as well.
  std::stringstream cleaned;
  std::stringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t");
    if (first != std::string::npos && line[first] == '#') continue;
    cleaned << line << '\n';
  }

  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(cleaned, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.message() + " (line " + std::to_string(e.line()) + ")");
  }

  SimConfig cfg;
  for (const auto& [key, node] : tree) {
    if (!node.empty()) throw ConfigError("config: sections are not supported ('" + key + "')");
    auto it = keys().find(key);
    if (it == keys().end()) throw ConfigError("config: unknown key '" + key + "'");
    it->second.set(cfg, key, node.data());
  }
  return cfg;
}

SimConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::map<std::string, std::string> config_entries(const SimConfig& cfg) {
  std::map<std::string, std::string> out;
  for (const auto& [name, key] : keys()) out[name] = key.get(cfg);
  return out;
}

}  // namespace fedblock
