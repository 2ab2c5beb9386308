#include "gclrec/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "gclrec/errors.hpp"

namespace gclrec {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* begin = value.data();
  const char* end = value.data() + value.size();
  std::from_chars_result res{};
  if constexpr (std::is_floating_point_v<T>) {
    // from_chars for double is available, but strtod accepts more spellings.
    char* stop = nullptr;
    out = std::strtod(begin, &stop);
    res.ptr = stop;
    res.ec = stop == begin ? std::errc::invalid_argument : std::errc{};
  } else {
    res = std::from_chars(begin, end, out);
  }
  if (res.ec != std::errc{} || res.ptr != end) {
    throw ConfigError(key + ": invalid value '" + value + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError(key + ": expected true/false, got '" + value + "'");
}

}  // namespace

void set_config_value(TrainConfig& c, const std::string& key, const std::string& value) {
  try {
    if (key == "method") {
      c.method = parse_method(value);
    } else if (key == "layers") {
      c.layers = parse_number<int>(key, value);
    } else if (key == "dim") {
      c.dim = parse_number<std::size_t>(key, value);
    } else if (key == "lr") {
      c.lr = parse_number<double>(key, value);
    } else if (key == "reg") {
      c.reg = parse_number<double>(key, value);
    } else if (key == "batch_size") {
      c.batch_size = parse_number<std::size_t>(key, value);
    } else if (key == "lambda") {
      c.lambda = parse_number<double>(key, value);
    } else if (key == "epsilon") {
      c.epsilon = parse_number<double>(key, value);
    } else if (key == "tau") {
      c.tau = parse_number<double>(key, value);
    } else if (key == "contrast_layer") {
      c.random_contrast_layer = value == "random";
      if (!c.random_contrast_layer) c.contrast_layer = parse_number<int>(key, value);
    } else if (key == "anchor_layer") {
      c.anchor_layer = parse_number<int>(key, value);
    } else if (key == "keep_rate") {
      c.keep_rate = parse_number<double>(key, value);
    } else if (key == "noise") {
      c.noise = parse_noise_kind(value);
    } else if (key == "max_epochs") {
      c.max_epochs = parse_number<int>(key, value);
    } else if (key == "patience") {
      c.patience = parse_number<int>(key, value);
    } else if (key == "seed") {
      c.seed = parse_number<std::uint64_t>(key, value);
    } else if (key == "eval_interval") {
      c.eval_interval = parse_number<int>(key, value);
    } else if (key == "topk") {
      c.top_k = parse_number<std::size_t>(key, value);
    } else if (key == "merge_validation") {
      c.merge_validation = parse_bool(key, value);
    } else if (key == "uniformity_min_item_interactions") {
      c.uniformity_min_item_interactions = parse_number<std::size_t>(key, value);
    } else if (key == "uniformity_users") {
      c.uniformity_users = parse_number<std::size_t>(key, value);
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    if (what.rfind(key, 0) == 0 || what.rfind("unknown config key", 0) == 0) throw;
    throw ConfigError(key + ": " + what);
  }
}

ParsedConfig parse_config(std::istream& in, const std::string& source) {
  ParsedConfig parsed;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": empty key or value");
    }
    set_config_value(parsed.config, key, value);
    parsed.given_keys.insert(key);
  }
  return parsed;
}

ParsedConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  return parse_config(in, path);
}

std::string config_echo(const TrainConfig& c) {
  std::ostringstream out;
  out.precision(17);
  out << "method = " << to_string(c.method) << '\n'
      << "layers = " << c.layers << '\n'
      << "dim = " << c.dim << '\n'
      << "lr = " << c.lr << '\n'
      << "reg = " << c.reg << '\n'
      << "batch_size = " << c.batch_size << '\n'
      << "lambda = " << c.lambda << '\n'
      << "epsilon = " << c.epsilon << '\n'
      << "tau = " << c.tau << '\n'
      << "contrast_layer = "
      << (c.random_contrast_layer ? std::string("random") : std::to_string(c.contrast_layer)) << '\n'
      << "anchor_layer = " << c.anchor_layer << '\n'
      << "keep_rate = " << c.keep_rate << '\n'
      << "noise = " << to_string(c.noise) << '\n'
      << "max_epochs = " << c.max_epochs << '\n'
      << "patience = " << c.patience << '\n'
      << "seed = " << c.seed << '\n'
      << "eval_interval = " << c.eval_interval << '\n'
      << "topk = " << c.top_k << '\n'
      << "merge_validation = " << (c.merge_validation ? "true" : "false") << '\n'
      << "uniformity_min_item_interactions = " << c.uniformity_min_item_interactions << '\n'
      << "uniformity_users = " << c.uniformity_users << '\n';
  return out.str();
}

}  // namespace gclrec
