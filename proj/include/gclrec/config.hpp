#pragma once

#include <iosfwd>
#include <set>
#include <string>

#include "gclrec/train.hpp"

namespace gclrec {

struct ParsedConfig {
  TrainConfig config;
  // Keys that appeared in the file.
  std::set<std::string> given_keys;
};

// Flat "key = value" lines; '#' starts a comment. Unknown keys and bad
// values raise ConfigError naming the key.
ParsedConfig parse_config(std::istream& in, const std::string& source = "<config>");
ParsedConfig load_config(const std::string& path);

// Applies one key/value pair to `config`.
void set_config_value(TrainConfig& config, const std::string& key, const std::string& value);

// Every key with its current value, in the same syntax parse_config reads.
std::string config_echo(const TrainConfig& config);

}  // namespace gclrec
