#include "gclrec/manifest.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "gclrec/errors.hpp"

#ifndef GCLREC_VERSION
#define GCLREC_VERSION "dev"
#endif

namespace gclrec {

std::string version_tag() { return GCLREC_VERSION; }

std::uint64_t fnv1a64(const std::string& bytes, std::uint64_t state) {
  for (unsigned char c : bytes) {
    state ^= c;
    state *= 1099511628211ULL;
  }
  return state;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["version"] = version_tag();
  j["seed"] = seed;
  j["config"] = config_echo;
  j["dataset"] = {{"dir", data_dir.string()},
                  {"users", num_users},
                  {"items", num_items},
                  {"interactions", num_interactions},
                  {"content_hash", hex64(data_hash)}};
  j["outputs"] = outputs;
  return j.dump(2) + "\n";
}

std::string RunManifest::hash() const { return hex64(fnv1a64(to_json())); }

std::string write_manifest(const std::filesystem::path& dir, const RunManifest& manifest) {
  std::filesystem::create_directories(dir);
  const auto path = dir / "manifest.json";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << manifest.to_json();
  return manifest.hash();
}

std::string manifest_comment(const std::string& hash) { return "# manifest " + hash + "\n"; }

}  // namespace gclrec
