#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace gclrec {

std::string version_tag();

// Provenance record written next to every command's outputs.
struct RunManifest {
  std::string command;
  std::string config_echo;
  std::uint64_t seed = 0;
  std::filesystem::path data_dir;
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  std::size_t num_interactions = 0;
  std::uint64_t data_hash = 0;
  std::map<std::string, std::string> outputs;

  std::string to_json() const;
  // FNV-1a of to_json(), as 16 hex digits.
  std::string hash() const;
};

// Writes `manifest.json` into `dir` and returns the manifest hash.
std::string write_manifest(const std::filesystem::path& dir, const RunManifest& manifest);

// "# manifest <hash>" line that opens every CSV output.
std::string manifest_comment(const std::string& hash);

std::uint64_t fnv1a64(const std::string& bytes, std::uint64_t state = 14695981039346656037ULL);
std::string hex64(std::uint64_t value);

}  // namespace gclrec
