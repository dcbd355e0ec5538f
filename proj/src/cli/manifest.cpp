#include <ctime>
#include <fstream>

#include "commands.hpp"
#include "deco/cli.hpp"
#include "deco/errors.hpp"
#include "deco/serialize.hpp"

namespace deco::cli {

std::string RunManifest::to_json_line() const {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["datasets"] = datasets;
  j["kind"] = kind;
  j["size"] = size;
  j["seeds"] = seeds;
  j["config"] = config;
  j["artifacts"] = artifacts;
  j["tool_version"] = kToolVersion;
  j["started_at"] = started_at;
  j["finished_at"] = finished_at;
  j["wall_seconds"] = wall_seconds;
  return j.dump() + "\n";
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void append_manifest(const fs::path& out_dir, const RunManifest& manifest) {
  fs::create_directories(out_dir);
  std::ofstream f(out_dir / "manifests.jsonl", std::ios::app | std::ios::binary);
  if (!f) throw IoError("cannot append to " + (out_dir / "manifests.jsonl").string());
  f << manifest.to_json_line();
}

void write_artifact(const fs::path& out_dir, const fs::path& relative, std::string_view bytes,
                    RunManifest& manifest) {
  write_file(out_dir / relative, bytes);
  manifest.artifacts.push_back(relative.generic_string());
}

}  // namespace deco::cli
