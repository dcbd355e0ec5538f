#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "deco/training.hpp"
#include "deco/ucr_data.hpp"

namespace deco::cli {

namespace fs = std::filesystem;

struct Options {
  std::string command;
  std::string data_root;
  std::string dataset;
  std::string kind = "base";
  std::size_t size = 2;
  std::vector<std::uint64_t> seeds;
  double alpha = 0.5;
  int epochs = 1500;
  int batch_size = 64;
  std::string orth_norm = "mean";
  std::string split = "test";
  fs::path out = "runs";
  fs::path results;
  std::vector<std::string> argv;

  EnsembleKind ensemble_kind() const;
  TrainConfig train_config() const;
  nlohmann::ordered_json echo() const;
};

// One line of <out>/manifests.jsonl.
struct RunManifest {
  std::string command;
  std::vector<std::string> datasets;
  std::string kind;
  std::size_t size = 0;
  std::vector<std::uint64_t> seeds;
  nlohmann::ordered_json config;
  std::vector<std::string> artifacts;  // relative to the output directory
  std::string started_at;
  std::string finished_at;
  double wall_seconds = 0.0;

  std::string to_json_line() const;
};

std::string utc_timestamp();
void append_manifest(const fs::path& out_dir, const RunManifest& manifest);

// Writes a file under the output directory and records it in `manifest`.
void write_artifact(const fs::path& out_dir, const fs::path& relative, std::string_view bytes,
                    RunManifest& manifest);

// "Synthetic" selects the bundled dataset; anything else is read from the
// UCR root given by --data-root or DECO_DATA_ROOT.
DatasetPair load_datasets(const Options& options);

fs::path ensemble_dir(const Options& options, const std::string& kind, std::size_t size);

int cmd_train(const Options& options, std::ostream& out);
int cmd_ensemble(const Options& options, std::ostream& out);
int cmd_evaluate(const Options& options, std::ostream& out);
int cmd_mcm(const Options& options, std::ostream& out);
int cmd_diversity(const Options& options, std::ostream& out);

}  // namespace deco::cli
