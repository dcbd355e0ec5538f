#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "deco/lite_model.hpp"
#include "deco/losses.hpp"
#include "deco/ucr_data.hpp"

namespace deco {

struct TrainConfig {
  double alpha = 0.5;
  double lr = 0.001;
  double plateau_factor = 0.5;
  int plateau_patience = 50;
  double min_lr = 1e-4;
  double plateau_threshold = 1e-6;
  int epochs = 1500;
  int batch_size = 64;
  std::uint64_t seed = 0;
  OrthNormalization orth_normalization = OrthNormalization::MeanOffdiag;
  bool orth_include_diagonal = false;

  // Throws ConfigError when a field is out of range.
  void validate() const;
  OrthOptions orth_options() const { return {orth_normalization, orth_include_diagonal, 1e-8}; }
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double ce_loss = 0.0;
  double orth_loss = 0.0;
  double total_loss = 0.0;
  double train_accuracy = 0.0;  // train-mode predictions during the epoch
  double seconds = 0.0;         // wall time since training started
};

struct TrainLog {
  std::vector<EpochRecord> records;

  // Columns: epoch,lr,ce_loss,orth_loss,total_loss,train_acc,seconds
  std::string to_csv() const;
  void write_csv(const std::filesystem::path& path) const;
};

struct TrainResult {
  LiteModel model;       // checkpoint with the lowest epoch total loss
  LiteModel last_model;  // state after the final epoch
  TrainLog log;
  int best_epoch = 0;
  std::uint64_t initial_checksum = 0;  // parameters before the first update
};

// Called after every completed epoch.
using EpochCallback = std::function<void(const EpochRecord&)>;

// Cross-entropy only. Initialised from config.seed; batches shuffled from the
// same seed. Throws DivergenceError on a non-finite epoch loss.
TrainResult train_base(const TimeSeriesDataset& dataset, const TrainConfig& config,
                       const LiteArchitectureConfig& arch, const EpochCallback& on_epoch = {});

// Cross-entropy plus the orthogonality loss against the frozen features of
// every model in `previous`, combined as alpha*CE + (1-alpha)*orth. Previous
// models are only read (eval mode).
TrainResult train_decorrelated(const TimeSeriesDataset& dataset, const TrainConfig& config,
                               const LiteArchitectureConfig& arch,
                               std::span<const LiteModel> previous,
                               const EpochCallback& on_epoch = {});

enum class EnsembleKind { Base, Decorrelated };
std::string_view ensemble_kind_name(EnsembleKind kind);  // "base" / "deco"
// "LITETime-N" or "Deco-LITETime-N"
std::string ensemble_display_name(EnsembleKind kind, std::size_t size);

struct EnsembleResult {
  EnsembleKind kind = EnsembleKind::Base;
  std::string name;
  std::vector<LiteModel> models;
  std::vector<TrainLog> logs;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> warnings;
};

// Base: `size` independent CE models with seeds[0..size). Decorrelated: a CE
// reference with seeds[0], then size-1 decorrelated models trained in order,
// model k against models 0..k-1 and initialised with seeds[k]. Sizes outside
// 2..5 only produce a warning.
EnsembleResult build_ensemble(const TimeSeriesDataset& dataset, const TrainConfig& config,
                              const LiteArchitectureConfig& arch, std::size_t size,
                              EnsembleKind kind, std::span<const std::uint64_t> seeds,
                              const std::function<void(std::size_t, const EpochRecord&)>& on_epoch = {});

}  // namespace deco
