#include "deco/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include "deco/errors.hpp"
#include "deco/ops.hpp"
#include "deco/optim.hpp"
#include "deco/serialize.hpp"

namespace deco {

void TrainConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
  if (!(plateau_factor > 0.0 && plateau_factor < 1.0)) {
    throw ConfigError("plateau_factor must lie in (0, 1)");
  }
  if (plateau_patience < 1) throw ConfigError("plateau_patience must be >= 1");
  if (!(min_lr > 0.0)) throw ConfigError("min_lr must be > 0");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
}

std::string TrainLog::to_csv() const {
  std::ostringstream os;
  os << "epoch,lr,ce_loss,orth_loss,total_loss,train_acc,seconds\n";
  os << std::setprecision(17);
  for (const auto& r : records) {
    os << r.epoch << ',' << r.lr << ',' << r.ce_loss << ',' << r.orth_loss << ',' << r.total_loss
       << ',' << r.train_accuracy << ',' << std::setprecision(6) << r.seconds
       << std::setprecision(17) << '\n';
  }
  return os.str();
}

void TrainLog::write_csv(const std::filesystem::path& path) const { write_file(path, to_csv()); }

namespace {

Tensor gather_rows(const Tensor& source, std::span<const std::size_t> rows) {
  const std::size_t stride = source.numel() / source.dim(0);
  Shape shape = source.shape();
  shape[0] = rows.size();
  Tensor out(shape, 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(source.data().begin() + static_cast<long>(rows[i] * stride), stride,
                out.data().begin() + static_cast<long>(i * stride));
  }
  return out;
}

std::size_t argmax_row(const Tensor& logits, std::size_t row) {
  const std::size_t classes = logits.dim(1);
  std::size_t best = 0;
  for (std::size_t c = 1; c < classes; ++c) {
    if (logits.at(row, c) > logits.at(row, best)) best = c;
  }
  return best;
}

TrainResult run_training(const TimeSeriesDataset& dataset, const TrainConfig& config,
                         const LiteArchitectureConfig& arch, std::span<const LiteModel> previous,
                         const EpochCallback& on_epoch) {
  config.validate();
  LiteArchitectureConfig cfg = arch;
  cfg.n_classes = static_cast<int>(dataset.n_classes());
  LiteModel model = init_model(cfg, config.seed);

  // Frozen predecessors run in eval mode, so each sample's features do not
  // depend on the batch it lands in; compute them once.
  const Shape feature_shape{dataset.size(), static_cast<std::size_t>(cfg.n_filters),
                            dataset.length()};
  std::vector<Tensor> previous_features;
  for (const auto& prev : previous) {
    Tensor f = infer(prev, dataset.X).features;
    if (f.shape() != feature_shape) {
      throw ConfigError("previous model features " + shape_str(f.shape()) +
                        " do not match the new model's " + shape_str(feature_shape));
    }
    previous_features.push_back(std::move(f));
  }
  const bool decorrelated = !previous.empty();
  const OrthOptions orth_options = config.orth_options();

  std::vector<AdamState> adam(model.parameters().size());
  ReduceLrOnPlateau scheduler(config.lr, config.plateau_factor, config.plateau_patience,
                              config.min_lr, config.plateau_threshold);

  TrainResult result{model, model, {}, 0, model.parameter_checksum()};
  double best_total = std::numeric_limits<double>::infinity();
  const auto started = std::chrono::steady_clock::now();
  const double n = static_cast<double>(dataset.size());

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr = scheduler.lr();
    double ce_sum = 0.0, orth_sum = 0.0, total_sum = 0.0;
    std::size_t correct = 0;

    for (const auto& batch : batches(dataset.size(), static_cast<std::size_t>(config.batch_size),
                                     config.seed, static_cast<std::uint64_t>(epoch))) {
      Graph g;
      const Tensor targets = dataset.batch_y(batch);
      LiteForward fwd;
      try {
        fwd = forward(g, model, dataset.batch_x(batch), BnMode::Train);
      } catch (const NumericError& e) {
        throw DivergenceError(epoch, e.what());
      }
      Var ce = softmax_cross_entropy(g, fwd.logits, targets);
      Var loss = ce;
      double orth_value = 0.0;
      if (decorrelated) {
        std::vector<Var> prev_vars;
        for (const auto& pf : previous_features) prev_vars.push_back(g.input(gather_rows(pf, batch)));
        Var orth = sequential_orth_loss(g, fwd.features, prev_vars, orth_options);
        orth_value = g.value(orth).item();
        loss = total_loss(g, ce, orth, config.alpha);
      }
      g.backward(loss);

      auto& params = model.parameters();
      for (std::size_t i = 0; i < params.size(); ++i) {
        adam_step(params[i].tensor.data(), g.grad(fwd.params[i]), adam[i], lr);
      }
      model.bn_states() = fwd.bn_states;

      const double b = static_cast<double>(batch.size());
      ce_sum += g.value(ce).item() * b;
      orth_sum += orth_value * b;
      total_sum += g.value(loss).item() * b;
      const Tensor& logits = g.value(fwd.logits);
      for (std::size_t i = 0; i < batch.size(); ++i) {
        if (static_cast<int>(argmax_row(logits, i)) == dataset.y[batch[i]]) ++correct;
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.ce_loss = ce_sum / n;
    rec.orth_loss = orth_sum / n;
    rec.total_loss = total_sum / n;
    rec.train_accuracy = static_cast<double>(correct) / n;
    rec.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    if (!std::isfinite(rec.total_loss)) throw DivergenceError(epoch, "non-finite training loss");
    result.log.records.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (rec.total_loss < best_total) {
      best_total = rec.total_loss;
      result.model = model;
      result.best_epoch = epoch;
    }
    scheduler.step(rec.total_loss);
  }
  result.last_model = std::move(model);
  return result;
}

}  // namespace

TrainResult train_base(const TimeSeriesDataset& dataset, const TrainConfig& config,
                       const LiteArchitectureConfig& arch, const EpochCallback& on_epoch) {
  return run_training(dataset, config, arch, {}, on_epoch);
}

TrainResult train_decorrelated(const TimeSeriesDataset& dataset, const TrainConfig& config,
                               const LiteArchitectureConfig& arch,
                               std::span<const LiteModel> previous,
                               const EpochCallback& on_epoch) {
  if (previous.empty()) throw UsageError("train_decorrelated needs at least one previous model");
  return run_training(dataset, config, arch, previous, on_epoch);
}

std::string_view ensemble_kind_name(EnsembleKind kind) {
  return kind == EnsembleKind::Base ? "base" : "deco";
}

std::string ensemble_display_name(EnsembleKind kind, std::size_t size) {
  return std::string(kind == EnsembleKind::Base ? "LITETime-" : "Deco-LITETime-") +
         std::to_string(size);
}

EnsembleResult build_ensemble(const TimeSeriesDataset& dataset, const TrainConfig& config,
                              const LiteArchitectureConfig& arch, std::size_t size,
                              EnsembleKind kind, std::span<const std::uint64_t> seeds,
                              const std::function<void(std::size_t, const EpochRecord&)>& on_epoch) {
  if (size < 1) throw ConfigError("ensemble size must be >= 1");
  if (seeds.size() < size) {
    throw ConfigError("ensemble of " + std::to_string(size) + " needs " + std::to_string(size) +
                      " seeds, got " + std::to_string(seeds.size()));
  }
  if (std::set<std::uint64_t>(seeds.begin(), seeds.begin() + static_cast<long>(size)).size() != size) {
    throw ConfigError("ensemble seeds must be distinct");
  }
  EnsembleResult out;
  out.kind = kind;
  out.name = ensemble_display_name(kind, size);
  out.seeds.assign(seeds.begin(), seeds.begin() + static_cast<long>(size));
  if (size < 2 || size > 5) {
    out.warnings.push_back("ensemble size " + std::to_string(size) +
                           " is outside the studied range 2..5");
  }
  for (std::size_t k = 0; k < size; ++k) {
    TrainConfig member = config;
    member.seed = seeds[k];
    EpochCallback cb;
    if (on_epoch) cb = [&on_epoch, k](const EpochRecord& r) { on_epoch(k, r); };
    TrainResult r = (kind == EnsembleKind::Base || k == 0)
                        ? train_base(dataset, member, arch, cb)
                        : train_decorrelated(dataset, member, arch, out.models, cb);
    out.models.push_back(std::move(r.model));
    out.logs.push_back(std::move(r.log));
  }
  return out;
}

}  // namespace deco
