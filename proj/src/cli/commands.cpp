#include "commands.hpp"
#include "deco/cli.hpp"

#include <cstdlib>
#include <iomanip>

#include "deco/diversity.hpp"
#include "deco/ensemble_eval.hpp"
#include "deco/errors.hpp"
#include "deco/lite_model.hpp"
#include "deco/serialize.hpp"

namespace deco::cli {

using Json = nlohmann::ordered_json;

EnsembleKind Options::ensemble_kind() const {
  if (kind == "base") return EnsembleKind::Base;
  if (kind == "deco") return EnsembleKind::Decorrelated;
  throw UsageError("--kind must be base or deco, got '" + kind + "'");
}

TrainConfig Options::train_config() const {
  TrainConfig c;
  c.alpha = alpha;
  c.epochs = epochs;
  c.batch_size = batch_size;
  if (orth_norm == "mean") c.orth_normalization = OrthNormalization::MeanOffdiag;
  else if (orth_norm == "raw") c.orth_normalization = OrthNormalization::RawSum;
  else throw UsageError("--orth-norm must be mean or raw, got '" + orth_norm + "'");
  c.validate();
  return c;
}

Json Options::echo() const {
  Json j;
  j["data_root"] = data_root;
  j["dataset"] = dataset;
  j["kind"] = kind;
  j["size"] = size;
  j["seeds"] = seeds;
  j["alpha"] = alpha;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["orth_norm"] = orth_norm;
  j["split"] = split;
  j["out"] = out.generic_string();
  j["results"] = results.generic_string();
  j["argv"] = argv;
  return j;
}

DatasetPair load_datasets(const Options& o) {
  if (o.dataset.empty()) throw UsageError("--dataset is required");
  if (o.dataset == "Synthetic") {
    return {make_synthetic_dataset(32, 16, 7, Split::Train),
            make_synthetic_dataset(32, 16, 8, Split::Test)};
  }
  std::string root = o.data_root;
  if (root.empty()) {
    if (const char* env = std::getenv("DECO_DATA_ROOT")) root = env;
  }
  if (root.empty()) throw DataError("no UCR archive root: pass --data-root or set DECO_DATA_ROOT");
  return load_ucr_dataset(root, o.dataset, true);
}

fs::path ensemble_dir(const Options& o, const std::string& kind, std::size_t size) {
  return fs::path(o.dataset) / (kind + "-" + std::to_string(size));
}

namespace {

struct Run {
  RunManifest manifest;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

  Run(const Options& o, std::string kind, std::size_t size, std::vector<std::uint64_t> seeds) {
    manifest.command = o.command;
    if (!o.dataset.empty()) manifest.datasets = {o.dataset};
    manifest.kind = std::move(kind);
    manifest.size = size;
    manifest.seeds = std::move(seeds);
    manifest.config = o.echo();
    manifest.started_at = utc_timestamp();
  }

  void finish(const fs::path& out_dir) {
    manifest.finished_at = utc_timestamp();
    manifest.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    append_manifest(out_dir, manifest);
  }
};

std::vector<std::uint64_t> seeds_or_default(const Options& o, std::size_t n) {
  if (!o.seeds.empty()) return o.seeds;
  std::vector<std::uint64_t> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = i;
  return s;
}

double test_accuracy(std::span<const LiteModel> models, const TimeSeriesDataset& test) {
  return accuracy(predicted_classes(ensemble_predict(models, test.X)), test.y);
}

EpochCallback progress(std::ostream& out, std::uint64_t seed, int epochs) {
  return [&out, seed, epochs](const EpochRecord& r) {
    if (r.epoch % 100 == 0 || r.epoch == epochs) {
      out << "  seed " << seed << " epoch " << r.epoch << "/" << epochs << " loss "
          << std::setprecision(6) << r.total_loss << " train_acc " << r.train_accuracy << "\n";
    }
  };
}

Json read_json(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

struct LoadedEnsemble {
  Json meta;
  std::vector<LiteModel> models;
  std::vector<std::uint64_t> seeds;
};

LoadedEnsemble load_ensemble(const Options& o) {
  const fs::path dir = o.out / ensemble_dir(o, o.kind, o.size);
  const fs::path meta_path = dir / "ensemble.json";
  if (!fs::exists(meta_path)) {
    throw IoError("no ensemble at " + dir.string() + " (run the ensemble command first)");
  }
  LoadedEnsemble e;
  e.meta = read_json(meta_path);
  try {
    for (const auto& m : e.meta.at("members")) {
      e.seeds.push_back(m.at("seed").get<std::uint64_t>());
      e.models.push_back(load_checkpoint(o.out / m.at("checkpoint").get<std::string>()));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(meta_path.string() + ": " + ex.what());
  }
  if (e.models.empty()) throw FormatError(meta_path.string() + ": no members");
  return e;
}

}  // namespace

int cmd_train(const Options& o, std::ostream& out) {
  if (o.kind != "base") throw UsageError("train fits one base model; use ensemble for --kind deco");
  const std::uint64_t seed = o.seeds.empty() ? 0 : o.seeds.front();
  Run run(o, "base", 1, {seed});
  TrainConfig cfg = o.train_config();
  cfg.seed = seed;
  const DatasetPair data = load_datasets(o);

  out << "training base model on " << o.dataset << " (seed " << seed << ", " << cfg.epochs
      << " epochs)\n";
  TrainResult r = train_base(data.train, cfg, LiteArchitectureConfig{},
                             progress(out, seed, cfg.epochs));

  const fs::path rel = ensemble_dir(o, "base", 1) / ("seed" + std::to_string(seed));
  write_artifact(o.out, rel / "model.ckpt", checkpoint_bytes(r.model), run.manifest);
  write_artifact(o.out, rel / "model_last.ckpt", checkpoint_bytes(r.last_model), run.manifest);
  write_artifact(o.out, rel / "train_log.csv", r.log.to_csv(), run.manifest);

  const LiteModel one[] = {r.model};
  Json metrics;
  metrics["dataset"] = o.dataset;
  metrics["seed"] = seed;
  metrics["best_epoch"] = r.best_epoch;
  metrics["param_count"] = param_count(r.model);
  metrics["train_accuracy"] = test_accuracy(one, data.train);
  metrics["test_accuracy"] = test_accuracy(one, data.test);
  write_artifact(o.out, rel / "metrics.json", metrics.dump(2) + "\n", run.manifest);
  run.finish(o.out);

  out << "best epoch " << r.best_epoch << ", test accuracy "
      << metrics["test_accuracy"].get<double>() << "\n";
  out << "wrote " << (o.out / rel).string() << "\n";
  return kOk;
}

int cmd_ensemble(const Options& o, std::ostream& out) {
  const EnsembleKind kind = o.ensemble_kind();
  const auto seeds = seeds_or_default(o, o.size);
  Run run(o, o.kind, o.size, seeds);
  const TrainConfig cfg = o.train_config();
  const DatasetPair data = load_datasets(o);

  out << "training " << ensemble_display_name(kind, o.size) << " on " << o.dataset << "\n";
  const EnsembleResult ens = build_ensemble(
      data.train, cfg, LiteArchitectureConfig{}, o.size, kind, seeds,
      [&out, &seeds, &cfg](std::size_t k, const EpochRecord& r) {
        progress(out, seeds[k], cfg.epochs)(r);
      });
  for (const auto& w : ens.warnings) out << "warning: " << w << "\n";

  const fs::path dir = ensemble_dir(o, o.kind, o.size);
  Json members = Json::array();
  for (std::size_t k = 0; k < ens.models.size(); ++k) {
    const fs::path rel = dir / ("seed" + std::to_string(ens.seeds[k]));
    write_artifact(o.out, rel / "model.ckpt", checkpoint_bytes(ens.models[k]), run.manifest);
    write_artifact(o.out, rel / "train_log.csv", ens.logs[k].to_csv(), run.manifest);
    const LiteModel one[] = {ens.models[k]};
    Json m;
    m["seed"] = ens.seeds[k];
    m["role"] = (kind == EnsembleKind::Base || k == 0) ? "base" : "decorrelated";
    m["checkpoint"] = (rel / "model.ckpt").generic_string();
    m["train_log"] = (rel / "train_log.csv").generic_string();
    m["test_accuracy"] = test_accuracy(one, data.test);
    members.push_back(m);
  }
  const double acc = test_accuracy(ens.models, data.test);
  Json meta;
  meta["name"] = ens.name;
  meta["dataset"] = o.dataset;
  meta["kind"] = o.kind;
  meta["size"] = o.size;
  meta["seeds"] = ens.seeds;
  meta["members"] = members;
  meta["test_accuracy"] = acc;
  meta["warnings"] = ens.warnings;
  write_artifact(o.out, dir / "ensemble.json", meta.dump(2) + "\n", run.manifest);
  run.finish(o.out);

  out << ens.name << " test accuracy " << acc << "\n";
  return kOk;
}

int cmd_evaluate(const Options& o, std::ostream& out) {
  o.ensemble_kind();
  const LoadedEnsemble e = load_ensemble(o);
  Run run(o, o.kind, o.size, e.seeds);
  const DatasetPair data = load_datasets(o);

  Json members = Json::array();
  for (std::size_t k = 0; k < e.models.size(); ++k) {
    const LiteModel one[] = {e.models[k]};
    members.push_back({{"seed", e.seeds[k]}, {"test_accuracy", test_accuracy(one, data.test)}});
  }
  const std::string name = ensemble_display_name(o.ensemble_kind(), e.models.size());
  const double acc = test_accuracy(e.models, data.test);
  Json report;
  report["name"] = name;
  report["dataset"] = o.dataset;
  report["members"] = members;
  report["test_accuracy"] = acc;
  write_artifact(o.out, ensemble_dir(o, o.kind, o.size) / "evaluation.json",
                 report.dump(2) + "\n", run.manifest);

  if (!o.results.empty()) {
    ResultsTable table;
    if (fs::exists(o.results)) table = ResultsTable::load(o.results, true);
    table.set(name, o.dataset, acc);
    write_file(o.results, table.to_csv());
    run.manifest.artifacts.push_back(fs::absolute(o.results).lexically_normal().generic_string());
  }
  run.finish(o.out);
  out << name << " on " << o.dataset << ": test accuracy " << acc << "\n";
  return kOk;
}

int cmd_mcm(const Options& o, std::ostream& out) {
  if (o.results.empty()) throw UsageError("mcm needs --results FILE");
  Run run(o, "", 0, {});
  const ResultsTable table = ResultsTable::load(o.results);
  run.manifest.datasets = table.datasets;
  const MCMReport report = mcm(table);
  write_artifact(o.out, "mcm.json", report.to_json(), run.manifest);
  write_artifact(o.out, "mcm_pairwise.csv", report.pairwise_csv(), run.manifest);
  run.finish(o.out);

  out << "rank  mean_acc  classifier\n";
  for (std::size_t i = 0; i < report.classifiers.size(); ++i) {
    out << std::setw(4) << i + 1 << "  " << std::fixed << std::setprecision(4)
        << report.mean_accuracy[i] << "    " << report.classifiers[i] << "\n";
  }
  out.unsetf(std::ios::fixed);
  for (std::size_t i = 0; i < report.classifiers.size(); ++i) {
    for (std::size_t j = i + 1; j < report.classifiers.size(); ++j) {
      const auto& w = report.win_tie_loss[i][j];
      out << report.classifiers[i] << " vs " << report.classifiers[j] << ": mean diff "
          << std::showpos << std::setprecision(4) << report.mean_diff[i][j] << std::noshowpos
          << ", W/T/L " << w.wins << "/" << w.ties << "/" << w.losses << ", p "
          << format_p_value(report.p_value[i][j]) << (report.significant[i][j] ? " *" : "")
          << "\n";
    }
  }
  return kOk;
}

int cmd_diversity(const Options& o, std::ostream& out) {
  o.ensemble_kind();
  if (o.split != "test" && o.split != "train") {
    throw UsageError("--split must be train or test, got '" + o.split + "'");
  }
  const LoadedEnsemble e = load_ensemble(o);
  Run run(o, o.kind, o.size, e.seeds);
  const DatasetPair data = load_datasets(o);
  const Tensor& x = o.split == "test" ? data.test.X : data.train.X;
  const fs::path dir = ensemble_dir(o, o.kind, o.size) / "diversity";

  std::vector<FeatureStats> stats;
  for (std::size_t k = 0; k < e.models.size(); ++k) {
    const std::string id = "seed" + std::to_string(e.seeds[k]);
    stats.push_back(feature_statistics(e.models[k], x, id));
    write_artifact(o.out, dir / ("features_" + id + ".json"), stats.back().to_json(),
                   run.manifest);
  }
  const std::size_t m = stats.size();
  std::vector<std::vector<double>> fids(m, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) fids[i][j] = fids[j][i] = fid(stats[i], stats[j]);
  }
  Json fj;
  fj["split"] = o.split;
  fj["pooling"] = "gap";
  fj["members"] = e.seeds;
  fj["fid"] = fids;
  write_artifact(o.out, dir / "fid.json", fj.dump(2) + "\n", run.manifest);

  const FilterDistanceMatrix dist = filter_distance_matrix(e.models);
  write_artifact(o.out, dir / "filter_distances.csv", dist.to_csv(), run.manifest);
  const Embedding2D emb = embed_2d(dist);
  write_artifact(o.out, dir / "filter_embedding.csv", emb.to_csv(dist.labels), run.manifest);
  run.finish(o.out);

  out << "FID between members (" << o.split << " split):\n";
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      out << "  seed" << e.seeds[i] << " / seed" << e.seeds[j] << ": " << fids[i][j] << "\n";
    }
  }
  out << "filter distances: " << dist.size() << "x" << dist.size()
      << (emb.degenerate ? " (degenerate embedding)" : "") << "\n";
  return kOk;
}

}  // namespace deco::cli
