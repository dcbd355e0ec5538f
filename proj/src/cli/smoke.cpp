#include <cmath>
#include <functional>
#include <iomanip>

#include "commands.hpp"
#include "deco/cli.hpp"
#include "deco/diversity.hpp"
#include "deco/ensemble_eval.hpp"
#include "deco/errors.hpp"
#include "deco/gradcheck.hpp"
#include "deco/losses.hpp"
#include "deco/random.hpp"
#include "deco/serialize.hpp"

namespace deco::cli {

namespace {

struct Check {
  std::string name;
  std::function<std::string()> run;  // empty string on success, else the reason
};

LiteArchitectureConfig tiny_architecture() {
  LiteArchitectureConfig a;
  a.n_filters = 3;
  a.first_layer_kernel_sizes = {4, 2};
  a.dwsc_kernel_sizes = {3, 3};
  a.dwsc_dilations = {1, 2};
  a.trend_filter_lengths = {2};
  a.peak_filter_lengths = {4};
  return a;
}

std::string near(double got, double want, double tol, const char* what) {
  if (std::fabs(got - want) <= tol) return {};
  std::ostringstream os;
  os << what << " = " << std::setprecision(10) << got << ", expected " << want;
  return os.str();
}

double train_eval_accuracy(const LiteModel& m, const TimeSeriesDataset& ds) {
  const LiteModel one[] = {m};
  return accuracy(predicted_classes(ensemble_predict(one, ds.X)), ds.y);
}

}  // namespace

int run_smoke(const SmokeOptions& options, std::ostream& out) {
  RunManifest manifest;
  manifest.command = "smoke";
  manifest.datasets = {"Synthetic"};
  manifest.kind = "base";
  manifest.size = 1;
  manifest.seeds = {0};
  manifest.config = {{"out", options.out.generic_string()},
                     {"corrupt_checkpoint", options.corrupt_checkpoint}};
  manifest.started_at = utc_timestamp();
  const auto t0 = std::chrono::steady_clock::now();

  const TimeSeriesDataset data = make_synthetic_dataset();
  const LiteArchitectureConfig arch;
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.seed = 0;
  TrainResult base;
  const fs::path rel = fs::path("Synthetic") / "base-1" / "seed0";

  std::vector<Check> checks = {
      {"gradients",
       [] {
         const LiteModel m = init_model(tiny_architecture(), 3);
         Rng rng(5);
         Tensor x(Shape{3, 1, 12});
         for (double& v : x.values()) v = rng.normal();
         Tensor y(Shape{3, 2}, 0.0);
         y.at(0, 0) = y.at(1, 1) = y.at(2, 0) = 1.0;
         std::vector<Tensor> inputs;
         for (const auto& p : m.parameters()) inputs.push_back(p.tensor);
         GradCheckOptions go;
         go.max_entries = 4;
         const auto r = check_gradients(
             [&](Graph& g, std::span<const Var> vars) {
               LiteForward f = forward(g, m, vars, g.input(x), BnMode::Train);
               return softmax_cross_entropy(g, f.logits, y);
             },
             inputs, go);
         if (r.max_rel_error > 1e-3) return "worst " + r.worst;
         return std::string{};
       }},
      {"loss-algebra",
       [] {
         Graph g;
         Tensor a(Shape{1, 2, 2}, std::vector<double>{1.0, 0.0, 0.0, 1.0});
         Tensor b(Shape{1, 2, 2},
                  std::vector<double>{1.0, 0.0, std::sqrt(0.5), std::sqrt(0.5)});
         OrthOptions raw{OrthNormalization::RawSum, false, 1e-8};
         const double v = g.value(orthogonality_loss(g, g.input(a), g.input(b), raw)).item();
         if (auto e = near(v, std::sqrt(0.5), 1e-6, "orthogonality loss"); !e.empty()) return e;
         if (total_loss(0.3, 0.7, 1.0) != 0.3) return std::string("alpha = 1 must keep only CE");
         return near(total_loss(0.3, 0.7, 0.0), 0.7, 0.0, "alpha = 0 total");
       }},
      {"oracles",
       [] {
         const double a[] = {1.0, 2.0}, b[] = {2.0};
         if (auto e = near(dtw(a, b), 1.0, 0.0, "dtw"); !e.empty()) return e;
         const double d6[] = {1, 2, 3, 4, 5, 6}, z6[] = {0, 0, 0, 0, 0, 0};
         if (auto e = near(wilcoxon_signed_rank(d6, z6).p_value, 0.03125, 1e-12, "wilcoxon p");
             !e.empty()) {
           return e;
         }
         ResultsTable t{{"A", "B"}, {"d1", "d2", "d3"}, {{0.9, 0.8, 0.7}, {0.8, 0.8, 0.6}}};
         const MCMReport r = mcm(t);
         if (auto e = near(r.mean_diff[0][1], 0.2 / 3.0, 1e-12, "mcm mean diff"); !e.empty()) {
           return e;
         }
         const auto& w = r.win_tie_loss[0][1];
         if (w.wins != 2 || w.ties != 1 || w.losses != 0) return std::string("mcm W/T/L");
         FeatureStats s1{"a", 1, {0.0}, {1.0}, 2}, s2{"b", 1, {1.0}, {4.0}, 2};
         return near(fid(s1, s2), 2.0, 1e-8, "fid");
       }},
      {"smoke-training",
       [&] {
         base = train_base(data, cfg, arch);
         const double acc = train_eval_accuracy(base.model, data);
         if (acc != 1.0) return "train accuracy " + std::to_string(acc) + " after 200 epochs";
         return std::string{};
       }},
      {"determinism",
       [&] {
         const TrainResult again = train_base(data, cfg, arch);
         if (again.model.state_checksum() != base.model.state_checksum()) {
           return std::string("two runs with seed 0 differ");
         }
         return std::string{};
       }},
      {"checkpoint-roundtrip",
       [&] {
         std::string bytes = checkpoint_bytes(base.model);
         if (options.corrupt_checkpoint) bytes[bytes.size() / 2] ^= 0x5a;
         write_artifact(options.out, rel / "model.ckpt", bytes, manifest);
         write_artifact(options.out, rel / "train_log.csv", base.log.to_csv(), manifest);
         try {
           const LiteModel loaded = load_checkpoint(options.out / rel / "model.ckpt");
           if (loaded.state_checksum() != base.model.state_checksum()) {
             return std::string("reloaded model differs");
           }
         } catch (const Error& e) {
           return std::string(e.what());
         }
         return std::string{};
       }},
      {"frozen-predecessor",
       [&] {
         const std::uint64_t before = base.model.state_checksum();
         TrainConfig dc = cfg;
         dc.epochs = 30;
         dc.seed = 1;
         const LiteModel prev[] = {base.model};
         train_decorrelated(data, dc, arch, prev);
         if (prev[0].state_checksum() != before) return std::string("predecessor changed");
         return std::string{};
       }},
      {"seed-pairing",
       [&] {
         TrainConfig c = cfg;
         c.epochs = 1;
         c.seed = 1;
         const LiteModel prev[] = {base.model};
         const auto b = train_base(data, c, arch);
         const auto d = train_decorrelated(data, c, arch, prev);
         if (b.initial_checksum != d.initial_checksum) return std::string("initial parameters differ");
         return std::string{};
       }},
      {"alpha-one",
       [&] {
         TrainConfig c = cfg;
         c.epochs = 30;
         c.seed = 1;
         c.alpha = 1.0;
         const LiteModel prev[] = {base.model};
         const auto b = train_base(data, c, arch);
         const auto d = train_decorrelated(data, c, arch, prev);
         if (b.model.state_checksum() != d.model.state_checksum() ||
             b.last_model.state_checksum() != d.last_model.state_checksum()) {
           return std::string("alpha = 1 decorrelated model differs from base model");
         }
         return std::string{};
       }},
  };

  std::vector<std::string> failed;
  out << std::left << std::setw(22) << "check" << "result\n";
  for (const auto& c : checks) {
    std::string reason;
    try {
      reason = c.run();
    } catch (const std::exception& e) {
      reason = e.what();
    }
    out << std::setw(22) << c.name << (reason.empty() ? "PASS" : "FAIL  " + reason) << "\n";
    if (!reason.empty()) failed.push_back(c.name);
  }
  out << std::right;

  manifest.finished_at = utc_timestamp();
  manifest.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  append_manifest(options.out, manifest);

  if (failed.empty()) {
    out << "all " << checks.size() << " checks passed\n";
    return kOk;
  }
  out << "failed:";
  for (const auto& f : failed) out << ' ' << f;
  out << "\n";
  return kUsage;
}

}  // namespace deco::cli
