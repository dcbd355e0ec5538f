#include "CLI11.hpp"

#include "commands.hpp"
#include "deco/cli.hpp"
#include "deco/errors.hpp"

namespace deco::cli {

namespace {

int run_command(const Options& o, bool corrupt, std::ostream& out) {
  if (o.command == "train") return cmd_train(o, out);
  if (o.command == "ensemble") return cmd_ensemble(o, out);
  if (o.command == "evaluate") return cmd_evaluate(o, out);
  if (o.command == "mcm") return cmd_mcm(o, out);
  if (o.command == "diversity") return cmd_diversity(o, out);
  return run_smoke({o.out, corrupt}, out);
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  o.argv = args;
  bool corrupt = false;
  std::string out_dir;

  CLI::App app{"Diversity-driven LITE ensembles for time series classification", "deco"};
  app.set_config("--config", "", "Flat key=value file; command-line flags take precedence");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.add_option("--data-root", o.data_root, "UCR archive root (default: $DECO_DATA_ROOT)");
  app.add_option("--dataset", o.dataset, "Dataset name, or Synthetic for the bundled data");
  app.add_option("--kind", o.kind, "Ensemble kind: base or deco")
      ->check(CLI::IsMember({"base", "deco"}));
  app.add_option("--size", o.size, "Ensemble size");
  app.add_option("--seeds", o.seeds, "Comma-separated seeds (default 0..size-1)")->delimiter(',');
  app.add_option("--alpha", o.alpha, "Weight of cross-entropy against the orthogonality loss");
  app.add_option("--epochs", o.epochs, "Training epochs per model");
  app.add_option("--batch-size", o.batch_size, "Mini-batch size");
  app.add_option("--orth-norm", o.orth_norm, "Orthogonality loss normalisation: mean or raw")
      ->check(CLI::IsMember({"mean", "raw"}));
  app.add_option("--split", o.split, "Split for feature statistics: test or train")
      ->check(CLI::IsMember({"test", "train"}));
  app.add_option("--out", out_dir, "Output directory (default: runs, or smoke-out for smoke)");
  app.add_option("--results", o.results, "Results table CSV (evaluate writes, mcm reads)");

  const std::pair<const char*, const char*> commands[] = {
      {"train", "Train one base model"},
      {"ensemble", "Train a base or decorrelated ensemble"},
      {"evaluate", "Evaluate a trained ensemble on the test split"},
      {"mcm", "Multi-comparison report from a results table"},
      {"diversity", "Feature FID and filter DTW analysis of a trained ensemble"},
      {"smoke", "Offline end-to-end checks on the bundled synthetic dataset"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->fallthrough();
    sub->callback([&o, n = std::string(name)] { o.command = n; });
    if (std::string(name) == "smoke") {
      sub->add_flag("--corrupt-checkpoint", corrupt)->group("");
    }
  }
  app.require_subcommand(1, 1);

  auto full_help = [&app](CLI::AppFormatMode mode = CLI::AppFormatMode::Normal) {
    return app.get_formatter()->make_help(&app, "deco", mode);
  };
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << full_help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << full_help(CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << full_help();
    return kUsage;
  }
  if (!out_dir.empty()) o.out = out_dir;
  else if (o.command == "smoke") o.out = "smoke-out";

  try {
    return run_command(o, corrupt, out);
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << "\n";
    return kDivergence;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return kDivergence;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  }
}

}  // namespace deco::cli
