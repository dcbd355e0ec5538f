#include "deco/ensemble_eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "deco/errors.hpp"
#include "deco/ops.hpp"
#include "deco/serialize.hpp"

namespace deco {

Tensor ensemble_predict(std::span<const LiteModel> models, const Tensor& x) {
  if (models.empty()) throw UsageError("ensemble_predict: no models");
  const int classes = models.front().config().n_classes;
  for (const auto& m : models) {
    if (m.config().n_classes != classes) {
      throw ConfigError("ensemble_predict: members disagree on the number of classes (" +
                        std::to_string(classes) + " vs " +
                        std::to_string(m.config().n_classes) + ")");
    }
  }
  std::vector<Tensor> probs;
  probs.reserve(models.size());
  for (const auto& m : models) probs.push_back(softmax_rows(infer(m, x).logits));

  // Summing each cell in sorted order makes the mean independent of member order.
  Tensor out(probs.front().shape(), 0.0);
  std::vector<double> cell(models.size());
  const double inv = 1.0 / static_cast<double>(models.size());
  for (std::size_t i = 0; i < out.numel(); ++i) {
    for (std::size_t m = 0; m < probs.size(); ++m) cell[m] = probs[m].data()[i];
    std::sort(cell.begin(), cell.end());
    double s = 0.0;
    for (double v : cell) s += v;
    out.data()[i] = s * inv;
  }
  return out;
}

std::vector<int> predicted_classes(const Tensor& probabilities) {
  if (probabilities.rank() != 2) throw DimensionError("predicted_classes: expected [N, C]");
  std::vector<int> out(probabilities.dim(0));
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < probabilities.dim(1); ++c) {
      if (probabilities.at(i, c) > probabilities.at(i, best)) best = c;
    }
    out[i] = static_cast<int>(best);
  }
  return out;
}

double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.empty()) throw UsageError("accuracy: empty input");
  if (predicted.size() != truth.size()) {
    throw DimensionError("accuracy: " + std::to_string(predicted.size()) + " predictions vs " +
                         std::to_string(truth.size()) + " labels");
  }
  std::size_t hit = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hit += predicted[i] == truth[i];
  return static_cast<double>(hit) / static_cast<double>(predicted.size());
}

void ResultsTable::validate(bool allow_missing) const {
  if (acc.size() != classifiers.size()) throw InputError("results table: row count mismatch");
  for (std::size_t c = 0; c < acc.size(); ++c) {
    if (acc[c].size() != datasets.size()) {
      throw InputError("results table: classifier " + classifiers[c] + " has " +
                       std::to_string(acc[c].size()) + " values for " +
                       std::to_string(datasets.size()) + " datasets");
    }
    for (std::size_t d = 0; d < acc[c].size(); ++d) {
      const double v = acc[c][d];
      if (std::isnan(v)) {
        if (allow_missing) continue;
        throw InputError("results table: missing accuracy of " + classifiers[c] + " on " +
                         datasets[d]);
      }
      if (!(v >= 0.0 && v <= 1.0)) {
        throw InputError("results table: accuracy " + format_double(v) + " of " +
                         classifiers[c] + " outside [0, 1]");
      }
    }
  }
}

std::string ResultsTable::to_csv() const {
  validate(true);
  std::ostringstream os;
  os << "dataset";
  for (const auto& c : classifiers) os << ',' << c;
  os << '\n';
  for (std::size_t d = 0; d < datasets.size(); ++d) {
    os << datasets[d];
    for (std::size_t c = 0; c < classifiers.size(); ++c) {
      os << ',';
      if (!std::isnan(acc[c][d])) os << format_double(acc[c][d]);
    }
    os << '\n';
  }
  return os.str();
}

namespace {

std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    std::string_view f = line.substr(start, comma == std::string_view::npos ? line.npos : comma - start);
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
    out.emplace_back(f);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

ResultsTable ResultsTable::from_csv(std::string_view text, bool allow_missing) {
  ResultsTable t;
  std::istringstream in{std::string(text)};
  std::string line;
  bool header = true;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fields = split_fields(line);
    if (header) {
      if (fields.size() < 2) throw InputError("results table: header needs classifier columns");
      t.classifiers.assign(fields.begin() + 1, fields.end());
      t.acc.assign(t.classifiers.size(), {});
      header = false;
      continue;
    }
    if (fields.size() != t.classifiers.size() + 1) {
      throw InputError("results table line " + std::to_string(line_no) + ": expected " +
                       std::to_string(t.classifiers.size() + 1) + " fields");
    }
    t.datasets.push_back(fields[0]);
    for (std::size_t c = 0; c < t.classifiers.size(); ++c) {
      const std::string& f = fields[c + 1];
      double v = std::numeric_limits<double>::quiet_NaN();
      if (f.empty() && allow_missing) {
        t.acc[c].push_back(v);
        continue;
      }
      auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (f.empty() || res.ec != std::errc{} || res.ptr != f.data() + f.size()) {
        throw InputError("results table line " + std::to_string(line_no) +
                         ": missing or invalid accuracy for " + t.classifiers[c]);
      }
      t.acc[c].push_back(v);
    }
  }
  if (header) throw InputError("results table: empty input");
  t.validate(allow_missing);
  return t;
}

ResultsTable ResultsTable::load(const std::filesystem::path& path, bool allow_missing) {
  return from_csv(read_file(path), allow_missing);
}

void ResultsTable::set(const std::string& classifier, const std::string& dataset, double value) {
  const double missing = std::numeric_limits<double>::quiet_NaN();
  auto c = std::find(classifiers.begin(), classifiers.end(), classifier);
  if (c == classifiers.end()) {
    classifiers.push_back(classifier);
    acc.emplace_back(datasets.size(), missing);
    c = classifiers.end() - 1;
  }
  auto d = std::find(datasets.begin(), datasets.end(), dataset);
  if (d == datasets.end()) {
    datasets.push_back(dataset);
    for (auto& row : acc) row.push_back(missing);
    d = datasets.end() - 1;
  }
  acc[static_cast<std::size_t>(c - classifiers.begin())][static_cast<std::size_t>(d - datasets.begin())] = value;
}

MCMReport mcm(const ResultsTable& table) {
  table.validate();
  const std::size_t k = table.classifiers.size();
  if (k < 2) throw UsageError("mcm needs at least two classifiers");
  if (table.datasets.empty()) throw UsageError("mcm needs at least one dataset");
  const double nd = static_cast<double>(table.datasets.size());

  std::vector<double> means(k);
  for (std::size_t c = 0; c < k; ++c) {
    means[c] = std::accumulate(table.acc[c].begin(), table.acc[c].end(), 0.0) / nd;
  }
  // Means equal up to summation rounding count as tied and keep table order.
  std::vector<double> key(k);
  for (std::size_t c = 0; c < k; ++c) key[c] = std::round(means[c] * 1e12);
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return key[a] > key[b]; });

  MCMReport r;
  for (std::size_t i : order) {
    r.classifiers.push_back(table.classifiers[i]);
    r.mean_accuracy.push_back(means[i]);
  }
  r.mean_diff.assign(k, std::vector<double>(k, 0.0));
  r.win_tie_loss.assign(k, std::vector<WinTieLoss>(k));
  r.p_value.assign(k, std::vector<double>(k, 1.0));
  r.significant.assign(k, std::vector<bool>(k, false));
  r.degenerate.assign(k, std::vector<bool>(k, false));

  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      const auto& a = table.acc[order[i]];
      const auto& b = table.acc[order[j]];
      double diff = 0.0;
      WinTieLoss w;
      for (std::size_t d = 0; d < a.size(); ++d) {
        diff += a[d] - b[d];
        if (a[d] > b[d]) ++w.wins;
        else if (a[d] == b[d]) ++w.ties;
        else ++w.losses;
      }
      diff /= nd;
      const WilcoxonResult wr = wilcoxon_signed_rank(a, b);
      r.mean_diff[i][j] = diff;
      r.mean_diff[j][i] = -diff;
      r.win_tie_loss[i][j] = w;
      r.win_tie_loss[j][i] = {w.losses, w.ties, w.wins};
      r.p_value[i][j] = r.p_value[j][i] = wr.p_value;
      r.significant[i][j] = r.significant[j][i] = wr.p_value < 0.05;
      r.degenerate[i][j] = r.degenerate[j][i] = wr.degenerate;
    }
  }
  return r;
}

std::string MCMReport::to_json() const {
  nlohmann::ordered_json j;
  j["classifiers"] = classifiers;
  j["mean_accuracy"] = mean_accuracy;
  j["mean_diff"] = mean_diff;
  auto wtl = nlohmann::ordered_json::array();
  auto p = nlohmann::ordered_json::array();
  auto p_text = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < classifiers.size(); ++i) {
    auto wrow = nlohmann::ordered_json::array();
    auto trow = nlohmann::ordered_json::array();
    for (std::size_t jx = 0; jx < classifiers.size(); ++jx) {
      const auto& w = win_tie_loss[i][jx];
      wrow.push_back({{"wins", w.wins}, {"ties", w.ties}, {"losses", w.losses}});
      trow.push_back(format_p_value(p_value[i][jx]));
    }
    wtl.push_back(wrow);
    p_text.push_back(trow);
  }
  j["win_tie_loss"] = wtl;
  j["p_value"] = p_value;
  j["p_value_display"] = p_text;
  auto sig = nlohmann::ordered_json::array();
  auto deg = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < classifiers.size(); ++i) {
    sig.push_back(std::vector<bool>(significant[i].begin(), significant[i].end()));
    deg.push_back(std::vector<bool>(degenerate[i].begin(), degenerate[i].end()));
  }
  j["significant"] = sig;
  j["degenerate"] = deg;
  return j.dump(2) + "\n";
}

std::string MCMReport::pairwise_csv() const {
  std::ostringstream os;
  os << "row,col,mean_diff,wins,ties,losses,p_value,significant\n";
  for (std::size_t i = 0; i < classifiers.size(); ++i) {
    for (std::size_t j = 0; j < classifiers.size(); ++j) {
      if (i == j) continue;
      const auto& w = win_tie_loss[i][j];
      os << classifiers[i] << ',' << classifiers[j] << ',' << format_double(mean_diff[i][j]) << ','
         << w.wins << ',' << w.ties << ',' << w.losses << ',' << format_p_value(p_value[i][j])
         << ',' << (significant[i][j] ? 1 : 0) << '\n';
    }
  }
  return os.str();
}

}  // namespace deco
