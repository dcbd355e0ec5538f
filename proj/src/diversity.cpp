#include "deco/diversity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "json.hpp"

#include "deco/errors.hpp"
#include "deco/serialize.hpp"

namespace deco {

std::string FeatureStats::to_json() const {
  nlohmann::ordered_json j;
  j["model"] = model_id;
  j["count"] = count;
  j["dim"] = dim;
  j["mu"] = mu;
  auto rows = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < dim; ++i) {
    rows.push_back(std::vector<double>(sigma.begin() + static_cast<long>(i * dim),
                                       sigma.begin() + static_cast<long>((i + 1) * dim)));
  }
  j["sigma"] = rows;
  return j.dump(2) + "\n";
}

FeatureStats feature_statistics(const std::vector<std::vector<double>>& rows,
                                std::string model_id) {
  if (rows.size() < 2) throw UsageError("feature_statistics needs at least two samples");
  const std::size_t dim = rows.front().size();
  if (dim == 0) throw DimensionError("feature_statistics: empty feature vectors");
  for (const auto& r : rows) {
    if (r.size() != dim) throw DimensionError("feature_statistics: ragged feature rows");
  }
  FeatureStats s;
  s.model_id = std::move(model_id);
  s.dim = dim;
  s.count = rows.size();
  s.mu.assign(dim, 0.0);
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < dim; ++i) s.mu[i] += r[i];
  }
  const double n = static_cast<double>(rows.size());
  for (double& m : s.mu) m /= n;
  s.sigma.assign(dim * dim, 0.0);
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double di = r[i] - s.mu[i];
      for (std::size_t j = i; j < dim; ++j) s.sigma[i * dim + j] += di * (r[j] - s.mu[j]);
    }
  }
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = i; j < dim; ++j) {
      s.sigma[i * dim + j] /= n - 1.0;
      s.sigma[j * dim + i] = s.sigma[i * dim + j];
    }
  }
  return s;
}

std::vector<std::vector<double>> pooled_features(const LiteModel& model, const Tensor& x) {
  const Tensor f = infer(model, x).features;
  const std::size_t n = f.dim(0), c = f.dim(1), t = f.dim(2);
  std::vector<std::vector<double>> rows(n, std::vector<double>(c));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < c; ++k) {
      double s = 0.0;
      for (std::size_t u = 0; u < t; ++u) s += f.at(i, k, u);
      rows[i][k] = s / static_cast<double>(t);
    }
  }
  return rows;
}

FeatureStats feature_statistics(const LiteModel& model, const Tensor& x, std::string model_id) {
  if (x.rank() != 3 || x.dim(0) < 2) throw UsageError("feature_statistics needs at least two samples");
  return feature_statistics(pooled_features(model, x), std::move(model_id));
}

namespace {

Eigen::MatrixXd to_matrix(const FeatureStats& s) {
  Eigen::MatrixXd m(s.dim, s.dim);
  for (std::size_t i = 0; i < s.dim; ++i) {
    for (std::size_t j = 0; j < s.dim; ++j) {
      const double v = s.cov(i, j);
      if (std::fabs(v - s.cov(j, i)) > 1e-9) {
        throw InputError("fid: covariance of '" + s.model_id + "' is not symmetric");
      }
      m(static_cast<long>(i), static_cast<long>(j)) = v;
    }
  }
  return 0.5 * (m + m.transpose());
}

Eigen::VectorXd clamped_eigenvalues(const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>& es) {
  Eigen::VectorXd ev = es.eigenvalues();
  for (long i = 0; i < ev.size(); ++i) {
    if (ev(i) < 1e-10) ev(i) = 0.0;
  }
  return ev;
}

}  // namespace

double fid(const FeatureStats& a, const FeatureStats& b) {
  if (a.dim != b.dim || a.mu.size() != a.dim || b.mu.size() != b.dim ||
      a.sigma.size() != a.dim * a.dim || b.sigma.size() != b.dim * b.dim) {
    throw DimensionError("fid: feature dimensions differ");
  }
  const Eigen::MatrixXd sa = to_matrix(a);
  const Eigen::MatrixXd sb = to_matrix(b);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ea(sa);
  const Eigen::VectorXd la = clamped_eigenvalues(ea);
  const Eigen::MatrixXd root_a =
      ea.eigenvectors() * la.cwiseSqrt().asDiagonal() * ea.eigenvectors().transpose();
  // sqrt(Sa) Sb sqrt(Sa) is symmetric and shares its spectrum with Sa Sb.
  Eigen::MatrixXd inner = root_a * sb * root_a;
  inner = 0.5 * (inner + inner.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ei(inner, Eigen::EigenvaluesOnly);
  const double trace_root = clamped_eigenvalues(ei).cwiseSqrt().sum();

  double mean_term = 0.0;
  for (std::size_t i = 0; i < a.dim; ++i) {
    const double d = a.mu[i] - b.mu[i];
    mean_term += d * d;
  }
  double value = mean_term + sa.trace() + sb.trace() - 2.0 * trace_root;
  if (value < 0.0 && value >= -1e-8) value = 0.0;
  return value;
}

double dtw(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw UsageError("dtw: empty series");
  const std::size_t m = b.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> prev(m + 1, inf), cur(m + 1, inf);
  prev[0] = 0.0;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = inf;
    for (std::size_t j = 1; j <= m; ++j) {
      const double d = a[i - 1] - b[j - 1];
      cur[j] = d * d + std::min({prev[j - 1], prev[j], cur[j - 1]});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

std::string FilterDistanceMatrix::to_csv() const {
  std::ostringstream os;
  os << "label";
  for (const auto& [m, f] : labels) os << ',' << m << ':' << f;
  os << '\n';
  const std::size_t n = size();
  for (std::size_t i = 0; i < n; ++i) {
    os << labels[i].first << ':' << labels[i].second;
    for (std::size_t j = 0; j < n; ++j) os << ',' << format_double(d[i * n + j]);
    os << '\n';
  }
  return os.str();
}

FilterDistanceMatrix filter_distance_matrix(std::span<const LiteModel> models) {
  if (models.empty()) throw UsageError("filter_distance_matrix: no models");
  std::vector<FinalFilterBank> banks;
  for (const auto& m : models) banks.push_back(extract_final_filters(m));
  for (const auto& b : banks) {
    if (b.channels != banks.front().channels || b.kernel_length != banks.front().kernel_length) {
      throw ConfigError("filter_distance_matrix: filter banks differ in shape (" +
                        std::to_string(b.channels) + "x" + std::to_string(b.kernel_length) +
                        " vs " + std::to_string(banks.front().channels) + "x" +
                        std::to_string(banks.front().kernel_length) + ")");
    }
  }
  FilterDistanceMatrix out;
  std::vector<std::span<const double>> rows;
  for (std::size_t m = 0; m < banks.size(); ++m) {
    const std::size_t len = banks[m].kernel_length;
    for (std::size_t f = 0; f < banks[m].channels; ++f) {
      out.labels.emplace_back(m, f);
      rows.push_back(banks[m].filters.data().subspan(f * len, len));
    }
  }
  const std::size_t n = out.labels.size();
  out.d.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      out.d[i * n + j] = out.d[j * n + i] = dtw(rows[i], rows[j]);
    }
  }
  return out;
}

std::string Embedding2D::to_csv(
    const std::vector<std::pair<std::size_t, std::size_t>>& labels) const {
  std::ostringstream os;
  os << "label,x,y\n";
  for (std::size_t i = 0; i < coords.size(); ++i) {
    if (i < labels.size()) os << labels[i].first << ':' << labels[i].second;
    else os << i;
    os << ',' << format_double(coords[i][0]) << ',' << format_double(coords[i][1]) << '\n';
  }
  return os.str();
}

Embedding2D embed_2d(std::size_t n, std::span<const double> distances) {
  if (n < 3) throw UsageError("embed_2d needs at least three points");
  if (distances.size() != n * n) throw DimensionError("embed_2d: distance matrix is not n x n");
  Embedding2D out;
  out.coords.assign(n, {0.0, 0.0});
  bool all_zero = true;
  Eigen::MatrixXd sq(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double v = distances[i * n + j];
      if (!std::isfinite(v) || v < 0.0) throw InputError("embed_2d: invalid distance");
      if (std::fabs(v - distances[j * n + i]) > 1e-9) {
        throw InputError("embed_2d: distance matrix is not symmetric");
      }
      if (v != 0.0) all_zero = false;
      sq(static_cast<long>(i), static_cast<long>(j)) = v * v;
    }
  }
  if (all_zero) {
    out.degenerate = true;
    return out;
  }
  const long ln = static_cast<long>(n);
  const Eigen::MatrixXd centering =
      Eigen::MatrixXd::Identity(ln, ln) - Eigen::MatrixXd::Constant(ln, ln, 1.0 / static_cast<double>(n));
  Eigen::MatrixXd gram = -0.5 * centering * sq * centering;
  gram = 0.5 * (gram + gram.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  for (int axis = 0; axis < 2; ++axis) {
    const long col = ln - 1 - axis;
    const double lambda = std::max(0.0, es.eigenvalues()(col));
    Eigen::VectorXd v = es.eigenvectors().col(col) * std::sqrt(lambda);
    for (long i = 0; i < ln; ++i) {
      if (std::fabs(v(i)) > 1e-12) {
        if (v(i) < 0.0) v = -v;
        break;
      }
    }
    for (std::size_t i = 0; i < n; ++i) out.coords[i][static_cast<std::size_t>(axis)] = v(static_cast<long>(i));
  }
  return out;
}

Embedding2D embed_2d(const FilterDistanceMatrix& matrix) {
  return embed_2d(matrix.size(), matrix.d);
}

}  // namespace deco
