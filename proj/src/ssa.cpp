#include "ssacnn/ssa.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "ssacnn/errors.hpp"
#include "ssacnn/parallel.hpp"
#include "ssacnn/recording.hpp"

namespace ssacnn {

void SsaConfig::validate(Eigen::Index n_samples) const {
  if (window_length < 2) throw SpecError("ssa window_length must be >= 2");
  if (2 * static_cast<Eigen::Index>(window_length) > n_samples)
    throw WindowTooLarge("ssa needs N >= 2L (N=" + std::to_string(n_samples) +
                         ", L=" + std::to_string(window_length) + ")");
  if (n_components < 1 || n_components > window_length)
    throw SpecError("ssa n_components must lie in [1, L]");
}

void ComponentGrouping::validate(int n_components) const {
  std::vector<bool> seen(static_cast<std::size_t>(n_components), false);
  std::size_t total = 0;
  for (const auto& g : groups) {
    for (int idx : g) {
      if (idx < 0 || idx >= n_components)
        throw SpecError("grouping index out of range");
      if (seen[static_cast<std::size_t>(idx)])
        throw SpecError("grouping assigns component " + std::to_string(idx) + " twice");
      seen[static_cast<std::size_t>(idx)] = true;
      ++total;
    }
  }
  if (total != static_cast<std::size_t>(n_components))
    throw SpecError("grouping is not exhaustive");
  if (groups.empty()) throw SpecError("grouping needs at least one group");
}

namespace {

// SSA diagonal-averaging weights: multiplicity of time index t among the
// anti-diagonals of the K x L trajectory matrix.
double traj_weight(Eigen::Index t, Eigen::Index l, Eigen::Index k, Eigen::Index n) {
  return static_cast<double>(std::min({t + 1, l, k, n - t}));
}

}  // namespace

SsaDecomposition ssa_decompose(const Eigen::VectorXd& x, const SsaConfig& cfg) {
  const Eigen::Index n = x.size();
  cfg.validate(n);
  if (!x.allFinite()) throw NumericError("ssa input contains non-finite samples");

  const Eigen::Index l = cfg.window_length;
  const Eigen::Index k = n - l + 1;
  const Eigen::Index nc = cfg.n_components;

  // Trajectory matrix, one lagged window per row.
  Eigen::MatrixXd traj(k, l);
  for (Eigen::Index j = 0; j < l; ++j) traj.col(j) = x.segment(j, k);

  // Symmetric lag-covariance estimator C = (1/K) X^T X.
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(l, l);
  cov.selfadjointView<Eigen::Lower>().rankUpdate(traj.transpose(),
                                                 1.0 / static_cast<double>(k));

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success)
    throw NumericError("lag-covariance eigendecomposition failed");

  // Eigen returns ascending order; flip to descending.
  SsaDecomposition d;
  d.window_length = static_cast<int>(l);
  d.original_length = n;
  d.eigenvalues = eig.eigenvalues().reverse();
  d.eofs.resize(l, nc);
  for (Eigen::Index c = 0; c < nc; ++c) d.eofs.col(c) = eig.eigenvectors().col(l - 1 - c);

  // Principal components: projections of each lagged window onto the EOFs.
  const Eigen::MatrixXd proj = traj * d.eofs;  // K x nc

  // Hankelization: y_k(t) = (1/w_t) sum_{i+j=t} proj(i,k) eof(j,k).
  d.components.resize(nc, n);
  for (Eigen::Index c = 0; c < nc; ++c) {
    const auto a = proj.col(c);
    const auto e = d.eofs.col(c);
    for (Eigen::Index t = 0; t < n; ++t) {
      const Eigen::Index j_lo = std::max<Eigen::Index>(0, t - k + 1);
      const Eigen::Index j_hi = std::min<Eigen::Index>(l - 1, t);
      double acc = 0.0;
      for (Eigen::Index j = j_lo; j <= j_hi; ++j) acc += a[t - j] * e[j];
      d.components(c, t) = acc / traj_weight(t, l, k, n);
    }
  }
  return d;
}

namespace {

template <typename Loop>
std::vector<SsaDecomposition> batch_impl(std::span<const Eigen::VectorXd> xs,
                                         const SsaConfig& cfg, Loop&& loop) {
  std::vector<SsaDecomposition> out(xs.size());
  loop(static_cast<std::int64_t>(xs.size()), [&](std::int64_t i) {
    out[static_cast<std::size_t>(i)] = ssa_decompose(xs[static_cast<std::size_t>(i)], cfg);
  });
  return out;
}

}  // namespace

std::vector<SsaDecomposition> ssa_decompose_batch(std::span<const Eigen::VectorXd> xs,
                                                  const SsaConfig& cfg) {
  return batch_impl(xs, cfg, [](std::int64_t n, auto&& fn) { parallel_for(n, fn); });
}

std::vector<SsaDecomposition> ssa_decompose_batch_serial(
    std::span<const Eigen::VectorXd> xs, const SsaConfig& cfg) {
  return batch_impl(xs, cfg, [](std::int64_t n, auto&& fn) { serial_for(n, fn); });
}

Eigen::VectorXd variance_explained(const SsaDecomposition& d) {
  const double total = d.eigenvalues.sum();
  if (!(d.eigenvalues.maxCoeff() > 0.0) || !(total > 0.0))
    throw DegenerateSpectrum("all eigenvalues are zero");
  return d.eigenvalues.head(d.retained()) / total;
}

WCorrelationMatrix w_correlation(const SsaDecomposition& d) {
  const int nc = d.retained();
  if (nc < 2) throw SpecError("w_correlation needs at least 2 components");
  const Eigen::Index n = d.original_length;
  const Eigen::Index l = d.window_length;
  const Eigen::Index k = n - l + 1;

  Eigen::VectorXd sqrt_w(n);
  for (Eigen::Index t = 0; t < n; ++t) sqrt_w[t] = std::sqrt(traj_weight(t, l, k, n));

  const Eigen::MatrixXd scaled = d.components.array().rowwise() * sqrt_w.transpose().array();
  Eigen::MatrixXd gram = scaled * scaled.transpose();

  WCorrelationMatrix w;
  w.values.resize(nc, nc);
  Eigen::VectorXd norms(nc);
  for (int i = 0; i < nc; ++i) norms[i] = std::sqrt(std::max(gram(i, i), 0.0));
  for (int i = 0; i < nc; ++i) {
    w.values(i, i) = 1.0;
    for (int j = i + 1; j < nc; ++j) {
      double v = 0.0;
      if (norms[i] > 0.0 && norms[j] > 0.0) {
        v = gram(i, j) / (norms[i] * norms[j]);
        v = std::clamp(v, -1.0, 1.0);
      } else {
        w.has_zero_norm_component = true;
      }
      w.values(i, j) = v;
      w.values(j, i) = v;
    }
  }
  return w;
}

ComponentGrouping group_components(const WCorrelationMatrix& w,
                                   const Eigen::VectorXd& component_weights, int g) {
  const int n = static_cast<int>(w.values.rows());
  if (g < 1 || g > n)
    throw InvalidGroupCount("group count " + std::to_string(g) +
                            " outside [1, " + std::to_string(n) + "]");
  if (component_weights.size() < n)
    throw SpecError("component weight vector shorter than w-correlation matrix");

  // Average-linkage agglomeration on 1 - |w|. Clusters keyed by their lowest
  // member index so tie-breaking is stable.
  std::vector<std::vector<int>> clusters(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) clusters[static_cast<std::size_t>(i)] = {i};
  Eigen::MatrixXd dist(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) dist(i, j) = 1.0 - std::abs(w.values(i, j));
  std::vector<bool> active(static_cast<std::size_t>(n), true);

  for (int live = n; live > g; --live) {
    double best = std::numeric_limits<double>::infinity();
    int bi = -1, bj = -1;
    for (int i = 0; i < n; ++i) {
      if (!active[static_cast<std::size_t>(i)]) continue;
      for (int j = i + 1; j < n; ++j) {
        if (!active[static_cast<std::size_t>(j)]) continue;
        if (dist(i, j) < best) {
          best = dist(i, j);
          bi = i;
          bj = j;
        }
      }
    }
    const double si = static_cast<double>(clusters[static_cast<std::size_t>(bi)].size());
    const double sj = static_cast<double>(clusters[static_cast<std::size_t>(bj)].size());
    for (int m = 0; m < n; ++m) {
      if (!active[static_cast<std::size_t>(m)] || m == bi || m == bj) continue;
      const double v = (si * dist(bi, m) + sj * dist(bj, m)) / (si + sj);
      dist(bi, m) = v;
      dist(m, bi) = v;
    }
    auto& dst = clusters[static_cast<std::size_t>(bi)];
    auto& src = clusters[static_cast<std::size_t>(bj)];
    dst.insert(dst.end(), src.begin(), src.end());
    src.clear();
    active[static_cast<std::size_t>(bj)] = false;
  }

  ComponentGrouping grouping;
  for (int i = 0; i < n; ++i) {
    if (!active[static_cast<std::size_t>(i)]) continue;
    auto members = clusters[static_cast<std::size_t>(i)];
    std::sort(members.begin(), members.end());
    grouping.groups.push_back(std::move(members));
  }
  // Order groups by descending summed eigenvalue; ties by lowest member.
  std::stable_sort(grouping.groups.begin(), grouping.groups.end(),
                   [&](const std::vector<int>& a, const std::vector<int>& b) {
                     double wa = 0.0, wb = 0.0;
                     for (int i : a) wa += component_weights[i];
                     for (int i : b) wb += component_weights[i];
                     if (wa != wb) return wa > wb;
                     return a.front() < b.front();
                   });
  grouping.validate(n);
  return grouping;
}

ComponentGrouping group_components(const WCorrelationMatrix& w,
                                   const SsaDecomposition& d, int g) {
  return group_components(w, d.eigenvalues, g);
}

std::vector<Eigen::VectorXd> merge_groups(const SsaDecomposition& d,
                                          const ComponentGrouping& grouping) {
  grouping.validate(d.retained());
  std::vector<Eigen::VectorXd> out;
  out.reserve(grouping.groups.size());
  for (const auto& g : grouping.groups) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(d.original_length);
    for (int idx : g) sum += d.components.row(idx).transpose();
    out.push_back(std::move(sum));
  }
  return out;
}

void save_decomposition(const SsaDecomposition& d, const ComponentGrouping& grouping,
                        const std::filesystem::path& data_path,
                        const std::filesystem::path& sidecar_path) {
  save_matrix_f64(d.components, data_path);

  nlohmann::json meta;
  meta["L"] = d.window_length;
  meta["n_components"] = d.retained();
  meta["original_length"] = d.original_length;
  meta["eigenvalues"] = std::vector<double>(d.eigenvalues.data(),
                                            d.eigenvalues.data() + d.eigenvalues.size());
  meta["grouping"] = grouping.groups;

  std::ofstream out(sidecar_path);
  if (!out) throw IoError("cannot write " + sidecar_path.string());
  out << meta.dump(2) << '\n';
}

std::pair<SsaDecomposition, ComponentGrouping> load_decomposition(
    const std::filesystem::path& data_path, const std::filesystem::path& sidecar_path) {
  std::ifstream in(sidecar_path);
  if (!in) throw IoError("cannot open " + sidecar_path.string());
  nlohmann::json meta;
  try {
    in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("bad decomposition sidecar: " + std::string(e.what()));
  }

  SsaDecomposition d;
  d.components = load_matrix_f64(data_path);
  d.window_length = meta.at("L").get<int>();
  d.original_length = meta.at("original_length").get<Eigen::Index>();
  const auto eigenvalues = meta.at("eigenvalues").get<std::vector<double>>();
  d.eigenvalues = Eigen::Map<const Eigen::VectorXd>(
      eigenvalues.data(), static_cast<Eigen::Index>(eigenvalues.size()));

  ComponentGrouping grouping;
  grouping.groups = meta.at("grouping").get<std::vector<std::vector<int>>>();
  grouping.validate(d.retained());
  return {std::move(d), std::move(grouping)};
}

}  // namespace ssacnn
