#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <span>
#include <vector>

namespace ssacnn {

struct SsaConfig {
  int window_length = 70;  // L, embedding dimension in samples
  int n_components = 70;   // retained components, <= L

  void validate(Eigen::Index n_samples) const;
};

// Additive decomposition of one series: components[k] is the reconstructed
// series of the k-th eigen-direction, eigenvalues hold the full spectrum of
// the L x L lag-covariance matrix in descending order.
struct SsaDecomposition {
  Eigen::MatrixXd components;   // n_components x N
  Eigen::VectorXd eigenvalues;  // L entries, nonincreasing
  Eigen::MatrixXd eofs;         // L x n_components, orthonormal columns
  int window_length = 0;        // L
  Eigen::Index original_length = 0;

  int retained() const { return static_cast<int>(components.rows()); }
};

struct WCorrelationMatrix {
  Eigen::MatrixXd values;  // n x n, symmetric, unit diagonal, entries in [-1, 1]
  bool has_zero_norm_component = false;
};

// Ordered partition of component indices (0-based); groups sorted by
// descending summed eigenvalue.
struct ComponentGrouping {
  std::vector<std::vector<int>> groups;

  int group_count() const { return static_cast<int>(groups.size()); }
  void validate(int n_components) const;
};

// Embeds x into K = N-L+1 lagged windows, eigendecomposes the L x L
// lag-covariance (1/K) X^T X, and reconstructs each retained component by
// projecting the trajectory onto its EOF and diagonal-averaging back to
// length N.
SsaDecomposition ssa_decompose(const Eigen::VectorXd& x, const SsaConfig& cfg);

// Batch decomposition over the OpenMP pool plus the serial reference; the
// two must agree bit for bit.
std::vector<SsaDecomposition> ssa_decompose_batch(std::span<const Eigen::VectorXd> xs,
                                                  const SsaConfig& cfg);
std::vector<SsaDecomposition> ssa_decompose_batch_serial(
    std::span<const Eigen::VectorXd> xs, const SsaConfig& cfg);

// Fraction of total variance per retained component: lambda_k / sum(lambda).
Eigen::VectorXd variance_explained(const SsaDecomposition& d);

// Weighted correlation between reconstructed components with the standard
// SSA weights w_t = min(t+1, L, K, N-t) (0-based t). Components with zero
// weighted norm correlate 0 with everything and set the warning flag.
WCorrelationMatrix w_correlation(const SsaDecomposition& d);

// Agglomerative average-linkage clustering on distance 1 - |w_ij|, cut at G
// clusters. Ties merge the lexicographically smallest pair. Groups come back
// ordered by descending summed weight (eigenvalue).
ComponentGrouping group_components(const WCorrelationMatrix& w,
                                   const Eigen::VectorXd& component_weights, int g);
ComponentGrouping group_components(const WCorrelationMatrix& w,
                                   const SsaDecomposition& d, int g);

// Elementwise sum of each group's component rows.
std::vector<Eigen::VectorXd> merge_groups(const SsaDecomposition& d,
                                          const ComponentGrouping& grouping);

// components -> raw-f64 container, metadata -> JSON sidecar
// {L, n_components, eigenvalues, grouping}.
void save_decomposition(const SsaDecomposition& d, const ComponentGrouping& grouping,
                        const std::filesystem::path& data_path,
                        const std::filesystem::path& sidecar_path);
std::pair<SsaDecomposition, ComponentGrouping> load_decomposition(
    const std::filesystem::path& data_path, const std::filesystem::path& sidecar_path);

}  // namespace ssacnn
