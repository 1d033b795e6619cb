#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <span>
#include <string>

#include "ssacnn/ensemble.hpp"
#include "ssacnn/ssa.hpp"

namespace ssacnn {

// All emitters render floats with %.17g and fixed row order, so identical
// inputs give identical bytes.

std::string eval_report_to_json(const EvalReport& report, int ensemble_size,
                                const std::string& config_hash);

// One row per fold: fold,tp,tn,fp,fn,accuracy,sensitivity,specificity.
std::string folds_to_csv(const EvalReport& report);

// One row per (ensemble size, fold).
std::string sweep_to_csv(std::span<const SweepPoint> points);
std::string sweep_to_json(std::span<const SweepPoint> points, const std::string& config_hash);

// component,eigenvalue,fraction,cumulative over the retained components.
std::string variance_to_csv(const SsaDecomposition& d);
// group,members,fraction for a grouping of the same decomposition.
std::string grouped_variance_to_csv(const SsaDecomposition& d,
                                    const ComponentGrouping& grouping);

std::string matrix_to_csv(const Eigen::MatrixXd& m);

// Minimal self-contained SVG renderers for the figure analogues.
struct SvgSeries {
  std::string name;
  std::vector<double> y;
};
std::string svg_line_plot(const std::string& title, std::span<const double> x,
                          std::span<const SvgSeries> series);
std::string svg_heatmap(const std::string& title, const Eigen::MatrixXd& values);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace ssacnn
