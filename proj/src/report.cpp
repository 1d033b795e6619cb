#include "ssacnn/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ssacnn/errors.hpp"

namespace ssacnn {

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

nlohmann::json confusion_json(const Confusion& c) {
  nlohmann::json j;
  j["tp"] = c.tp;
  j["tn"] = c.tn;
  j["fp"] = c.fp;
  j["fn"] = c.fn;
  j["accuracy"] = c.accuracy();
  j["sensitivity"] = c.sensitivity();
  j["specificity"] = c.specificity();
  return j;
}

}  // namespace

std::string eval_report_to_json(const EvalReport& report, int ensemble_size,
                                const std::string& config_hash) {
  nlohmann::json j;
  j["config_hash"] = config_hash;
  j["ensemble_size"] = ensemble_size;
  j["accuracy"] = report.accuracy;
  j["sensitivity"] = report.sensitivity;
  j["specificity"] = report.specificity;
  j["confusion"] = confusion_json(report.total);
  nlohmann::json folds = nlohmann::json::array();
  for (const FoldResult& f : report.folds) {
    nlohmann::json fj = confusion_json(f.confusion);
    fj["fold"] = f.fold;
    fj["test_subjects"] = f.test_subjects;
    folds.push_back(fj);
  }
  j["folds"] = folds;
  return j.dump(2) + "\n";
}

std::string folds_to_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "fold,tp,tn,fp,fn,accuracy,sensitivity,specificity\n";
  for (const FoldResult& f : report.folds) {
    const Confusion& c = f.confusion;
    out << f.fold << ',' << c.tp << ',' << c.tn << ',' << c.fp << ',' << c.fn << ','
        << num(c.accuracy()) << ',' << num(c.sensitivity()) << ','
        << num(c.specificity()) << '\n';
  }
  return out.str();
}

std::string sweep_to_csv(std::span<const SweepPoint> points) {
  std::ostringstream out;
  out << "ensemble_size,fold,tp,tn,fp,fn,accuracy,sensitivity,specificity\n";
  for (const SweepPoint& p : points)
    for (const FoldResult& f : p.report.folds) {
      const Confusion& c = f.confusion;
      out << p.ensemble_size << ',' << f.fold << ',' << c.tp << ',' << c.tn << ','
          << c.fp << ',' << c.fn << ',' << num(c.accuracy()) << ','
          << num(c.sensitivity()) << ',' << num(c.specificity()) << '\n';
    }
  return out.str();
}

std::string sweep_to_json(std::span<const SweepPoint> points,
                          const std::string& config_hash) {
  nlohmann::json j;
  j["config_hash"] = config_hash;
  nlohmann::json arr = nlohmann::json::array();
  for (const SweepPoint& p : points) {
    nlohmann::json pj;
    pj["ensemble_size"] = p.ensemble_size;
    pj["accuracy"] = p.report.accuracy;
    pj["sensitivity"] = p.report.sensitivity;
    pj["specificity"] = p.report.specificity;
    pj["confusion"] = confusion_json(p.report.total);
    arr.push_back(pj);
  }
  j["points"] = arr;
  return j.dump(2) + "\n";
}

std::string variance_to_csv(const SsaDecomposition& d) {
  const Eigen::VectorXd fractions = variance_explained(d);
  std::ostringstream out;
  out << "component,eigenvalue,fraction,cumulative\n";
  double cum = 0.0;
  for (Eigen::Index k = 0; k < fractions.size(); ++k) {
    cum += fractions[k];
    out << k + 1 << ',' << num(d.eigenvalues[k]) << ',' << num(fractions[k]) << ','
        << num(cum) << '\n';
  }
  return out.str();
}

std::string grouped_variance_to_csv(const SsaDecomposition& d,
                                    const ComponentGrouping& grouping) {
  const Eigen::VectorXd fractions = variance_explained(d);
  std::ostringstream out;
  out << "group,members,fraction\n";
  for (std::size_t g = 0; g < grouping.groups.size(); ++g) {
    double sum = 0.0;
    std::ostringstream members;
    for (std::size_t i = 0; i < grouping.groups[g].size(); ++i) {
      const int idx = grouping.groups[g][i];
      sum += fractions[idx];
      if (i) members << ' ';
      members << idx + 1;
    }
    out << g + 1 << ',' << members.str() << ',' << num(sum) << '\n';
  }
  return out.str();
}

std::string matrix_to_csv(const Eigen::MatrixXd& m) {
  std::ostringstream out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << num(m(i, j));
    }
    out << '\n';
  }
  return out.str();
}

namespace {

constexpr int kW = 720, kH = 480, kMargin = 60;

double nice_min(double v) { return v >= 0.0 && v <= 0.05 ? 0.0 : v; }

}  // namespace

std::string svg_line_plot(const std::string& title, std::span<const double> x,
                          std::span<const SvgSeries> series) {
  if (x.empty() || series.empty()) throw SpecError("svg_line_plot: empty data");
  double ymin = series[0].y[0], ymax = ymin;
  for (const auto& s : series)
    for (double v : s.y) {
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
    }
  ymin = nice_min(ymin);
  if (ymax - ymin < 1e-12) ymax = ymin + 1.0;
  const double xmin = x.front(), xmax = x.back();
  const double xspan = xmax - xmin < 1e-12 ? 1.0 : xmax - xmin;

  auto px = [&](double v) {
    return kMargin + (v - xmin) / xspan * (kW - 2 * kMargin);
  };
  auto py = [&](double v) {
    return kH - kMargin - (v - ymin) / (ymax - ymin) * (kH - 2 * kMargin);
  };

  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\""
      << kH << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kW / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
      << title << "</text>\n";
  out << "<line x1=\"" << kMargin << "\" y1=\"" << kH - kMargin << "\" x2=\""
      << kW - kMargin << "\" y2=\"" << kH - kMargin << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << kMargin << "\" y1=\"" << kMargin << "\" x2=\"" << kMargin
      << "\" y2=\"" << kH - kMargin << "\" stroke=\"black\"/>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const double v = ymin + (ymax - ymin) * tick / 4.0;
    out << "<text x=\"" << kMargin - 8 << "\" y=\"" << py(v) + 4
        << "\" text-anchor=\"end\" font-size=\"11\">" << num(std::round(v * 1000) / 1000)
        << "</text>\n";
    const double v2 = xmin + xspan * tick / 4.0;
    out << "<text x=\"" << px(v2) << "\" y=\"" << kH - kMargin + 18
        << "\" text-anchor=\"middle\" font-size=\"11\">"
        << num(std::round(v2 * 1000) / 1000) << "</text>\n";
  }
  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    out << "<polyline fill=\"none\" stroke=\"" << kColors[si % 5]
        << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.y.size() && i < x.size(); ++i)
      out << px(x[i]) << ',' << py(s.y[i]) << ' ';
    out << "\"/>\n";
    out << "<text x=\"" << kW - kMargin + 4 << "\" y=\"" << kMargin + 16 * (si + 1)
        << "\" font-size=\"12\" fill=\"" << kColors[si % 5] << "\">" << s.name
        << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string svg_heatmap(const std::string& title, const Eigen::MatrixXd& values) {
  const Eigen::Index rows = values.rows(), cols = values.cols();
  if (rows == 0 || cols == 0) throw SpecError("svg_heatmap: empty matrix");
  const double vmax = std::max(std::abs(values.maxCoeff()), std::abs(values.minCoeff()));
  const double scale = vmax < 1e-300 ? 1.0 : vmax;
  const int cell = std::max(4, static_cast<int>(360 / std::max(rows, cols)));
  const int w = kMargin * 2 + cell * static_cast<int>(cols);
  const int h = kMargin * 2 + cell * static_cast<int>(rows);

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
      << title << "</text>\n";
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) {
      const double v = values(i, j) / scale;  // [-1, 1]
      // blue (negative) .. white (0) .. red (positive)
      const int r = static_cast<int>(std::round(255 * (v >= 0 ? 1.0 : 1.0 + v)));
      const int b = static_cast<int>(std::round(255 * (v <= 0 ? 1.0 : 1.0 - v)));
      const int g = static_cast<int>(std::round(255 * (1.0 - std::abs(v))));
      out << "<rect x=\"" << kMargin + cell * j << "\" y=\"" << kMargin + cell * i
          << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\"rgb(" << r
          << ',' << g << ',' << b << ")\"/>\n";
    }
  out << "</svg>\n";
  return out.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace ssacnn
