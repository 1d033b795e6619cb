#include "ssacnn/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "ssacnn/errors.hpp"

namespace ssacnn {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Field {
  std::string key;  // "section.name"
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const std::string&)> set;
};

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size())
    throw SpecError("config: bad number for " + key + ": '" + v + "'");
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size())
    throw SpecError("config: bad integer for " + key + ": '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw SpecError("config: bad boolean for " + key + ": '" + v + "'");
}

#define DOUBLE_FIELD(key, member)                                            \
  Field {                                                                    \
    key, [](const PipelineConfig& c) { return fmt_double(c.member); },       \
        [](PipelineConfig& c, const std::string& v) {                        \
          c.member = to_double(key, v);                                      \
        }                                                                    \
  }
#define INT_FIELD(key, member)                                               \
  Field {                                                                    \
    key, [](const PipelineConfig& c) { return std::to_string(c.member); },   \
        [](PipelineConfig& c, const std::string& v) {                        \
          c.member = static_cast<int>(to_int(key, v));                       \
        }                                                                    \
  }
#define U64_FIELD(key, member)                                               \
  Field {                                                                    \
    key, [](const PipelineConfig& c) { return std::to_string(c.member); },   \
        [](PipelineConfig& c, const std::string& v) {                        \
          c.member = static_cast<std::uint64_t>(to_int(key, v));             \
        }                                                                    \
  }
#define BOOL_FIELD(key, member)                                              \
  Field {                                                                    \
    key, [](const PipelineConfig& c) { return c.member ? "true" : "false"; },\
        [](PipelineConfig& c, const std::string& v) {                        \
          c.member = to_bool(key, v);                                        \
        }                                                                    \
  }

const std::vector<Field>& schema() {
  static const std::vector<Field> fields = {
      DOUBLE_FIELD("signal.fs", fs),
      DOUBLE_FIELD("signal.band_low_hz", band_low_hz),
      DOUBLE_FIELD("signal.band_high_hz", band_high_hz),
      INT_FIELD("signal.filter_order", filter_order),
      DOUBLE_FIELD("signal.segment_seconds", segment_seconds),
      DOUBLE_FIELD("signal.segment_overlap", segment_overlap),
      INT_FIELD("ssa.window", ssa_window),
      INT_FIELD("ssa.components", ssa_components),
      INT_FIELD("ssa.groups", groups),
      BOOL_FIELD("ssa.consensus_grouping", consensus_grouping),
      INT_FIELD("welch.nfft", welch_nfft),
      BOOL_FIELD("features.band_restrict", band_restrict),
      BOOL_FIELD("features.per_segment", per_segment),
      DOUBLE_FIELD("cnn.learning_rate", learning_rate),
      INT_FIELD("cnn.epochs", epochs),
      INT_FIELD("cnn.batch_size", batch_size),
      DOUBLE_FIELD("cnn.dropout_rate", dropout_rate),
      INT_FIELD("eval.folds", folds),
      INT_FIELD("eval.ensemble_size", ensemble_size),
      INT_FIELD("eval.sweep_min", sweep_min),
      INT_FIELD("eval.sweep_max", sweep_max),
      U64_FIELD("run.seed", seed),
      INT_FIELD("run.threads", threads),
  };
  return fields;
}

#undef DOUBLE_FIELD
#undef INT_FIELD
#undef U64_FIELD
#undef BOOL_FIELD

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void PipelineConfig::validate() const {
  if (!(fs > 0.0)) throw SpecError("signal.fs must be positive");
  if (!(band_low_hz > 0.0) || !(band_low_hz < band_high_hz))
    throw SpecError("signal band edges must satisfy 0 < low < high");
  if (!(band_high_hz < fs / 2.0))
    throw SpecError("signal.band_high_hz must be below fs/2");
  if (filter_order < 1) throw SpecError("signal.filter_order must be >= 1");
  if (!(segment_seconds * fs >= 2.0))
    throw SpecError("signal.segment_seconds too small for fs");
  if (!(segment_overlap >= 0.0 && segment_overlap < 1.0))
    throw SpecError("signal.segment_overlap must lie in [0, 1)");
  const double seg_samples = std::round(segment_seconds * fs);
  if (ssa_window < 2) throw SpecError("ssa.window must be >= 2");
  if (2.0 * ssa_window > seg_samples)
    throw SpecError("ssa.window too large: needs 2L <= segment samples");
  if (ssa_components < 1 || ssa_components > ssa_window)
    throw SpecError("ssa.components must lie in [1, ssa.window]");
  if (groups < 1 || groups > ssa_components)
    throw SpecError("ssa.groups must lie in [1, ssa.components]");
  if (welch_nfft != 0) {
    if (welch_nfft < 2 || (welch_nfft & (welch_nfft - 1)) != 0)
      throw SpecError("welch.nfft must be 0 or a power of two");
    if (welch_nfft < seg_samples)
      throw SpecError("welch.nfft must cover the segment length");
  }
  if (!(learning_rate >= 0.0)) throw SpecError("cnn.learning_rate must be >= 0");
  if (epochs < 0) throw SpecError("cnn.epochs must be >= 0");
  if (batch_size < 1) throw SpecError("cnn.batch_size must be >= 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw SpecError("cnn.dropout_rate must lie in [0, 1)");
  if (folds < 2) throw SpecError("eval.folds must be >= 2");
  if (ensemble_size < 1 || ensemble_size > groups)
    throw SpecError("eval.ensemble_size must lie in [1, ssa.groups]");
  if (sweep_min < 1 || sweep_max < sweep_min || sweep_max > groups)
    throw SpecError("eval.sweep range must lie within [1, ssa.groups]");
  if (threads < 0) throw SpecError("run.threads must be >= 0");
}

std::string PipelineConfig::canonical() const {
  std::ostringstream out;
  for (const auto& f : schema()) out << f.key << '=' << f.get(*this) << '\n';
  return out.str();
}

std::uint64_t PipelineConfig::hash() const {
  const std::string text = canonical();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string PipelineConfig::hash_hex() const {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash()));
  return buf;
}

PipelineConfig parse_config(const std::string& text) {
  PipelineConfig cfg;
  std::map<std::string, const Field*> by_key;
  for (const auto& f : schema()) by_key[f.key] = &f;

  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line.resize(hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw SpecError("config line " + std::to_string(lineno) + ": bad section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw SpecError("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (!value.empty() && value.front() == '"' && value.back() == '"' && value.size() >= 2)
      value = value.substr(1, value.size() - 2);
    const std::string full = section.empty() ? key : section + "." + key;
    const auto it = by_key.find(full);
    if (it == by_key.end())
      throw SpecError("config line " + std::to_string(lineno) + ": unknown key '" +
                      full + "'");
    it->second->set(cfg, value);
  }
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void save_config(const PipelineConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config " + path.string());
  std::string last_section;
  for (const auto& f : schema()) {
    const auto dot = f.key.find('.');
    const std::string section = f.key.substr(0, dot);
    const std::string name = f.key.substr(dot + 1);
    if (section != last_section) {
      if (!last_section.empty()) out << '\n';
      out << '[' << section << "]\n";
      last_section = section;
    }
    out << name << " = " << f.get(cfg) << '\n';
  }
}

}  // namespace ssacnn
