#include "ssacnn/recording.hpp"

#include <array>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ssacnn/errors.hpp"

namespace ssacnn {

namespace {

constexpr std::array<char, 8> kMagic = {'S', 'S', 'A', 'E', 'E', 'G', '0', '1'};

template <typename T>
void write_le(std::ostream& os, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  // Host is little-endian on every supported target; plain memcpy.
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  os.write(buf, sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
  char buf[sizeof(T)];
  is.read(buf, sizeof(T));
  if (!is) throw ParseError("raw-f64: truncated header");
  T value;
  std::memcpy(&value, buf, sizeof(T));
  return value;
}

double parse_double(std::string_view token, const std::string& context) {
  double value = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last)
    throw ParseError("csv: bad number '" + std::string(token) + "' in " + context);
  return value;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    // trim surrounding whitespace
    const auto begin = field.find_first_not_of(" \t\r");
    const auto end = field.find_last_not_of(" \t\r");
    out.push_back(begin == std::string::npos ? std::string()
                                             : field.substr(begin, end - begin + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

Recording load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line) || line.empty())
    throw ParseError("csv: missing header row in " + path.string());
  const std::vector<std::string> names = split_csv_line(line);
  const std::size_t c = names.size();
  if (c == 0) throw ParseError("csv: empty header in " + path.string());
  for (const auto& name : names)
    if (name.empty()) throw ParseError("csv: empty channel name in " + path.string());

  std::vector<std::vector<double>> columns(c);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != c) {
      std::ostringstream msg;
      msg << "csv: row " << row + 1 << " has " << fields.size() << " values, expected "
          << c;
      throw ShapeError(msg.str());
    }
    for (std::size_t i = 0; i < c; ++i)
      columns[i].push_back(parse_double(fields[i], "row " + std::to_string(row + 1)));
    ++row;
  }

  Recording rec;
  rec.channel_names = names;
  rec.channels.resize(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(row));
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t t = 0; t < row; ++t)
      rec.channels(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) =
          columns[i][t];
  rec.subject_id = path.stem().string();
  return rec;
}

void save_csv(const Recording& rec, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  const Eigen::Index c = rec.channel_count();
  for (Eigen::Index i = 0; i < c; ++i) {
    if (i) out << ',';
    if (static_cast<std::size_t>(c) == rec.channel_names.size())
      out << rec.channel_names[static_cast<std::size_t>(i)];
    else
      out << "ch" << i;
  }
  out << '\n';
  char buf[64];
  for (Eigen::Index t = 0; t < rec.sample_count(); ++t) {
    for (Eigen::Index i = 0; i < c; ++i) {
      const int len = std::snprintf(buf, sizeof buf, "%.17g", rec.channels(i, t));
      if (i) out << ',';
      out.write(buf, len);
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

Recording load_raw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());

  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw ParseError("raw-f64: bad magic in " + path.string());

  const auto c = read_le<std::uint32_t>(in);
  const auto n = read_le<std::uint64_t>(in);
  const auto fs = read_le<double>(in);
  (void)read_le<std::uint32_t>(in);  // reserved

  Recording rec;
  rec.fs = fs;
  rec.channels.resize(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(n));
  std::vector<double> row(n);
  for (std::uint32_t i = 0; i < c; ++i) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw ParseError("raw-f64: truncated payload in " + path.string());
    for (std::uint64_t t = 0; t < n; ++t)
      rec.channels(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = row[t];
  }
  rec.subject_id = path.stem().string();
  return rec;
}

void save_raw(const Recording& rec, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kMagic.data(), kMagic.size());
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(rec.channel_count()));
  write_le<std::uint64_t>(out, static_cast<std::uint64_t>(rec.sample_count()));
  write_le<double>(out, rec.fs);
  write_le<std::uint32_t>(out, 0);
  std::vector<double> row(static_cast<std::size_t>(rec.sample_count()));
  for (Eigen::Index i = 0; i < rec.channel_count(); ++i) {
    for (Eigen::Index t = 0; t < rec.sample_count(); ++t)
      row[static_cast<std::size_t>(t)] = rec.channels(i, t);
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(double)));
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

std::string to_string(ClassLabel label) {
  switch (label) {
    case ClassLabel::Control:
      return "control";
    case ClassLabel::Dyslexic:
      return "dyslexic";
    default:
      return "unknown";
  }
}

ClassLabel label_from_string(const std::string& s) {
  if (s == "control") return ClassLabel::Control;
  if (s == "dyslexic") return ClassLabel::Dyslexic;
  if (s == "unknown") return ClassLabel::Unknown;
  throw ParseError("unknown class label '" + s + "'");
}

void Recording::validate() const {
  if (channel_count() < 1) throw ShapeError("recording needs at least one channel");
  if (sample_count() < 2) throw ShapeError("recording needs at least two samples");
  if (!(fs > 0.0)) throw SpecError("sampling rate must be positive");
  if (!channel_names.empty() &&
      channel_names.size() != static_cast<std::size_t>(channel_count()))
    throw ShapeError("channel_names size does not match channel count");
}

void BandPassSpec::validate(double fs) const {
  if (order < 1) throw SpecError("filter order must be positive");
  if (!(low_hz > 0.0) || !(low_hz < high_hz))
    throw SpecError("band edges must satisfy 0 < low < high");
  if (!(high_hz < fs / 2.0))
    throw NyquistError("high edge must be below the Nyquist frequency fs/2");
}

Recording load_recording(const std::filesystem::path& path, RecordingFormat format) {
  return format == RecordingFormat::Csv ? load_csv(path) : load_raw(path);
}

void save_recording(const Recording& rec, const std::filesystem::path& path,
                    RecordingFormat format) {
  if (format == RecordingFormat::Csv)
    save_csv(rec, path);
  else
    save_raw(rec, path);
}

Eigen::MatrixXd load_matrix_f64(const std::filesystem::path& path) {
  return load_raw(path).channels;
}

void save_matrix_f64(const Eigen::MatrixXd& m, const std::filesystem::path& path) {
  Recording wrapper;
  wrapper.channels = m;
  wrapper.fs = 0.0;
  save_raw(wrapper, path);
}

}  // namespace ssacnn
