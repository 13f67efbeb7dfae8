#include "topolms/results.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "topolms/error.hpp"

namespace topolms {

using nlohmann::json;

void ResultSet::add_series(const std::string& series, const std::vector<double>& values) {
  for (std::size_t i = 0; i < values.size(); ++i) add(series, static_cast<long>(i), values[i]);
}

void ResultSet::add_series(const std::string& series, const std::vector<long>& indices,
                           const std::vector<double>& values) {
  if (indices.size() != values.size()) {
    throw DimensionError("add_series: index and value counts differ");
  }
  for (std::size_t i = 0; i < values.size(); ++i) add(series, indices[i], values[i]);
}

std::string library_version() { return TOPOLMS_VERSION; }

RunMetadata make_metadata(const std::string& mode, std::uint64_t seed) {
  return {mode, seed, TOPOLMS_VERSION, TOPOLMS_GIT_DESCRIBE};
}

namespace {

json metadata_json(const RunMetadata& m) {
  return {{"tool", "topolms"}, {"version", m.version}, {"git", m.git},
          {"mode", m.mode},    {"seed", m.seed}};
}

std::string format_value(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  return ss.str();
}

double parse_value(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument(s);
  return v;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

json results_to_json(const ResultSet& results) {
  json records = json::array();
  for (const auto& r : results.records) {
    json value = std::isfinite(r.value) ? json(r.value) : json(nullptr);
    records.push_back({{"series", r.series}, {"index", r.index}, {"value", value}});
  }
  return {{"metadata", metadata_json(results.metadata)},
          {"config", results.config},
          {"records", records}};
}

ResultSet results_from_json(const json& doc) {
  try {
    ResultSet out;
    const auto& m = doc.at("metadata");
    out.metadata.mode = m.at("mode").get<std::string>();
    out.metadata.seed = m.at("seed").get<std::uint64_t>();
    out.metadata.version = m.at("version").get<std::string>();
    out.metadata.git = m.value("git", "");
    out.config = doc.value("config", json::object());
    for (const auto& r : doc.at("records")) {
      const auto& v = r.at("value");
      out.records.push_back({r.at("series").get<std::string>(), r.at("index").get<long>(),
                             v.is_null() ? std::numeric_limits<double>::quiet_NaN()
                                         : v.get<double>()});
    }
    return out;
  } catch (const json::exception& e) {
    throw ParseError(std::string("result file: ") + e.what());
  }
}

void write_results_csv(std::ostream& out, const ResultSet& results) {
  const auto& m = results.metadata;
  out << "# tool: topolms\n";
  out << "# version: " << m.version << "\n";
  out << "# git: " << m.git << "\n";
  out << "# mode: " << m.mode << "\n";
  out << "# seed: " << m.seed << "\n";
  out << "# config: " << results.config.dump() << "\n";
  out << kResultCsvHeader << "\n";
  for (const auto& r : results.records) {
    out << csv_field(r.series) << "," << r.index << "," << format_value(r.value) << "\n";
  }
}

ResultSet read_results_csv(std::istream& in) {
  ResultSet out;
  std::string line;
  long number = 0;
  bool header = false;
  auto fail = [&](const std::string& msg) {
    throw ParseError("result csv line " + std::to_string(number) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!header) {
      if (line.rfind("# ", 0) == 0) {
        const auto colon = line.find(": ");
        if (colon == std::string::npos) continue;
        const std::string key = line.substr(2, colon - 2);
        const std::string value = line.substr(colon + 2);
        if (key == "version") out.metadata.version = value;
        else if (key == "git") out.metadata.git = value;
        else if (key == "mode") out.metadata.mode = value;
        else if (key == "seed") out.metadata.seed = std::stoull(value);
        else if (key == "config") out.config = json::parse(value, nullptr, false);
        continue;
      }
      if (line != kResultCsvHeader) fail("expected header '" + std::string(kResultCsvHeader) + "'");
      header = true;
      continue;
    }
    if (line.empty()) continue;
    std::string series;
    std::size_t pos = 0;
    if (line[0] == '"') {
      pos = 1;
      while (true) {
        if (pos >= line.size()) fail("unterminated quote");
        if (line[pos] == '"') {
          if (pos + 1 < line.size() && line[pos + 1] == '"') {
            series += '"';
            pos += 2;
            continue;
          }
          ++pos;
          break;
        }
        series += line[pos++];
      }
      if (pos >= line.size() || line[pos] != ',') fail("expected ',' after series");
      ++pos;
    } else {
      const auto comma = line.find(',');
      if (comma == std::string::npos) fail("expected 3 columns");
      series = line.substr(0, comma);
      pos = comma + 1;
    }
    const auto comma = line.find(',', pos);
    if (comma == std::string::npos) fail("expected 3 columns");
    try {
      std::size_t used = 0;
      const std::string idx = line.substr(pos, comma - pos);
      const long index = std::stol(idx, &used);
      if (used != idx.size()) fail("bad index '" + idx + "'");
      out.records.push_back({series, index, parse_value(line.substr(comma + 1))});
    } catch (const std::logic_error&) {
      fail("non-numeric cell");
    }
  }
  if (!header) fail("missing header");
  return out;
}

ResultFormat format_for_path(const std::string& path) {
  const std::string ext = ".csv";
  if (path.size() >= ext.size() && path.compare(path.size() - ext.size(), ext.size(), ext) == 0) {
    return ResultFormat::kCsv;
  }
  return ResultFormat::kJson;
}

void emit_results(const ResultSet& results, const std::string& path, ResultFormat format) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  if (format == ResultFormat::kJson) {
    out << results_to_json(results).dump(2) << "\n";
  } else {
    write_results_csv(out, results);
  }
  out.flush();
  if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace topolms
