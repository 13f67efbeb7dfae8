#pragma once
// Result files for the experiment harness.
//
// A result set is a list of records (series, index, value) plus a metadata
// block and a JSON echo of the configuration that produced it.
//
// JSON layout:
//   {"metadata": {"tool": "topolms", "version": ..., "git": ..., "mode": ...,
//                 "seed": ...},
//    "config": {...},
//    "records": [{"series": ..., "index": ..., "value": ...}, ...]}
// Non-finite values are written as null and read back as NaN.
//
// CSV layout: metadata lines "# key: value" (the config echo on one line as
// "# config: {...}"), then the fixed header "series,index,value" and one row
// per record. Values use 17 significant digits.
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace topolms {

enum class ResultFormat { kJson, kCsv };

struct ResultRecord {
  std::string series;
  long index = 0;
  double value = 0.0;
};

struct RunMetadata {
  std::string mode;
  std::uint64_t seed = 0;
  std::string version;  // library version, filled by make_metadata
  std::string git;      // `git describe` of the source tree at build time
};

struct ResultSet {
  RunMetadata metadata;
  nlohmann::json config = nlohmann::json::object();
  std::vector<ResultRecord> records;

  void add(const std::string& series, long index, double value) {
    records.push_back({series, index, value});
  }
  // One record per element, indices 0..n-1 (or `indices` when given).
  void add_series(const std::string& series, const std::vector<double>& values);
  void add_series(const std::string& series, const std::vector<long>& indices,
                  const std::vector<double>& values);
};

std::string library_version();
RunMetadata make_metadata(const std::string& mode, std::uint64_t seed);

// Fixed CSV column order.
inline constexpr const char* kResultCsvHeader = "series,index,value";

nlohmann::json results_to_json(const ResultSet& results);
ResultSet results_from_json(const nlohmann::json& doc);
void write_results_csv(std::ostream& out, const ResultSet& results);
ResultSet read_results_csv(std::istream& in);

// Writes to `path`, throwing IoError when the file cannot be written.
void emit_results(const ResultSet& results, const std::string& path, ResultFormat format);
// Format from the extension: ".csv" selects CSV, anything else JSON.
ResultFormat format_for_path(const std::string& path);

}  // namespace topolms
