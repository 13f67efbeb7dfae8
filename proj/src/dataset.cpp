#include "topolms/dataset.hpp"

#include <fstream>
#include <sstream>
#include <vector>

#include "topolms/complex_io.hpp"
#include "topolms/error.hpp"
#include "topolms/rng.hpp"

namespace topolms {

void EdgeSeriesDataset::validate() const {
  if (series.cols() != complex.num_edges()) {
    throw ValidationError("series width " + std::to_string(series.cols()) +
                          " differs from the edge count " + std::to_string(complex.num_edges()));
  }
  if (train < 0 || test < 0 || train + test != series.rows()) {
    throw ValidationError("train/test split does not sum to the series length");
  }
}

void write_edge_series(std::ostream& out, const MatrixXd& series) {
  out.precision(17);
  out << 'n';
  for (Eigen::Index i = 0; i < series.cols(); ++i) out << ",e_" << i + 1;
  out << '\n';
  for (Eigen::Index n = 0; n < series.rows(); ++n) {
    out << n;
    for (Eigen::Index i = 0; i < series.cols(); ++i) out << ',' << series(n, i);
    out << '\n';
  }
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_cell(const std::string& cell, int line_no) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  while (used < cell.size() && (cell[used] == ' ' || cell[used] == '\r')) ++used;
  if (cell.empty() || used != cell.size()) {
    throw ParseError("edge series row " + std::to_string(line_no) + ": non-numeric cell '" +
                     cell + "'");
  }
  return v;
}

}  // namespace

MatrixXd read_edge_series(std::istream& in, int num_edges) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("edge series: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv(line);
  if (header.empty() || header[0] != "n") throw ParseError("edge series: header must start with n");
  const auto width = static_cast<int>(header.size()) - 1;
  for (int i = 0; i < width; ++i) {
    if (header[i + 1] != "e_" + std::to_string(i + 1)) {
      throw ParseError("edge series: header column " + std::to_string(i + 2) + " must be e_" +
                       std::to_string(i + 1));
    }
  }
  if (num_edges >= 0 && width != num_edges) {
    throw ValidationError("edge series has " + std::to_string(width) + " columns, complex has " +
                          std::to_string(num_edges) + " edges");
  }
  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (static_cast<int>(cells.size()) != width + 1) {
      throw ParseError("edge series row " + std::to_string(line_no) + ": expected " +
                       std::to_string(width + 1) + " cells, got " + std::to_string(cells.size()));
    }
    const double n = parse_cell(cells[0], line_no);
    if (n != static_cast<double>(rows.size())) {
      throw ParseError("edge series row " + std::to_string(line_no) + ": snapshot index out of order");
    }
    std::vector<double> row(width);
    for (int i = 0; i < width; ++i) row[i] = parse_cell(cells[i + 1], line_no);
    rows.push_back(std::move(row));
  }
  MatrixXd series(static_cast<Eigen::Index>(rows.size()), width);
  for (std::size_t n = 0; n < rows.size(); ++n) {
    for (int i = 0; i < width; ++i) series(static_cast<Eigen::Index>(n), i) = rows[n][i];
  }
  return series;
}

void save_edge_series(const std::string& path, const MatrixXd& series) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_edge_series(out, series);
  if (!out) throw IoError("failed writing " + path);
}

EdgeSeriesDataset ingest_edge_series(const std::string& complex_path,
                                     const std::string& series_path, int train) {
  EdgeSeriesDataset ds;
  ds.complex = load_complex(complex_path);
  std::ifstream in(series_path);
  if (!in) throw IoError("cannot open " + series_path);
  ds.series = read_edge_series(in, ds.complex.num_edges());
  const auto n = static_cast<int>(ds.series.rows());
  ds.train = train >= 0 ? train : std::max(0, n - std::min(38, std::max(1, n - 1)));
  ds.test = n - ds.train;
  ds.validate();
  return ds;
}

MatrixXd generate_ar_series(const HodgeOperators& ops, const ArSurrogateOptions& options) {
  const auto order = static_cast<int>(options.upper.size());
  if (options.lower.size() != order) throw DimensionError("AR surrogate: tap vectors differ");
  if (options.snapshots <= 0 || options.burn_in < 0) {
    throw ValidationError("AR surrogate: invalid lengths");
  }
  if (options.upper.cwiseAbs().sum() >= 1.0 || options.lower.cwiseAbs().sum() >= 1.0) {
    throw ValidationError("AR surrogate: tap magnitudes must sum below one");
  }
  const Eigen::Index e = ops.num_edges();
  const double top_u = lambda_max_sym(ops.upper);
  const double top_d = lambda_max_sym(ops.lower);
  const MatrixXd su = top_u > 0.0 ? MatrixXd(ops.upper / top_u) : MatrixXd(ops.upper);
  const MatrixXd sd = top_d > 0.0 ? MatrixXd(ops.lower / top_d) : MatrixXd(ops.lower);
  Rng rng(derive_seed(options.seed, 3));
  std::vector<VectorXd> past(order, VectorXd::Zero(e));  // past[m-1] = x(n-m)
  MatrixXd series(options.snapshots, e);
  const int total = options.burn_in + options.snapshots;
  for (int n = 0; n < total; ++n) {
    VectorXd x(e);
    for (Eigen::Index i = 0; i < e; ++i) x(i) = options.innovation_std * rng.normal();
    for (int m = 1; m <= order; ++m) {
      VectorXd up = past[m - 1];
      VectorXd down = past[m - 1];
      for (int k = 0; k < m; ++k) {
        up = su * up;
        down = sd * down;
      }
      x += options.upper(m - 1) * up + options.lower(m - 1) * down;
    }
    if (!x.allFinite()) throw DivergenceError("AR surrogate diverged");
    for (int m = order - 1; m > 0; --m) past[m] = std::move(past[m - 1]);
    if (order > 0) past[0] = x;
    if (n >= options.burn_in) series.row(n - options.burn_in) = options.amplitude * x.transpose();
  }
  return series;
}

SimplicialComplex2 dfn_scale_complex(std::uint64_t seed) {
  CountedComplexOptions opts;
  opts.require_connected = true;
  opts.fill_all_cliques = true;
  opts.closure_bias = 0.1;
  return random_complex_with_counts(17, 26, 5, seed, opts);
}

EdgeSeriesDataset make_dfn_surrogate(std::uint64_t seed, const ArSurrogateOptions& options) {
  EdgeSeriesDataset ds;
  ds.complex = dfn_scale_complex(derive_seed(seed, 0));
  ArSurrogateOptions o = options;
  o.snapshots = 288;
  o.seed = derive_seed(seed, 1);
  ds.series = generate_ar_series(unit_scaled(hodge_laplacians(ds.complex)), o);
  ds.train = 250;
  ds.test = 38;
  return ds;
}

}  // namespace topolms
