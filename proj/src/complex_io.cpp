#include "topolms/complex_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "topolms/error.hpp"

namespace topolms {

void write_complex(std::ostream& out, const SimplicialComplex2& c) {
  out << "vertices " << c.num_vertices() << "\n";
  out << "edges " << c.num_edges() << "\n";
  for (const auto& e : c.edges()) out << e[0] + 1 << " " << e[1] + 1 << "\n";
  out << "triangles " << c.num_triangles() << "\n";
  for (const auto& t : c.triangles()) out << t[0] + 1 << " " << t[1] + 1 << " " << t[2] + 1 << "\n";
}

namespace {

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  // Next non-blank, non-comment line; false at end of input.
  bool next(std::string& line) {
    while (std::getline(in_, line)) {
      ++number_;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError("complex file line " + std::to_string(number_) + ": " + msg);
  }

  long count(const char* keyword) {
    std::string line;
    if (!next(line)) fail(std::string("expected '") + keyword + " <count>'");
    std::istringstream ss(line);
    std::string word;
    long n = -1;
    std::string extra;
    if (!(ss >> word >> n) || word != keyword || n < 0 || (ss >> extra)) {
      fail(std::string("expected '") + keyword + " <count>'");
    }
    return n;
  }

  template <std::size_t N>
  std::array<int, N> tuple(long num_vertices) {
    std::string line;
    if (!next(line)) fail("unexpected end of file");
    std::istringstream ss(line);
    std::array<int, N> out{};
    for (auto& v : out) {
      long label;
      if (!(ss >> label)) fail("expected " + std::to_string(N) + " integer vertex labels");
      if (label < 1 || label > num_vertices) fail("vertex label out of range");
      v = static_cast<int>(label - 1);
    }
    std::string extra;
    if (ss >> extra) fail("trailing characters");
    return out;
  }

 private:
  std::istream& in_;
  long number_ = 0;
};

}  // namespace

SimplicialComplex2 read_complex(std::istream& in) {
  LineReader reader(in);
  const long n_v = reader.count("vertices");
  const long n_e = reader.count("edges");
  std::vector<Edge> edges;
  edges.reserve(n_e);
  for (long i = 0; i < n_e; ++i) edges.push_back(reader.tuple<2>(n_v));
  const long n_t = reader.count("triangles");
  std::vector<Triangle> triangles;
  triangles.reserve(n_t);
  for (long i = 0; i < n_t; ++i) triangles.push_back(reader.tuple<3>(n_v));
  std::string rest;
  if (reader.next(rest)) reader.fail("unexpected content after triangle list");
  return build_incidence(static_cast<int>(n_v), std::move(edges), std::move(triangles));
}

void save_complex(const std::string& path, const SimplicialComplex2& c) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_complex(out, c);
  if (!out) throw IoError("failed writing " + path);
}

SimplicialComplex2 load_complex(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return read_complex(in);
}

}  // namespace topolms
