#pragma once

// Plain-text complex files, 1-based vertex labels:
//
//   # optional comments and blank lines
//   vertices 4
//   edges 5
//   1 2
//   ...            (one "i j" pair per line)
//   triangles 1
//   1 2 3          (one "i j k" triple per line)
//
// Readers reject files whose triangles are not downward closed.

#include <iosfwd>
#include <string>

#include "topolms/simplicial.hpp"

namespace topolms {

void write_complex(std::ostream& out, const SimplicialComplex2& c);
SimplicialComplex2 read_complex(std::istream& in);

void save_complex(const std::string& path, const SimplicialComplex2& c);
SimplicialComplex2 load_complex(const std::string& path);

}  // namespace topolms
