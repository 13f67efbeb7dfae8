#pragma once

// Two-dimensional simplicial complexes: incidence matrices, Hodge Laplacians,
// Hodge decomposition, simplicial Fourier transform, 3-clique candidates and
// seeded random generation.
//
// Orientation convention: every simplex is oriented by increasing vertex
// index. Edge (i, j) with i < j runs i -> j, so its B1 column has -1 at i and
// +1 at j. Triangle (i, j, k) with i < j < k has boundary
// (j,k) - (i,k) + (i,j), so its B2 column is +1 on (i,j), -1 on (i,k) and +1
// on (j,k).

#include <array>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "topolms/linalg.hpp"

namespace topolms {

using Edge = std::array<int, 2>;
using Triangle = std::array<int, 3>;

class SimplicialComplex2 {
 public:
  SimplicialComplex2() = default;

  int num_vertices() const { return num_vertices_; }
  int num_edges() const { return static_cast<int>(edges_.size()); }
  int num_triangles() const { return static_cast<int>(triangles_.size()); }

  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }

  // V x E and E x T signed incidence matrices.
  const MatrixXi& b1() const { return b1_; }
  const MatrixXi& b2() const { return b2_; }

  // Index of edge {i, j} (any order), or -1.
  int edge_index(int i, int j) const;

  // Signed E-vector for the oriented boundary of the 3-clique (i, j, k); all
  // three edges must exist.
  VectorXd triangle_boundary(const Triangle& tri) const;

  friend SimplicialComplex2 build_incidence(int, std::vector<Edge>, std::vector<Triangle>);

 private:
  int num_vertices_ = 0;
  std::vector<Edge> edges_;
  std::vector<Triangle> triangles_;
  std::map<std::pair<int, int>, int> edge_lookup_;
  MatrixXi b1_;
  MatrixXi b2_;
};

// Vertex indices are 0-based. Each simplex is re-sorted into reference
// orientation; list order is preserved. Throws ValidationError on range,
// self-loop, duplicate or downward-closure violations.
SimplicialComplex2 build_incidence(int num_vertices, std::vector<Edge> edges,
                                   std::vector<Triangle> triangles);

struct HodgeOperators {
  MatrixXd l0;     // B1 B1^T
  MatrixXd lower;  // Ld = B1^T B1
  MatrixXd upper;  // Lu = B2 B2^T
  MatrixXd l1;     // Ld + Lu
  VectorXd eigenvalues;   // of l1, ascending
  MatrixXd eigenvectors;  // columns, orthonormal
  // All four Laplacians above are the combinatorial ones divided by `scale`.
  double scale = 1.0;

  Eigen::Index num_edges() const { return l1.rows(); }
};

HodgeOperators hodge_laplacians(const SimplicialComplex2& c);

// Same operators divided by lambda_max(L1) (left unchanged when L1 = 0), so
// every shift has spectral norm at most one.
HodgeOperators unit_scaled(const HodgeOperators& ops);

struct HodgeComponents {
  VectorXd gradient;  // in im(B1^T)
  VectorXd curl;      // in im(B2)
  VectorXd harmonic;  // in ker(L1)
};

HodgeComponents hodge_decompose(const VectorXd& x, const SimplicialComplex2& c);

// U1^T x and its inverse U1 xhat.
VectorXd sft(const VectorXd& x, const HodgeOperators& ops);
VectorXd inverse_sft(const VectorXd& coeffs, const HodgeOperators& ops);

struct CliqueCandidate {
  Triangle vertices;
  VectorXd incidence;  // signed E-vector b_j
};

// All 3-cliques of the 1-skeleton in lexicographic order.
std::vector<CliqueCandidate> enumerate_3cliques(const SimplicialComplex2& c);

// Erdos-Renyi edges over vertex pairs in lexicographic order, then each
// 3-clique filled independently with probability fill_prob.
SimplicialComplex2 random_complex(int num_vertices, double edge_prob, double fill_prob,
                                  std::uint64_t seed);

struct CountedComplexOptions {
  // Probability that a new edge closes an open wedge instead of joining a
  // uniformly random non-adjacent pair. Higher values cluster triangles.
  double closure_bias = 0.0;
  // Require the vertices touched by edges to form one connected component.
  bool require_connected = false;
  // Require the 1-skeleton to have exactly `num_triangles` 3-cliques, all of
  // which are filled.
  bool fill_all_cliques = false;
  int max_attempts = 100000;
};

// Complex with exactly `num_edges` edges and `num_triangles` triangles: edges
// are added one at a time, then `num_triangles` of the resulting 3-cliques
// are filled uniformly at random. Attempts whose 1-skeleton has too few
// cliques (or is disconnected, if required) are redrawn from derived seeds.
SimplicialComplex2 random_complex_with_counts(int num_vertices, int num_edges, int num_triangles,
                                              std::uint64_t seed,
                                              const CountedComplexOptions& options = {});

// Same 1-skeleton with a different triangle set (used when the topology
// changes mid-stream).
SimplicialComplex2 with_triangles(const SimplicialComplex2& c, std::vector<Triangle> triangles);

// True iff non-isolated vertices form a single connected component.
bool skeleton_connected(const SimplicialComplex2& c);

}  // namespace topolms
