#include "topolms/simplicial.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <string>

#include "topolms/error.hpp"
#include "topolms/rng.hpp"

namespace topolms {

namespace {

std::string fmt_edge(const Edge& e) {
  return "(" + std::to_string(e[0]) + "," + std::to_string(e[1]) + ")";
}

std::string fmt_tri(const Triangle& t) {
  return "(" + std::to_string(t[0]) + "," + std::to_string(t[1]) + "," + std::to_string(t[2]) +
         ")";
}

}  // namespace

int SimplicialComplex2::edge_index(int i, int j) const {
  if (i > j) std::swap(i, j);
  auto it = edge_lookup_.find({i, j});
  return it == edge_lookup_.end() ? -1 : it->second;
}

VectorXd SimplicialComplex2::triangle_boundary(const Triangle& tri) const {
  Triangle t = tri;
  std::sort(t.begin(), t.end());
  const int ij = edge_index(t[0], t[1]);
  const int ik = edge_index(t[0], t[2]);
  const int jk = edge_index(t[1], t[2]);
  if (ij < 0 || ik < 0 || jk < 0) {
    throw ValidationError("triangle " + fmt_tri(t) + " has a missing edge face");
  }
  VectorXd b = VectorXd::Zero(num_edges());
  b(ij) = 1.0;
  b(ik) = -1.0;
  b(jk) = 1.0;
  return b;
}

SimplicialComplex2 build_incidence(int num_vertices, std::vector<Edge> edges,
                                   std::vector<Triangle> triangles) {
  if (num_vertices < 0) throw ValidationError("negative vertex count");
  SimplicialComplex2 c;
  c.num_vertices_ = num_vertices;

  for (auto& e : edges) {
    if (e[0] > e[1]) std::swap(e[0], e[1]);
    if (e[0] < 0 || e[1] >= num_vertices) {
      throw ValidationError("edge " + fmt_edge(e) + " has a vertex out of range");
    }
    if (e[0] == e[1]) throw ValidationError("edge " + fmt_edge(e) + " is a self-loop");
    const int idx = static_cast<int>(c.edge_lookup_.size());
    if (!c.edge_lookup_.emplace(std::make_pair(e[0], e[1]), idx).second) {
      throw ValidationError("duplicate edge " + fmt_edge(e));
    }
  }
  c.edges_ = std::move(edges);

  std::set<Triangle> seen;
  for (auto& t : triangles) {
    std::sort(t.begin(), t.end());
    if (t[0] < 0 || t[2] >= num_vertices) {
      throw ValidationError("triangle " + fmt_tri(t) + " has a vertex out of range");
    }
    if (t[0] == t[1] || t[1] == t[2]) {
      throw ValidationError("triangle " + fmt_tri(t) + " repeats a vertex");
    }
    if (!seen.insert(t).second) throw ValidationError("duplicate triangle " + fmt_tri(t));
  }
  c.triangles_ = std::move(triangles);

  const int n_e = c.num_edges();
  const int n_t = c.num_triangles();
  c.b1_ = MatrixXi::Zero(num_vertices, n_e);
  for (int e = 0; e < n_e; ++e) {
    c.b1_(c.edges_[e][0], e) = -1;
    c.b1_(c.edges_[e][1], e) = 1;
  }
  c.b2_ = MatrixXi::Zero(n_e, n_t);
  for (int t = 0; t < n_t; ++t) {
    const auto& tri = c.triangles_[t];
    const int ij = c.edge_index(tri[0], tri[1]);
    const int ik = c.edge_index(tri[0], tri[2]);
    const int jk = c.edge_index(tri[1], tri[2]);
    if (ij < 0 || ik < 0 || jk < 0) {
      throw ValidationError("downward closure violated: triangle " + fmt_tri(tri) +
                            " has a missing edge face");
    }
    c.b2_(ij, t) = 1;
    c.b2_(ik, t) = -1;
    c.b2_(jk, t) = 1;
  }
  return c;
}

HodgeOperators hodge_laplacians(const SimplicialComplex2& c) {
  HodgeOperators ops;
  const MatrixXd b1 = c.b1().cast<double>();
  const MatrixXd b2 = c.b2().cast<double>();
  ops.l0 = b1 * b1.transpose();
  ops.lower = b1.transpose() * b1;
  ops.upper = b2 * b2.transpose();
  ops.l1 = ops.lower + ops.upper;
  if (ops.l1.size() > 0) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(ops.l1);
    ops.eigenvalues = es.eigenvalues();
    ops.eigenvectors = es.eigenvectors();
  } else {
    ops.eigenvalues = VectorXd(0);
    ops.eigenvectors = MatrixXd(0, 0);
  }
  return ops;
}

HodgeOperators unit_scaled(const HodgeOperators& ops) {
  HodgeOperators out = ops;
  if (ops.eigenvalues.size() == 0) return out;
  const double top = ops.eigenvalues(ops.eigenvalues.size() - 1);
  if (top <= 0.0) return out;
  out.l0 /= top;
  out.lower /= top;
  out.upper /= top;
  out.l1 /= top;
  out.eigenvalues /= top;
  out.scale = ops.scale * top;
  return out;
}

namespace {

// Orthogonal projection of x onto the column space of a, via least squares.
VectorXd project_onto_columns(const MatrixXd& a, const VectorXd& x) {
  if (a.cols() == 0) return VectorXd::Zero(x.size());
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(a);
  const VectorXd coef = cod.solve(x);
  return a * coef;
}

}  // namespace

HodgeComponents hodge_decompose(const VectorXd& x, const SimplicialComplex2& c) {
  require_size(x, c.num_edges(), "hodge_decompose signal");
  HodgeComponents out;
  out.gradient = project_onto_columns(c.b1().cast<double>().transpose(), x);
  out.curl = project_onto_columns(c.b2().cast<double>(), x);
  out.harmonic = x - out.gradient - out.curl;
  return out;
}

VectorXd sft(const VectorXd& x, const HodgeOperators& ops) {
  require_size(x, ops.num_edges(), "sft signal");
  return ops.eigenvectors.transpose() * x;
}

VectorXd inverse_sft(const VectorXd& coeffs, const HodgeOperators& ops) {
  require_size(coeffs, ops.num_edges(), "inverse_sft coefficients");
  return ops.eigenvectors * coeffs;
}

std::vector<CliqueCandidate> enumerate_3cliques(const SimplicialComplex2& c) {
  const int n_v = c.num_vertices();
  std::vector<std::vector<int>> higher(n_v);  // neighbours with larger index
  for (const auto& e : c.edges()) higher[e[0]].push_back(e[1]);
  for (auto& adj : higher) std::sort(adj.begin(), adj.end());

  std::vector<CliqueCandidate> out;
  for (int i = 0; i < n_v; ++i) {
    const auto& ni = higher[i];
    for (std::size_t a = 0; a < ni.size(); ++a) {
      const int j = ni[a];
      for (std::size_t b = a + 1; b < ni.size(); ++b) {
        const int k = ni[b];
        if (c.edge_index(j, k) >= 0) {
          Triangle tri{i, j, k};
          out.push_back({tri, c.triangle_boundary(tri)});
        }
      }
    }
  }
  return out;
}

namespace {

void check_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError(std::string(what) + " must lie in [0,1]");
}

std::vector<Triangle> clique_triples(int num_vertices, const std::vector<Edge>& edges) {
  std::vector<std::vector<char>> adj(num_vertices, std::vector<char>(num_vertices, 0));
  for (const auto& e : edges) adj[e[0]][e[1]] = adj[e[1]][e[0]] = 1;
  std::vector<Triangle> out;
  for (int i = 0; i < num_vertices; ++i)
    for (int j = i + 1; j < num_vertices; ++j) {
      if (!adj[i][j]) continue;
      for (int k = j + 1; k < num_vertices; ++k)
        if (adj[i][k] && adj[j][k]) out.push_back({i, j, k});
    }
  return out;
}

bool edges_connected(int num_vertices, const std::vector<Edge>& edges) {
  std::vector<int> parent(num_vertices);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  std::vector<char> touched(num_vertices, 0);
  for (const auto& e : edges) {
    touched[e[0]] = touched[e[1]] = 1;
    parent[find(e[0])] = find(e[1]);
  }
  int root = -1;
  for (int v = 0; v < num_vertices; ++v) {
    if (!touched[v]) continue;
    if (root < 0) root = find(v);
    else if (find(v) != root) return false;
  }
  return true;
}

}  // namespace

SimplicialComplex2 random_complex(int num_vertices, double edge_prob, double fill_prob,
                                  std::uint64_t seed) {
  check_probability(edge_prob, "edge_prob");
  check_probability(fill_prob, "fill_prob");
  if (num_vertices < 0) throw ValidationError("negative vertex count");
  Rng edge_rng(derive_seed(seed, 0));
  Rng fill_rng(derive_seed(seed, 1));
  std::vector<Edge> edges;
  for (int i = 0; i < num_vertices; ++i)
    for (int j = i + 1; j < num_vertices; ++j)
      if (edge_rng.bernoulli(edge_prob)) edges.push_back({i, j});
  std::vector<Triangle> triangles;
  for (const auto& t : clique_triples(num_vertices, edges))
    if (fill_rng.bernoulli(fill_prob)) triangles.push_back(t);
  return build_incidence(num_vertices, std::move(edges), std::move(triangles));
}

SimplicialComplex2 random_complex_with_counts(int num_vertices, int num_edges, int num_triangles,
                                              std::uint64_t seed,
                                              const CountedComplexOptions& options) {
  const long max_pairs = static_cast<long>(num_vertices) * (num_vertices - 1) / 2;
  if (num_vertices < 0 || num_edges < 0 || num_triangles < 0 || num_edges > max_pairs) {
    throw ValidationError("random_complex_with_counts: impossible vertex/edge counts");
  }
  check_probability(options.closure_bias, "closure_bias");

  for (int attempt = 0; attempt < options.max_attempts; ++attempt) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(attempt)));
    std::vector<std::vector<char>> adj(num_vertices, std::vector<char>(num_vertices, 0));
    std::vector<Edge> edges;
    auto add = [&](int a, int b) {
      if (a > b) std::swap(a, b);
      adj[a][b] = adj[b][a] = 1;
      edges.push_back({a, b});
    };
    while (static_cast<int>(edges.size()) < num_edges) {
      bool placed = false;
      if (options.closure_bias > 0.0 && rng.bernoulli(options.closure_bias)) {
        std::vector<Edge> open;  // non-adjacent endpoints of a 2-path
        for (int a = 0; a < num_vertices; ++a)
          for (int b = a + 1; b < num_vertices; ++b) {
            if (adj[a][b]) continue;
            for (int w = 0; w < num_vertices; ++w)
              if (adj[a][w] && adj[b][w]) {
                open.push_back({a, b});
                break;
              }
          }
        if (!open.empty()) {
          const auto& e = open[rng.below(open.size())];
          add(e[0], e[1]);
          placed = true;
        }
      }
      if (!placed) {
        int a, b;
        do {
          a = static_cast<int>(rng.below(num_vertices));
          b = static_cast<int>(rng.below(num_vertices));
        } while (a == b || adj[a][b]);
        add(a, b);
      }
    }
    if (options.require_connected && !edges_connected(num_vertices, edges)) continue;
    auto cliques = clique_triples(num_vertices, edges);
    if (static_cast<int>(cliques.size()) < num_triangles) continue;
    if (options.fill_all_cliques && static_cast<int>(cliques.size()) != num_triangles) continue;
    // partial Fisher-Yates for a uniform subset of cliques
    for (int t = 0; t < num_triangles; ++t) {
      const auto pick = t + rng.below(cliques.size() - t);
      std::swap(cliques[t], cliques[pick]);
    }
    cliques.resize(num_triangles);
    std::sort(cliques.begin(), cliques.end());
    std::sort(edges.begin(), edges.end());
    return build_incidence(num_vertices, std::move(edges), std::move(cliques));
  }
  throw ValidationError("random_complex_with_counts: no admissible complex within " +
                        std::to_string(options.max_attempts) + " attempts");
}

SimplicialComplex2 with_triangles(const SimplicialComplex2& c, std::vector<Triangle> triangles) {
  return build_incidence(c.num_vertices(), c.edges(), std::move(triangles));
}

bool skeleton_connected(const SimplicialComplex2& c) {
  return edges_connected(c.num_vertices(), c.edges());
}

}  // namespace topolms
