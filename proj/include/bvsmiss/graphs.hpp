#pragma once

// Decomposable Gaussian graphical models under the hyper-inverse Wishart
// fractional prior.
//
// HIW_G(b, D) uses the Dawid-Lauritzen degrees of freedom: every clique
// marginal Sigma_C is IW(b + |C| - 1, D_C) in the standard parameterization
// of gauss.hpp, so b = g n is the prior weight of the fractional prior.
//
// Fractional marginal (centered data, scatter D = Zc'Zc, n rows):
//
//   log m = -(1-g) n d / 2 log(2 pi)
//           + sum_C [I(n, D_C) - I(gn, g D_C)] - sum_S [I(n, D_S) - I(gn, g D_S)]
//   I(b, A) = wishart_log_normalizer(b + |A| - 1, |A|) - (b + |A| - 1)/2 log|A|
//
// Column means are removed before anything else, which is the same as
// integrating each mean against a flat prior that is identical across
// graphs.
//
// graph_mcmc_missing targets, over (G, mu, Sigma, Z_miss),
//
//   pi(G) f(Zc | Sigma)^{1-g} HIW_G(Sigma; gn, g D(Z)) N(mu; zbar(Z), Sigma / n)
//
// whose (mu, Sigma) marginal is pi(G) m(Z | G). A move proposes G* by a
// legal toggle, Sigma* ~ HIW_G*(n, D(Z)), mu* ~ N(zbar(Z), Sigma*/n) and the
// missing cells row-wise from N(mu*, Sigma*); the MH ratio carries the
// target and both proposal densities. On complete data the ratio reduces
// to pi(G*) m(Z | G*) q(G | G*) / [pi(G) m(Z | G) q(G* | G)], the collapsed
// sampler's ratio. An additional move with G* = G refreshes (mu, Sigma,
// Z_miss) every iteration.

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bvsmiss/datamodel.hpp"
#include "bvsmiss/gauss.hpp"

namespace bvsmiss {

/// Undirected simple graph on vertices 0..d-1 (d <= kMaxVertices).
class Graph {
 public:
  static constexpr int kMaxVertices = 11;

  Graph() = default;
  explicit Graph(int d);
  static Graph from_edges(int d, const std::vector<std::pair<int, int>>& edges);
  static Graph complete(int d);
  /// Inverse of key().
  static Graph from_key(int d, std::uint64_t key);

  int d() const { return d_; }
  bool has_edge(int a, int b) const { return (adj_[static_cast<std::size_t>(a)] >> b) & 1U; }
  void set_edge(int a, int b, bool on);
  Graph toggled(int a, int b) const;
  std::uint32_t neighbors(int v) const { return adj_[static_cast<std::size_t>(v)]; }
  /// Sorted (a < b) edge list.
  std::vector<std::pair<int, int>> edges() const;
  int edge_count() const;
  /// Bit per vertex pair, pairs in (0,1), (0,2), ..., (1,2), ... order.
  std::uint64_t key() const;
  bool is_clique(std::uint32_t vertex_set) const;

  friend bool operator==(const Graph& a, const Graph& b) { return a.d_ == b.d_ && a.adj_ == b.adj_; }

 private:
  int d_ = 0;
  std::vector<std::uint32_t> adj_;
};

int pair_index(int a, int b, int d);

/// Perfect clique ordering; separators[0] is empty and separators[j] =
/// cliques[j] intersected with the union of earlier cliques.
struct JunctionTree {
  std::vector<std::vector<int>> cliques;
  std::vector<std::vector<int>> separators;
};

/// Union covers 0..d-1, separators are as defined above, and each separator
/// lies inside one earlier clique.
bool running_intersection_holds(const JunctionTree& jt, int d);

struct DecomposabilityResult {
  bool decomposable = false;
  JunctionTree junction;       // valid when decomposable
  std::vector<int> witness;    // chordless cycle (in cycle order) otherwise
};

/// Maximum cardinality search starting at `start`; different starts give
/// different perfect orderings of the same graph.
DecomposabilityResult is_decomposable(const Graph& g, int start = 0);
bool is_chordal(const Graph& g);

struct DecomposableGraph {
  Graph graph;
  JunctionTree junction;

  /// Throws ContractError when g is not chordal.
  static DecomposableGraph make(const Graph& g, int start = 0);
};

/// Vertex 0 is Y, vertex j + 1 is covariate j. Junction tree
/// [{x_all}, {Y} + x_gamma] with separator x_gamma; a single clique when
/// gamma is full.
DecomposableGraph regression_graph(const ModelIndex& gamma);

/// Response stacked before the covariates; the Y column is fully observed.
struct ZDataset {
  MatrixXd z;  // NaN where mask is false
  BoolMatrix mask;
  std::vector<std::string> labels;

  Index n() const { return z.rows(); }
  int d() const { return static_cast<int>(z.cols()); }
  bool complete() const;
};

ZDataset make_zdataset(const Dataset& d);
/// Validates the Y column (column 0) and the masked cells; throws LoadError.
ZDataset make_zdataset(MatrixXd z, BoolMatrix mask, std::vector<std::string> labels = {});

struct HiwLogMarginal {
  double value = -std::numeric_limits<double>::infinity();
  bool degenerate = false;  // some clique scale was not positive definite
};

HiwLogMarginal hiw_log_marginal(const MatrixXd& z, const JunctionTree& jt, double g);
HiwLogMarginal hiw_log_marginal(const ZDataset& zd, const DecomposableGraph& graph, double g);
/// Same from sufficient statistics (centered scatter, row count).
HiwLogMarginal hiw_log_marginal_scatter(const MatrixXd& scatter, Index n, const JunctionTree& jt,
                                        double g);

/// log HIW_G(Sigma; b, D) relative to the free entries of Sigma.
double hiw_log_density(const SpdMatrix& sigma, const JunctionTree& jt, double b, const MatrixXd& d_scale);

struct InducedCheck {
  double lhs = 0.0;
  double rhs = 0.0;
};

/// lhs: HIW fractional marginal of (y, x) under regression_graph(gamma)
/// minus that of x alone under the complete graph. rhs:
/// log_marginal_induced(y, x, gamma, g).
InducedCheck induced_regression_check(const VectorXd& y, const MatrixXd& x, const ModelIndex& gamma,
                                      double g);

/// Draw from HIW_G(b, D) by clique-wise completion along the junction tree.
/// Requires b > 0 (DomainError otherwise).
SpdMatrix sample_hiw(const JunctionTree& jt, double b, const SpdMatrix& d_scale, Rng& rng);

/// max |(Sigma^{-1})_{ab}| over non-edges, relative to the largest diagonal
/// entry of the precision.
double max_offgraph_precision(const SpdMatrix& sigma, const Graph& g);

struct GraphPrior {
  enum class Kind { uniform, edge_bernoulli, point_mass };
  Kind kind = Kind::uniform;
  double rho = 0.5;
  Graph g0;

  static GraphPrior uniform() { return {}; }
  static GraphPrior edge_bernoulli(double rho) { return {Kind::edge_bernoulli, rho, {}}; }
  static GraphPrior point_mass(Graph g0) { return {Kind::point_mass, 0.5, std::move(g0)}; }
  std::string name() const;
};

/// Unnormalized log prior over decomposable graphs.
double log_graph_prior(const Graph& g, const GraphPrior& prior);

/// Vertex pairs whose toggle keeps the graph decomposable.
std::vector<std::pair<int, int>> legal_toggles(const Graph& g);

struct GraphMcmcConfig {
  int iterations = 20000;
  int burnin = 2000;
  int thin = 1;
  double g = 0.0;  // 0 means 1/n
  GraphPrior prior;
  std::uint64_t seed = 1;
  std::optional<Graph> start;  // unset starts at the empty graph
  int max_vertices = 8;
  /// Verifies running intersection and the precision zeros of every
  /// visited state (throws Error on violation).
  bool check_invariants = false;
  /// Within-graph refresh of (mu, Sigma, Z_miss) in the missing-data sampler.
  bool refresh = true;

  void validate() const;
};

struct GraphChainOutput {
  int d = 0;
  std::vector<Graph> visited;
  std::vector<double> log_marginal;  // collapsed sampler only
  MatrixXd edge_inclusion;           // d x d, symmetric, zero diagonal
  MatrixXd edge_se;                  // batch-means s.e. of edge_inclusion
  double acceptance_rate = 0.0;
  double max_offgraph_precision = 0.0;  // max over visited states (missing-data sampler)
  std::uint64_t seed = 0;
  std::string sampler;
};

GraphChainOutput graph_mcmc_collapsed(const ZDataset& zd, const GraphMcmcConfig& cfg);
GraphChainOutput graph_mcmc_missing(const ZDataset& zd, const GraphMcmcConfig& cfg);

/// Every decomposable graph on d <= 6 vertices.
std::vector<Graph> enumerate_graphs(int d);

struct GraphPosteriorEntry {
  Graph graph;
  double log_marginal = 0.0;
  double prob = 0.0;
};

struct GraphPosterior {
  std::vector<GraphPosteriorEntry> graphs;
  MatrixXd edge_inclusion;
};

/// Exact posterior over all decomposable graphs (complete data).
GraphPosterior graph_posterior_exact(const ZDataset& zd, double g, const GraphPrior& prior);

/// Visit frequencies by graph key.
std::vector<std::pair<Graph, double>> graph_frequencies(const GraphChainOutput& chain);

}  // namespace bvsmiss
