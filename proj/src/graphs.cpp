#include "bvsmiss/graphs.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <numbers>
#include <unordered_map>

#include "bvsmiss/error.hpp"
#include "bvsmiss/impute.hpp"
#include "bvsmiss/priors.hpp"
#include "bvsmiss/search.hpp"

namespace bvsmiss {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::uint32_t bit(int v) { return std::uint32_t{1} << v; }

std::vector<int> members(std::uint32_t set) {
  std::vector<int> out;
  for (int v = 0; set; ++v, set >>= 1)
    if (set & 1U) out.push_back(v);
  return out;
}

std::uint32_t to_set(const std::vector<int>& v) {
  std::uint32_t s = 0;
  for (int x : v) s |= bit(x);
  return s;
}

std::vector<Index> as_index(const std::vector<int>& v) { return {v.begin(), v.end()}; }

MatrixXd block(const MatrixXd& m, const std::vector<int>& rows, const std::vector<int>& cols) {
  MatrixXd out(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) out(static_cast<Index>(i), static_cast<Index>(j)) = m(rows[i], cols[j]);
  return out;
}

// Maximum cardinality search order.
std::vector<int> mcs_order(const Graph& g, int start) {
  const int d = g.d();
  std::vector<int> order;
  std::vector<int> weight(static_cast<std::size_t>(d), 0);
  std::uint32_t numbered = 0;
  for (int step = 0; step < d; ++step) {
    int pick = -1;
    if (step == 0) {
      pick = start;
    } else {
      for (int v = 0; v < d; ++v) {
        if (numbered & bit(v)) continue;
        if (pick < 0 || weight[static_cast<std::size_t>(v)] > weight[static_cast<std::size_t>(pick)]) pick = v;
      }
    }
    order.push_back(pick);
    numbered |= bit(pick);
    for (int u : members(g.neighbors(pick) & ~numbered)) ++weight[static_cast<std::size_t>(u)];
  }
  return order;
}

std::vector<int> chordless_cycle(const Graph& g) {
  const int d = g.d();
  for (int size = 4; size <= d; ++size) {
    for (std::uint32_t s = 0; s < bit(d); ++s) {
      if (std::popcount(s) != size) continue;
      bool ok = true;
      for (int v : members(s)) {
        if (std::popcount(g.neighbors(v) & s) != 2) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      // Degree two everywhere; one connected component means one cycle.
      std::vector<int> cycle{std::countr_zero(s)};
      int prev = -1;
      for (;;) {
        const int cur = cycle.back();
        const std::uint32_t next = g.neighbors(cur) & s & ~(prev >= 0 ? bit(prev) : 0U);
        const int nv = std::countr_zero(next);
        if (nv == cycle.front()) break;
        prev = cur;
        cycle.push_back(nv);
        if (static_cast<int>(cycle.size()) > size) break;
      }
      if (static_cast<int>(cycle.size()) == size) return cycle;
    }
  }
  return {};
}

double clique_term(double b, const MatrixXd& a) {
  const int c = static_cast<int>(a.rows());
  const double df = b + c - 1.0;
  const SpdMatrix s(a);
  return wishart_log_normalizer(df, c) - 0.5 * df * s.logdet();
}

}  // namespace

Graph::Graph(int d) : d_(d), adj_(static_cast<std::size_t>(d), 0U) {
  if (d < 0 || d > kMaxVertices) throw ContractError("graph: unsupported vertex count");
}

Graph Graph::from_edges(int d, const std::vector<std::pair<int, int>>& edges) {
  Graph g(d);
  for (const auto& [a, b] : edges) g.set_edge(a, b, true);
  return g;
}

Graph Graph::complete(int d) {
  Graph g(d);
  for (int a = 0; a < d; ++a)
    for (int b = a + 1; b < d; ++b) g.set_edge(a, b, true);
  return g;
}

int pair_index(int a, int b, int d) {
  if (a > b) std::swap(a, b);
  return a * d - a * (a + 1) / 2 + (b - a - 1);
}

Graph Graph::from_key(int d, std::uint64_t key) {
  Graph g(d);
  for (int a = 0; a < d; ++a)
    for (int b = a + 1; b < d; ++b)
      if ((key >> pair_index(a, b, d)) & 1U) g.set_edge(a, b, true);
  return g;
}

void Graph::set_edge(int a, int b, bool on) {
  if (a == b || a < 0 || b < 0 || a >= d_ || b >= d_) throw ContractError("graph: invalid edge");
  auto& ra = adj_[static_cast<std::size_t>(a)];
  auto& rb = adj_[static_cast<std::size_t>(b)];
  if (on) {
    ra |= bit(b);
    rb |= bit(a);
  } else {
    ra &= ~bit(b);
    rb &= ~bit(a);
  }
}

Graph Graph::toggled(int a, int b) const {
  Graph g = *this;
  g.set_edge(a, b, !has_edge(a, b));
  return g;
}

std::vector<std::pair<int, int>> Graph::edges() const {
  std::vector<std::pair<int, int>> out;
  for (int a = 0; a < d_; ++a)
    for (int b = a + 1; b < d_; ++b)
      if (has_edge(a, b)) out.emplace_back(a, b);
  return out;
}

int Graph::edge_count() const {
  int c = 0;
  for (auto r : adj_) c += std::popcount(r);
  return c / 2;
}

std::uint64_t Graph::key() const {
  std::uint64_t k = 0;
  for (const auto& [a, b] : edges()) k |= std::uint64_t{1} << pair_index(a, b, d_);
  return k;
}

bool Graph::is_clique(std::uint32_t vertex_set) const {
  for (int v : members(vertex_set))
    if ((vertex_set & ~bit(v) & ~adj_[static_cast<std::size_t>(v)]) != 0) return false;
  return true;
}

bool running_intersection_holds(const JunctionTree& jt, int d) {
  if (jt.cliques.size() != jt.separators.size() || jt.cliques.empty()) return d == 0 && jt.cliques.empty();
  std::uint32_t seen = 0;
  std::vector<std::uint32_t> sets;
  for (std::size_t j = 0; j < jt.cliques.size(); ++j) {
    const std::uint32_t c = to_set(jt.cliques[j]);
    const std::uint32_t s = to_set(jt.separators[j]);
    if (s != (c & seen)) return false;
    if (j > 0) {
      bool inside = false;
      for (auto prev : sets) inside = inside || (s & ~prev) == 0;
      if (!inside) return false;
    } else if (s != 0) {
      return false;
    }
    sets.push_back(c);
    seen |= c;
  }
  return seen == (d >= 32 ? ~0U : bit(d) - 1U);
}

DecomposabilityResult is_decomposable(const Graph& g, int start) {
  DecomposabilityResult out;
  const int d = g.d();
  if (d == 0) {
    out.decomposable = true;
    return out;
  }
  if (start < 0 || start >= d) throw ContractError("is_decomposable: start vertex out of range");
  const auto order = mcs_order(g, start);
  std::vector<std::uint32_t> cand;
  std::uint32_t before = 0;
  for (int v : order) {
    const std::uint32_t earlier = g.neighbors(v) & before;
    if (!g.is_clique(earlier)) {
      out.witness = chordless_cycle(g);
      return out;
    }
    cand.push_back(earlier | bit(v));
    before |= bit(v);
  }
  std::vector<std::uint32_t> maximal;
  for (std::size_t i = 0; i < cand.size(); ++i) {
    bool contained = false;
    for (std::size_t j = 0; j < cand.size() && !contained; ++j)
      contained = j != i && (cand[i] & ~cand[j]) == 0 && cand[i] != cand[j];
    if (!contained) maximal.push_back(cand[i]);
  }
  std::uint32_t seen = 0;
  for (auto c : maximal) {
    out.junction.cliques.push_back(members(c));
    out.junction.separators.push_back(members(c & seen));
    seen |= c;
  }
  if (!running_intersection_holds(out.junction, d)) throw Error("internal: clique ordering violates running intersection");
  out.decomposable = true;
  return out;
}

bool is_chordal(const Graph& g) {
  if (g.d() == 0) return true;
  std::uint32_t before = 0;
  for (int v : mcs_order(g, 0)) {
    if (!g.is_clique(g.neighbors(v) & before)) return false;
    before |= bit(v);
  }
  return true;
}

DecomposableGraph DecomposableGraph::make(const Graph& g, int start) {
  auto r = is_decomposable(g, start);
  if (!r.decomposable) throw ContractError("graph is not decomposable");
  return {g, std::move(r.junction)};
}

DecomposableGraph regression_graph(const ModelIndex& gamma) {
  const int p = gamma.p();
  const int d = p + 1;
  Graph g(d);
  std::vector<int> xs, sel{0};
  for (int j = 0; j < p; ++j) {
    xs.push_back(j + 1);
    for (int k = j + 1; k < p; ++k) g.set_edge(j + 1, k + 1, true);
    if (gamma.contains(j)) {
      g.set_edge(0, j + 1, true);
      sel.push_back(j + 1);
    }
  }
  JunctionTree jt;
  if (gamma.size() == p) {
    std::vector<int> all(static_cast<std::size_t>(d));
    for (int v = 0; v < d; ++v) all[static_cast<std::size_t>(v)] = v;
    jt.cliques = {all};
    jt.separators = {{}};
  } else {
    jt.cliques = {xs, sel};
    jt.separators = {{}, std::vector<int>(sel.begin() + 1, sel.end())};
  }
  return {g, jt};
}

bool ZDataset::complete() const { return mask.all(); }

ZDataset make_zdataset(MatrixXd z, BoolMatrix mask, std::vector<std::string> labels) {
  if (mask.rows() != z.rows() || mask.cols() != z.cols()) throw LoadError("z data: mask dimension mismatch");
  if (z.cols() < 1) throw LoadError("z data: no columns");
  for (Index i = 0; i < z.rows(); ++i) {
    if (!mask(i, 0)) throw LoadError("z data: response missing in row " + std::to_string(i + 1));
    for (Index j = 0; j < z.cols(); ++j) {
      if (mask(i, j) && !std::isfinite(z(i, j))) {
        throw LoadError("z data: non-finite value at row " + std::to_string(i + 1) + ", column " +
                        std::to_string(j + 1));
      }
      if (!mask(i, j)) z(i, j) = std::numeric_limits<double>::quiet_NaN();
    }
  }
  for (Index j = 0; j < z.cols(); ++j) {
    if (mask.col(j).count() < 2) throw LoadError("z data: column " + std::to_string(j + 1) + " has fewer than 2 values");
  }
  if (labels.empty()) {
    labels.push_back("y");
    for (Index j = 1; j < z.cols(); ++j) labels.push_back("x" + std::to_string(j));
  }
  if (static_cast<Index>(labels.size()) != z.cols()) throw LoadError("z data: label count mismatch");
  return {std::move(z), std::move(mask), std::move(labels)};
}

ZDataset make_zdataset(const Dataset& d) {
  MatrixXd z(d.n(), d.p() + 1);
  BoolMatrix mask(d.n(), d.p() + 1);
  z.col(0) = d.y;
  z.rightCols(d.p()) = d.x;
  mask.col(0).setConstant(true);
  mask.rightCols(d.p()) = d.mask;
  std::vector<std::string> labels{d.response_name};
  labels.insert(labels.end(), d.names.begin(), d.names.end());
  return make_zdataset(std::move(z), std::move(mask), std::move(labels));
}

HiwLogMarginal hiw_log_marginal_scatter(const MatrixXd& scatter, Index n, const JunctionTree& jt,
                                        double g) {
  if (!(g > 0.0 && g < 1.0)) throw DomainError("hiw marginal: g must lie in (0, 1)");
  const double nn = static_cast<double>(n);
  const int d = static_cast<int>(scatter.rows());
  HiwLogMarginal out;
  try {
    double v = -0.5 * (1.0 - g) * nn * d * std::log(2.0 * std::numbers::pi);
    auto term = [&](const std::vector<int>& set) {
      const MatrixXd a = block(scatter, set, set);
      return clique_term(nn, a) - clique_term(g * nn, g * a);
    };
    for (std::size_t j = 0; j < jt.cliques.size(); ++j) {
      v += term(jt.cliques[j]);
      if (!jt.separators[j].empty()) v -= term(jt.separators[j]);
    }
    out.value = v;
  } catch (const NotSpdError&) {
    out.degenerate = true;
  } catch (const DomainError&) {
    out.degenerate = true;
  }
  return out;
}

HiwLogMarginal hiw_log_marginal(const MatrixXd& z, const JunctionTree& jt, double g) {
  if (!z.allFinite()) throw ContractError("hiw marginal requires complete data");
  return hiw_log_marginal_scatter(centered_scatter(z), z.rows(), jt, g);
}

HiwLogMarginal hiw_log_marginal(const ZDataset& zd, const DecomposableGraph& graph, double g) {
  if (!zd.complete()) throw ContractError("hiw marginal requires complete data");
  if (graph.graph.d() != zd.d()) throw ContractError("hiw marginal: graph size differs from data");
  return hiw_log_marginal(zd.z, graph.junction, g);
}

double hiw_log_density(const SpdMatrix& sigma, const JunctionTree& jt, double b, const MatrixXd& d_scale) {
  double v = 0.0;
  auto term = [&](const std::vector<int>& set) {
    const auto idx = as_index(set);
    const double df = b + static_cast<double>(set.size()) - 1.0;
    return log_inverse_wishart_density(sigma.sub(idx), df, SpdMatrix(block(d_scale, set, set)));
  };
  for (std::size_t j = 0; j < jt.cliques.size(); ++j) {
    v += term(jt.cliques[j]);
    if (!jt.separators[j].empty()) v -= term(jt.separators[j]);
  }
  return v;
}

InducedCheck induced_regression_check(const VectorXd& y, const MatrixXd& x, const ModelIndex& gamma,
                                      double g) {
  const Index p = x.cols();
  MatrixXd z(x.rows(), p + 1);
  z.col(0) = y;
  z.rightCols(p) = x;
  InducedCheck out;
  out.lhs = hiw_log_marginal(z, regression_graph(gamma).junction, g).value;
  if (p > 0) {
    JunctionTree xt;
    std::vector<int> all(static_cast<std::size_t>(p));
    for (int k = 0; k < p; ++k) all[static_cast<std::size_t>(k)] = k;
    xt.cliques = {all};
    xt.separators = {{}};
    out.lhs -= hiw_log_marginal(x, xt, g).value;
  }
  out.rhs = log_marginal_induced(y, x, gamma, g).value;
  return out;
}

SpdMatrix sample_hiw(const JunctionTree& jt, double b, const SpdMatrix& d_scale, Rng& rng) {
  if (!(b > 0.0)) throw DomainError("sample_hiw: b must be positive");
  const MatrixXd& dm = d_scale.matrix();
  const Index d = dm.rows();
  MatrixXd sigma = MatrixXd::Zero(d, d);
  std::vector<int> assigned;
  for (std::size_t j = 0; j < jt.cliques.size(); ++j) {
    const auto& c = jt.cliques[j];
    const auto& s = jt.separators[j];
    std::vector<int> r;
    for (int v : c)
      if (std::find(s.begin(), s.end(), v) == s.end()) r.push_back(v);
    const double df = b + static_cast<double>(c.size()) - 1.0;
    if (s.empty()) {
      const SpdMatrix draw = sample_inverse_wishart(df, SpdMatrix(block(dm, r, r)), rng);
      for (std::size_t a = 0; a < r.size(); ++a)
        for (std::size_t e = 0; e < r.size(); ++e) sigma(r[a], r[e]) = draw.matrix()(static_cast<Index>(a), static_cast<Index>(e));
    } else {
      const SpdMatrix pss(block(dm, s, s));
      const MatrixXd prs = block(dm, r, s);
      const MatrixXd m = pss.solve(MatrixXd(prs.transpose())).transpose();  // Psi_RS Psi_SS^{-1}
      MatrixXd schur = block(dm, r, r) - m * prs.transpose();
      const SpdMatrix u = sample_inverse_wishart(df, SpdMatrix(0.5 * (schur + schur.transpose())), rng);
      MatrixXd zn(r.size(), s.size());
      for (Index a = 0; a < zn.rows(); ++a)
        for (Index e = 0; e < zn.cols(); ++e) zn(a, e) = rng.normal();
      // Column covariance Psi_SS^{-1} has factor L^{-T}.
      const MatrixXd right = pss.lower().triangularView<Eigen::Lower>().solve(MatrixXd::Identity(
          static_cast<Index>(s.size()), static_cast<Index>(s.size())));
      const MatrixXd bmat = m + u.lower() * zn * right;
      const MatrixXd sss = block(sigma, s, s);
      const MatrixXd srr = u.matrix() + bmat * sss * bmat.transpose();
      const MatrixXd sap = block(sigma, s, assigned);
      const MatrixXd srp = bmat * sap;
      for (std::size_t a = 0; a < r.size(); ++a) {
        for (std::size_t e = 0; e < r.size(); ++e) sigma(r[a], r[e]) = srr(static_cast<Index>(a), static_cast<Index>(e));
        for (std::size_t e = 0; e < assigned.size(); ++e) {
          sigma(r[a], assigned[e]) = srp(static_cast<Index>(a), static_cast<Index>(e));
          sigma(assigned[e], r[a]) = srp(static_cast<Index>(a), static_cast<Index>(e));
        }
      }
    }
    assigned.insert(assigned.end(), r.begin(), r.end());
  }
  return SpdMatrix(0.5 * (sigma + sigma.transpose()));
}

double max_offgraph_precision(const SpdMatrix& sigma, const Graph& g) {
  const MatrixXd k = sigma.inverse();
  const double scale = k.diagonal().cwiseAbs().maxCoeff();
  double worst = 0.0;
  for (int a = 0; a < g.d(); ++a)
    for (int b = a + 1; b < g.d(); ++b)
      if (!g.has_edge(a, b)) worst = std::max(worst, std::abs(k(a, b)) / scale);
  return worst;
}

std::string GraphPrior::name() const {
  switch (kind) {
    case Kind::uniform: return "uniform";
    case Kind::edge_bernoulli: return "edge-bernoulli";
    case Kind::point_mass: return "point-mass";
  }
  return "?";
}

double log_graph_prior(const Graph& g, const GraphPrior& prior) {
  switch (prior.kind) {
    case GraphPrior::Kind::uniform: return 0.0;
    case GraphPrior::Kind::edge_bernoulli: {
      const int e = g.edge_count();
      const int m = g.d() * (g.d() - 1) / 2;
      return e * std::log(prior.rho) + (m - e) * std::log1p(-prior.rho);
    }
    case GraphPrior::Kind::point_mass: return g == prior.g0 ? 0.0 : kNegInf;
  }
  return kNegInf;
}

std::vector<std::pair<int, int>> legal_toggles(const Graph& g) {
  std::vector<std::pair<int, int>> out;
  for (int a = 0; a < g.d(); ++a)
    for (int b = a + 1; b < g.d(); ++b)
      if (is_chordal(g.toggled(a, b))) out.emplace_back(a, b);
  return out;
}

void GraphMcmcConfig::validate() const {
  if (burnin < 0 || thin < 1 || iterations <= burnin) throw ContractError("invalid graph mcmc iterations/burnin/thin");
  if (g != 0.0 && !(g > 0.0 && g < 1.0)) throw DomainError("graph mcmc: g must lie in (0, 1)");
  if (prior.kind == GraphPrior::Kind::edge_bernoulli && !(prior.rho > 0.0 && prior.rho < 1.0))
    throw DomainError("edge prior probability must lie in (0, 1)");
}

namespace {

struct GraphCache {
  std::unordered_map<std::uint64_t, JunctionTree> junction;
  std::unordered_map<std::uint64_t, std::vector<std::pair<int, int>>> toggles;

  const JunctionTree& jt(const Graph& g) {
    auto it = junction.find(g.key());
    if (it == junction.end()) it = junction.emplace(g.key(), DecomposableGraph::make(g).junction).first;
    return it->second;
  }
  const std::vector<std::pair<int, int>>& legal(const Graph& g) {
    auto it = toggles.find(g.key());
    if (it == toggles.end()) it = toggles.emplace(g.key(), legal_toggles(g)).first;
    return it->second;
  }
};

Graph initial_graph(const GraphMcmcConfig& cfg, int d) {
  Graph g = cfg.start ? *cfg.start : (cfg.prior.kind == GraphPrior::Kind::point_mass ? cfg.prior.g0 : Graph(d));
  if (g.d() != d) throw ContractError("graph mcmc: starting graph has the wrong size");
  if (!is_chordal(g)) throw ContractError("graph mcmc: starting graph is not decomposable");
  return g;
}

void check_size(const ZDataset& zd, const GraphMcmcConfig& cfg) {
  cfg.validate();
  if (zd.d() > cfg.max_vertices) throw ContractError("graph mcmc: too many vertices for desk-scale search");
  if (zd.d() < 2) throw DomainError("graph mcmc: no legal edge toggles with fewer than 2 vertices");
}

bool recorded(int it, const GraphMcmcConfig& cfg) {
  return it >= cfg.burnin && (it - cfg.burnin + 1) % cfg.thin == 0;
}

bool mh_accept(double log_ratio, Rng& rng) {
  const double u = rng.uniform();
  return log_ratio >= 0.0 || std::log(u) < log_ratio;
}

void summarize_edges(GraphChainOutput& out) {
  const int d = out.d;
  out.edge_inclusion = MatrixXd::Zero(d, d);
  out.edge_se = MatrixXd::Zero(d, d);
  const std::size_t n = out.visited.size();
  std::vector<double> ind(n);
  for (int a = 0; a < d; ++a) {
    for (int b = a + 1; b < d; ++b) {
      double s = 0.0;
      for (std::size_t t = 0; t < n; ++t) {
        ind[t] = out.visited[t].has_edge(a, b) ? 1.0 : 0.0;
        s += ind[t];
      }
      out.edge_inclusion(a, b) = out.edge_inclusion(b, a) = s / static_cast<double>(n);
      out.edge_se(a, b) = out.edge_se(b, a) = batch_means_se(ind);
    }
  }
}

// Uniform legal toggle; returns the proposal and log q(G|G*) - log q(G*|G).
std::pair<Graph, double> propose_graph(const Graph& g, GraphCache& cache, Rng& rng) {
  const auto& fwd = cache.legal(g);
  if (fwd.empty()) throw DomainError("graph mcmc: no legal edge toggle");
  const auto [a, b] = fwd[rng.index(fwd.size())];
  Graph next = g.toggled(a, b);
  const double ratio = std::log(static_cast<double>(fwd.size())) - std::log(static_cast<double>(cache.legal(next).size()));
  return {std::move(next), ratio};
}

}  // namespace

GraphChainOutput graph_mcmc_collapsed(const ZDataset& zd, const GraphMcmcConfig& cfg) {
  check_size(zd, cfg);
  if (!zd.complete()) throw ContractError("collapsed graph sampler requires complete data");
  const int d = zd.d();
  const double g = cfg.g > 0.0 ? cfg.g : 1.0 / static_cast<double>(zd.n());
  const MatrixXd scatter = centered_scatter(zd.z);
  GraphCache cache;
  std::unordered_map<std::uint64_t, double> marg;
  auto target = [&](const Graph& gr, double* lm) {
    auto it = marg.find(gr.key());
    if (it == marg.end()) it = marg.emplace(gr.key(), hiw_log_marginal_scatter(scatter, zd.n(), cache.jt(gr), g).value).first;
    *lm = it->second;
    const double lp = log_graph_prior(gr, cfg.prior);
    return lp == kNegInf ? kNegInf : it->second + lp;
  };

  Rng rng(cfg.seed);
  GraphChainOutput out;
  out.d = d;
  out.seed = cfg.seed;
  out.sampler = "collapsed";
  Graph cur = initial_graph(cfg, d);
  double cur_m = 0.0;
  double cur_t = target(cur, &cur_m);
  long accepted = 0;
  for (int it = 0; it < cfg.iterations; ++it) {
    auto [prop, q] = propose_graph(cur, cache, rng);
    double m = 0.0;
    const double t = target(prop, &m);
    if (mh_accept(log_acceptance(cur_t, t, q), rng)) {
      cur = std::move(prop);
      cur_t = t;
      cur_m = m;
      ++accepted;
    }
    if (cfg.check_invariants && !running_intersection_holds(cache.jt(cur), d))
      throw Error("graph mcmc: running intersection violated");
    if (recorded(it, cfg)) {
      out.visited.push_back(cur);
      out.log_marginal.push_back(cur_m);
    }
  }
  out.acceptance_rate = static_cast<double>(accepted) / cfg.iterations;
  summarize_edges(out);
  return out;
}

namespace {

struct ZState {
  Graph graph;
  MatrixXd z;
  MatrixXd scatter;
  VectorXd mean;
  SpdMatrix sigma;
  VectorXd mu;
};

double log_centered_likelihood(const SpdMatrix& sigma, const MatrixXd& scatter, double n) {
  const double d = static_cast<double>(sigma.dim());
  return -0.5 * n * d * std::log(2.0 * std::numbers::pi) - 0.5 * n * sigma.logdet() -
         0.5 * sigma.solve(scatter).trace();
}

}  // namespace

GraphChainOutput graph_mcmc_missing(const ZDataset& zd, const GraphMcmcConfig& cfg) {
  check_size(zd, cfg);
  const int d = zd.d();
  const double n = static_cast<double>(zd.n());
  const double g = cfg.g > 0.0 ? cfg.g : 1.0 / n;
  const bool incomplete = !zd.complete();
  // Column 0 is observed everywhere, so every row qualifies for imputation.
  const Dataset dz = make_dataset(VectorXd::Zero(zd.n()), zd.z, zd.mask, zd.labels);
  const ModelIndex none = ModelIndex::null_model(d);
  const RegressionCoefficients plain{0.0, VectorXd(), 1.0};
  GraphCache cache;
  Rng rng(cfg.seed);

  auto log_missing = [&](const MatrixXd& z, const VectorXd& mu, const SpdMatrix& sigma) {
    return incomplete ? log_density_x_miss_given_y(dz, z, NuDraw{mu, sigma}, none, plain) : 0.0;
  };
  auto log_target = [&](const ZState& s) {
    const double lp = log_graph_prior(s.graph, cfg.prior);
    if (lp == kNegInf) return kNegInf;
    return lp + (1.0 - g) * log_centered_likelihood(s.sigma, s.scatter, n) +
           hiw_log_density(s.sigma, cache.jt(s.graph), g * n, g * s.scatter) +
           log_mvn_density(s.mu, s.mean, SpdMatrix(s.sigma.matrix() / n));
  };
  // log density of proposing `to`'s (Sigma, mu, Z_miss) from `from`'s Z.
  auto log_proposal = [&](const ZState& to, const ZState& from) {
    return hiw_log_density(to.sigma, cache.jt(to.graph), n, from.scatter) +
           log_mvn_density(to.mu, from.mean, SpdMatrix(to.sigma.matrix() / n)) +
           log_missing(to.z, to.mu, to.sigma);
  };
  auto propose = [&](const ZState& from, Graph graph) {
    SpdMatrix sigma = sample_hiw(cache.jt(graph), n, SpdMatrix(from.scatter), rng);
    VectorXd mu = sample_mvn(from.mean, SpdMatrix(sigma.matrix() / n), rng);
    MatrixXd z = from.z;
    if (incomplete) z = complete_matrix(dz, draw_x_miss(dz, NuDraw{mu, sigma}, rng).x_miss);
    return ZState{std::move(graph), z, centered_scatter(z), column_means(z), std::move(sigma), std::move(mu)};
  };

  // Start from column-mean imputation and a draw given the starting graph.
  MatrixXd z0 = zd.z;
  for (Index j = 0; j < zd.z.cols(); ++j) {
    double s = 0.0;
    int c = 0;
    for (Index i = 0; i < zd.n(); ++i)
      if (zd.mask(i, j)) s += zd.z(i, j), ++c;
    for (Index i = 0; i < zd.n(); ++i)
      if (!zd.mask(i, j)) z0(i, j) = s / c;
  }
  const Graph g0 = initial_graph(cfg, d);
  const MatrixXd sc0 = centered_scatter(z0);
  SpdMatrix sig0 = sample_hiw(cache.jt(g0), n, SpdMatrix(sc0), rng);
  ZState base{g0, z0, sc0, column_means(z0), sig0, column_means(z0)};
  ZState cur = propose(base, g0);
  double cur_t = log_target(cur);

  GraphChainOutput out;
  out.d = d;
  out.seed = cfg.seed;
  out.sampler = "missing";
  long accepted = 0;
  auto mh_move = [&](Graph graph, double log_q_graph) {
    ZState next = propose(cur, std::move(graph));
    const double t = log_target(next);
    double log_r = kNegInf;
    if (t != kNegInf) log_r = t - cur_t + log_proposal(cur, next) - log_proposal(next, cur) + log_q_graph;
    if (cur_t == kNegInf && t != kNegInf) log_r = 0.0;
    if (mh_accept(log_r, rng)) {
      cur = std::move(next);
      cur_t = t;
      return true;
    }
    return false;
  };

  for (int it = 0; it < cfg.iterations; ++it) {
    auto [prop, q] = propose_graph(cur.graph, cache, rng);
    if (mh_move(std::move(prop), q)) ++accepted;
    if (incomplete && cfg.refresh) mh_move(cur.graph, 0.0);
    if (cfg.check_invariants) {
      if (!running_intersection_holds(cache.jt(cur.graph), d)) throw Error("graph mcmc: running intersection violated");
    }
    if (recorded(it, cfg)) {
      const double off = max_offgraph_precision(cur.sigma, cur.graph);
      out.max_offgraph_precision = std::max(out.max_offgraph_precision, off);
      if (cfg.check_invariants && off > 1e-10) throw Error("graph mcmc: precision not zero on a non-edge");
      out.visited.push_back(cur.graph);
    }
  }
  out.acceptance_rate = static_cast<double>(accepted) / cfg.iterations;
  summarize_edges(out);
  return out;
}

std::vector<Graph> enumerate_graphs(int d) {
  if (d < 1 || d > 6) throw ContractError("enumerate_graphs supports 1 <= d <= 6");
  const int m = d * (d - 1) / 2;
  std::vector<Graph> out;
  for (std::uint64_t key = 0; key < (std::uint64_t{1} << m); ++key) {
    Graph g = Graph::from_key(d, key);
    if (is_chordal(g)) out.push_back(std::move(g));
  }
  return out;
}

GraphPosterior graph_posterior_exact(const ZDataset& zd, double g, const GraphPrior& prior) {
  if (!zd.complete()) throw ContractError("exact graph posterior requires complete data");
  const MatrixXd scatter = centered_scatter(zd.z);
  GraphPosterior out;
  std::vector<double> lt;
  for (auto& gr : enumerate_graphs(zd.d())) {
    const double lm = hiw_log_marginal_scatter(scatter, zd.n(), DecomposableGraph::make(gr).junction, g).value;
    const double lp = log_graph_prior(gr, prior);
    lt.push_back(lp == kNegInf ? kNegInf : lm + lp);
    out.graphs.push_back({std::move(gr), lm, 0.0});
  }
  double mx = kNegInf;
  for (double v : lt) mx = std::max(mx, v);
  if (mx == kNegInf) throw DomainError("exact graph posterior: every graph has zero mass");
  double z = 0.0;
  for (double v : lt) z += std::exp(v - mx);
  const int d = zd.d();
  out.edge_inclusion = MatrixXd::Zero(d, d);
  for (std::size_t k = 0; k < lt.size(); ++k) {
    auto& e = out.graphs[k];
    e.prob = std::exp(lt[k] - mx) / z;
    for (const auto& [a, b] : e.graph.edges()) {
      out.edge_inclusion(a, b) += e.prob;
      out.edge_inclusion(b, a) += e.prob;
    }
  }
  return out;
}

std::vector<std::pair<Graph, double>> graph_frequencies(const GraphChainOutput& chain) {
  std::map<std::uint64_t, std::size_t> counts;
  for (const auto& g : chain.visited) ++counts[g.key()];
  std::vector<std::pair<Graph, double>> out;
  for (const auto& [key, c] : counts)
    out.emplace_back(Graph::from_key(chain.d, key), static_cast<double>(c) / static_cast<double>(chain.visited.size()));
  return out;
}

}  // namespace bvsmiss
