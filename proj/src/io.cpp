#include "bvsmiss/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "bvsmiss/error.hpp"

namespace bvsmiss {

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

nlohmann::json real_json(double v) {
  if (!std::isfinite(v)) return format_real(v);
  return std::stod(format_real(v));
}

double real_from_json(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw ContractError("expected a real number in JSON");
}

namespace {

nlohmann::json real_array(const VectorXd& v) {
  auto a = nlohmann::json::array();
  for (Index k = 0; k < v.size(); ++k) a.push_back(real_json(v(k)));
  return a;
}

}  // namespace

nlohmann::json summary_to_json(const PosteriorSummary& s, const std::vector<std::string>& names) {
  nlohmann::json j;
  j["method"] = method_name(s.method);
  j["p"] = s.p;
  j["names"] = names;
  j["total_prob"] = real_json(s.total_prob());
  const auto& modal = s.modal();
  j["modal"] = {{"gamma", modal.gamma.to_string()}, {"prob", real_json(modal.prob)}};
  j["inclusion"] = real_array(s.inclusion);
  if (s.inclusion_se.size() > 0) j["inclusion_se"] = real_array(s.inclusion_se);
  auto models = nlohmann::json::array();
  for (const auto& m : s.models) {
    models.push_back({{"gamma", m.gamma.to_string()},
                      {"log_marginal", real_json(m.log_marginal)},
                      {"log_prior", real_json(m.log_prior)},
                      {"prob", real_json(m.prob)},
                      {"mc_se", real_json(m.mc_se)}});
  }
  j["models"] = models;
  return j;
}

std::string model_table_csv(const PosteriorSummary& s) {
  std::ostringstream out;
  out << "gamma_bits,log_marginal,prob,mc_se\n";
  for (const auto& m : s.models) {
    out << m.gamma.to_string() << ',' << format_real(m.log_marginal) << ',' << format_real(m.prob) << ','
        << format_real(m.mc_se) << '\n';
  }
  return out.str();
}

nlohmann::json chain_to_json(const ChainOutput& c) {
  nlohmann::json j;
  j["sampler"] = c.sampler;
  j["p"] = c.p;
  j["seed"] = c.seed;
  j["acceptance_rate"] = real_json(c.acceptance_rate);
  auto visited = nlohmann::json::array();
  auto lm = nlohmann::json::array();
  for (std::size_t t = 0; t < c.visited.size(); ++t) {
    visited.push_back(c.visited[t].to_string());
    lm.push_back(real_json(c.log_marginal[t]));
  }
  j["visited"] = visited;
  j["log_marginal"] = lm;
  return j;
}

nlohmann::json graph_to_json(const Graph& g) {
  auto edges = nlohmann::json::array();
  for (const auto& [a, b] : g.edges()) edges.push_back({a, b});
  return {{"d", g.d()}, {"edges", edges}};
}

nlohmann::json graph_chain_to_json(const GraphChainOutput& c, const std::vector<std::string>& labels) {
  nlohmann::json j;
  j["sampler"] = c.sampler;
  j["d"] = c.d;
  j["labels"] = labels;
  j["seed"] = c.seed;
  j["acceptance_rate"] = real_json(c.acceptance_rate);
  j["max_offgraph_precision"] = real_json(c.max_offgraph_precision);
  auto freq = nlohmann::json::array();
  for (const auto& [g, f] : graph_frequencies(c)) {
    auto e = graph_to_json(g);
    e["frequency"] = real_json(f);
    freq.push_back(e);
  }
  j["graphs"] = freq;
  return j;
}

std::string edge_inclusion_csv(const MatrixXd& inclusion, const MatrixXd& se,
                               const std::vector<std::string>& labels) {
  std::ostringstream out;
  out << "from,to,inclusion,mc_se\n";
  for (Index a = 0; a < inclusion.rows(); ++a)
    for (Index b = a + 1; b < inclusion.cols(); ++b)
      out << csv_escape(labels[static_cast<std::size_t>(a)]) << ',' << csv_escape(labels[static_cast<std::size_t>(b)])
          << ',' << format_real(inclusion(a, b)) << ',' << format_real(se.size() ? se(a, b) : 0.0) << '\n';
  return out.str();
}

std::string benchmark_csv(const BenchmarkReport& r) {
  std::ostringstream out;
  out << "gamma_bits,mean_shared,mean_fresh,var_shared,var_fresh,ratio\n";
  for (const auto& row : r.rows) {
    out << row.gamma.to_string() << ',' << format_real(row.mean_shared) << ',' << format_real(row.mean_fresh) << ','
        << format_real(row.var_shared) << ',' << format_real(row.var_fresh) << ',' << format_real(row.ratio) << '\n';
  }
  return out.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw Error("failed writing '" + path + "'");
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw LoadError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace bvsmiss
