#pragma once

// JSON and CSV serialization of results. Reals are rounded to 12
// significant digits; non-finite values are written as the strings "inf",
// "-inf" and "nan" in JSON and as the bare tokens in CSV.

#include <string>
#include <vector>

#include <json.hpp>

#include "bvsmiss/graphs.hpp"
#include "bvsmiss/search.hpp"

namespace bvsmiss {

std::string format_real(double v);
nlohmann::json real_json(double v);
/// Accepts numbers and the non-finite strings written by real_json.
double real_from_json(const nlohmann::json& j);

nlohmann::json summary_to_json(const PosteriorSummary& s, const std::vector<std::string>& names);
/// Columns gamma_bits, log_marginal, prob, mc_se.
std::string model_table_csv(const PosteriorSummary& s);

nlohmann::json chain_to_json(const ChainOutput& c);

nlohmann::json graph_to_json(const Graph& g);
nlohmann::json graph_chain_to_json(const GraphChainOutput& c, const std::vector<std::string>& labels);
std::string edge_inclusion_csv(const MatrixXd& inclusion, const MatrixXd& se,
                               const std::vector<std::string>& labels);

/// Columns gamma_bits, mean_shared, mean_fresh, var_shared, var_fresh, ratio.
std::string benchmark_csv(const BenchmarkReport& r);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace bvsmiss
