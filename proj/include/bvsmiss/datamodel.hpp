#pragma once

#include <bit>
#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "bvsmiss/gauss.hpp"

namespace bvsmiss {

using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Subset of covariates as a bit vector (bit j set = covariate j included).
class ModelIndex {
 public:
  static constexpr int kMaxVariables = 62;

  ModelIndex() = default;
  ModelIndex(std::uint64_t bits, int p);
  static ModelIndex null_model(int p) { return {0, p}; }
  static ModelIndex full_model(int p);
  static ModelIndex from_indices(const std::vector<int>& idx, int p);

  std::uint64_t bits() const { return bits_; }
  int p() const { return p_; }
  int size() const { return std::popcount(bits_); }
  bool contains(int j) const { return (bits_ >> j) & 1U; }
  std::vector<Index> indices() const;

  ModelIndex flipped(int j) const { return {bits_ ^ (std::uint64_t{1} << j), p_}; }
  /// "0101"-style string, covariate 0 first.
  std::string to_string() const;

  friend bool operator==(const ModelIndex&, const ModelIndex&) = default;
  /// Lexicographic order on the bit string (covariate 0 most significant).
  friend bool lex_less(const ModelIndex& a, const ModelIndex& b);

 private:
  std::uint64_t bits_ = 0;
  int p_ = 0;
};

struct ColumnStats {
  double mean = 0.0;
  double sd = 0.0;
  int observed = 0;
};

/// Response plus covariates with a missingness mask. x holds NaN in cells
/// whose mask entry is false. Construct through make_dataset or
/// load_dataset, which enforce the invariants.
struct Dataset {
  VectorXd y;
  MatrixXd x;
  BoolMatrix mask;
  std::vector<std::string> names;
  std::string response_name = "y";
  // Standardization metadata of the observed values; not applied.
  std::vector<ColumnStats> stats;

  Index n() const { return x.rows(); }
  Index p() const { return x.cols(); }
  Index missing_count() const;
  bool complete() const { return missing_count() == 0; }
};

/// Validates: y finite, x finite exactly where mask is true, every column
/// has >= 2 observed cells and every row >= 1 observed covariate.
Dataset make_dataset(VectorXd y, MatrixXd x, BoolMatrix mask, std::vector<std::string> names,
                     std::string response_name = "y");

/// Convenience for complete data (mask all true).
Dataset make_complete_dataset(VectorXd y, MatrixXd x);

Dataset load_dataset(const std::string& csv_text, const std::string& na_token = "NA",
                     const std::string& response_column = "y");

/// Inverse of load_dataset: response first, then covariates.
std::string to_csv(const Dataset& d, const std::string& na_token = "NA");

struct MissingnessPattern {
  std::vector<Index> observed;
  std::vector<Index> missing;
  std::vector<Index> rows;
};

/// Rows grouped by observed-index set; the fully observed pattern comes
/// first when present, the rest by first appearance.
std::vector<MissingnessPattern> group_patterns(const Dataset& d);

struct Mcar {
  double rate = 0.0;
};

/// Cell (i, j), j != driver, is missing with probability
/// logistic(intercept + slope * x[i, driver]).
struct Mar {
  int driver = 0;
  double intercept = 0.0;
  double slope = 1.0;
};

struct SimConfig {
  int n = 100;
  int p = 3;
  VectorXd mu_true;
  MatrixXd sigma_true;
  ModelIndex gamma_true;
  double alpha_true = 0.0;
  VectorXd beta_true;  // length p, zero off gamma_true
  double sigma2_true = 1.0;
  std::variant<Mcar, Mar> mechanism = Mcar{};
  std::uint64_t seed = 1;
};

struct SimTruth {
  SimConfig config;
  MatrixXd x_full;  // covariates before masking
};

/// Rows of x are N(mu, Sigma); y = alpha + x beta + N(0, sigma2). MCAR rows
/// that end up fully masked get one uniformly chosen cell restored.
std::pair<Dataset, SimTruth> simulate_dataset(const SimConfig& cfg);

nlohmann::json truth_to_json(const SimTruth& truth);

/// Comma-separated parsing with RFC-4180 quoting; shared by the CLI.
std::vector<std::vector<std::string>> parse_csv(const std::string& text);
std::string csv_escape(const std::string& field);

}  // namespace bvsmiss
