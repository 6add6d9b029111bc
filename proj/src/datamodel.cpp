#include "bvsmiss/datamodel.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "bvsmiss/error.hpp"

namespace bvsmiss {

ModelIndex::ModelIndex(std::uint64_t bits, int p) : bits_(bits), p_(p) {
  if (p < 0 || p > kMaxVariables) throw ContractError("ModelIndex: p out of range");
  if (p < 64 && (bits >> p) != 0) throw ContractError("ModelIndex: bits beyond p");
}

ModelIndex ModelIndex::full_model(int p) {
  return {p == 0 ? 0 : (~std::uint64_t{0} >> (64 - p)), p};
}

ModelIndex ModelIndex::from_indices(const std::vector<int>& idx, int p) {
  std::uint64_t bits = 0;
  for (int j : idx) {
    if (j < 0 || j >= p) throw ContractError("ModelIndex: index out of range");
    bits |= std::uint64_t{1} << j;
  }
  return {bits, p};
}

std::vector<Index> ModelIndex::indices() const {
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(size()));
  for (int j = 0; j < p_; ++j)
    if (contains(j)) out.push_back(j);
  return out;
}

std::string ModelIndex::to_string() const {
  std::string s(static_cast<std::size_t>(p_), '0');
  for (int j = 0; j < p_; ++j)
    if (contains(j)) s[static_cast<std::size_t>(j)] = '1';
  return s;
}

bool lex_less(const ModelIndex& a, const ModelIndex& b) {
  for (int j = 0; j < std::min(a.p(), b.p()); ++j) {
    if (a.contains(j) != b.contains(j)) return !a.contains(j);
  }
  return a.p() < b.p();
}

Index Dataset::missing_count() const {
  return mask.size() - mask.cast<Index>().sum();
}

Dataset make_dataset(VectorXd y, MatrixXd x, BoolMatrix mask, std::vector<std::string> names,
                     std::string response_name) {
  const Index n = x.rows();
  const Index p = x.cols();
  if (n == 0 || p == 0) throw LoadError("dataset needs at least one row and one covariate");
  if (y.size() != n || mask.rows() != n || mask.cols() != p) {
    throw LoadError("dataset: inconsistent dimensions");
  }
  if (names.empty()) {
    for (Index j = 0; j < p; ++j) names.push_back("x" + std::to_string(j + 1));
  }
  if (static_cast<Index>(names.size()) != p) throw LoadError("dataset: wrong number of names");
  for (Index i = 0; i < n; ++i) {
    if (!std::isfinite(y(i))) {
      throw LoadError("missing or non-finite response at row " + std::to_string(i + 1));
    }
  }
  for (Index i = 0; i < n; ++i) {
    bool any = false;
    for (Index j = 0; j < p; ++j) {
      if (mask(i, j)) {
        if (!std::isfinite(x(i, j))) {
          throw LoadError("non-finite covariate at row " + std::to_string(i + 1) + ", column " +
                          names[static_cast<std::size_t>(j)]);
        }
        any = true;
      } else {
        x(i, j) = std::numeric_limits<double>::quiet_NaN();
      }
    }
    if (!any) throw LoadError("row " + std::to_string(i + 1) + " has no observed covariate");
  }
  Dataset d{std::move(y), std::move(x), std::move(mask), std::move(names), std::move(response_name), {}};
  for (Index j = 0; j < p; ++j) {
    ColumnStats st;
    double sum = 0.0;
    for (Index i = 0; i < n; ++i)
      if (d.mask(i, j)) {
        sum += d.x(i, j);
        ++st.observed;
      }
    if (st.observed < 2) {
      throw LoadError("column " + d.names[static_cast<std::size_t>(j)] +
                      " has fewer than 2 observed values");
    }
    st.mean = sum / st.observed;
    double ss = 0.0;
    for (Index i = 0; i < n; ++i)
      if (d.mask(i, j)) ss += (d.x(i, j) - st.mean) * (d.x(i, j) - st.mean);
    st.sd = std::sqrt(ss / (st.observed - 1));
    d.stats.push_back(st);
  }
  return d;
}

Dataset make_complete_dataset(VectorXd y, MatrixXd x) {
  BoolMatrix mask = BoolMatrix::Constant(x.rows(), x.cols(), true);
  return make_dataset(std::move(y), std::move(x), std::move(mask), {});
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        field_started = true;
        break;
      case '\r':
        break;
      case '\n':
        if (field_started || !field.empty() || !row.empty()) {
          row.push_back(std::move(field));
          rows.push_back(std::move(row));
        }
        row.clear();
        field.clear();
        field_started = false;
        break;
      default:
        field += c;
        field_started = true;
    }
  }
  if (in_quotes) throw LoadError("csv: unterminated quoted field");
  if (field_started || !field.empty() || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& raw, std::size_t row, const std::string& column) {
  const std::string s = trim(raw);
  double v = 0.0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (s.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw LoadError("parse error at row " + std::to_string(row) + ", column " + column +
                    ": '" + raw + "'");
  }
  return v;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Dataset load_dataset(const std::string& csv_text, const std::string& na_token,
                     const std::string& response_column) {
  const auto rows = parse_csv(csv_text);
  if (rows.empty()) throw LoadError("csv: missing header row");
  const auto& header = rows.front();
  int response = -1;
  std::vector<std::string> names;
  std::vector<std::size_t> cov_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string h = trim(header[c]);
    if (h == response_column && response < 0) {
      response = static_cast<int>(c);
    } else {
      names.push_back(h);
      cov_cols.push_back(c);
    }
  }
  if (response < 0) throw LoadError("csv: response column '" + response_column + "' not found");
  const Index n = static_cast<Index>(rows.size()) - 1;
  const Index p = static_cast<Index>(cov_cols.size());
  if (n < 1) throw LoadError("csv: no data rows");
  VectorXd y(n);
  MatrixXd x(n, p);
  BoolMatrix mask(n, p);
  for (Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i) + 1];
    const std::size_t line = static_cast<std::size_t>(i) + 1;
    if (r.size() != header.size()) {
      throw LoadError("csv: row " + std::to_string(line) + " has " + std::to_string(r.size()) +
                      " fields, header has " + std::to_string(header.size()));
    }
    const std::string& yv = r[static_cast<std::size_t>(response)];
    if (trim(yv) == na_token) {
      throw LoadError("missing response value at row " + std::to_string(line));
    }
    y(i) = parse_number(yv, line, response_column);
    for (Index j = 0; j < p; ++j) {
      const std::string& cell = r[cov_cols[static_cast<std::size_t>(j)]];
      if (trim(cell) == na_token) {
        mask(i, j) = false;
        x(i, j) = std::numeric_limits<double>::quiet_NaN();
      } else {
        mask(i, j) = true;
        x(i, j) = parse_number(cell, line, names[static_cast<std::size_t>(j)]);
      }
    }
  }
  return make_dataset(std::move(y), std::move(x), std::move(mask), std::move(names),
                      response_column);
}

std::string to_csv(const Dataset& d, const std::string& na_token) {
  std::ostringstream out;
  out << csv_escape(d.response_name);
  for (const auto& name : d.names) out << ',' << csv_escape(name);
  out << '\n';
  for (Index i = 0; i < d.n(); ++i) {
    out << format_double(d.y(i));
    for (Index j = 0; j < d.p(); ++j) {
      out << ',' << (d.mask(i, j) ? format_double(d.x(i, j)) : csv_escape(na_token));
    }
    out << '\n';
  }
  return out.str();
}

std::vector<MissingnessPattern> group_patterns(const Dataset& d) {
  std::vector<MissingnessPattern> patterns;
  std::map<std::vector<bool>, std::size_t> lookup;
  const Index p = d.p();
  for (Index i = 0; i < d.n(); ++i) {
    std::vector<bool> key(static_cast<std::size_t>(p));
    for (Index j = 0; j < p; ++j) key[static_cast<std::size_t>(j)] = d.mask(i, j);
    auto it = lookup.find(key);
    if (it == lookup.end()) {
      MissingnessPattern pat;
      for (Index j = 0; j < p; ++j) (key[static_cast<std::size_t>(j)] ? pat.observed : pat.missing).push_back(j);
      it = lookup.emplace(key, patterns.size()).first;
      patterns.push_back(std::move(pat));
    }
    patterns[it->second].rows.push_back(i);
  }
  std::stable_partition(patterns.begin(), patterns.end(),
                        [](const MissingnessPattern& pat) { return pat.missing.empty(); });
  return patterns;
}

std::pair<Dataset, SimTruth> simulate_dataset(const SimConfig& cfg) {
  const Index n = cfg.n;
  const Index p = cfg.p;
  if (n < 2 || p < 1) throw ContractError("simulate_dataset: need n >= 2 and p >= 1");
  if (cfg.mu_true.size() != p || cfg.sigma_true.rows() != p || cfg.sigma_true.cols() != p ||
      cfg.beta_true.size() != p || cfg.gamma_true.p() != p) {
    throw ContractError("simulate_dataset: dimension mismatch");
  }
  const SpdMatrix sigma(cfg.sigma_true);
  for (Index j = 0; j < p; ++j) {
    if ((cfg.beta_true(j) != 0.0) != cfg.gamma_true.contains(static_cast<int>(j))) {
      throw ContractError("simulate_dataset: beta_true support differs from gamma_true");
    }
  }
  if (!(cfg.sigma2_true > 0.0)) throw DomainError("simulate_dataset: sigma2_true must be positive");
  if (const auto* mar = std::get_if<Mar>(&cfg.mechanism)) {
    if (mar->driver < 0 || mar->driver >= p) throw ContractError("simulate_dataset: bad MAR driver");
  } else {
    const double rate = std::get<Mcar>(cfg.mechanism).rate;
    if (!(rate >= 0.0 && rate < 1.0)) throw ContractError("simulate_dataset: MCAR rate outside [0,1)");
  }

  Rng rng(cfg.seed);
  MatrixXd x(n, p);
  VectorXd y(n);
  const double sd = std::sqrt(cfg.sigma2_true);
  for (Index i = 0; i < n; ++i) {
    x.row(i) = sample_mvn(cfg.mu_true, sigma, rng).transpose();
    y(i) = cfg.alpha_true + x.row(i).dot(cfg.beta_true) + sd * rng.normal();
  }

  BoolMatrix mask = BoolMatrix::Constant(n, p, true);
  if (const auto* mar = std::get_if<Mar>(&cfg.mechanism)) {
    for (Index i = 0; i < n; ++i) {
      const double eta = mar->intercept + mar->slope * x(i, mar->driver);
      const double prob = 1.0 / (1.0 + std::exp(-eta));
      for (Index j = 0; j < p; ++j) {
        if (j == mar->driver) continue;
        if (rng.bernoulli(prob)) mask(i, j) = false;
      }
    }
  } else {
    const double rate = std::get<Mcar>(cfg.mechanism).rate;
    for (Index i = 0; i < n; ++i) {
      bool any = false;
      for (Index j = 0; j < p; ++j) {
        if (rate > 0.0 && rng.bernoulli(rate)) mask(i, j) = false;
        any = any || mask(i, j);
      }
      if (!any) mask(i, static_cast<Index>(rng.index(static_cast<std::size_t>(p)))) = true;
    }
  }

  MatrixXd masked = x;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < p; ++j)
      if (!mask(i, j)) masked(i, j) = std::numeric_limits<double>::quiet_NaN();
  Dataset d = make_dataset(std::move(y), std::move(masked), std::move(mask), {});
  return {std::move(d), SimTruth{cfg, std::move(x)}};
}

nlohmann::json truth_to_json(const SimTruth& truth) {
  const SimConfig& c = truth.config;
  auto vec = [](const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  std::vector<std::vector<double>> sigma;
  for (Index i = 0; i < c.sigma_true.rows(); ++i) sigma.push_back(vec(c.sigma_true.row(i).transpose()));
  nlohmann::json j;
  j["n"] = c.n;
  j["p"] = c.p;
  j["seed"] = c.seed;
  j["mu_true"] = vec(c.mu_true);
  j["sigma_true"] = sigma;
  j["gamma_true"] = c.gamma_true.to_string();
  j["alpha_true"] = c.alpha_true;
  j["beta_true"] = vec(c.beta_true);
  j["sigma2_true"] = c.sigma2_true;
  if (const auto* mar = std::get_if<Mar>(&c.mechanism)) {
    j["mechanism"] = {{"type", "MAR"}, {"driver", mar->driver}, {"intercept", mar->intercept},
                      {"slope", mar->slope}};
  } else {
    j["mechanism"] = {{"type", "MCAR"}, {"rate", std::get<Mcar>(c.mechanism).rate}};
  }
  return j;
}

}  // namespace bvsmiss
