#pragma once

// CSV ingestion, content digests, and JSON encoders for results.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <openssl/evp.h>

#include "json.hpp"
#include "kfs/dataset.hpp"
#include "kfs/experiments.hpp"
#include "kfs/optimize.hpp"

namespace kfs {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kSchema = "kfs/1";

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CsvTable {
  Dataset data;
  std::vector<std::string> feature_names;
  std::string target;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_row(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

/// Parses a whole field as a double; accepts nan/inf spellings so they can be
/// rejected as non-finite rather than as non-numeric.
inline bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace detail

/// Reads a CSV with a header row. `target` names the response column; every
/// other column whose first data value is numeric becomes a feature. Rows
/// with non-finite or unparsable numeric fields are rejected.
inline CsvTable read_csv(std::istream& in, const std::string& target) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("csv: empty input");
  const auto header_views = detail::split_row(line);
  std::vector<std::string> header(header_views.begin(), header_views.end());
  std::size_t target_col = header.size();
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == target) target_col = c;
  }
  if (target_col == header.size()) throw InputError("csv: target column '" + target + "' not found in header");

  std::vector<std::vector<double>> rows;
  std::vector<bool> numeric;
  std::size_t row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_row(line);
    if (fields.size() != header.size()) {
      throw InputError("csv row " + std::to_string(row_no) + ": expected " + std::to_string(header.size()) +
                       " fields, found " + std::to_string(fields.size()));
    }
    std::vector<double> values(fields.size(), 0.0);
    if (numeric.empty()) {
      numeric.resize(fields.size());
      for (std::size_t c = 0; c < fields.size(); ++c) {
        double v;
        numeric[c] = detail::parse_double(fields[c], v);
      }
      if (!numeric[target_col]) {
        throw InputError("csv row " + std::to_string(row_no) + ": target column is not numeric");
      }
    }
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (!numeric[c]) continue;
      if (!detail::parse_double(fields[c], values[c])) {
        throw InputError("csv row " + std::to_string(row_no) + ", column '" + header[c] + "': not a number");
      }
      if (!std::isfinite(values[c])) {
        throw InputError("csv row " + std::to_string(row_no) + ", column '" + header[c] + "': non-finite value");
      }
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw InputError("csv: no data rows");

  std::vector<std::size_t> feature_cols;
  CsvTable table;
  table.target = target;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c != target_col && numeric[c]) {
      feature_cols.push_back(c);
      table.feature_names.push_back(header[c]);
    }
  }
  if (feature_cols.empty()) throw InputError("csv: no numeric feature columns");

  Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(feature_cols.size()));
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < feature_cols.size(); ++k) {
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][feature_cols[k]];
    }
    y[static_cast<Eigen::Index>(i)] = rows[i][target_col];
  }
  table.data = Dataset(std::move(X), std::move(y));
  return table;
}

inline CsvTable read_csv_file(const std::string& path, const std::string& target) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open input file '" + path + "'");
  return read_csv(in, target);
}

inline std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

inline std::string file_sha256(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "' for hashing");
  std::ostringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

// ---------------------------------------------------------------------------
// JSON

/// 0-based indices to 1-based for output.
inline nlohmann::json one_based(const IndexSet& s) {
  nlohmann::json arr = nlohmann::json::array();
  for (auto l : s) arr.push_back(l + 1);
  return arr;
}

inline nlohmann::json to_json(const SelectionConfig& c) {
  nlohmann::json j;
  j["lambda"] = c.lambda;
  j["gamma"] = c.gamma;
  j["M"] = c.M;
  j["stepsize"] = c.stepsize ? nlohmann::json(*c.stepsize) : nlohmann::json("auto");
  j["max_iters"] = c.max_iters;
  j["tol"] = c.tol;
  j["support_eps"] = c.support_eps;
  j["tau"] = c.tau;
  j["seed"] = c.seed;
  j["max_rounds"] = c.max_rounds;
  return j;
}

inline nlohmann::json to_json(const SelectionResult& r) {
  nlohmann::json j;
  j["schema"] = kSchema;
  j["beta"] = std::vector<double>(r.beta_final.values().data(), r.beta_final.values().data() + r.beta_final.size());
  j["support"] = one_based(r.support);
  j["objective_history"] = r.objective_history;
  j["iterate_sup_changes"] = r.iterate_sup_changes;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["stepsize"] = r.stepsize;
  j["halvings"] = r.halvings;
  j["lipschitz_constant"] = r.lipschitz_constant;
  nlohmann::json rounds = nlohmann::json::array();
  for (const auto& rr : r.rounds) {
    rounds.push_back({{"pinned", one_based(rr.pinned)},
                      {"support", one_based(rr.support)},
                      {"iterations", rr.iterations},
                      {"final_objective", rr.final_objective}});
  }
  j["rounds"] = rounds;
  j["config"] = to_json(r.config);
  return j;
}

inline nlohmann::json to_json(const RocPoint& pt) {
  nlohmann::json tpr = nlohmann::json::object();
  for (const auto& [s, v] : pt.tpr_per_signal) tpr[std::to_string(s + 1)] = v;
  return {{"kernel", pt.kernel}, {"q", pt.q},         {"gamma", pt.gamma},      {"fpr", pt.fpr},
          {"tpr", tpr},          {"trials", pt.trials}, {"failures", pt.failures}};
}

inline nlohmann::json to_json(const TrendPoint& pt) {
  return {{"n", pt.n}, {"sup_dev", pt.sup_dev}, {"seeds", pt.seeds}};
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << text;
}

}  // namespace kfs
