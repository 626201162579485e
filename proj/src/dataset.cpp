#include "rtree/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace rtree {

namespace {

[[noreturn]] void parse_fail(const std::string& path, std::size_t line_no,
                             const std::string& what) {
  throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + what);
}

// from_chars-based double parse that insists the whole token is consumed.
bool parse_double(std::string_view tok, double& out) {
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) {
    // from_chars does not accept a leading '+'; LIBSVM labels often carry one.
    if (!tok.empty() && tok.front() == '+')
      return parse_double(tok.substr(1), out);
    return false;
  }
  return true;
}

bool parse_index(std::string_view tok, std::size_t& out) {
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

}  // namespace

Dataset::Dataset(std::vector<double> features, std::vector<double> labels,
                 std::size_t feature_count)
    : features_(std::move(features)),
      labels_(std::move(labels)),
      feature_count_(feature_count) {
  if (features_.size() != labels_.size() * feature_count_)
    throw std::invalid_argument("dataset: feature buffer size mismatch");
}

Dataset load_libsvm(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);

  struct SparseRow {
    double label;
    std::vector<std::pair<std::size_t, double>> entries;  // 1-based indices
  };
  std::vector<SparseRow> rows;
  std::size_t max_index = 0;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;  // blank line

    SparseRow row;
    if (!parse_double(tok, row.label) || !std::isfinite(row.label))
      parse_fail(path, line_no, "bad label '" + tok + "'");

    std::size_t prev_index = 0;
    while (ls >> tok) {
      auto colon = tok.find(':');
      if (colon == std::string::npos || colon == 0 || colon + 1 == tok.size())
        parse_fail(path, line_no, "expected idx:value, got '" + tok + "'");
      std::size_t idx;
      double val;
      if (!parse_index(std::string_view(tok).substr(0, colon), idx) || idx == 0)
        parse_fail(path, line_no, "bad feature index in '" + tok + "'");
      if (!parse_double(std::string_view(tok).substr(colon + 1), val) ||
          !std::isfinite(val))
        parse_fail(path, line_no, "bad feature value in '" + tok + "'");
      if (idx <= prev_index)
        parse_fail(path, line_no,
                   "feature indices must be strictly increasing (index " +
                       std::to_string(idx) + " after " +
                       std::to_string(prev_index) + ")");
      prev_index = idx;
      max_index = std::max(max_index, idx);
      row.entries.emplace_back(idx, val);
    }
    rows.push_back(std::move(row));
  }

  if (rows.empty()) throw std::runtime_error(path + ": no examples");

  const std::size_t n = rows.size();
  const std::size_t d = max_index;
  std::vector<double> features(n * d, 0.0);
  std::vector<double> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = rows[i].label;
    for (auto [idx, val] : rows[i].entries)
      features[i * d + (idx - 1)] = val;
  }
  return Dataset(std::move(features), std::move(labels), d);
}

Scaler fit_scaler(const Dataset& train) {
  const std::size_t d = train.feature_count();
  Scaler s;
  s.min.assign(d, std::numeric_limits<double>::infinity());
  s.max.assign(d, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < train.example_count(); ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      double v = train.feature(i, j);
      s.min[j] = std::min(s.min[j], v);
      s.max[j] = std::max(s.max[j], v);
    }
  }
  return s;
}

Dataset apply_scaler(const Scaler& s, const Dataset& d) {
  const std::size_t dim = d.feature_count();
  if (s.min.size() != dim || s.max.size() != dim)
    throw std::invalid_argument("scaler dimension does not match dataset");
  std::vector<double> features(d.example_count() * dim);
  std::vector<double> labels(d.labels().begin(), d.labels().end());
  for (std::size_t i = 0; i < d.example_count(); ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      double range = s.max[j] - s.min[j];
      double v = range > 0.0 ? (d.feature(i, j) - s.min[j]) / range : 0.0;
      features[i * dim + j] = std::clamp(v, 0.0, 1.0);
    }
  }
  return Dataset(std::move(features), std::move(labels), dim);
}

void save_scaler(const Scaler& s, const std::string& path) {
  nlohmann::json j;
  j["min"] = s.min;
  j["max"] = s.max;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

Scaler load_scaler(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": invalid scaler json: " + e.what());
  }
  if (!j.contains("min") || !j.contains("max"))
    throw std::runtime_error(path + ": scaler json needs 'min' and 'max'");
  Scaler s;
  s.min = j["min"].get<std::vector<double>>();
  s.max = j["max"].get<std::vector<double>>();
  if (s.min.size() != s.max.size())
    throw std::runtime_error(path + ": scaler min/max length mismatch");
  return s;
}

RobustConfig::RobustConfig(double eps) : scalar_(eps), is_scalar_(true) {
  if (!(eps >= 0.0))
    throw std::invalid_argument("epsilon must be non-negative");
}

RobustConfig::RobustConfig(std::vector<double> per_feature)
    : per_feature_(std::move(per_feature)), is_scalar_(false) {
  if (per_feature_.empty())
    throw std::invalid_argument("per-feature epsilon list is empty");
  for (double e : per_feature_)
    if (!(e >= 0.0))
      throw std::invalid_argument("epsilon must be non-negative");
}

bool RobustConfig::any_positive() const {
  if (is_scalar_) return scalar_ > 0.0;
  return std::any_of(per_feature_.begin(), per_feature_.end(),
                     [](double e) { return e > 0.0; });
}

void RobustConfig::check_dimension(std::size_t feature_count) const {
  if (!is_scalar_ && per_feature_.size() != feature_count)
    throw std::invalid_argument(
        "per-feature epsilon has " + std::to_string(per_feature_.size()) +
        " entries but data has " + std::to_string(feature_count) +
        " features");
}

RobustConfig RobustConfig::parse(const std::string& text) {
  std::vector<double> vals;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t comma = text.find(',', start);
    std::string tok = text.substr(
        start, comma == std::string::npos ? std::string::npos : comma - start);
    double v;
    if (!parse_double(tok, v) || !std::isfinite(v))
      throw std::invalid_argument("bad epsilon value '" + tok + "'");
    vals.push_back(v);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (vals.size() == 1) return RobustConfig(vals[0]);
  return RobustConfig(std::move(vals));
}

}  // namespace rtree
