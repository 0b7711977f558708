#include "tasc/panel.hpp"

#include "tasc/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace tasc {

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> default_labels(Index n, const char* prefix) {
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i + 1));
  return out;
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// Splits one CSV record. Double-quoted fields may contain commas; "" escapes a quote.
std::vector<std::string> split_record(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
      was_quoted = true;
    } else if (c == ',') {
      cells.push_back(was_quoted ? cur : trim(cur));
      cur.clear();
      was_quoted = false;
    } else {
      cur += c;
    }
  }
  cells.push_back(was_quoted ? cur : trim(cur));
  return cells;
}

bool parse_double(const std::string& cell, double& out) {
  if (cell.empty()) return false;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

std::string format_double(double v) {
  if (!std::isfinite(v)) return {};
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void check_permutation(std::span<const Index> perm, Index n, const char* which) {
  if (static_cast<Index>(perm.size()) != n)
    throw ConfigError(std::string(which) + " permutation has length " +
                      std::to_string(perm.size()) + ", expected " + std::to_string(n));
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  for (Index p : perm) {
    if (p < 0 || p >= n || seen[static_cast<std::size_t>(p)])
      throw ConfigError(std::string(which) + " permutation is not a permutation of 0.." +
                        std::to_string(n - 1));
    seen[static_cast<std::size_t>(p)] = true;
  }
}

}  // namespace

PanelData::PanelData(MatrixXd values, Index t0, std::vector<std::string> unit_labels,
                     std::vector<std::string> time_labels)
    : values_(std::move(values)),
      t0_(t0),
      unit_labels_(std::move(unit_labels)),
      time_labels_(std::move(time_labels)) {
  const Index n = values_.rows();
  const Index t = values_.cols();
  if (n < 2) throw ConfigError("panel needs at least 2 units, got " + std::to_string(n));
  if (t < 2) throw ConfigError("panel needs at least 2 time points, got " + std::to_string(t));
  if (t0_ < 1 || t0_ >= t)
    throw ConfigError("t0 = " + std::to_string(t0_) + " outside [1, " + std::to_string(t - 1) + "]");
  if (unit_labels_.empty()) unit_labels_ = default_labels(n, "unit");
  if (time_labels_.empty()) time_labels_ = default_labels(t, "");
  if (static_cast<Index>(unit_labels_.size()) != n)
    throw ConfigError("unit label count does not match row count");
  if (static_cast<Index>(time_labels_.size()) != t)
    throw ConfigError("time label count does not match column count");
  if (!values_.bottomRows(n - 1).allFinite())
    throw ConfigError("donor rows must be finite");
  if (!values_.row(0).head(t0_).allFinite())
    throw ConfigError("target pre-intervention cells must be finite");
  target_post_missing_ = !values_.row(0).tail(t - t0_).allFinite();
  if (target_post_missing_) {
    // Normalise any non-finite marker to a quiet NaN.
    for (Index j = t0_; j < t; ++j)
      if (!std::isfinite(values_(0, j))) values_(0, j) = kMissing;
  }
}

PanelData PanelData::with_target_post(const VectorXd& post) const {
  if (post.size() != n_post()) throw ConfigError("post series length mismatch");
  MatrixXd v = values_;
  v.row(0).tail(n_post()) = post.transpose();
  return PanelData(std::move(v), t0_, unit_labels_, time_labels_);
}

PanelData load_csv(std::istream& in, const CsvOptions& options) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header;
  std::string line;
  bool header_pending = options.has_header;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line[0] == '#') continue;
    auto cells = split_record(line);
    if (header_pending) {
      header = std::move(cells);
      header_pending = false;
      continue;
    }
    rows.push_back(std::move(cells));
  }
  if (rows.empty()) throw ParseError("CSV contains no data rows");

  const std::size_t width = rows.front().size();
  for (std::size_t r = 0; r < rows.size(); ++r)
    if (rows[r].size() != width)
      throw ParseError("row " + std::to_string(r) + " has " + std::to_string(rows[r].size()) +
                           " cells, expected " + std::to_string(width),
                       static_cast<long>(r));
  if (options.has_header && header.size() != width)
    throw ParseError("header has " + std::to_string(header.size()) + " cells, expected " +
                     std::to_string(width));

  const std::size_t first_value = options.has_header ? 1 : 0;
  if (width <= first_value) throw ParseError("CSV has no value columns");
  const Index n = static_cast<Index>(rows.size());
  const Index t = static_cast<Index>(width - first_value);
  if (options.target_row < 0 || options.target_row >= n)
    throw ConfigError("target_row " + std::to_string(options.target_row) + " out of range");
  if (options.t0 < 1 || options.t0 >= t)
    throw ConfigError("t0 = " + std::to_string(options.t0) + " outside [1, " +
                      std::to_string(t - 1) + "]");

  // Target first, remaining rows in file order.
  std::vector<std::size_t> order{static_cast<std::size_t>(options.target_row)};
  for (std::size_t r = 0; r < rows.size(); ++r)
    if (r != static_cast<std::size_t>(options.target_row)) order.push_back(r);

  MatrixXd values(n, t);
  std::vector<std::string> unit_labels;
  for (Index i = 0; i < n; ++i) {
    const std::size_t src = order[static_cast<std::size_t>(i)];
    const auto& cells = rows[src];
    if (options.has_header) unit_labels.push_back(cells[0]);
    for (Index j = 0; j < t; ++j) {
      const std::string& cell = cells[first_value + static_cast<std::size_t>(j)];
      double v;
      if (parse_double(cell, v)) {
        values(i, j) = v;
      } else if (i == 0 && j >= options.t0 && cell.empty()) {
        values(i, j) = kMissing;
      } else {
        throw ParseError("row " + std::to_string(src) + " column " + std::to_string(j) +
                             ": cannot parse '" + cell + "' as a finite number",
                         static_cast<long>(src));
      }
    }
  }
  std::vector<std::string> time_labels;
  if (options.has_header) time_labels.assign(header.begin() + 1, header.end());
  return PanelData(std::move(values), options.t0, std::move(unit_labels), std::move(time_labels));
}

PanelData load_csv_file(const std::string& path, const CsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  return load_csv(in, options);
}

void save_csv(std::ostream& out, const PanelData& panel, bool with_header) {
  const auto& v = panel.values();
  if (with_header) {
    out << "unit";
    for (const auto& lbl : panel.time_labels()) out << ',' << quote_if_needed(lbl);
    out << '\n';
  }
  for (Index i = 0; i < v.rows(); ++i) {
    if (with_header) out << quote_if_needed(panel.unit_labels()[static_cast<std::size_t>(i)]);
    for (Index j = 0; j < v.cols(); ++j) {
      if (with_header || j > 0) out << ',';
      out << format_double(v(i, j));
    }
    out << '\n';
  }
}

void save_csv_file(const std::string& path, const PanelData& panel, bool with_header) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  save_csv(out, panel, with_header);
}

PanelSidecar parse_sidecar(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("sidecar: ") + e.what());
  }
  PanelSidecar s;
  try {
    s.n_units = j.at("n_units").get<Index>();
    s.t_total = j.at("t_total").get<Index>();
    s.t0 = j.at("t0").get<Index>();
    s.target_label = j.value("target_label", std::string{});
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("sidecar: ") + e.what());
  }
  return s;
}

std::string sidecar_to_json(const PanelSidecar& sidecar) {
  nlohmann::json j = {{"n_units", sidecar.n_units},
                      {"t_total", sidecar.t_total},
                      {"t0", sidecar.t0},
                      {"target_label", sidecar.target_label}};
  return j.dump(2);
}

PanelData apply_sidecar(const PanelData& panel, const PanelSidecar& sidecar) {
  if (sidecar.n_units != panel.n_units() || sidecar.t_total != panel.n_times() ||
      sidecar.t0 != panel.t0())
    throw ConfigError("sidecar dimensions do not match the panel");
  auto labels = panel.unit_labels();
  if (!sidecar.target_label.empty()) labels[0] = sidecar.target_label;
  return PanelData(panel.values(), panel.t0(), std::move(labels), panel.time_labels());
}

PanelData CenteredPanel::uncenter() const {
  MatrixXd v = panel.values().rowwise() + mean_trajectory.transpose();
  return PanelData(std::move(v), panel.t0(), panel.unit_labels(), panel.time_labels());
}

VectorXd CenteredPanel::uncenter_series(const VectorXd& series, Index first) const {
  if (first < 0 || first + series.size() > mean_trajectory.size())
    throw ConfigError("series does not fit inside the panel's time range");
  return series + mean_trajectory.segment(first, series.size());
}

CenteredPanel mean_center(const PanelData& panel, CenteringBasis basis) {
  const auto& v = panel.values();
  VectorXd mean(v.cols());
  for (Index j = 0; j < v.cols(); ++j) {
    double sum = v.col(j).tail(panel.n_donors()).sum();
    Index count = panel.n_donors();
    if (basis == CenteringBasis::AllRows && std::isfinite(v(0, j))) {
      sum += v(0, j);
      ++count;
    }
    mean(j) = sum / static_cast<double>(count);
  }
  MatrixXd centered = v.rowwise() - mean.transpose();
  return {PanelData(std::move(centered), panel.t0(), panel.unit_labels(), panel.time_labels()),
          std::move(mean)};
}

PanelSplit split(const PanelData& panel) {
  return {panel.values().leftCols(panel.t0()), panel.values().rightCols(panel.n_post())};
}

PanelData permute_columns(const PanelData& panel, std::span<const Index> perm_pre,
                          std::span<const Index> perm_post) {
  const Index t0 = panel.t0();
  check_permutation(perm_pre, t0, "pre-intervention");
  check_permutation(perm_post, panel.n_post(), "post-intervention");
  MatrixXd v(panel.n_units(), panel.n_times());
  std::vector<std::string> labels(static_cast<std::size_t>(panel.n_times()));
  auto place = [&](Index dst, Index src) {
    v.col(dst) = panel.values().col(src);
    labels[static_cast<std::size_t>(dst)] = panel.time_labels()[static_cast<std::size_t>(src)];
  };
  for (Index j = 0; j < t0; ++j) place(j, perm_pre[static_cast<std::size_t>(j)]);
  for (Index j = 0; j < panel.n_post(); ++j)
    place(t0 + j, t0 + perm_post[static_cast<std::size_t>(j)]);
  return PanelData(std::move(v), t0, panel.unit_labels(), std::move(labels));
}

PanelData stack_multivariate(std::span<const PanelData> panels) {
  if (panels.empty()) throw ConfigError("stack_multivariate needs at least one panel");
  const auto& first = panels.front();
  const Index n = first.n_units();
  const Index t = first.n_times();
  for (const auto& p : panels) {
    if (p.n_units() != n || p.n_times() != t || p.t0() != first.t0())
      throw ConfigError("stacked panels must share N, T and t0");
    if (p.unit_labels() != first.unit_labels())
      throw ConfigError("stacked panels must share unit ordering");
  }
  const Index m = static_cast<Index>(panels.size());
  MatrixXd v(n * m, t);
  std::vector<std::string> labels;
  for (Index s = 0; s < m; ++s) {
    const auto& p = panels[static_cast<std::size_t>(s)];
    if (s > 0 && !p.values().row(0).allFinite())
      throw ConfigError("series " + std::to_string(s) +
                        ": only the first series may have a missing target row");
    v.middleRows(s * n, n) = p.values();
    for (const auto& lbl : p.unit_labels())
      labels.push_back(m == 1 ? lbl : lbl + "#" + std::to_string(s));
  }
  return PanelData(std::move(v), first.t0(), std::move(labels), first.time_labels());
}

}  // namespace tasc
