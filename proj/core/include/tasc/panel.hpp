#ifndef TASC_PANEL_HPP
#define TASC_PANEL_HPP

#include <Eigen/Dense>

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace tasc {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Units-by-time outcome matrix. Row 0 is the target unit, rows 1..N-1 are
/// donors, and the first `t0` columns are pre-intervention.
///
/// Target cells after `t0` may hold quiet NaN when the outcome is absent or
/// treatment-contaminated; every other cell is finite. Instances are
/// immutable once constructed.
class PanelData {
public:
  PanelData(MatrixXd values, Index t0, std::vector<std::string> unit_labels = {},
            std::vector<std::string> time_labels = {});

  const MatrixXd& values() const noexcept { return values_; }
  Index n_units() const noexcept { return values_.rows(); }
  Index n_donors() const noexcept { return values_.rows() - 1; }
  Index n_times() const noexcept { return values_.cols(); }
  Index t0() const noexcept { return t0_; }
  Index n_post() const noexcept { return values_.cols() - t0_; }
  const std::vector<std::string>& unit_labels() const noexcept { return unit_labels_; }
  const std::vector<std::string>& time_labels() const noexcept { return time_labels_; }
  bool target_post_missing() const noexcept { return target_post_missing_; }

  VectorXd target_pre() const { return values_.row(0).head(t0_).transpose(); }
  VectorXd target_post() const { return values_.row(0).tail(n_post()).transpose(); }
  MatrixXd donors_pre() const { return values_.bottomRows(n_donors()).leftCols(t0_); }
  MatrixXd donors_post() const { return values_.bottomRows(n_donors()).rightCols(n_post()); }

  /// Copy with the target's post-intervention cells replaced.
  PanelData with_target_post(const VectorXd& post) const;

private:
  MatrixXd values_;
  Index t0_;
  std::vector<std::string> unit_labels_;
  std::vector<std::string> time_labels_;
  bool target_post_missing_ = false;
};

struct CsvOptions {
  bool has_header = true;  // header row of time labels plus a unit-label column
  Index target_row = 0;    // row of the target among the data rows
  Index t0 = 0;
};

/// Reads a units-by-time CSV. Lines starting with '#' are skipped. Empty
/// target cells after t0 become missing.
PanelData load_csv(std::istream& in, const CsvOptions& options);
PanelData load_csv_file(const std::string& path, const CsvOptions& options);

/// Writes values with shortest round-trip formatting; missing cells are empty.
void save_csv(std::ostream& out, const PanelData& panel, bool with_header = true);
void save_csv_file(const std::string& path, const PanelData& panel, bool with_header = true);

/// Metadata for label-free CSVs.
struct PanelSidecar {
  Index n_units = 0;
  Index t_total = 0;
  Index t0 = 0;
  std::string target_label;
};

PanelSidecar parse_sidecar(const std::string& json_text);
std::string sidecar_to_json(const PanelSidecar& sidecar);
/// Checks the sidecar against a loaded panel and relabels the target row.
PanelData apply_sidecar(const PanelData& panel, const PanelSidecar& sidecar);

enum class CenteringBasis { DonorsOnly, AllRows };

struct CenteredPanel {
  PanelData panel;
  VectorXd mean_trajectory;

  /// Adds the mean trajectory back to every row.
  PanelData uncenter() const;
  /// Adds the mean back to a target-row series covering columns [first, first+len).
  VectorXd uncenter_series(const VectorXd& series, Index first) const;
};

/// Subtracts the per-column mean of the basis rows from every row. In
/// AllRows mode the target only contributes where it is observed.
CenteredPanel mean_center(const PanelData& panel,
                          CenteringBasis basis = CenteringBasis::DonorsOnly);

struct PanelSplit {
  MatrixXd pre;
  MatrixXd post;
};

PanelSplit split(const PanelData& panel);

/// Reorders columns within each segment: new pre column j is old column
/// perm_pre[j], new post column j is old column t0 + perm_post[j]. Both
/// permutations are 0-based and relative to their segment.
PanelData permute_columns(const PanelData& panel, std::span<const Index> perm_pre,
                          std::span<const Index> perm_post);

/// Stacks panels vertically: series s of unit i lands at row s*N + i. Row 0
/// (the first panel's target) is the only target.
PanelData stack_multivariate(std::span<const PanelData> panels);

}  // namespace tasc

#endif  // TASC_PANEL_HPP
