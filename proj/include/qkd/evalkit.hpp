#pragma once

// Cross-validation splits, binary metrics, the (alpha, T) grid and report
// rendering.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qkd/models.hpp"

namespace qkd::eval {

struct FoldSplit {
  int fold_index = 0;
  std::vector<std::size_t> train_indices;  // ascending
  std::vector<std::size_t> val_indices;    // ascending
};

/// Per-class seeded shuffle, then round-robin dealing into k folds. When
/// `groups` is non-empty, samples sharing a group id are kept in one fold and
/// the group takes the label of its first member.
std::vector<FoldSplit> stratified_kfold(std::span<const int> labels, int k, std::uint64_t seed,
                                        std::span<const std::string> groups = {});

struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  friend bool operator==(const Metrics&, const Metrics&) = default;
};

/// Precision, recall and F1 are 0 when their denominators vanish.
Metrics binary_metrics(std::span<const int> predictions, std::span<const int> labels);

/// Component-wise arithmetic mean.
Metrics mean_metrics(std::span<const Metrics> folds);

/// 1 when sigmoid(z) >= 0.5.
inline int predict_label(double logit) { return logit >= 0.0 ? 1 : 0; }

struct GridEntry {
  models::StudentKind student = models::StudentKind::cnn1d;
  double alpha = 0.0;
  double temperature = 1.0;
  std::vector<Metrics> folds;
  Metrics mean;
};

struct TeacherEntry {
  std::vector<Metrics> folds;
  Metrics mean;
};

struct GridReport {
  std::string dataset;
  std::uint64_t seed = 0;
  std::vector<GridEntry> entries;
  std::optional<TeacherEntry> teacher;
};

inline const std::vector<double> kGridAlphas = {0.3, 0.5, 0.7};
inline const std::vector<double> kGridTemperatures = {2.0, 4.0};

/// Trains and scores one (student, alpha, T, fold) cell.
using CellFn = std::function<Metrics(models::StudentKind, double alpha, double temperature,
                                     const FoldSplit& fold)>;

/// Evaluates every cell, `jobs` at a time, and assembles entries sorted by
/// (student, T, alpha). Results do not depend on `jobs`.
GridReport run_grid(std::string dataset, std::uint64_t seed,
                    std::span<const models::StudentKind> students, std::span<const double> alphas,
                    std::span<const double> temperatures, std::span<const FoldSplit> folds,
                    const CellFn& cell, int jobs = 1);

/// Highest mean F1; ties go to higher precision, then lower T, then lower alpha.
const GridEntry& best_entry(const GridReport& report, models::StudentKind student);

/// Throws IncompleteGrid unless every student present has all alpha x T
/// configurations with the same number of folds.
void check_complete(const GridReport& report, std::span<const double> alphas = kGridAlphas,
                    std::span<const double> temperatures = kGridTemperatures);

/// One block per temperature with the best-alpha row per student
/// (`T=2, VQC, acc, prec, rec, f1`, 4 decimals), then every grid entry.
std::string render_text(const GridReport& report);

std::string to_json(const GridReport& report);
GridReport from_json(std::string_view text);

/// student,dataset,T,alpha,precision, one row per entry.
std::string precision_vs_alpha_csv(const GridReport& report);

}  // namespace qkd::eval
