#include <algorithm>
#include <cmath>
#include <map>

#include "doctest.h"
#include "qkd/error.hpp"
#include "qkd/evalkit.hpp"
#include "qkd/rng.hpp"

using namespace qkd;
using namespace qkd::eval;
using models::StudentKind;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::IoError;
}

void check_partition(const std::vector<FoldSplit>& folds, std::size_t n) {
  std::vector<int> seen(n, 0);
  for (const auto& f : folds) {
    CHECK(std::is_sorted(f.val_indices.begin(), f.val_indices.end()));
    CHECK(std::is_sorted(f.train_indices.begin(), f.train_indices.end()));
    CHECK(f.val_indices.size() + f.train_indices.size() == n);
    for (auto i : f.val_indices) ++seen[i];
    std::vector<std::size_t> all = f.val_indices;
    all.insert(all.end(), f.train_indices.begin(), f.train_indices.end());
    std::sort(all.begin(), all.end());
    CHECK(std::adjacent_find(all.begin(), all.end()) == all.end());
  }
  CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
}

Metrics oracle(const std::vector<int>& p, const std::vector<int>& y) {
  double tp = 0, fp = 0, fn = 0, correct = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    correct += p[i] == y[i];
    tp += p[i] == 1 && y[i] == 1;
    fp += p[i] == 1 && y[i] == 0;
    fn += p[i] == 0 && y[i] == 1;
  }
  Metrics m;
  m.accuracy = correct / static_cast<double>(y.size());
  m.precision = tp + fp == 0 ? 0 : tp / (tp + fp);
  m.recall = tp + fn == 0 ? 0 : tp / (tp + fn);
  m.f1 = m.precision + m.recall == 0 ? 0 : 2 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

GridReport sample_report() {
  const std::vector<StudentKind> students = {StudentKind::ae_vqc, StudentKind::cnn1d};
  const std::vector<int> labels = {0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
  const auto folds = stratified_kfold(labels, 2, 3);
  return run_grid("synth", 3, students, kGridAlphas, kGridTemperatures, folds,
                  [](StudentKind s, double a, double t, const FoldSplit& f) {
                    const double base = s == StudentKind::cnn1d ? 0.9 : 0.6;
                    const double v = base + 0.01 * a - 0.001 * t + 0.0002 * f.fold_index;
                    return Metrics{v, v + 0.01, v - 0.01, v};
                  });
}

}  // namespace

TEST_CASE("stratified folds on small examples") {
  const std::vector<int> ten = {0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
  const auto f5 = stratified_kfold(ten, 5, 42);
  REQUIRE(f5.size() == 5);
  check_partition(f5, 10);
  for (const auto& f : f5) {
    REQUIRE(f.val_indices.size() == 2);
    CHECK(ten[f.val_indices[0]] + ten[f.val_indices[1]] == 1);
  }

  const std::vector<int> eleven = {1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0};
  const auto f11 = stratified_kfold(eleven, 5, 1);
  check_partition(f11, 11);
  std::vector<int> pos;
  for (const auto& f : f11) {
    int c = 0;
    for (auto i : f.val_indices) c += eleven[i];
    pos.push_back(c);
  }
  std::sort(pos.begin(), pos.end());
  CHECK(pos == std::vector<int>{1, 1, 1, 1, 2});

  const auto again = stratified_kfold(ten, 5, 42);
  for (std::size_t i = 0; i < 5; ++i) CHECK(again[i].val_indices == f5[i].val_indices);

  CHECK(code_of([&] { stratified_kfold(std::vector<int>{0, 0, 0, 1, 1}, 3, 0); }) ==
        ErrorCode::ClassTooSmall);
  CHECK(code_of([&] { stratified_kfold(ten, 1, 0); }) == ErrorCode::BadConfig);
  CHECK(code_of([&] { stratified_kfold(std::vector<int>{0, 2, 1, 1}, 2, 0); }) == ErrorCode::BadLabel);
}

TEST_CASE("stratified folds on random labels") {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const int k = 2 + static_cast<int>(rng.below(5));
    const std::size_t n = 2 * k + rng.below(200);
    std::vector<int> y(n);
    for (auto& v : y) v = rng.uniform() < 0.3 ? 1 : 0;
    for (int c = 0; c < 2; ++c)
      for (int j = 0; j < k; ++j) y[c * k + j] = c;
    const auto folds = stratified_kfold(y, k, rng.below(1000));
    REQUIRE(folds.size() == static_cast<std::size_t>(k));
    check_partition(folds, n);
    for (int c = 0; c < 2; ++c) {
      const double total = static_cast<double>(std::count(y.begin(), y.end(), c));
      for (const auto& f : folds) {
        const double in = static_cast<double>(
            std::count_if(f.val_indices.begin(), f.val_indices.end(), [&](auto i) { return y[i] == c; }));
        CHECK(std::abs(in - total / k) <= 1.0);
      }
    }
  }
}

TEST_CASE("grouped folds keep groups together") {
  std::vector<int> y;
  std::vector<std::string> g;
  for (int r = 0; r < 12; ++r)
    for (int w = 0; w < 3; ++w) {
      y.push_back(r % 2);
      g.push_back("rec" + std::to_string(r));
    }
  const auto folds = stratified_kfold(y, 3, 5, g);
  check_partition(folds, y.size());
  for (const auto& f : folds) {
    std::map<std::string, int> count;
    for (auto i : f.val_indices) ++count[g[i]];
    for (const auto& [name, c] : count) CHECK(c == 3);
  }
}

TEST_CASE("binary metrics") {
  const auto m = binary_metrics(std::vector<int>{1, 1, 0, 0}, std::vector<int>{1, 0, 1, 0});
  CHECK(m == Metrics{0.5, 0.5, 0.5, 0.5});
  const auto hand = binary_metrics(std::vector<int>{1, 1, 0, 0, 1}, std::vector<int>{1, 1, 1, 0, 0});
  CHECK(hand.accuracy == 0.6);
  CHECK(std::abs(hand.precision - 2.0 / 3) < 1e-15);
  CHECK(std::abs(hand.recall - 2.0 / 3) < 1e-15);
  CHECK(std::abs(hand.f1 - 2.0 / 3) < 1e-15);
  CHECK(binary_metrics(std::vector<int>{1, 0, 1}, std::vector<int>{1, 0, 1}) == Metrics{1, 1, 1, 1});
  const auto none = binary_metrics(std::vector<int>{0, 0}, std::vector<int>{1, 0});
  CHECK(none.precision == 0.0);
  CHECK(none.recall == 0.0);
  CHECK(none.f1 == 0.0);
  CHECK(none.accuracy == 0.5);

  Rng rng(4);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + rng.below(40);
    std::vector<int> p(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = static_cast<int>(rng.below(2));
      y[i] = static_cast<int>(rng.below(2));
    }
    const auto got = binary_metrics(p, y), want = oracle(p, y);
    CHECK(std::abs(got.accuracy - want.accuracy) < 1e-15);
    CHECK(std::abs(got.precision - want.precision) < 1e-15);
    CHECK(std::abs(got.recall - want.recall) < 1e-15);
    CHECK(std::abs(got.f1 - want.f1) < 1e-15);
  }
  CHECK(code_of([] { binary_metrics(std::vector<int>{1}, std::vector<int>{1, 0}); }) ==
        ErrorCode::LengthMismatch);
  CHECK(code_of([] { binary_metrics(std::vector<int>{}, std::vector<int>{}); }) == ErrorCode::Empty);
  CHECK(predict_label(0.0) == 1);
  CHECK(predict_label(-1e-12) == 0);

  const std::vector<Metrics> ms = {{0.2, 0.4, 0.6, 0.8}, {0.4, 0.6, 0.8, 1.0}};
  const auto mean = mean_metrics(ms);
  CHECK(std::abs(mean.accuracy - 0.3) < 1e-15);
  CHECK(std::abs(mean.f1 - 0.9) < 1e-15);
}

TEST_CASE("grid ordering, parallel determinism and tie-breaks") {
  const auto r = sample_report();
  REQUIRE(r.entries.size() == 12);
  CHECK(r.entries.front().student == StudentKind::cnn1d);
  CHECK(r.entries.front().temperature == 2.0);
  CHECK(r.entries.front().alpha == 0.3);
  CHECK(r.entries[1].alpha == 0.5);
  CHECK(r.entries[3].temperature == 4.0);
  CHECK(r.entries.back().student == StudentKind::ae_vqc);
  CHECK_NOTHROW(check_complete(r));

  const std::vector<StudentKind> students = {StudentKind::cnn1d, StudentKind::ae_vqc};
  const std::vector<int> labels = {0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
  const auto folds = stratified_kfold(labels, 2, 3);
  const auto par = run_grid("synth", 3, students, kGridAlphas, kGridTemperatures, folds,
                            [](StudentKind s, double a, double t, const FoldSplit& f) {
                              const double base = s == StudentKind::cnn1d ? 0.9 : 0.6;
                              const double v = base + 0.01 * a - 0.001 * t + 0.0002 * f.fold_index;
                              return Metrics{v, v + 0.01, v - 0.01, v};
                            },
                            4);
  CHECK(to_json(par) == to_json(r));

  const auto& best = best_entry(r, StudentKind::cnn1d);
  CHECK(best.alpha == 0.7);
  CHECK(best.temperature == 2.0);

  GridReport tie;
  for (double t : {4.0, 2.0})
    for (double a : {0.7, 0.3}) {
      GridEntry e;
      e.alpha = a;
      e.temperature = t;
      e.mean = {0.5, 0.5, 0.5, 0.5};
      tie.entries.push_back(e);
    }
  CHECK(best_entry(tie, StudentKind::cnn1d).temperature == 2.0);
  CHECK(best_entry(tie, StudentKind::cnn1d).alpha == 0.3);
  tie.entries[0].mean.precision = 0.6;
  CHECK(best_entry(tie, StudentKind::cnn1d).temperature == 4.0);
  CHECK(code_of([&] { best_entry(tie, StudentKind::resnet1d); }) == ErrorCode::IncompleteGrid);
}

TEST_CASE("fold means render to four decimals") {
  const std::vector<StudentKind> one = {StudentKind::cnn1d};
  const std::vector<double> a = {0.5}, t = {2.0};
  std::vector<FoldSplit> folds(5);
  for (int i = 0; i < 5; ++i) folds[i].fold_index = i;
  const double f1s[5] = {0.5, 0.7, 0.6, 0.6, 0.6};
  const auto r = run_grid("synth", 1, one, a, t, folds, [&](StudentKind, double, double, const FoldSplit& f) {
    return Metrics{0.9, 0.8, 0.7, f1s[f.fold_index]};
  });
  CHECK(std::abs(r.entries[0].mean.f1 - 0.6) < 1e-15);
  check_complete(r, a, t);
  CHECK(code_of([&] { check_complete(r); }) == ErrorCode::IncompleteGrid);
}

TEST_CASE("incomplete grids are rejected") {
  auto r = sample_report();
  r.entries.pop_back();
  CHECK(code_of([&] { check_complete(r); }) == ErrorCode::IncompleteGrid);
  CHECK(code_of([&] { render_text(r); }) == ErrorCode::IncompleteGrid);
  auto d = sample_report();
  d.entries[2].folds.pop_back();
  CHECK(code_of([&] { check_complete(d); }) == ErrorCode::IncompleteGrid);
}

TEST_CASE("report rendering and serialization") {
  auto r = sample_report();
  r.teacher = TeacherEntry{{{0.99, 0.98, 0.97, 0.975}}, {0.99, 0.98, 0.97, 0.975}};
  const auto text = render_text(r);
  CHECK(text.find("T=2, CNN, 0.9051, 0.9151, 0.8951, 0.9051\n") != std::string::npos);
  CHECK(text.find("T=4, VQC, 0.6031, 0.6131, 0.5931, 0.6031\n") != std::string::npos);
  CHECK(text.find("Teacher, 0.9900, 0.9800, 0.9700, 0.9750\n") != std::string::npos);

  const auto back = from_json(to_json(r));
  CHECK(to_json(back) == to_json(r));
  REQUIRE(back.entries.size() == r.entries.size());
  for (std::size_t i = 0; i < r.entries.size(); ++i) {
    CHECK(back.entries[i].mean == r.entries[i].mean);
    CHECK(back.entries[i].folds == r.entries[i].folds);
  }
  REQUIRE(back.teacher.has_value());
  CHECK(back.teacher->mean == r.teacher->mean);
  CHECK(code_of([] { from_json("{\"dataset\": 1}"); }) == ErrorCode::ParseError);
  CHECK(code_of([] { from_json("not json"); }) == ErrorCode::ParseError);

  const auto csv = precision_vs_alpha_csv(r);
  CHECK(csv.rfind("student,dataset,T,alpha,precision\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 13);
  CHECK(csv.find("cnn1d,synth,2,0.3,") != std::string::npos);
}
