#include "qkd/evalkit.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <map>
#include <thread>
#include <tuple>

#include "json.hpp"
#include "qkd/error.hpp"
#include "qkd/io.hpp"
#include "qkd/rng.hpp"

namespace qkd::eval {

using models::StudentKind;
using ordered_json = nlohmann::ordered_json;

std::vector<FoldSplit> stratified_kfold(std::span<const int> labels, int k, std::uint64_t seed,
                                        std::span<const std::string> groups) {
  require(k >= 2, ErrorCode::BadConfig, "fold count must be >= 2");
  require(groups.empty() || groups.size() == labels.size(), ErrorCode::LengthMismatch,
          "group ids must align with labels");
  for (int y : labels) require(y == 0 || y == 1, ErrorCode::BadLabel, "labels must be 0 or 1");

  // Units are single samples, or whole groups when group ids are given.
  std::vector<std::vector<std::size_t>> units;
  if (groups.empty()) {
    units.resize(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) units[i] = {i};
  } else {
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      auto [it, fresh] = index.emplace(groups[i], units.size());
      if (fresh) units.emplace_back();
      units[it->second].push_back(i);
    }
  }

  std::vector<int> fold_of(labels.size(), 0);
  std::size_t offset = 0;
  for (int cls = 0; cls <= 1; ++cls) {
    std::vector<std::size_t> members;
    for (std::size_t u = 0; u < units.size(); ++u)
      if (labels[units[u].front()] == cls) members.push_back(u);
    require(members.size() >= static_cast<std::size_t>(k), ErrorCode::ClassTooSmall,
            "class " + std::to_string(cls) + " has " + std::to_string(members.size()) +
                " members, fewer than " + std::to_string(k) + " folds");
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(cls)}));
    rng.shuffle(members.begin(), members.end());
    for (std::size_t j = 0; j < members.size(); ++j) {
      const int f = static_cast<int>((offset + j) % static_cast<std::size_t>(k));
      for (std::size_t i : units[members[j]]) fold_of[i] = f;
    }
    offset += members.size();
  }

  std::vector<FoldSplit> folds(static_cast<std::size_t>(k));
  for (int f = 0; f < k; ++f) folds[f].fold_index = f;
  for (std::size_t i = 0; i < labels.size(); ++i)
    for (int f = 0; f < k; ++f)
      (fold_of[i] == f ? folds[f].val_indices : folds[f].train_indices).push_back(i);
  return folds;
}

Metrics binary_metrics(std::span<const int> predictions, std::span<const int> labels) {
  require(predictions.size() == labels.size(), ErrorCode::LengthMismatch,
          "predictions and labels differ in length");
  require(!labels.empty(), ErrorCode::Empty, "no predictions to score");
  long tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int p = predictions[i], y = labels[i];
    require((p == 0 || p == 1) && (y == 0 || y == 1), ErrorCode::BadLabel,
            "predictions and labels must be 0 or 1");
    if (p == 1 && y == 1) ++tp;
    else if (p == 1) ++fp;
    else if (y == 1) ++fn;
    else ++tn;
  }
  Metrics m;
  m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(labels.size());
  m.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

Metrics mean_metrics(std::span<const Metrics> folds) {
  require(!folds.empty(), ErrorCode::Empty, "no folds to average");
  Metrics m;
  for (const auto& f : folds) {
    m.accuracy += f.accuracy;
    m.precision += f.precision;
    m.recall += f.recall;
    m.f1 += f.f1;
  }
  const double n = static_cast<double>(folds.size());
  m.accuracy /= n;
  m.precision /= n;
  m.recall /= n;
  m.f1 /= n;
  return m;
}

GridReport run_grid(std::string dataset, std::uint64_t seed, std::span<const StudentKind> students,
                    std::span<const double> alphas, std::span<const double> temperatures,
                    std::span<const FoldSplit> folds, const CellFn& cell, int jobs) {
  require(!students.empty() && !alphas.empty() && !temperatures.empty() && !folds.empty(),
          ErrorCode::BadConfig, "grid needs students, alphas, temperatures and folds");
  std::vector<StudentKind> st(students.begin(), students.end());
  std::vector<double> al(alphas.begin(), alphas.end()), te(temperatures.begin(), temperatures.end());
  std::sort(st.begin(), st.end());
  std::sort(al.begin(), al.end());
  std::sort(te.begin(), te.end());

  struct Cell {
    std::size_t entry, fold;
  };
  GridReport report;
  report.dataset = std::move(dataset);
  report.seed = seed;
  std::vector<Cell> cells;
  for (auto s : st)
    for (double t : te)
      for (double a : al) {
        GridEntry e;
        e.student = s;
        e.alpha = a;
        e.temperature = t;
        e.folds.resize(folds.size());
        for (std::size_t f = 0; f < folds.size(); ++f) cells.push_back({report.entries.size(), f});
        report.entries.push_back(std::move(e));
      }

  std::vector<std::exception_ptr> errors(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      auto& e = report.entries[cells[i].entry];
      try {
        e.folds[cells[i].fold] = cell(e.student, e.alpha, e.temperature, folds[cells[i].fold]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int n = std::clamp(jobs, 1, static_cast<int>(cells.size()));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < n; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& err : errors)
    if (err) std::rethrow_exception(err);
  for (auto& e : report.entries) e.mean = mean_metrics(e.folds);
  return report;
}

const GridEntry& best_entry(const GridReport& report, StudentKind student) {
  const GridEntry* best = nullptr;
  auto better = [](const GridEntry& a, const GridEntry& b) {
    if (a.mean.f1 != b.mean.f1) return a.mean.f1 > b.mean.f1;
    if (a.mean.precision != b.mean.precision) return a.mean.precision > b.mean.precision;
    if (a.temperature != b.temperature) return a.temperature < b.temperature;
    return a.alpha < b.alpha;
  };
  for (const auto& e : report.entries)
    if (e.student == student && (!best || better(e, *best))) best = &e;
  require(best != nullptr, ErrorCode::IncompleteGrid,
          "no grid entries for student " + std::string(models::student_id(student)));
  return *best;
}

void check_complete(const GridReport& report, std::span<const double> alphas,
                    std::span<const double> temperatures) {
  require(!report.entries.empty(), ErrorCode::IncompleteGrid, "grid report has no entries");
  const std::size_t k = report.entries.front().folds.size();
  std::map<StudentKind, int> seen;
  for (const auto& e : report.entries) {
    require(e.folds.size() == k && k > 0, ErrorCode::IncompleteGrid,
            "grid entries disagree on the fold count");
    seen[e.student];
  }
  for (const auto& [student, unused] : seen)
    for (double t : temperatures)
      for (double a : alphas) {
        const auto n = std::count_if(report.entries.begin(), report.entries.end(), [&](const GridEntry& e) {
          return e.student == student && e.alpha == a && e.temperature == t;
        });
        require(n == 1, ErrorCode::IncompleteGrid,
                "missing or duplicate configuration " + std::string(models::student_id(student)) +
                    " alpha=" + io::format_double(a) + " T=" + io::format_double(t));
      }
}

namespace {

std::string metric_cells(const Metrics& m) {
  return io::format_fixed(m.accuracy, 4) + ", " + io::format_fixed(m.precision, 4) + ", " +
         io::format_fixed(m.recall, 4) + ", " + io::format_fixed(m.f1, 4);
}

ordered_json metrics_json(const Metrics& m) {
  ordered_json j;
  j["accuracy"] = m.accuracy;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["f1"] = m.f1;
  return j;
}

Metrics metrics_from(const nlohmann::json& j) {
  return {j.at("accuracy").get<double>(), j.at("precision").get<double>(),
          j.at("recall").get<double>(), j.at("f1").get<double>()};
}

ordered_json folds_json(const std::vector<Metrics>& folds) {
  auto a = ordered_json::array();
  for (const auto& m : folds) a.push_back(metrics_json(m));
  return a;
}

std::vector<Metrics> folds_from(const nlohmann::json& j) {
  std::vector<Metrics> out;
  for (const auto& f : j) out.push_back(metrics_from(f));
  return out;
}

}  // namespace

std::string render_text(const GridReport& report) {
  check_complete(report);
  std::vector<StudentKind> students;
  std::vector<double> temps;
  for (const auto& e : report.entries) {
    if (std::find(students.begin(), students.end(), e.student) == students.end())
      students.push_back(e.student);
    if (std::find(temps.begin(), temps.end(), e.temperature) == temps.end())
      temps.push_back(e.temperature);
  }
  std::sort(students.begin(), students.end());
  std::sort(temps.begin(), temps.end());

  std::string out = "dataset: " + report.dataset + "\nseed: " + std::to_string(report.seed) + "\n";
  out += "columns: Accuracy, Precision, Recall, F1 (mean over folds)\n";
  if (report.teacher) out += "\nTeacher, " + metric_cells(report.teacher->mean) + "\n";
  for (double t : temps) {
    const std::string tag = "T=" + io::format_double(t);
    out += "\n" + tag + "\n";
    for (auto s : students) {
      GridReport slice;
      for (const auto& e : report.entries)
        if (e.student == s && e.temperature == t) slice.entries.push_back(e);
      const auto& best = best_entry(slice, s);
      out += tag + ", " + std::string(models::display_name(s)) + ", " + metric_cells(best.mean) + "\n";
    }
  }
  out += "\nAll configurations\n";
  for (const auto& e : report.entries)
    out += "T=" + io::format_double(e.temperature) + ", alpha=" + io::format_double(e.alpha) + ", " +
           std::string(models::display_name(e.student)) + ", " + metric_cells(e.mean) + "\n";
  out += "\nBest configuration (mean F1)\n";
  for (auto s : students) {
    const auto& b = best_entry(report, s);
    out += std::string(models::display_name(s)) + ": T=" + io::format_double(b.temperature) +
           ", alpha=" + io::format_double(b.alpha) + "\n";
  }
  return out;
}

std::string to_json(const GridReport& report) {
  ordered_json j;
  j["dataset"] = report.dataset;
  j["seed"] = report.seed;
  auto entries = ordered_json::array();
  for (const auto& e : report.entries) {
    ordered_json je;
    je["student"] = std::string(models::student_id(e.student));
    je["alpha"] = e.alpha;
    je["temperature"] = e.temperature;
    je["folds"] = folds_json(e.folds);
    je["mean"] = metrics_json(e.mean);
    entries.push_back(std::move(je));
  }
  j["entries"] = std::move(entries);
  if (report.teacher) {
    ordered_json jt;
    jt["folds"] = folds_json(report.teacher->folds);
    jt["mean"] = metrics_json(report.teacher->mean);
    j["teacher"] = std::move(jt);
  }
  return j.dump(2) + "\n";
}

GridReport from_json(std::string_view text) {
  GridReport r;
  try {
    const auto j = nlohmann::json::parse(text);
    r.dataset = j.at("dataset").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& je : j.at("entries")) {
      GridEntry e;
      e.student = models::parse_student_kind(je.at("student").get<std::string>());
      e.alpha = je.at("alpha").get<double>();
      e.temperature = je.at("temperature").get<double>();
      e.folds = folds_from(je.at("folds"));
      e.mean = metrics_from(je.at("mean"));
      r.entries.push_back(std::move(e));
    }
    if (j.contains("teacher")) {
      TeacherEntry t;
      t.folds = folds_from(j["teacher"].at("folds"));
      t.mean = metrics_from(j["teacher"].at("mean"));
      r.teacher = std::move(t);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("report json: ") + e.what());
  }
  return r;
}

std::string precision_vs_alpha_csv(const GridReport& report) {
  std::string out = "student,dataset,T,alpha,precision\n";
  for (const auto& e : report.entries)
    out += std::string(models::student_id(e.student)) + "," + report.dataset + "," +
           io::format_double(e.temperature) + "," + io::format_double(e.alpha) + "," +
           io::format_double(e.mean.precision) + "\n";
  return out;
}

}  // namespace qkd::eval
