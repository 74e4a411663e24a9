#include "qkd/cli.hpp"

#include <chrono>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "qkd/distill.hpp"
#include "qkd/error.hpp"
#include "qkd/evalkit.hpp"
#include "qkd/io.hpp"
#include "qkd/models.hpp"
#include "qkd/pipeline.hpp"
#include "qkd/quantum.hpp"
#include "qkd/signal.hpp"

namespace qkd::cli {

namespace {

namespace fs = std::filesystem;
using models::StudentKind;
using pipeline::RunConfig;

struct RunFlags {
  std::string config;
  std::string dataset;
  std::string teacher_logits;
  std::string teacher_checkpoint;
  std::vector<std::string> students;
  std::optional<double> alpha;
  std::optional<double> temperature;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<double> learning_rate;
  std::optional<long long> spsa_steps;
  std::optional<long long> shots;
  std::optional<int> folds;
  std::uint64_t seed = 0;
  std::string output_dir;
  std::optional<int> jobs;
  bool quiet = false;
};

void add_run_flags(CLI::App& cmd, RunFlags& f, bool grid) {
  cmd.add_option("--config", f.config, "RunConfig JSON file")->check(CLI::ExistingFile);
  cmd.add_option("--dataset", f.dataset, "Window CSV");
  cmd.add_option("--teacher-logits", f.teacher_logits, "Teacher logits CSV");
  cmd.add_option("--teacher-checkpoint", f.teacher_checkpoint, "Proxy teacher checkpoint");
  if (grid) {
    cmd.add_option("--students", f.students, "Students to evaluate (default: all)");
  } else {
    cmd.add_option("--student", f.students, "cnn1d, resnet1d or ae_vqc")->expected(1);
    cmd.add_option("--alpha", f.alpha, "Hard-label weight in [0, 1]");
    cmd.add_option("--temperature", f.temperature, "Distillation temperature > 0");
  }
  cmd.add_option("--epochs", f.epochs, "Training epochs for classical students");
  cmd.add_option("--batch-size", f.batch_size, "Mini-batch size for classical students");
  cmd.add_option("--lr", f.learning_rate, "Adam learning rate for classical students");
  cmd.add_option("--spsa-steps", f.spsa_steps, "SPSA steps for the quantum student");
  cmd.add_option("--shots", f.shots, "Finite-shot readout for the quantum student");
  cmd.add_option("--folds", f.folds, "Cross-validation folds");
  cmd.add_option("--seed", f.seed, "Base seed")->required();
  cmd.add_option("--out-dir", f.output_dir, "Output directory");
  cmd.add_option("--jobs", f.jobs, "Worker threads");
  cmd.add_flag("--quiet", f.quiet, "Suppress progress on stderr");
}

RunConfig resolve_config(const RunFlags& f) {
  RunConfig c = f.config.empty() ? RunConfig{} : pipeline::read_run_config(f.config);
  if (!f.dataset.empty()) c.dataset = f.dataset;
  if (!f.teacher_logits.empty()) c.teacher_logits = f.teacher_logits;
  if (!f.teacher_checkpoint.empty()) c.teacher_checkpoint = f.teacher_checkpoint;
  if (!f.students.empty()) {
    c.students.clear();
    for (const auto& s : f.students) c.students.push_back(models::parse_student_kind(s));
    std::sort(c.students.begin(), c.students.end());
    c.students.erase(std::unique(c.students.begin(), c.students.end()), c.students.end());
  }
  if (f.alpha) c.alpha = *f.alpha;
  if (f.temperature) c.temperature = *f.temperature;
  auto override_train = [&](pipeline::TrainSettings& t) {
    if (f.epochs) t.epochs = *f.epochs;
    if (f.batch_size) t.batch_size = *f.batch_size;
    if (f.learning_rate) t.learning_rate = *f.learning_rate;
  };
  override_train(c.train);
  for (auto& [kind, t] : c.per_student) override_train(t);
  if (f.spsa_steps) c.spsa.steps = *f.spsa_steps;
  if (f.shots) c.shot_noise = *f.shots;
  if (f.folds) c.folds = *f.folds;
  c.seed = f.seed;
  if (!f.output_dir.empty()) c.output_dir = f.output_dir;
  if (f.jobs) c.jobs = *f.jobs;
  pipeline::validate(c);
  require(!c.dataset.empty(), ErrorCode::BadConfig, "no dataset given");
  return c;
}

std::string dataset_name(const std::string& path) { return fs::path(path).stem().string(); }

// Windows plus aligned teacher logits. Without a teacher source the logits
// are zero, which is only allowed when the soft term carries no weight.
pipeline::Dataset load_dataset(const RunConfig& c, bool needs_teacher) {
  auto windows = signal::read_window_csv(c.dataset);
  std::vector<double> logits;
  if (!c.teacher_logits.empty()) {
    logits = distill::read_teacher_logits(c.teacher_logits, windows.size());
  } else if (!c.teacher_checkpoint.empty()) {
    logits = distill::proxy_teacher_logits(c.teacher_checkpoint, windows);
  } else {
    require(!needs_teacher, ErrorCode::BadConfig,
            "teacher_logits or teacher_checkpoint is required when alpha < 1");
    logits.assign(windows.size(), 0.0);
  }
  return pipeline::make_dataset(dataset_name(c.dataset), std::move(windows), std::move(logits));
}

bool has_teacher(const RunConfig& c) { return !c.teacher_logits.empty() || !c.teacher_checkpoint.empty(); }

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorCode::IoError, "cannot create directory " + dir + ": " + ec.message());
}

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

class Progress {
 public:
  Progress(std::ostream& err, bool quiet) : err_(err), quiet_(quiet), start_(std::chrono::steady_clock::now()) {}

  void cell(StudentKind s, double alpha, double T, int fold, const eval::Metrics& m) {
    if (quiet_) return;
    std::lock_guard lock(mutex_);
    err_ << "[" << io::format_fixed(elapsed(), 1) << "s] " << models::student_id(s) << " alpha="
         << io::format_double(alpha) << " T=" << io::format_double(T) << " fold " << fold
         << ": accuracy " << io::format_fixed(m.accuracy, 4) << " f1 " << io::format_fixed(m.f1, 4) << "\n";
  }

  void note(const std::string& line) {
    if (quiet_) return;
    std::lock_guard lock(mutex_);
    err_ << "[" << io::format_fixed(elapsed(), 1) << "s] " << line << "\n";
  }

 private:
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }
  std::ostream& err_;
  bool quiet_;
  std::chrono::steady_clock::time_point start_;
  std::mutex mutex_;
};

std::string metrics_row(const std::string& label, const eval::Metrics& m) {
  return label + ", " + io::format_fixed(m.accuracy, 4) + ", " + io::format_fixed(m.precision, 4) + ", " +
         io::format_fixed(m.recall, 4) + ", " + io::format_fixed(m.f1, 4) + "\n";
}

// Per-fold rows and the fold mean for a single (student, alpha, T) run.
std::string render_distill(const eval::GridReport& report) {
  const auto& e = report.entries.front();
  std::string s = "dataset: " + report.dataset + "\nseed: " + std::to_string(report.seed) + "\n";
  s += "student: " + std::string(models::display_name(e.student)) + ", alpha=" + io::format_double(e.alpha) +
       ", T=" + io::format_double(e.temperature) + "\n";
  s += "columns: Accuracy, Precision, Recall, F1\n";
  for (std::size_t k = 0; k < e.folds.size(); ++k) s += metrics_row("fold " + std::to_string(k), e.folds[k]);
  s += metrics_row("mean", e.mean);
  if (report.teacher) s += metrics_row("Teacher", report.teacher->mean);
  return s;
}

// ---------------------------------------------------------------------------
// Subcommands

struct SynthArgs {
  std::string out;
  pipeline::SynthSpec spec;
  int folds = 5;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  pipeline::validate(a.spec, a.folds);
  const auto windows = pipeline::synthesize(a.spec);
  signal::write_window_csv(a.out, windows);
  out << "wrote " << windows.size() << " windows to " << a.out << "\n";
  return kExitOk;
}

struct DenoiseArgs {
  std::string in, out, wavelet = "db4";
  int levels = 4;
};

int cmd_denoise(const DenoiseArgs& a, std::ostream& out) {
  const auto wavelet = signal::parse_wavelet(a.wavelet);
  auto windows = signal::read_window_csv(a.in);
  for (auto& w : windows) w.samples = signal::denoise(w.samples, wavelet, a.levels);
  signal::write_window_csv(a.out, windows);
  out << "denoised " << windows.size() << " windows into " << a.out << "\n";
  return kExitOk;
}

struct TeacherArgs {
  std::string data, out;
  pipeline::TrainSettings train{20, 64, 1e-3};
  std::uint64_t seed = 0;
};

int cmd_teacher(const TeacherArgs& a, std::ostream& out) {
  require(a.train.epochs >= 1 && a.train.batch_size >= 1 && a.train.learning_rate > 0, ErrorCode::BadConfig,
          "epochs and batch size must be >= 1 and the learning rate > 0");
  const auto windows = signal::read_window_csv(a.data);
  const auto r = pipeline::train_teacher(windows, a.train, a.seed);
  nlohmann::ordered_json meta;
  meta["role"] = "proxy_teacher";
  meta["seed"] = a.seed;
  meta["epochs"] = a.train.epochs;
  meta["batch_size"] = a.train.batch_size;
  meta["learning_rate"] = a.train.learning_rate;
  meta["train_accuracy"] = r.train_accuracy;
  io::write_file(a.out, models::save_classifier(*r.model, meta.dump()));
  out << "training accuracy " << io::format_fixed(r.train_accuracy, 4) << "\n";
  out << "wrote " << a.out << "\n";
  return kExitOk;
}

struct LogitsArgs {
  std::string checkpoint, data, out;
};

int cmd_logits(const LogitsArgs& a, std::ostream& out) {
  const auto windows = signal::read_window_csv(a.data);
  const auto logits = distill::proxy_teacher_logits(a.checkpoint, windows);
  io::write_file(a.out, distill::format_teacher_logits(logits));
  out << "wrote " << logits.size() << " logits to " << a.out << "\n";
  return kExitOk;
}

int cmd_distill(const RunFlags& f, std::ostream& out, std::ostream& err) {
  RunConfig c = resolve_config(f);
  require(c.students.size() == 1, ErrorCode::BadConfig, "distill trains exactly one student; pass --student");
  const StudentKind student = c.students.front();
  const auto data = load_dataset(c, c.alpha < 1.0);
  const auto folds = pipeline::make_folds(data, c.folds, *c.seed);
  ensure_dir(c.output_dir);

  Progress progress(err, f.quiet);
  pipeline::CellRunner runner(data, c);
  std::vector<pipeline::CellResult> results(folds.size());
  const std::vector<double> alphas = {c.alpha}, temps = {c.temperature};
  const std::vector<StudentKind> students = {student};
  auto report = eval::run_grid(
      data.name, *c.seed, students, alphas, temps, folds,
      [&](StudentKind s, double alpha, double T, const eval::FoldSplit& fold) {
        auto r = runner.run(s, alpha, T, fold);
        progress.cell(s, alpha, T, fold.fold_index, r.metrics);
        const auto m = r.metrics;
        results[static_cast<std::size_t>(fold.fold_index)] = std::move(r);
        return m;
      },
      c.jobs);
  if (has_teacher(c)) report.teacher = pipeline::teacher_fold_metrics(data, folds);

  const std::string id(models::student_id(student));
  for (std::size_t k = 0; k < results.size(); ++k) {
    const std::string stem = id + "_fold" + std::to_string(k);
    io::write_file(join(c.output_dir, stem + ".ckpt"), results[k].checkpoint);
    if (results[k].vqc) {
      io::write_file(join(c.output_dir, stem + ".theta.json"), results[k].theta_json);
      progress.note(stem + ": " + std::to_string(results[k].vqc->steps) + " SPSA steps, " +
                    std::to_string(results[k].vqc->spsa_evaluations) + " loss evaluations");
    }
  }
  const std::string report_path = join(c.output_dir, "distill_" + id + ".json");
  io::write_file(report_path, eval::to_json(report));
  out << render_distill(report);
  out << "wrote " << report_path << "\n";
  return kExitOk;
}

int cmd_grid(const RunFlags& f, std::ostream& out, std::ostream& err) {
  RunConfig c = resolve_config(f);
  const auto data = load_dataset(c, true);
  const auto folds = pipeline::make_folds(data, c.folds, *c.seed);
  ensure_dir(c.output_dir);

  Progress progress(err, f.quiet);
  pipeline::CellRunner runner(data, c);
  auto report = eval::run_grid(
      data.name, *c.seed, c.students, eval::kGridAlphas, eval::kGridTemperatures, folds,
      [&](StudentKind s, double alpha, double T, const eval::FoldSplit& fold) {
        const auto m = runner(s, alpha, T, fold);
        progress.cell(s, alpha, T, fold.fold_index, m);
        return m;
      },
      c.jobs);
  report.teacher = pipeline::teacher_fold_metrics(data, folds);
  eval::check_complete(report);

  const std::string text = eval::render_text(report);
  io::write_file(join(c.output_dir, "grid_report.json"), eval::to_json(report));
  io::write_file(join(c.output_dir, "grid_report.txt"), text);
  io::write_file(join(c.output_dir, "precision_vs_alpha.csv"), eval::precision_vs_alpha_csv(report));
  out << text;
  out << "wrote grid_report.json, grid_report.txt and precision_vs_alpha.csv to " << c.output_dir << "\n";
  return kExitOk;
}

struct ReportArgs {
  std::string in, out, csv;
};

int cmd_report(const ReportArgs& a, std::ostream& out) {
  const auto report = eval::from_json(io::read_file(a.in));
  const std::string text = report.entries.size() == 1 ? render_distill(report) : eval::render_text(report);
  if (a.out.empty()) out << text;
  else io::write_file(a.out, text);
  if (!a.csv.empty()) io::write_file(a.csv, eval::precision_vs_alpha_csv(report));
  return kExitOk;
}

int cmd_paramcount(const std::vector<std::string>& names, std::ostream& out) {
  std::vector<StudentKind> kinds;
  for (const auto& n : names) kinds.push_back(models::parse_student_kind(n));
  if (kinds.empty()) kinds = {StudentKind::cnn1d, StudentKind::resnet1d, StudentKind::ae_vqc};
  Rng init(0);
  for (auto k : kinds) {
    if (k == StudentKind::ae_vqc) {
      models::Autoencoder ae(init);
      out << "ae_vqc circuit " << quantum::efficient_su2_param_count() << "\n";
      out << "ae_vqc encoder " << ae.encoder_param_count() << "\n";
      out << "ae_vqc autoencoder " << ae.count_params() << "\n";
    } else {
      out << models::student_id(k) << " " << models::make_classifier(k, init)->count_params() << "\n";
    }
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Quantum-classical knowledge distillation for 1-D ECG windows", "qkd"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate the synthetic two-class window CSV");
  s->add_option("--out", synth.out, "Output window CSV")->required();
  s->add_option("--n", synth.spec.n_windows, "Number of windows")->capture_default_str();
  s->add_option("--balance", synth.spec.balance, "Fraction of class-1 windows")->capture_default_str();
  s->add_option("--sigma", synth.spec.sigma, "Additive noise standard deviation")->capture_default_str();
  s->add_option("--folds", synth.folds, "Fold count the data must support")->capture_default_str();
  s->add_option("--seed", synth.spec.seed, "Seed")->required();

  DenoiseArgs denoise;
  auto* d = app.add_subcommand("denoise", "Wavelet-denoise every window of a CSV");
  d->add_option("--in", denoise.in, "Input window CSV")->required()->check(CLI::ExistingFile);
  d->add_option("--out", denoise.out, "Output window CSV")->required();
  d->add_option("--wavelet", denoise.wavelet, "haar or db4")->capture_default_str();
  d->add_option("--levels", denoise.levels, "Decomposition levels")->capture_default_str();

  TeacherArgs teacher;
  auto* t = app.add_subcommand("teacher", "Train the proxy teacher on hard labels");
  t->add_option("--data", teacher.data, "Training window CSV")->required()->check(CLI::ExistingFile);
  t->add_option("--out", teacher.out, "Output checkpoint")->required();
  t->add_option("--epochs", teacher.train.epochs, "Epochs")->capture_default_str();
  t->add_option("--batch-size", teacher.train.batch_size, "Mini-batch size")->capture_default_str();
  t->add_option("--lr", teacher.train.learning_rate, "Adam learning rate")->capture_default_str();
  t->add_option("--seed", teacher.seed, "Seed")->required();

  LogitsArgs logits;
  auto* l = app.add_subcommand("logits", "Export teacher logits aligned with a window CSV");
  l->add_option("--checkpoint", logits.checkpoint, "Teacher checkpoint")->required();
  l->add_option("--data", logits.data, "Window CSV")->required()->check(CLI::ExistingFile);
  l->add_option("--out", logits.out, "Output logits CSV")->required();

  RunFlags distill_flags;
  auto* ds = app.add_subcommand("distill", "Cross-validated distillation of one student");
  add_run_flags(*ds, distill_flags, false);

  RunFlags grid_flags;
  auto* g = app.add_subcommand("grid", "Full alpha x T grid over the students");
  add_run_flags(*g, grid_flags, true);

  ReportArgs report;
  auto* r = app.add_subcommand("report", "Render a report JSON as text");
  r->add_option("--in", report.in, "Report JSON")->required()->check(CLI::ExistingFile);
  r->add_option("--out", report.out, "Text output (default: stdout)");
  r->add_option("--csv", report.csv, "Also write the precision-vs-alpha CSV");

  std::vector<std::string> pc_students;
  auto* p = app.add_subcommand("paramcount", "Print trainable parameter counts");
  p->add_option("--student", pc_students, "Restrict to these students");

  try {
    app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (s->parsed()) return cmd_synth(synth, out);
    if (d->parsed()) return cmd_denoise(denoise, out);
    if (t->parsed()) return cmd_teacher(teacher, out);
    if (l->parsed()) return cmd_logits(logits, out);
    if (ds->parsed()) return cmd_distill(distill_flags, out, err);
    if (g->parsed()) return cmd_grid(grid_flags, out, err);
    if (r->parsed()) return cmd_report(report, out);
    if (p->parsed()) return cmd_paramcount(pc_students, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return is_validation_error(e.code()) ? kExitValidation : kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}

int main(int argc, char** argv) {
  pipeline::configure_allocator();
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace qkd::cli
