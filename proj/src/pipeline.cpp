#include "qkd/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "json.hpp"
#include "qkd/error.hpp"
#include "qkd/io.hpp"
#include "qkd/quantum.hpp"
#include "qkd/rng.hpp"

namespace qkd::pipeline {

using models::StudentKind;
using signal::EcgWindow;
using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Synthetic data

void validate(const SynthSpec& spec, int folds) {
  require(folds >= 2, ErrorCode::BadSpec, "folds must be >= 2");
  require(spec.n_windows >= 10 * static_cast<std::size_t>(folds), ErrorCode::BadSpec,
          "n_windows must be at least 10 x folds (" + std::to_string(10 * folds) + ")");
  require(std::isfinite(spec.balance) && spec.balance > 0.0 && spec.balance < 1.0, ErrorCode::BadSpec,
          "balance must lie strictly between 0 and 1");
  require(std::isfinite(spec.sigma) && spec.sigma >= 0.0, ErrorCode::BadSpec, "sigma must be >= 0");
  const auto n1 = static_cast<std::size_t>(std::llround(spec.balance * static_cast<double>(spec.n_windows)));
  require(n1 >= static_cast<std::size_t>(folds) && spec.n_windows - n1 >= static_cast<std::size_t>(folds),
          ErrorCode::BadSpec, "each class needs at least " + std::to_string(folds) + " windows");
}

namespace {

void add_bump(std::vector<double>& x, double centre, double amplitude) {
  const double inv = 1.0 / (2.0 * kBumpWidth * kBumpWidth);
  for (std::size_t t = 0; t < x.size(); ++t) {
    const double d = static_cast<double>(t) - centre;
    x[t] += amplitude * std::exp(-d * d * inv);
  }
}

}  // namespace

std::vector<EcgWindow> synthesize(const SynthSpec& spec) {
  validate(spec);
  const std::size_t n = spec.n_windows;
  const auto n1 = static_cast<std::size_t>(std::llround(spec.balance * static_cast<double>(n)));
  std::vector<int> labels(n, 0);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n1), 1);
  Rng order(derive_seed(spec.seed, {0}));
  order.shuffle(labels.begin(), labels.end());

  const double len = static_cast<double>(signal::kWindowLength);
  std::vector<EcgWindow> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(spec.seed, {1, i}));
    std::vector<double> x(signal::kWindowLength, 0.0);
    const double phase = rng.uniform(0.0, kBumpPeriod);
    if (labels[i] == 0) {
      // Bumps start one period before the window so the train is periodic across it.
      for (double c = phase - kBumpPeriod; c < len + kBumpPeriod; c += kBumpPeriod) add_bump(x, c, 1.0);
    } else {
      double c = phase - kBumpPeriod;
      for (int j = 0; c < len + kBumpPeriod; ++j) {
        add_bump(x, c, j % 2 == 0 ? 1.0 : kAlternateAmplitude);
        c += kBumpPeriod + rng.uniform(-kIrregularJitter, kIrregularJitter);
      }
    }
    if (spec.sigma > 0.0)
      for (double& v : x) v += spec.sigma * rng.normal();
    signal::zscore_inplace(x);
    out[i].samples = std::move(x);
    out[i].label = labels[i];
    out[i].source_id = "synth-" + std::to_string(i);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Run configuration

TrainSettings RunConfig::settings_for(StudentKind kind) const {
  const auto it = per_student.find(kind);
  return it != per_student.end() ? it->second : train;
}

namespace {

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorCode::BadConfig, "config: " + what); }

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) config_error(where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      config_error("unknown key '" + key + "' in " + where);
  }
}

double get_number(const json& v, const std::string& key) {
  if (!v.is_number()) config_error("'" + key + "' must be a number");
  return v.get<double>();
}

long long get_integer(const json& v, const std::string& key) {
  if (!v.is_number_integer()) config_error("'" + key + "' must be an integer");
  return v.get<long long>();
}

std::string get_string(const json& v, const std::string& key) {
  if (!v.is_string()) config_error("'" + key + "' must be a string");
  return v.get<std::string>();
}

std::size_t get_positive(const json& v, const std::string& key) {
  const long long x = get_integer(v, key);
  if (x < 1) config_error("'" + key + "' must be >= 1");
  return static_cast<std::size_t>(x);
}

StudentKind get_student(const json& v) {
  try {
    return models::parse_student_kind(get_string(v, "student"));
  } catch (const Error& e) {
    config_error(e.what());
  }
}

TrainSettings parse_train(const json& obj, const std::string& where, TrainSettings base) {
  check_keys(obj, where, {"epochs", "batch_size", "learning_rate"});
  if (obj.contains("epochs")) base.epochs = get_positive(obj["epochs"], "epochs");
  if (obj.contains("batch_size")) base.batch_size = get_positive(obj["batch_size"], "batch_size");
  if (obj.contains("learning_rate")) base.learning_rate = get_number(obj["learning_rate"], "learning_rate");
  return base;
}

}  // namespace

RunConfig parse_run_config(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::BadConfig, std::string("config: invalid JSON: ") + e.what());
  }
  check_keys(j, "config",
             {"dataset", "teacher_logits", "teacher_checkpoint", "student", "students", "alpha",
              "temperature", "epochs", "batch_size", "learning_rate", "per_student", "autoencoder",
              "spsa", "shot_noise", "folds", "seed", "output_dir", "jobs"});
  RunConfig c;
  if (j.contains("dataset")) c.dataset = get_string(j["dataset"], "dataset");
  if (j.contains("teacher_logits")) c.teacher_logits = get_string(j["teacher_logits"], "teacher_logits");
  if (j.contains("teacher_checkpoint"))
    c.teacher_checkpoint = get_string(j["teacher_checkpoint"], "teacher_checkpoint");
  if (j.contains("student") && j.contains("students")) config_error("give 'student' or 'students', not both");
  if (j.contains("student")) c.students = {get_student(j["student"])};
  if (j.contains("students")) {
    if (!j["students"].is_array() || j["students"].empty()) config_error("'students' must be a non-empty array");
    c.students.clear();
    for (const auto& s : j["students"]) c.students.push_back(get_student(s));
    std::sort(c.students.begin(), c.students.end());
    if (std::adjacent_find(c.students.begin(), c.students.end()) != c.students.end())
      config_error("'students' lists a student twice");
  }
  if (j.contains("alpha")) c.alpha = get_number(j["alpha"], "alpha");
  if (j.contains("temperature")) c.temperature = get_number(j["temperature"], "temperature");
  json train = json::object();
  for (const char* k : {"epochs", "batch_size", "learning_rate"})
    if (j.contains(k)) train[k] = j[k];
  c.train = parse_train(train, "config", c.train);
  if (j.contains("per_student")) {
    check_keys(j["per_student"], "per_student", {"cnn1d", "resnet1d"});
    for (const auto& [key, value] : j["per_student"].items())
      c.per_student[models::parse_student_kind(key)] = parse_train(value, "per_student." + key, c.train);
  }
  if (j.contains("autoencoder")) c.autoencoder = parse_train(j["autoencoder"], "autoencoder", c.autoencoder);
  if (j.contains("spsa")) {
    const auto& s = j["spsa"];
    check_keys(s, "spsa", {"steps", "batch_size", "target_step"});
    if (s.contains("steps")) c.spsa.steps = static_cast<long long>(get_positive(s["steps"], "spsa.steps"));
    if (s.contains("batch_size")) c.spsa.batch_size = get_positive(s["batch_size"], "spsa.batch_size");
    if (s.contains("target_step")) c.spsa.target_step = get_number(s["target_step"], "spsa.target_step");
  }
  if (j.contains("shot_noise") && !j["shot_noise"].is_null())
    c.shot_noise = get_integer(j["shot_noise"], "shot_noise");
  if (j.contains("folds")) c.folds = static_cast<int>(get_integer(j["folds"], "folds"));
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !(j["seed"].is_number_integer() && j["seed"].get<long long>() >= 0))
      config_error("'seed' must be a non-negative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("output_dir")) c.output_dir = get_string(j["output_dir"], "output_dir");
  if (j.contains("jobs")) c.jobs = static_cast<int>(get_integer(j["jobs"], "jobs"));
  return c;
}

RunConfig read_run_config(const std::string& path) { return parse_run_config(io::read_file(path)); }

void validate(const RunConfig& c) {
  distill::validate(distill::KdConfig{c.alpha, c.temperature});
  auto check_train = [](const TrainSettings& t, const std::string& where) {
    require(t.epochs >= 1 && t.batch_size >= 1, ErrorCode::BadConfig, where + ": epochs and batch_size must be >= 1");
    require(std::isfinite(t.learning_rate) && t.learning_rate > 0, ErrorCode::BadConfig,
            where + ": learning_rate must be > 0");
  };
  check_train(c.train, "train");
  for (const auto& [k, t] : c.per_student) check_train(t, "per_student." + std::string(models::student_id(k)));
  check_train(c.autoencoder, "autoencoder");
  require(c.spsa.steps >= 1 && c.spsa.batch_size >= 1, ErrorCode::BadConfig,
          "spsa: steps and batch_size must be >= 1");
  require(std::isfinite(c.spsa.target_step) && c.spsa.target_step > 0, ErrorCode::BadConfig,
          "spsa: target_step must be > 0");
  require(!c.shot_noise || (*c.shot_noise >= 1 && *c.shot_noise <= 1000000000), ErrorCode::BadConfig,
          "shot_noise must be a positive shot count");
  require(c.folds >= 2, ErrorCode::BadConfig, "folds must be >= 2");
  require(c.jobs >= 1, ErrorCode::BadConfig, "jobs must be >= 1");
  require(!c.students.empty(), ErrorCode::BadConfig, "no students selected");
}

// ---------------------------------------------------------------------------
// Training

namespace {

template <typename Step>
TrainLog run_epochs(std::span<const std::size_t> indices, const TrainSettings& s, Rng& rng, Step&& step) {
  require(!indices.empty(), ErrorCode::Empty, "training set is empty");
  TrainLog log;
  std::vector<std::size_t> order(indices.begin(), indices.end());
  for (std::size_t e = 0; e < s.epochs; ++e) {
    rng.shuffle(order.begin(), order.end());
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += s.batch_size) {
      const std::size_t end = std::min(order.size(), start + s.batch_size);
      total += step(std::span<const std::size_t>(order.data() + start, end - start));
      ++batches;
    }
    log.epoch_loss.push_back(total / static_cast<double>(batches));
  }
  return log;
}

}  // namespace

TrainLog train_classifier(models::Classifier& model, std::span<const EcgWindow> windows,
                          std::span<const std::size_t> indices, std::span<const double> teacher_logits,
                          const distill::KdConfig& kd, const TrainSettings& settings, std::uint64_t seed) {
  distill::validate(kd);
  require(teacher_logits.size() == windows.size(), ErrorCode::RowCountMismatch,
          "teacher logits do not align with the windows");
  optim::Adam opt(model.params().trainable(), optim::AdamConfig{settings.learning_rate});
  Rng rng(seed);
  std::vector<double> t;
  std::vector<int> y;
  return run_epochs(indices, settings, rng, [&](std::span<const std::size_t> batch) {
    t.clear();
    y.clear();
    for (auto i : batch) {
      t.push_back(teacher_logits[i]);
      y.push_back(windows[i].label);
    }
    ad::Graph g;
    const ad::Var z = model.forward(g, g.constant(models::window_batch(windows, batch)), ad::Mode::train, rng);
    const ad::Var loss = distill::kd_loss(z, t, y, kd);
    opt.zero_grad();
    g.backward(loss);
    opt.step();
    return loss.value()[0];
  });
}

TeacherResult train_teacher(std::span<const EcgWindow> windows, const TrainSettings& settings,
                            std::uint64_t seed) {
  Rng init(derive_seed(seed, {0}));
  TeacherResult r;
  r.model = std::make_unique<models::Cnn1d>(init, kTeacherWidth);
  std::vector<std::size_t> all(windows.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const std::vector<double> unused(windows.size(), 0.0);
  r.log = train_classifier(*r.model, windows, all, unused, distill::KdConfig{1.0, 1.0}, settings,
                           derive_seed(seed, {1}));
  const auto logits = models::predict_logits(*r.model, windows);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < windows.size(); ++i) correct += eval::predict_label(logits[i]) == windows[i].label;
  r.train_accuracy = static_cast<double>(correct) / static_cast<double>(windows.size());
  return r;
}

TrainLog train_autoencoder(models::Autoencoder& ae, std::span<const EcgWindow> windows,
                           std::span<const std::size_t> indices, const TrainSettings& settings,
                           std::uint64_t seed) {
  optim::Adam opt(ae.params().trainable(), optim::AdamConfig{settings.learning_rate});
  Rng rng(seed);
  return run_epochs(indices, settings, rng, [&](std::span<const std::size_t> batch) {
    ad::Tensor x = models::window_batch(windows, batch);
    ad::Graph g;
    const ad::Var loss = ad::mse_loss(ae.reconstruct(g, g.constant(x)), x);
    opt.zero_grad();
    g.backward(loss);
    opt.step();
    return loss.value()[0];
  });
}

std::vector<Latent> encode_latents(const models::Autoencoder& ae, std::span<const EcgWindow> windows,
                                   std::size_t batch_size) {
  std::vector<Latent> out(windows.size());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < windows.size(); start += batch_size) {
    const std::size_t end = std::min(windows.size(), start + batch_size);
    idx.clear();
    for (std::size_t i = start; i < end; ++i) idx.push_back(i);
    ad::Graph g;
    const auto& z = ae.encode(g, g.constant(models::window_batch(windows, idx))).value();
    for (std::size_t i = start; i < end; ++i)
      for (std::size_t d = 0; d < models::kLatentDim; ++d) out[i][d] = z[(i - start) * models::kLatentDim + d];
  }
  return out;
}

Latent LatentScaler::apply(const Latent& z) const {
  Latent r;
  for (std::size_t d = 0; d < z.size(); ++d) r[d] = (z[d] - mean[d]) * scale[d];
  return r;
}

LatentScaler fit_latent_scaler(std::span<const Latent> latents, std::span<const std::size_t> indices) {
  require(!indices.empty(), ErrorCode::Empty, "no latents to fit");
  LatentScaler s;
  const double n = static_cast<double>(indices.size());
  for (std::size_t d = 0; d < models::kLatentDim; ++d) {
    double sum = 0.0;
    for (auto i : indices) sum += latents[i][d];
    const double mu = sum / n;
    double ss = 0.0;
    for (auto i : indices) ss += (latents[i][d] - mu) * (latents[i][d] - mu);
    const double sd = std::sqrt(ss / n);
    s.mean[d] = mu;
    s.scale[d] = sd > 1e-12 ? (std::numbers::pi / 2) / sd : 0.0;
  }
  return s;
}

VqcTrainResult train_vqc(std::span<const Latent> inputs, std::span<const double> teacher_logits,
                         std::span<const int> labels, const distill::KdConfig& kd,
                         const SpsaSettings& settings, std::optional<long long> shots,
                         std::uint64_t seed) {
  distill::validate(kd);
  require(inputs.size() == teacher_logits.size() && inputs.size() == labels.size(),
          ErrorCode::LengthMismatch, "vqc training inputs, teacher logits and labels differ in length");
  require(!inputs.empty(), ErrorCode::Empty, "vqc training set is empty");
  quantum::VqcOptions opts;
  opts.shots = shots ? static_cast<int>(*shots) : 0;
  Rng shot_rng(derive_seed(seed, {3}));
  Rng batch_rng(derive_seed(seed, {2}));

  long long circuits = 0;
  std::vector<double> zs;
  auto batch_loss = [&](std::span<const std::size_t> batch, std::span<const double> theta) {
    double total = 0.0;
    for (auto i : batch) {
      const double z = quantum::vqc_forward(inputs[i], theta, opts, opts.shots > 0 ? &shot_rng : nullptr);
      ++circuits;
      total += distill::kd_loss(distill::class_logits(teacher_logits[i]), distill::class_logits(z), labels[i], kd);
    }
    return total / static_cast<double>(batch.size());
  };

  std::vector<std::size_t> order(inputs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  batch_rng.shuffle(order.begin(), order.end());
  std::size_t cursor = 0;
  const std::size_t bs = std::min(settings.batch_size, order.size());
  auto next_batch = [&] {
    if (cursor + bs > order.size()) {
      batch_rng.shuffle(order.begin(), order.end());
      cursor = 0;
    }
    std::vector<std::size_t> b(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                               order.begin() + static_cast<std::ptrdiff_t>(cursor + bs));
    cursor += bs;
    return b;
  };

  VqcTrainResult r;
  Rng init(derive_seed(seed, {0}));
  r.theta.resize(quantum::efficient_su2_param_count());
  for (double& v : r.theta) v = init.uniform(-std::numbers::pi, std::numbers::pi);

  const auto probe = next_batch();
  const auto cal = optim::spsa_calibrate([&](std::span<const double> th) { return batch_loss(probe, th); },
                                         r.theta, settings.steps, derive_seed(seed, {1}), 10, 10,
                                         settings.target_step);
  r.gains = cal.gains;
  r.calibration_evaluations = cal.evaluations;

  circuits = 0;
  optim::Spsa spsa(cal.gains, derive_seed(seed, {4}));
  for (long long k = 0; k < settings.steps; ++k) {
    const auto batch = next_batch();
    const auto step = spsa.step(r.theta, [&](std::span<const double> th) { return batch_loss(batch, th); });
    r.loss_history.push_back(0.5 * (step.loss_plus + step.loss_minus));
  }
  r.steps = spsa.iteration();
  r.spsa_evaluations = spsa.evaluations();
  r.circuit_evaluations = circuits;
  return r;
}

// ---------------------------------------------------------------------------
// Cells

Dataset make_dataset(std::string name, std::vector<EcgWindow> windows, std::vector<double> teacher_logits) {
  require(teacher_logits.size() == windows.size(), ErrorCode::RowCountMismatch,
          "teacher logits have " + std::to_string(teacher_logits.size()) + " rows, windows have " +
              std::to_string(windows.size()));
  Dataset d;
  d.name = std::move(name);
  d.labels.reserve(windows.size());
  for (const auto& w : windows) d.labels.push_back(w.label);
  d.windows = std::move(windows);
  d.teacher_logits = std::move(teacher_logits);
  return d;
}

std::vector<eval::FoldSplit> make_folds(const Dataset& data, int k, std::uint64_t seed) {
  std::vector<std::string> ids;
  std::set<std::string> distinct;
  bool named = true;
  for (const auto& w : data.windows) {
    named = named && !w.source_id.empty();
    ids.push_back(w.source_id);
    distinct.insert(w.source_id);
  }
  const bool grouped = named && distinct.size() < ids.size();
  return eval::stratified_kfold(data.labels, k, seed, grouped ? std::span<const std::string>(ids)
                                                              : std::span<const std::string>());
}

eval::TeacherEntry teacher_fold_metrics(const Dataset& data, std::span<const eval::FoldSplit> folds) {
  eval::TeacherEntry t;
  for (const auto& f : folds) {
    std::vector<int> preds, labels;
    for (auto i : f.val_indices) {
      preds.push_back(eval::predict_label(data.teacher_logits[i]));
      labels.push_back(data.labels[i]);
    }
    t.folds.push_back(eval::binary_metrics(preds, labels));
  }
  t.mean = eval::mean_metrics(t.folds);
  return t;
}

struct CellRunner::AeFold {
  models::Autoencoder ae;
  std::vector<Latent> inputs;  // scaled latents for every window
  explicit AeFold(Rng& init) : ae(init) {}
};

CellRunner::CellRunner(const Dataset& data, const RunConfig& cfg) : data_(data), cfg_(cfg) {
  validate(cfg_);
  require(cfg_.seed.has_value(), ErrorCode::BadConfig, "a seed is required");
}

std::shared_ptr<const CellRunner::AeFold> CellRunner::autoencoder_for(const eval::FoldSplit& fold) {
  std::shared_ptr<AeSlot> slot;
  {
    std::lock_guard lock(mutex_);
    auto& s = ae_slots_[fold.fold_index];
    if (!s) s = std::make_shared<AeSlot>();
    slot = s;
  }
  std::lock_guard lock(slot->mutex);
  if (!slot->ae) {
    const auto fi = static_cast<std::uint64_t>(fold.fold_index);
    Rng init(derive_seed(*cfg_.seed, {10, fi, 0}));
    auto f = std::make_shared<AeFold>(init);
    train_autoencoder(f->ae, data_.windows, fold.train_indices, cfg_.autoencoder,
                      derive_seed(*cfg_.seed, {10, fi, 1}));
    const auto raw = encode_latents(f->ae, data_.windows);
    const auto scaler = fit_latent_scaler(raw, fold.train_indices);
    f->inputs.reserve(raw.size());
    for (const auto& z : raw) f->inputs.push_back(scaler.apply(z));
    slot->ae = std::move(f);
  }
  return slot->ae;
}

CellResult CellRunner::run(StudentKind student, double alpha, double temperature,
                           const eval::FoldSplit& fold) {
  const distill::KdConfig kd{alpha, temperature};
  distill::validate(kd);
  const auto fi = static_cast<std::uint64_t>(fold.fold_index);
  const auto si = static_cast<std::uint64_t>(student);
  CellResult r;
  std::vector<int> preds, labels;
  for (auto i : fold.val_indices) labels.push_back(data_.labels[i]);

  if (student == StudentKind::ae_vqc) {
    const auto ae = autoencoder_for(fold);
    std::vector<Latent> x;
    std::vector<double> t;
    std::vector<int> y;
    for (auto i : fold.train_indices) {
      x.push_back(ae->inputs[i]);
      t.push_back(data_.teacher_logits[i]);
      y.push_back(data_.labels[i]);
    }
    auto res = train_vqc(x, t, y, kd, cfg_.spsa, cfg_.shot_noise, derive_seed(*cfg_.seed, {20, si, fi}));
    for (auto i : fold.val_indices)
      preds.push_back(eval::predict_label(quantum::vqc_forward(ae->inputs[i], res.theta)));
    r.checkpoint = ad::encode_checkpoint("autoencoder", ae->ae.params().all());
    quantum::ThetaCheckpoint ck;
    ck.theta = res.theta;
    ck.seed = derive_seed(*cfg_.seed, {20, si, fi});
    r.theta_json = quantum::encode_theta(ck);
    r.vqc = std::move(res);
  } else {
    Rng init(derive_seed(*cfg_.seed, {20, si, fi, 0}));
    auto model = models::make_classifier(student, init);
    train_classifier(*model, data_.windows, fold.train_indices, data_.teacher_logits, kd,
                     cfg_.settings_for(student), derive_seed(*cfg_.seed, {20, si, fi, 1}));
    std::vector<EcgWindow> val;
    for (auto i : fold.val_indices) val.push_back(data_.windows[i]);
    for (double z : models::predict_logits(*model, val)) preds.push_back(eval::predict_label(z));
    r.checkpoint = models::save_classifier(*model);
  }
  r.metrics = eval::binary_metrics(preds, labels);
  return r;
}

void configure_allocator() {
#if defined(__GLIBC__)
  // 32 MiB is the largest mmap threshold glibc accepts on 64-bit targets.
  mallopt(M_MMAP_THRESHOLD, 32 << 20);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 64 << 20);
#endif
}

}  // namespace qkd::pipeline
