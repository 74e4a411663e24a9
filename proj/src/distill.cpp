#include "qkd/distill.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "qkd/error.hpp"
#include "qkd/io.hpp"
#include "qkd/models.hpp"

namespace qkd::distill {

using namespace qkd::io;

namespace {

void check_temperature(double T) {
  require(std::isfinite(T) && T > 0.0, ErrorCode::BadTemperature,
          "temperature must be positive, got " + format_double(T));
}

void check_label(int label) {
  require(label == 0 || label == 1, ErrorCode::BadLabel,
          "label must be 0 or 1, got " + std::to_string(label));
}

// log softmax over two logits, computed around the larger one.
std::array<double, 2> log_softmax(const ClassLogits& v) {
  const double m = std::max(v[0], v[1]);
  const double tail = std::log1p(std::exp(std::min(v[0], v[1]) - m));
  return {(v[0] - m) - tail, (v[1] - m) - tail};
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

void validate(const KdConfig& cfg) {
  require(std::isfinite(cfg.alpha) && cfg.alpha >= 0.0 && cfg.alpha <= 1.0, ErrorCode::BadAlpha,
          "alpha must lie in [0, 1], got " + format_double(cfg.alpha));
  check_temperature(cfg.temperature);
}

std::array<double, 2> softmax_T(const ClassLogits& logits, double T) {
  check_temperature(T);
  const double m = std::max(logits[0], logits[1]);
  const double e0 = std::exp((logits[0] - m) / T), e1 = std::exp((logits[1] - m) / T);
  const double s = e0 + e1;
  return {e0 / s, e1 / s};
}

double soft_loss(const ClassLogits& teacher, const ClassLogits& student, double T) {
  check_temperature(T);
  const auto p = softmax_T(teacher, T);
  const auto lq = log_softmax({student[0] / T, student[1] / T});
  return -(p[0] * lq[0] + p[1] * lq[1]);
}

double hard_loss(const ClassLogits& student, int label) {
  check_label(label);
  return -log_softmax(student)[label];
}

double kd_loss(const ClassLogits& teacher, const ClassLogits& student, int label,
               const KdConfig& cfg) {
  validate(cfg);
  const double T = cfg.temperature;
  return (1.0 - cfg.alpha) * T * T * soft_loss(teacher, student, T) +
         cfg.alpha * hard_loss(student, label);
}

double kd_loss_grad(double teacher_logit, double student_logit, int label, const KdConfig& cfg) {
  validate(cfg);
  check_label(label);
  const double T = cfg.temperature;
  return (1.0 - cfg.alpha) * T * (sigmoid(student_logit / T) - sigmoid(teacher_logit / T)) +
         cfg.alpha * (sigmoid(student_logit) - label);
}

double kd_loss_mean(std::span<const double> teacher_logits, std::span<const double> student_logits,
                    std::span<const int> labels, const KdConfig& cfg) {
  require(teacher_logits.size() == student_logits.size() && labels.size() == student_logits.size(),
          ErrorCode::LengthMismatch, "kd loss: teacher, student and label counts differ");
  require(!labels.empty(), ErrorCode::Empty, "kd loss: empty batch");
  double s = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    s += kd_loss(class_logits(teacher_logits[i]), class_logits(student_logits[i]), labels[i], cfg);
  return s / static_cast<double>(labels.size());
}

ad::Var kd_loss(ad::Var student_logits, std::span<const double> teacher_logits,
                std::span<const int> labels, const KdConfig& cfg) {
  const auto& z = student_logits.value().vec();
  const double loss = kd_loss_mean(teacher_logits, z, labels, cfg);
  const double n = static_cast<double>(z.size());
  auto grad = std::make_shared<std::vector<double>>(z.size());
  for (std::size_t i = 0; i < z.size(); ++i)
    (*grad)[i] = kd_loss_grad(teacher_logits[i], z[i], labels[i], cfg) / n;
  const auto iz = student_logits.id();
  return student_logits.graph().record(
      ad::Tensor(ad::Shape{1}, loss), {student_logits}, [iz, grad](ad::Graph& g, const ad::Tensor& go) {
        if (!g.requires_grad(iz)) return;
        auto& gi = g.grad_buffer(iz).vec();
        for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += go[0] * (*grad)[i];
      });
}

std::vector<double> parse_teacher_logits(std::string_view text, std::size_t expected_rows) {
  const auto lines = split_lines(text);
  require(!lines.empty(), ErrorCode::ParseError, "teacher logits: empty file");
  const auto header = split_fields(lines[0]);
  const bool pair = header.size() == 3;
  require((header.size() == 2 && header[0] == "index" && header[1] == "logit") ||
              (pair && header[0] == "index" && header[1] == "logit0" && header[2] == "logit1"),
          ErrorCode::ParseError, "teacher logits: header must be index,logit or index,logit0,logit1");
  std::vector<double> logits;
  logits.reserve(lines.size() - 1);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const std::string ctx = "teacher logits row " + std::to_string(r);
    const auto f = split_fields(lines[r]);
    require(f.size() == header.size(), ErrorCode::ParseError, ctx + ": wrong field count");
    const long long idx = parse_int(f[0], ctx);
    require(idx == static_cast<long long>(r - 1), ErrorCode::ParseError,
            ctx + ": index " + std::to_string(idx) + " out of order");
    const double v = pair ? parse_double(f[2], ctx) - parse_double(f[1], ctx) : parse_double(f[1], ctx);
    require(std::isfinite(v), ErrorCode::ParseError, ctx + ": logit is not finite");
    logits.push_back(v);
  }
  require(logits.size() == expected_rows, ErrorCode::RowCountMismatch,
          "teacher logits: " + std::to_string(logits.size()) + " rows for " +
              std::to_string(expected_rows) + " windows");
  return logits;
}

std::vector<double> read_teacher_logits(const std::string& path, std::size_t expected_rows) {
  return parse_teacher_logits(read_file(path), expected_rows);
}

std::string format_teacher_logits(std::span<const double> logits) {
  std::string out = "index,logit\n";
  for (std::size_t i = 0; i < logits.size(); ++i)
    out += std::to_string(i) + "," + format_double(logits[i]) + "\n";
  return out;
}

std::vector<double> proxy_teacher_logits(const std::string& checkpoint_path,
                                         std::span<const signal::EcgWindow> windows) {
  require(file_exists(checkpoint_path), ErrorCode::MissingCheckpoint,
          "teacher checkpoint not found: " + checkpoint_path);
  const auto model = models::load_classifier(read_file(checkpoint_path));
  return models::predict_logits(*model, windows);
}

}  // namespace qkd::distill
