#pragma once

// Knowledge-distillation objective for a binary task. A scalar logit z is
// embedded as the class pair (0, z) so the C-class formulas apply unchanged.

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qkd/autodiff.hpp"
#include "qkd/signal.hpp"

namespace qkd::distill {

using ClassLogits = std::array<double, 2>;

inline ClassLogits class_logits(double z) { return {0.0, z}; }

struct KdConfig {
  double alpha = 0.5;
  double temperature = 2.0;
};

/// Throws BadAlpha / BadTemperature.
void validate(const KdConfig& cfg);

std::array<double, 2> softmax_T(const ClassLogits& logits, double T);

/// -sum_i p_i^(T) log q_i^(T), teacher p and student q.
double soft_loss(const ClassLogits& teacher, const ClassLogits& student, double T);

/// Cross-entropy at T = 1 against a 0/1 label.
double hard_loss(const ClassLogits& student, int label);

/// (1 - alpha) T^2 soft_loss + alpha hard_loss.
double kd_loss(const ClassLogits& teacher, const ClassLogits& student, int label,
               const KdConfig& cfg);

/// d kd_loss / d z_s for the (0, z) embedding:
/// (1 - alpha) T (sigmoid(z_s/T) - sigmoid(z_t/T)) + alpha (sigmoid(z_s) - y).
double kd_loss_grad(double teacher_logit, double student_logit, int label, const KdConfig& cfg);

/// Batch mean of kd_loss over scalar logits.
double kd_loss_mean(std::span<const double> teacher_logits, std::span<const double> student_logits,
                    std::span<const int> labels, const KdConfig& cfg);

/// Autodiff node: mean kd_loss over a [B] logit vector.
ad::Var kd_loss(ad::Var student_logits, std::span<const double> teacher_logits,
                std::span<const int> labels, const KdConfig& cfg);

// ---------------------------------------------------------------------------
// Teacher oracle

/// Parses `index,logit` (or `index,logit0,logit1`, reduced to logit1 - logit0).
/// Rows must be sorted, 0-based and number exactly `expected_rows`.
std::vector<double> parse_teacher_logits(std::string_view text, std::size_t expected_rows);
std::vector<double> read_teacher_logits(const std::string& path, std::size_t expected_rows);
std::string format_teacher_logits(std::span<const double> logits);

/// Runs a stored proxy teacher in eval mode over the windows.
std::vector<double> proxy_teacher_logits(const std::string& checkpoint_path,
                                         std::span<const signal::EcgWindow> windows);

}  // namespace qkd::distill
