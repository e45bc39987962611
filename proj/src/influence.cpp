#include "edbl/influence.hpp"

#include <cmath>
#include <stdexcept>

namespace edbl {

namespace {

void check_row(const Matrix& m, const char* name) {
    if (m.rows() != 1 || m.cols() == 0) {
        throw std::invalid_argument(std::string("influence: ") + name + " must be a non-empty row");
    }
}

Matrix leading_slice(const Matrix& row, std::size_t n) {
    Matrix out(1, n);
    for (std::size_t c = 0; c < n; ++c) out(0, c) = row(0, c);
    return out;
}

}  // namespace

double ib_factor(const Matrix& probs, const SoftLabel& label, const Matrix& h) {
    check_row(probs, "probs");
    check_row(h, "h");
    if (label.classes() != probs.cols()) throw std::invalid_argument("ib_factor: label width mismatch");
    double residual = 0.0;
    for (std::size_t c = 0; c < probs.cols(); ++c) {
        residual += std::abs(probs(0, c) - label.probs(0, c));
    }
    return residual * l1_norm(h);
}

double iib_factor_joint(const Matrix& f_full, const Matrix& f_old, const Matrix& f_prev,
                        const SoftLabel& label, const Matrix& h) {
    if (f_prev.cols() == 0) throw std::domain_error("iib_factor_joint: undefined without an old model");
    check_row(f_full, "f_full");
    check_row(f_prev, "f_prev");
    check_row(h, "h");
    const std::size_t m = f_prev.cols();
    if (f_old.rows() != 1 || f_old.cols() != m) {
        throw std::invalid_argument("iib_factor_joint: f_old width must match the teacher");
    }
    if (f_full.cols() < m || label.classes() != f_full.cols()) {
        throw std::invalid_argument("iib_factor_joint: width mismatch");
    }
    // Entrywise sum of the two head gradients, then L1. On old columns the
    // classification and distillation residuals add; new columns carry the
    // classification residual alone.
    double sum = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
        sum += std::abs(f_full(0, c) + f_old(0, c) - label.probs(0, c) - f_prev(0, c));
    }
    for (std::size_t c = m; c < f_full.cols(); ++c) {
        sum += std::abs(f_full(0, c) - label.probs(0, c));
    }
    return sum * l1_norm(h);
}

double iib_factor_joint(const Matrix& f_t, const Matrix& f_prev, const SoftLabel& label,
                        const Matrix& h) {
    if (f_prev.cols() == 0) throw std::domain_error("iib_factor_joint: undefined without an old model");
    check_row(f_t, "f_t");
    return iib_factor_joint(f_t, leading_slice(f_t, f_prev.cols()), f_prev, label, h);
}

double iib_factor(const Matrix& f_full, const Matrix& f_old, const Matrix& f_prev,
                  const SoftLabel& label, const Matrix& h, double alpha) {
    if (alpha < 0.0 || alpha > 1.0) throw std::domain_error("iib_factor: alpha outside [0, 1]");
    check_row(f_full, "f_full");
    check_row(f_prev, "f_prev");
    check_row(h, "h");
    const std::size_t m = f_prev.cols();
    if (f_old.rows() != 1 || f_old.cols() != m) {
        throw std::invalid_argument("iib_factor: f_old width must match the teacher");
    }
    if (f_full.cols() < m || label.classes() != f_full.cols()) {
        throw std::invalid_argument("iib_factor: width mismatch");
    }
    double ce_residual = 0.0;
    for (std::size_t c = 0; c < f_full.cols(); ++c) {
        ce_residual += std::abs(f_full(0, c) - label.probs(0, c));
    }
    double kd_residual = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
        kd_residual += std::abs(f_old(0, c) - f_prev(0, c));
    }
    return (ce_residual + alpha * kd_residual) * l1_norm(h);
}

double iib_factor(const Matrix& f_t, const Matrix& f_prev, const SoftLabel& label,
                  const Matrix& h, double alpha) {
    check_row(f_t, "f_t");
    check_row(f_prev, "f_prev");
    return iib_factor(f_t, leading_slice(f_t, f_prev.cols()), f_prev, label, h, alpha);
}

double iib_factor_mixed(const Matrix& f_full, const Matrix& f_old, const Matrix& f_prev,
                        const SoftLabel& label_i, const SoftLabel& label_j, double lambda,
                        const Matrix& h, double alpha) {
    if (lambda < 0.0 || lambda > 1.0) throw std::domain_error("iib_factor_mixed: lambda outside [0, 1]");
    return iib_factor(f_full, f_old, f_prev, SoftLabel::mix(label_i, label_j, lambda), h, alpha);
}

std::map<int, double> class_weight(const std::map<int, std::size_t>& class_counts, double gamma) {
    if (class_counts.empty()) throw std::domain_error("class_weight: no classes");
    double inv_sum = 0.0;
    for (const auto& [id, n] : class_counts) {
        if (n == 0) throw std::domain_error("class_weight: zero-count class");
        inv_sum += 1.0 / static_cast<double>(n);
    }
    std::map<int, double> weights;
    for (const auto& [id, n] : class_counts) {
        weights[id] = gamma * (1.0 / static_cast<double>(n)) / inv_sum;
    }
    return weights;
}

double iib_loss(double per_sample_ce, double factor, double class_term, double epsilon) {
    if (per_sample_ce < 0.0) throw std::domain_error("iib_loss: negative cross entropy");
    return class_term * per_sample_ce / std::max(factor, epsilon);
}

namespace {

void check_batch(const BalancingBatch& batch, std::size_t old_classes) {
    const std::size_t b = batch.student_logits.rows();
    if (old_classes == 0 || batch.teacher_logits.cols() != old_classes ||
        batch.teacher_logits.rows() != b) {
        throw std::logic_error("overall_balancing_loss: no frozen model output for this batch");
    }
    if (batch.features.rows() != b || !batch.labels_i.same_shape(batch.student_logits) ||
        !batch.labels_j.same_shape(batch.student_logits) || batch.mix.size() != b ||
        batch.class_term.size() != b) {
        throw std::invalid_argument("overall_balancing_loss: inconsistent batch fields");
    }
}

std::vector<double> compute_factors(const BalancingBatch& batch, const BalanceConfig& cfg,
                                    std::size_t old_classes) {
    const std::size_t b = batch.student_logits.rows();
    const Matrix f_full = softmax(batch.student_logits, 1.0);
    const Matrix f_prev = softmax(batch.teacher_logits, 1.0);
    Matrix student_old(b, old_classes);
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t c = 0; c < old_classes; ++c) student_old(i, c) = batch.student_logits(i, c);
    }
    const Matrix f_old = softmax(student_old, 1.0);

    std::vector<double> factors(b);
    for (std::size_t i = 0; i < b; ++i) {
        const SoftLabel yi = SoftLabel::from_row(batch.labels_i.row(i));
        const SoftLabel yj = SoftLabel::from_row(batch.labels_j.row(i));
        factors[i] = iib_factor_mixed(f_full.row(i), f_old.row(i), f_prev.row(i), yi, yj,
                                      batch.mix[i], batch.features.row(i), cfg.alpha);
    }
    return factors;
}

}  // namespace

BalancingResult overall_balancing_loss(const BalancingBatch& batch, const BalanceConfig& cfg,
                                       double gamma2, const KdConfig& kd,
                                       std::size_t old_classes) {
    check_batch(batch, old_classes);
    return overall_balancing_loss_with_factors(batch, compute_factors(batch, cfg, old_classes),
                                               cfg, gamma2, kd, old_classes);
}

BalancingResult overall_balancing_loss_with_factors(const BalancingBatch& batch,
                                                    const std::vector<double>& factors,
                                                    const BalanceConfig& cfg, double gamma2,
                                                    const KdConfig& kd,
                                                    std::size_t old_classes) {
    check_batch(batch, old_classes);
    const std::size_t b = batch.student_logits.rows();
    if (factors.size() != b) throw std::invalid_argument("overall_balancing_loss: one factor per sample");

    // Blended labels feed both the per-sample ce values and the ce gradient.
    Matrix mixed_labels(b, batch.student_logits.cols());
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t c = 0; c < mixed_labels.cols(); ++c) {
            mixed_labels(i, c) = batch.mix[i] * batch.labels_i(i, c) +
                                 (1.0 - batch.mix[i]) * batch.labels_j(i, c);
        }
    }
    const std::vector<double> ce = ce_per_sample(batch.student_logits, mixed_labels);
    const Matrix probs = softmax(batch.student_logits, 1.0);
    const LossResult kd_part = kd_loss(batch.student_logits, batch.teacher_logits, kd, old_classes);

    BalancingResult res;
    res.factors = factors;
    res.ce = ce;
    res.sample_weights.resize(b);
    res.d_logits = Matrix(b, batch.student_logits.cols(), 0.0);

    double weighted_ce = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        const double w = batch.class_term[i] / std::max(factors[i], cfg.epsilon);
        res.sample_weights[i] = w;
        weighted_ce += w * ce[i];
        for (std::size_t c = 0; c < probs.cols(); ++c) {
            res.d_logits(i, c) = w * (probs(i, c) - mixed_labels(i, c)) / static_cast<double>(b);
        }
    }
    weighted_ce /= static_cast<double>(b);
    res.ce_component = weighted_ce;
    res.kd_component = kd_part.value;
    res.value = weighted_ce + gamma2 * kd_part.value;
    res.d_logits.add_scaled(kd_part.d_logits, gamma2);
    return res;
}

}  // namespace edbl
