#include "edbl/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace edbl {

SoftLabel SoftLabel::one_hot(std::size_t index, std::size_t classes) {
    if (index >= classes) throw std::invalid_argument("SoftLabel::one_hot: index out of range");
    SoftLabel label;
    label.probs = Matrix(1, classes, 0.0);
    label.probs(0, index) = 1.0;
    return label;
}

SoftLabel SoftLabel::from_row(Matrix row) {
    if (row.rows() != 1 || row.cols() == 0) {
        throw std::invalid_argument("SoftLabel: expected a non-empty single row");
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < row.cols(); ++c) {
        const double v = row(0, c);
        if (v < -1e-9 || v > 1.0 + 1e-9) throw std::invalid_argument("SoftLabel: entry outside [0, 1]");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("SoftLabel: entries must sum to 1");
    SoftLabel label;
    label.probs = std::move(row);
    return label;
}

SoftLabel SoftLabel::mix(const SoftLabel& a, const SoftLabel& b, double lambda) {
    if (lambda < 0.0 || lambda > 1.0) throw std::domain_error("SoftLabel::mix: lambda outside [0, 1]");
    if (!a.probs.same_shape(b.probs)) throw std::invalid_argument("SoftLabel::mix: width mismatch");
    SoftLabel out;
    out.probs = Matrix(1, a.classes());
    for (std::size_t c = 0; c < a.classes(); ++c) {
        out.probs(0, c) = lambda * a.probs(0, c) + (1.0 - lambda) * b.probs(0, c);
    }
    return out;
}

namespace {

// Row-wise log-softmax, shift-stabilized.
Matrix log_softmax_rows(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        double max_v = -1e300;
        for (std::size_t j = 0; j < logits.cols(); ++j) max_v = std::max(max_v, logits(i, j));
        double sum = 0.0;
        for (std::size_t j = 0; j < logits.cols(); ++j) sum += std::exp(logits(i, j) - max_v);
        const double log_sum = std::log(sum);
        for (std::size_t j = 0; j < logits.cols(); ++j) out(i, j) = logits(i, j) - max_v - log_sum;
    }
    return out;
}

}  // namespace

LossResult ce_loss(const Matrix& logits, const Matrix& labels) {
    if (!logits.same_shape(labels)) throw std::invalid_argument("ce_loss: shape mismatch");
    const std::size_t batch = logits.rows();
    if (batch == 0) return {0.0, Matrix(0, logits.cols())};

    const Matrix log_probs = log_softmax_rows(logits);
    const Matrix probs = softmax(logits, 1.0);
    LossResult res;
    res.d_logits = Matrix(batch, logits.cols());
    double total = 0.0;
    for (std::size_t i = 0; i < batch; ++i) {
        for (std::size_t j = 0; j < logits.cols(); ++j) {
            total -= labels(i, j) * log_probs(i, j);
            res.d_logits(i, j) = (probs(i, j) - labels(i, j)) / static_cast<double>(batch);
        }
    }
    res.value = total / static_cast<double>(batch);
    return res;
}

std::vector<double> ce_per_sample(const Matrix& logits, const Matrix& labels) {
    if (!logits.same_shape(labels)) throw std::invalid_argument("ce_per_sample: shape mismatch");
    const Matrix log_probs = log_softmax_rows(logits);
    std::vector<double> losses(logits.rows(), 0.0);
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        for (std::size_t j = 0; j < logits.cols(); ++j) {
            losses[i] -= labels(i, j) * log_probs(i, j);
        }
    }
    return losses;
}

LossResult kd_loss(const Matrix& student_logits, const Matrix& teacher_logits,
                   const KdConfig& cfg, std::size_t old_classes) {
    if (cfg.temperature <= 0.0) throw std::domain_error("kd_loss: temperature must be positive");
    if (old_classes == 0) throw std::invalid_argument("kd_loss: no old classes to distill");
    if (teacher_logits.cols() != old_classes || student_logits.cols() < old_classes) {
        throw std::invalid_argument("kd_loss: old class count does not match logit widths");
    }
    if (student_logits.rows() != teacher_logits.rows()) {
        throw std::invalid_argument("kd_loss: batch sizes differ");
    }
    const std::size_t batch = student_logits.rows();
    if (batch == 0) return {0.0, Matrix(0, student_logits.cols())};

    // Slice the old-class columns, then softmax at temperature.
    Matrix student_old(batch, old_classes);
    for (std::size_t i = 0; i < batch; ++i) {
        for (std::size_t j = 0; j < old_classes; ++j) student_old(i, j) = student_logits(i, j);
    }
    Matrix scaled_student = student_old;
    scaled_student.scale(1.0 / cfg.temperature);
    Matrix scaled_teacher = teacher_logits;
    scaled_teacher.scale(1.0 / cfg.temperature);

    const Matrix log_q = log_softmax_rows(scaled_student);
    const Matrix q = softmax(student_old, cfg.temperature);
    const Matrix p = softmax(teacher_logits, cfg.temperature);

    const double comp = cfg.squared_temperature_compensation ? cfg.temperature * cfg.temperature : 1.0;
    LossResult res;
    res.d_logits = Matrix(batch, student_logits.cols(), 0.0);
    double total = 0.0;
    const double grad_scale = comp / (cfg.temperature * static_cast<double>(batch));
    for (std::size_t i = 0; i < batch; ++i) {
        for (std::size_t j = 0; j < old_classes; ++j) {
            total -= p(i, j) * log_q(i, j);
            res.d_logits(i, j) = grad_scale * (q(i, j) - p(i, j));
        }
    }
    res.value = comp * total / static_cast<double>(batch);
    return res;
}

LossResult mixup_ce_loss(const Matrix& logits, const Matrix& labels_i, const Matrix& labels_j,
                         double lambda) {
    return mixup_ce_loss(logits, labels_i, labels_j,
                         std::vector<double>(logits.rows(), lambda));
}

LossResult mixup_ce_loss(const Matrix& logits, const Matrix& labels_i, const Matrix& labels_j,
                         const std::vector<double>& lambdas) {
    if (!logits.same_shape(labels_i) || !logits.same_shape(labels_j)) {
        throw std::invalid_argument("mixup_ce_loss: shape mismatch");
    }
    if (lambdas.size() != logits.rows()) {
        throw std::invalid_argument("mixup_ce_loss: one lambda per sample required");
    }
    for (double l : lambdas) {
        if (l < 0.0 || l > 1.0) throw std::domain_error("mixup_ce_loss: lambda outside [0, 1]");
    }
    Matrix mixed(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        for (std::size_t j = 0; j < logits.cols(); ++j) {
            mixed(i, j) = lambdas[i] * labels_i(i, j) + (1.0 - lambdas[i]) * labels_j(i, j);
        }
    }
    return ce_loss(logits, mixed);
}

Matrix one_hot_rows(const std::vector<std::size_t>& indices, std::size_t classes) {
    Matrix out(indices.size(), classes, 0.0);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= classes) throw std::invalid_argument("one_hot_rows: index out of range");
        out(i, indices[i]) = 1.0;
    }
    return out;
}

}  // namespace edbl
