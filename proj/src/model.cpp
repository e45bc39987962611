#include "edbl/model.hpp"

#include <cmath>
#include <stdexcept>

namespace edbl {

Model::Model(const std::vector<std::size_t>& dims, std::size_t classes, Rng& rng) {
    if (dims.empty()) throw std::invalid_argument("Model: dims must name at least the input width");
    if (classes == 0) throw std::invalid_argument("Model: need at least one class");
    for (std::size_t d : dims) {
        if (d == 0) throw std::invalid_argument("Model: zero-width layer");
    }
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        HiddenLayer layer;
        const double stddev = 1.0 / std::sqrt(static_cast<double>(dims[l]));
        layer.weights = gaussian_matrix(dims[l], dims[l + 1], stddev, rng);
        layer.bias = Matrix(1, dims[l + 1], 0.0);
        hidden_.push_back(std::move(layer));
    }
    const std::size_t feat = dims.back();
    head_.weights = gaussian_matrix(classes, feat, 1.0 / std::sqrt(static_cast<double>(feat)), rng);
    head_.old_class_count = 0;
}

Model::Model(std::vector<HiddenLayer> hidden, HeadLayer head)
    : hidden_(std::move(hidden)), head_(std::move(head)) {
    std::size_t dim = input_dim();
    for (const auto& layer : hidden_) {
        if (layer.weights.rows() != dim || layer.bias.rows() != 1 ||
            layer.bias.cols() != layer.weights.cols()) {
            throw std::invalid_argument("Model: layer dimensions do not chain");
        }
        dim = layer.weights.cols();
    }
    if (head_.in_dim() != dim) throw std::invalid_argument("Model: head width does not match features");
    if (head_.old_class_count > head_.class_count()) {
        throw std::invalid_argument("Model: old_class_count exceeds class_count");
    }
}

std::size_t Model::input_dim() const {
    return hidden_.empty() ? head_.in_dim() : hidden_.front().weights.rows();
}

std::size_t Model::feature_dim() const { return head_.in_dim(); }

ForwardTrace Model::forward(const Matrix& inputs) const {
    if (inputs.cols() != input_dim()) {
        throw std::invalid_argument("Model::forward: input width mismatch");
    }
    ForwardTrace trace;
    trace.inputs = inputs;
    Matrix a = inputs;
    for (const auto& layer : hidden_) {
        Matrix z = matmul(a, layer.weights);
        for (std::size_t i = 0; i < z.rows(); ++i) {
            for (std::size_t j = 0; j < z.cols(); ++j) z(i, j) += layer.bias(0, j);
        }
        trace.pre_activations.push_back(z);
        for (std::size_t i = 0; i < z.size(); ++i) {
            if (z.data()[i] < 0.0) z.data()[i] = 0.0;
        }
        trace.activations.push_back(z);
        a = std::move(z);
    }
    trace.features = a;
    trace.logits = matmul(trace.features, transpose(head_.weights));
    return trace;
}

GradientSet Model::backward(const ForwardTrace& trace, const Matrix& d_logits) const {
    if (!d_logits.same_shape(trace.logits)) {
        throw std::invalid_argument("Model::backward: d_logits shape mismatch");
    }
    GradientSet grads;
    grads.hidden.resize(hidden_.size());

    // Head rows: per-sample outer products of logit gradients with features,
    // summed over the batch.
    grads.head = matmul(transpose(d_logits), trace.features);
    Matrix d_act = matmul(d_logits, head_.weights);  // batch x feature_dim

    for (std::size_t l = hidden_.size(); l-- > 0;) {
        const Matrix& z = trace.pre_activations[l];
        Matrix dz = d_act;
        for (std::size_t i = 0; i < dz.size(); ++i) {
            if (z.data()[i] <= 0.0) dz.data()[i] = 0.0;
        }
        const Matrix& below = (l == 0) ? trace.inputs : trace.activations[l - 1];
        grads.hidden[l].weights = matmul(transpose(below), dz);
        grads.hidden[l].bias = Matrix(1, dz.cols(), 0.0);
        for (std::size_t i = 0; i < dz.rows(); ++i) {
            for (std::size_t j = 0; j < dz.cols(); ++j) grads.hidden[l].bias(0, j) += dz(i, j);
        }
        if (l > 0) d_act = matmul(dz, transpose(hidden_[l].weights));
    }
    return grads;
}

Model Model::expand_head(std::size_t new_classes, Rng& rng) const {
    if (new_classes == 0) throw std::invalid_argument("Model::expand_head: need at least one new class");
    Model out = *this;
    const std::size_t old_count = head_.class_count();
    const std::size_t feat = feature_dim();
    Matrix grown(old_count + new_classes, feat);
    for (std::size_t r = 0; r < old_count; ++r) {
        for (std::size_t c = 0; c < feat; ++c) grown(r, c) = head_.weights(r, c);
    }
    Matrix fresh = gaussian_matrix(new_classes, feat, 1.0 / std::sqrt(static_cast<double>(feat)), rng);
    for (std::size_t r = 0; r < new_classes; ++r) {
        for (std::size_t c = 0; c < feat; ++c) grown(old_count + r, c) = fresh(r, c);
    }
    out.head_.weights = std::move(grown);
    out.head_.old_class_count = old_count;
    return out;
}

FrozenModel Model::freeze() const { return FrozenModel(*this); }

namespace {

void step_tensor(Matrix& param, const Matrix& grad, Matrix& velocity, double lr, double momentum,
                 double weight_decay) {
    for (std::size_t i = 0; i < param.size(); ++i) {
        double v = momentum * velocity.data()[i] + grad.data()[i] + weight_decay * param.data()[i];
        velocity.data()[i] = v;
        param.data()[i] -= lr * v;
    }
}

}  // namespace

void sgd_step(Model& model, const GradientSet& grads, double lr, double momentum,
              double weight_decay, OptState& state) {
    if (lr <= 0.0) throw std::domain_error("sgd_step: learning rate must be positive");
    if (grads.hidden.size() != model.hidden().size() ||
        !grads.head.same_shape(model.head().weights)) {
        throw std::invalid_argument("sgd_step: gradient shapes do not match the model");
    }
    if (!state.initialized || state.hidden.size() != model.hidden().size() ||
        !state.head.same_shape(model.head().weights)) {
        state.hidden.clear();
        for (const auto& layer : model.hidden()) {
            state.hidden.push_back({Matrix(layer.weights.rows(), layer.weights.cols(), 0.0),
                                    Matrix(1, layer.bias.cols(), 0.0)});
        }
        state.head = Matrix(model.head().weights.rows(), model.head().weights.cols(), 0.0);
        state.initialized = true;
    }
    for (std::size_t l = 0; l < model.hidden().size(); ++l) {
        step_tensor(model.hidden()[l].weights, grads.hidden[l].weights, state.hidden[l].weights,
                    lr, momentum, weight_decay);
        step_tensor(model.hidden()[l].bias, grads.hidden[l].bias, state.hidden[l].bias,
                    lr, momentum, weight_decay);
    }
    step_tensor(model.head().weights, grads.head, state.head, lr, momentum, weight_decay);
}

}  // namespace edbl
