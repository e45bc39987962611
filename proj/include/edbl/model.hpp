#pragma once

#include <cstddef>
#include <vector>

#include "edbl/matrix.hpp"
#include "edbl/rng.hpp"

namespace edbl {

struct HiddenLayer {
    Matrix weights;  // in_dim x out_dim
    Matrix bias;     // 1 x out_dim
};

// Linear classification head without bias; row k holds the weight vector of
// class index k. old_class_count marks how many rows existed before the most
// recent expansion.
struct HeadLayer {
    Matrix weights;  // class_count x feature_dim
    std::size_t old_class_count = 0;

    std::size_t class_count() const { return weights.rows(); }
    std::size_t in_dim() const { return weights.cols(); }
};

// Everything the backward pass needs from one forward pass.
struct ForwardTrace {
    Matrix inputs;
    std::vector<Matrix> pre_activations;  // per hidden layer
    std::vector<Matrix> activations;      // per hidden layer, after ReLU
    Matrix features;                      // batch x feature_dim, input to the head
    Matrix logits;                        // batch x class_count, raw
};

struct LayerGrads {
    Matrix weights;
    Matrix bias;
};

struct GradientSet {
    std::vector<LayerGrads> hidden;
    Matrix head;  // class_count x feature_dim
};

class FrozenModel;

// ReLU MLP feature extractor plus linear head. The head grows when new
// classes arrive; old rows are kept bit-exact.
class Model {
public:
    Model() = default;

    // dims = {input_dim, hidden..., feature_dim}; with a single entry the
    // feature extractor is the identity.
    Model(const std::vector<std::size_t>& dims, std::size_t classes, Rng& rng);
    Model(std::vector<HiddenLayer> hidden, HeadLayer head);

    ForwardTrace forward(const Matrix& inputs) const;
    GradientSet backward(const ForwardTrace& trace, const Matrix& d_logits) const;

    // New model with `new_classes` extra head rows; fresh rows are Gaussian
    // with stddev 1/sqrt(feature_dim), existing rows are copied verbatim.
    Model expand_head(std::size_t new_classes, Rng& rng) const;

    FrozenModel freeze() const;

    std::size_t input_dim() const;
    std::size_t feature_dim() const;
    std::size_t class_count() const { return head_.class_count(); }
    std::size_t old_class_count() const { return head_.old_class_count; }

    const std::vector<HiddenLayer>& hidden() const { return hidden_; }
    std::vector<HiddenLayer>& hidden() { return hidden_; }
    const HeadLayer& head() const { return head_; }
    HeadLayer& head() { return head_; }

private:
    std::vector<HiddenLayer> hidden_;
    HeadLayer head_;
};

// Immutable snapshot of a model at the end of a task; serves as the teacher
// for the following task.
class FrozenModel {
public:
    explicit FrozenModel(Model snapshot) : model_(std::move(snapshot)) {}

    ForwardTrace forward(const Matrix& inputs) const { return model_.forward(inputs); }
    std::size_t class_count() const { return model_.class_count(); }
    std::size_t feature_dim() const { return model_.feature_dim(); }
    const Model& snapshot() const { return model_; }

private:
    Model model_;
};

// Momentum buffers matching a model's parameter tensors.
struct OptState {
    std::vector<LayerGrads> hidden;
    Matrix head;
    bool initialized = false;
};

// v <- momentum * v + grad + weight_decay * param; param <- param - lr * v
void sgd_step(Model& model, const GradientSet& grads, double lr, double momentum,
              double weight_decay, OptState& state);

}  // namespace edbl
