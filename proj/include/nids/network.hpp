#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "nids/preprocess.hpp"
#include "nids/tensor.hpp"

namespace nids {

enum class Activation : std::uint8_t { Linear, ReLU, Sigmoid, Tanh };
enum class Padding : std::uint8_t { Valid, Same };

std::string_view to_string(Activation a);

struct Conv1DSpec {
    std::size_t filters = 1;
    std::size_t kernel = 3;
    Padding padding = Padding::Valid;
    Activation activation = Activation::ReLU;
};
struct MaxPool1DSpec {
    std::size_t pool = 2;
};
struct BatchNormSpec {
    double momentum = 0.99;
    double epsilon = 1e-3;
};
struct DropoutSpec {
    double rate = 0.5;
};
struct LstmSpec {
    std::size_t units = 1;
    double dropout = 0.0;            // on inputs, one mask per sequence
    double recurrent_dropout = 0.0;  // on the recurrent state, one mask per sequence
    bool return_sequences = false;
};
struct BiLstmSpec {
    std::size_t forward_units = 1;
    std::size_t backward_units = 1;
};
struct AttentionSpec {
    std::size_t heads = 1;
    std::size_t key_dim = 1;
};
struct DenseSpec {
    std::size_t units = 1;
    Activation activation = Activation::Linear;
};
// Identity skip around Conv1D(filters, kernel, same, linear) + BatchNorm,
// followed by ReLU on the sum.
struct ResidualSpec {
    std::size_t filters = 1;
    std::size_t kernel = 3;
};

using LayerSpec = std::variant<Conv1DSpec, MaxPool1DSpec, BatchNormSpec, DropoutSpec, LstmSpec, BiLstmSpec,
                               AttentionSpec, DenseSpec, ResidualSpec>;

std::string describe(const LayerSpec& s);

struct NetworkSpec {
    std::string id;
    std::size_t input_width = 0;
    std::vector<LayerSpec> layers;

    std::string describe() const;
};

// Per-sample activation shape. Vectors have steps == 1 and sequence == false.
struct FeatureShape {
    std::size_t steps = 0;
    std::size_t channels = 0;
    bool sequence = true;

    std::size_t width() const { return steps * channels; }
    bool operator==(const FeatureShape&) const = default;
};

// Shapes after each layer (index 0 is the input). Throws ShapeError naming
// the first layer whose input does not fit.
std::vector<FeatureShape> infer_shapes(const NetworkSpec& spec);

enum class Mode : std::uint8_t { Train, Infer };

struct Param {
    std::string name;
    Tensor value;
    Tensor grad;
};

struct LayerContext {
    Mode mode = Mode::Infer;
    std::uint64_t seed = 0;  // dropout masks are a pure function of this
};

class Layer {
public:
    virtual ~Layer() = default;
    virtual std::string name() const = 0;
    virtual FeatureShape input_shape() const = 0;
    virtual FeatureShape output_shape() const = 0;
    // x is [batch, steps, channels] for sequences or [batch, width] for vectors.
    virtual Tensor forward(const Tensor& x, const LayerContext& ctx) = 0;
    // Uses the activations cached by the last forward; accumulates into
    // parameter gradients and returns the input gradient.
    virtual Tensor backward(const Tensor& dy) = 0;
    virtual std::vector<Param*> params() { return {}; }
    virtual std::vector<Tensor*> buffers() { return {}; }
};

class Rng;
std::unique_ptr<Layer> make_layer(const LayerSpec& spec, FeatureShape input, Rng& init);

class Network {
public:
    Network(NetworkSpec spec, std::uint64_t init_seed);
    Network(const Network&) = delete;
    Network& operator=(const Network&) = delete;
    Network(Network&&) = default;
    Network& operator=(Network&&) = default;

    const NetworkSpec& spec() const noexcept { return spec_; }
    std::size_t input_width() const noexcept { return spec_.input_width; }

    // batch is [B, input_width]; returns [B, 1] probabilities.
    Tensor forward(const Tensor& batch, Mode mode, std::uint64_t dropout_seed = 0);
    // grad_output is dLoss/dProbability, [B, 1]. Returns dLoss/dInput, [B, input_width].
    Tensor backward(const Tensor& grad_output);

    void zero_grad();
    std::vector<Param*> parameters();
    std::vector<Tensor*> buffers();
    std::size_t parameter_count();

    // Trainable parameters followed by running statistics.
    std::vector<Tensor> export_state();
    void import_state(const std::vector<Tensor>& state);

    std::vector<double> predict_proba(const FeatureMatrix& m, std::size_t batch_size = 512);

    Layer& layer(std::size_t i) { return *layers_.at(i); }
    std::size_t layer_count() const noexcept { return layers_.size(); }

private:
    NetworkSpec spec_;
    std::vector<std::unique_ptr<Layer>> layers_;
};

}  // namespace nids
