#include <algorithm>

#include "nids/network.hpp"
#include "nids/rng.hpp"

namespace nids {

namespace {

std::string padding_name(Padding p) { return p == Padding::Same ? "same" : "valid"; }

}  // namespace

std::string describe(const LayerSpec& spec) {
    return std::visit(
        [](const auto& s) -> std::string {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, Conv1DSpec>)
                return "Conv1D(" + std::to_string(s.filters) + "," + std::to_string(s.kernel) + "," +
                       padding_name(s.padding) + "," + std::string(to_string(s.activation)) + ")";
            else if constexpr (std::is_same_v<S, MaxPool1DSpec>)
                return "MaxPooling1D(" + std::to_string(s.pool) + ")";
            else if constexpr (std::is_same_v<S, BatchNormSpec>)
                return "BatchNorm(" + format_double(s.momentum) + "," + format_double(s.epsilon) + ")";
            else if constexpr (std::is_same_v<S, DropoutSpec>)
                return "Dropout(" + format_double(s.rate) + ")";
            else if constexpr (std::is_same_v<S, LstmSpec>)
                return "LSTM(" + std::to_string(s.units) + "," + format_double(s.dropout) + "," +
                       format_double(s.recurrent_dropout) + (s.return_sequences ? ",seq" : "") + ")";
            else if constexpr (std::is_same_v<S, BiLstmSpec>)
                return "BiLSTM(" + std::to_string(s.forward_units) + "," + std::to_string(s.backward_units) + ")";
            else if constexpr (std::is_same_v<S, AttentionSpec>)
                return "MultiHeadAttention(" + std::to_string(s.heads) + "," + std::to_string(s.key_dim) + ")";
            else if constexpr (std::is_same_v<S, DenseSpec>)
                return "Dense(" + std::to_string(s.units) + "," + std::string(to_string(s.activation)) + ")";
            else
                return "Residual(" + std::to_string(s.filters) + "," + std::to_string(s.kernel) + ")";
        },
        spec);
}

std::string NetworkSpec::describe() const {
    std::string out = id + " input=" + std::to_string(input_width);
    for (const auto& l : layers) out += " " + nids::describe(l);
    return out;
}

std::vector<FeatureShape> infer_shapes(const NetworkSpec& spec) {
    if (spec.input_width == 0) throw ShapeError(spec.id + ": input width is zero");
    if (spec.layers.empty()) throw ShapeError(spec.id + ": network has no layers");
    std::vector<FeatureShape> shapes{{spec.input_width, 1, true}};
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const FeatureShape in = shapes.back();
        const auto fail = [&](const std::string& why) {
            throw ShapeError(spec.id + ": layer " + std::to_string(i) + " " + describe(spec.layers[i]) + ": " + why +
                             " (input " + std::to_string(in.steps) + "x" + std::to_string(in.channels) + ")");
        };
        const auto need_sequence = [&] {
            if (!in.sequence) fail("needs a sequence input");
        };
        const auto positive = [&](std::size_t v) {
            if (v == 0) fail("size parameters must be positive");
        };
        FeatureShape out = std::visit(
            [&](const auto& s) -> FeatureShape {
                using S = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<S, Conv1DSpec>) {
                    need_sequence();
                    positive(s.filters), positive(s.kernel);
                    if (s.padding == Padding::Same) return {in.steps, s.filters, true};
                    if (in.steps < s.kernel) fail("sequence shorter than kernel");
                    return {in.steps - s.kernel + 1, s.filters, true};
                } else if constexpr (std::is_same_v<S, MaxPool1DSpec>) {
                    need_sequence();
                    positive(s.pool);
                    if (in.steps < s.pool) fail("sequence shorter than pool size");
                    return {in.steps / s.pool, in.channels, true};
                } else if constexpr (std::is_same_v<S, BatchNormSpec>) {
                    if (!(s.momentum >= 0.0 && s.momentum < 1.0) || !(s.epsilon > 0.0)) fail("bad momentum/epsilon");
                    return in;
                } else if constexpr (std::is_same_v<S, DropoutSpec>) {
                    if (!(s.rate >= 0.0 && s.rate < 1.0)) fail("rate must be in [0,1)");
                    return in;
                } else if constexpr (std::is_same_v<S, LstmSpec>) {
                    need_sequence();
                    positive(s.units);
                    if (!(s.dropout >= 0.0 && s.dropout < 1.0) ||
                        !(s.recurrent_dropout >= 0.0 && s.recurrent_dropout < 1.0))
                        fail("dropout must be in [0,1)");
                    if (s.return_sequences) return {in.steps, s.units, true};
                    return {1, s.units, false};
                } else if constexpr (std::is_same_v<S, BiLstmSpec>) {
                    need_sequence();
                    positive(s.forward_units), positive(s.backward_units);
                    return {1, s.forward_units + s.backward_units, false};
                } else if constexpr (std::is_same_v<S, AttentionSpec>) {
                    need_sequence();
                    positive(s.heads), positive(s.key_dim);
                    return in;
                } else if constexpr (std::is_same_v<S, DenseSpec>) {
                    positive(s.units);
                    return {1, s.units, false};
                } else {
                    need_sequence();
                    positive(s.kernel);
                    if (s.filters != in.channels) fail("residual filters must equal input channels");
                    return in;
                }
            },
            spec.layers[i]);
        shapes.push_back(out);
    }
    const auto* last = std::get_if<DenseSpec>(&spec.layers.back());
    if (!last || last->units != 1 || last->activation != Activation::Sigmoid)
        throw ShapeError(spec.id + ": final layer must be Dense(1, sigmoid)");
    return shapes;
}

Network::Network(NetworkSpec spec, std::uint64_t init_seed) : spec_(std::move(spec)) {
    const auto shapes = infer_shapes(spec_);
    Rng init(mix_seed(init_seed, 0x1417));
    for (std::size_t i = 0; i < spec_.layers.size(); ++i) layers_.push_back(make_layer(spec_.layers[i], shapes[i], init));
}

Tensor Network::forward(const Tensor& batch, Mode mode, std::uint64_t dropout_seed) {
    if (batch.rank() != 2 || batch.dim(1) != spec_.input_width)
        throw ShapeError(spec_.id + ": layer 0 " + layers_.front()->name() + ": expected input [B," +
                         std::to_string(spec_.input_width) + "], got " + shape_string(batch.shape));
    Tensor x = batch;
    x.reshape({batch.dim(0), spec_.input_width, 1});
    for (std::size_t i = 0; i < layers_.size(); ++i) x = layers_[i]->forward(x, {mode, mix_seed(dropout_seed, i)});
    x.reshape({batch.dim(0), 1});
    return x;
}

Tensor Network::backward(const Tensor& grad_output) {
    Tensor d = grad_output;
    for (std::size_t i = layers_.size(); i-- > 0;) d = layers_[i]->backward(d);
    d.reshape({grad_output.dim(0), spec_.input_width});
    return d;
}

void Network::zero_grad() {
    for (auto* p : parameters()) p->grad.fill(0.0);
}

std::vector<Param*> Network::parameters() {
    std::vector<Param*> out;
    for (auto& l : layers_)
        for (auto* p : l->params()) out.push_back(p);
    return out;
}

std::vector<Tensor*> Network::buffers() {
    std::vector<Tensor*> out;
    for (auto& l : layers_)
        for (auto* b : l->buffers()) out.push_back(b);
    return out;
}

std::size_t Network::parameter_count() {
    std::size_t n = 0;
    for (auto* p : parameters()) n += p->value.size();
    return n;
}

std::vector<Tensor> Network::export_state() {
    std::vector<Tensor> out;
    for (auto* p : parameters()) out.push_back(p->value);
    for (auto* b : buffers()) out.push_back(*b);
    return out;
}

void Network::import_state(const std::vector<Tensor>& state) {
    auto params = parameters();
    auto bufs = buffers();
    if (state.size() != params.size() + bufs.size())
        throw ShapeError(spec_.id + ": state has " + std::to_string(state.size()) + " tensors, network needs " +
                         std::to_string(params.size() + bufs.size()));
    std::size_t i = 0;
    const auto assign = [&](Tensor& dst, const Tensor& src) {
        if (dst.shape != src.shape)
            throw ShapeError(spec_.id + ": state tensor " + std::to_string(i) + " has shape " + shape_string(src.shape) +
                             ", expected " + shape_string(dst.shape));
        dst.data = src.data;
        ++i;
    };
    for (auto* p : params) assign(p->value, state[i]);
    for (auto* b : bufs) assign(*b, state[i]);
}

std::vector<double> Network::predict_proba(const FeatureMatrix& m, std::size_t batch_size) {
    if (m.cols != spec_.input_width)
        throw ShapeError(spec_.id + ": matrix has " + std::to_string(m.cols) + " columns, network expects " +
                         std::to_string(spec_.input_width));
    std::vector<double> out;
    out.reserve(m.rows);
    batch_size = std::max<std::size_t>(batch_size, 1);
    for (std::size_t start = 0; start < m.rows; start += batch_size) {
        const std::size_t n = std::min(batch_size, m.rows - start);
        Tensor x({n, m.cols}, std::vector<double>(m.values.begin() + static_cast<std::ptrdiff_t>(start * m.cols),
                                                  m.values.begin() + static_cast<std::ptrdiff_t>((start + n) * m.cols)));
        const Tensor p = forward(x, Mode::Infer);
        out.insert(out.end(), p.data.begin(), p.data.end());
    }
    return out;
}

}  // namespace nids
