#include <algorithm>
#include <cmath>
#include <sstream>

#include "nids/kernels.hpp"
#include "nids/network.hpp"
#include "nids/rng.hpp"

namespace nids {

std::string shape_string(const std::vector<std::size_t>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
    return out + "]";
}

std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::Linear: return "linear";
        case Activation::ReLU: return "relu";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Tanh: return "tanh";
    }
    return "linear";
}

namespace {

using Index = std::ptrdiff_t;

inline double sigmoid(double z) {
    if (z >= 0) {
        const double e = std::exp(-z);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

void apply_activation(Activation a, double* v, std::size_t n) {
    switch (a) {
        case Activation::Linear: break;
        case Activation::ReLU:
            for (std::size_t i = 0; i < n; ++i) v[i] = v[i] > 0.0 ? v[i] : 0.0;
            break;
        case Activation::Sigmoid:
            for (std::size_t i = 0; i < n; ++i) v[i] = sigmoid(v[i]);
            break;
        case Activation::Tanh:
            for (std::size_t i = 0; i < n; ++i) v[i] = std::tanh(v[i]);
            break;
    }
}

// dz = dy * f'(z), expressed through the activation output y = f(z).
void activation_backward(Activation a, const double* y, double* d, std::size_t n) {
    switch (a) {
        case Activation::Linear: break;
        case Activation::ReLU:
            for (std::size_t i = 0; i < n; ++i)
                if (y[i] <= 0.0) d[i] = 0.0;
            break;
        case Activation::Sigmoid:
            for (std::size_t i = 0; i < n; ++i) d[i] *= y[i] * (1.0 - y[i]);
            break;
        case Activation::Tanh:
            for (std::size_t i = 0; i < n; ++i) d[i] *= 1.0 - y[i] * y[i];
            break;
    }
}

void init_uniform(Tensor& t, double limit, Rng& rng) {
    for (auto& v : t.data) v = rng.uniform(-limit, limit);
}

double fan_in_limit(std::size_t fan_in, Activation a) {
    const double gain = a == Activation::ReLU ? 6.0 : 3.0;
    return std::sqrt(gain / static_cast<double>(std::max<std::size_t>(fan_in, 1)));
}

std::size_t batch_of(const Tensor& x, const FeatureShape& in, const std::string& who) {
    if (x.rank() == 0 || x.shape[0] == 0) throw ShapeError(who + ": empty batch");
    const std::size_t b = x.shape[0];
    if (x.size() != b * in.width())
        throw ShapeError(who + ": expected per-sample width " + std::to_string(in.width()) + ", got tensor " +
                         shape_string(x.shape));
    return b;
}

Tensor make_output(std::size_t batch, const FeatureShape& s) {
    if (s.sequence) return Tensor({batch, s.steps, s.channels});
    return Tensor({batch, s.channels});
}

void add_bias_rows(double* out, std::size_t rows, const double* bias, std::size_t n) {
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < n; ++j) out[r * n + j] += bias[j];
}

// ---------------------------------------------------------------------------

class Conv1D final : public Layer {
public:
    Conv1D(FeatureShape in, Conv1DSpec s, Rng& init) : in_(in), spec_(s) {
        pad_ = s.padding == Padding::Same ? (s.kernel - 1) / 2 : 0;
        out_len_ = s.padding == Padding::Same ? in.steps : in.steps - s.kernel + 1;
        weight_ = {"kernel", Tensor({s.kernel * in.channels, s.filters}), Tensor({s.kernel * in.channels, s.filters})};
        bias_ = {"bias", Tensor({s.filters}), Tensor({s.filters})};
        init_uniform(weight_.value, fan_in_limit(s.kernel * in.channels, s.activation), init);
    }

    std::string name() const override {
        return "Conv1D(" + std::to_string(spec_.filters) + "," + std::to_string(spec_.kernel) + ")";
    }
    FeatureShape input_shape() const override { return in_; }
    FeatureShape output_shape() const override { return {out_len_, spec_.filters, true}; }

    Tensor forward(const Tensor& x, const LayerContext&) override {
        const auto b = batch_of(x, in_, name());
        geom_ = {b, in_.steps, in_.channels, spec_.kernel, pad_, out_len_};
        cols_.assign(b * out_len_ * spec_.kernel * in_.channels, 0.0);
        kernels::im2col_1d(geom_, x.ptr(), cols_.data());
        Tensor y = make_output(b, output_shape());
        kernels::gemm(b * out_len_, spec_.filters, spec_.kernel * in_.channels, cols_.data(), weight_.value.ptr(),
                      y.ptr(), false);
        add_bias_rows(y.ptr(), b * out_len_, bias_.value.ptr(), spec_.filters);
        apply_activation(spec_.activation, y.ptr(), y.size());
        out_ = y;
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        const auto rows = geom_.batch * out_len_;
        std::vector<double> dz(dy.data);
        activation_backward(spec_.activation, out_.ptr(), dz.data(), dz.size());
        const auto width = spec_.kernel * in_.channels;
        kernels::gemm_tn(width, spec_.filters, rows, cols_.data(), dz.data(), weight_.grad.ptr(), true);
        kernels::column_sums(rows, spec_.filters, dz.data(), bias_.grad.ptr(), true);
        std::vector<double> dcols(rows * width);
        kernels::gemm_nt(rows, width, spec_.filters, dz.data(), weight_.value.ptr(), dcols.data(), false);
        Tensor dx({geom_.batch, in_.steps, in_.channels});
        kernels::col2im_1d(geom_, dcols.data(), dx.ptr());
        return dx;
    }

    std::vector<Param*> params() override { return {&weight_, &bias_}; }

private:
    FeatureShape in_;
    Conv1DSpec spec_;
    std::size_t pad_ = 0, out_len_ = 0;
    Param weight_, bias_;
    kernels::Conv1dGeometry geom_{};
    std::vector<double> cols_;
    Tensor out_;
};

class MaxPool1D final : public Layer {
public:
    MaxPool1D(FeatureShape in, MaxPool1DSpec s) : in_(in), pool_(s.pool) {}

    std::string name() const override { return "MaxPooling1D(" + std::to_string(pool_) + ")"; }
    FeatureShape input_shape() const override { return in_; }
    FeatureShape output_shape() const override { return {in_.steps / pool_, in_.channels, true}; }

    Tensor forward(const Tensor& x, const LayerContext&) override {
        batch_ = batch_of(x, in_, name());
        const auto out = output_shape();
        Tensor y = make_output(batch_, out);
        argmax_.assign(y.size(), 0);
        const std::size_t c_n = in_.channels;
#pragma omp parallel for schedule(static) if (y.size() > 65536)
        for (Index b = 0; b < static_cast<Index>(batch_); ++b)
            for (std::size_t t = 0; t < out.steps; ++t)
                for (std::size_t c = 0; c < c_n; ++c) {
                    std::size_t best = (b * in_.steps + t * pool_) * c_n + c;
                    for (std::size_t i = 1; i < pool_; ++i) {
                        const std::size_t idx = (b * in_.steps + t * pool_ + i) * c_n + c;
                        if (x.data[idx] > x.data[best]) best = idx;
                    }
                    const std::size_t o = (b * out.steps + t) * c_n + c;
                    y.data[o] = x.data[best];
                    argmax_[o] = best;
                }
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        Tensor dx({batch_, in_.steps, in_.channels});
        for (std::size_t o = 0; o < dy.size(); ++o) dx.data[argmax_[o]] += dy.data[o];
        return dx;
    }

private:
    FeatureShape in_;
    std::size_t pool_;
    std::size_t batch_ = 0;
    std::vector<std::size_t> argmax_;
};

// Normalizes over the channel axis; statistics span batch and steps.
class BatchNorm final : public Layer {
public:
    BatchNorm(FeatureShape in, BatchNormSpec s) : in_(in), spec_(s) {
        const auto c = in.channels;
        gamma_ = {"gamma", Tensor({c}, 1.0), Tensor({c})};
        beta_ = {"beta", Tensor({c}), Tensor({c})};
        running_mean_ = Tensor({c});
        running_var_ = Tensor({c}, 1.0);
    }

    std::string name() const override { return "BatchNorm"; }
    FeatureShape input_shape() const override { return in_; }
    FeatureShape output_shape() const override { return in_; }

    Tensor forward(const Tensor& x, const LayerContext& ctx) override {
        const auto b = batch_of(x, in_, name());
        const std::size_t c_n = in_.channels;
        rows_ = b * in_.steps;
        mode_ = ctx.mode;
        Tensor y = x;
        inv_std_.assign(c_n, 0.0);
        std::vector<double> mean(c_n, 0.0), var(c_n, 0.0);
        if (ctx.mode == Mode::Train) {
            for (std::size_t r = 0; r < rows_; ++r)
                for (std::size_t c = 0; c < c_n; ++c) mean[c] += x.data[r * c_n + c];
            for (auto& m : mean) m /= static_cast<double>(rows_);
            for (std::size_t r = 0; r < rows_; ++r)
                for (std::size_t c = 0; c < c_n; ++c) {
                    const double d = x.data[r * c_n + c] - mean[c];
                    var[c] += d * d;
                }
            for (auto& v : var) v /= static_cast<double>(rows_);
            const double m = spec_.momentum;
            for (std::size_t c = 0; c < c_n; ++c) {
                running_mean_.data[c] = m * running_mean_.data[c] + (1.0 - m) * mean[c];
                running_var_.data[c] = m * running_var_.data[c] + (1.0 - m) * var[c];
            }
        } else {
            mean = running_mean_.data;
            var = running_var_.data;
        }
        for (std::size_t c = 0; c < c_n; ++c) inv_std_[c] = 1.0 / std::sqrt(var[c] + spec_.epsilon);
        xhat_.assign(x.size(), 0.0);
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = 0; c < c_n; ++c) {
                const std::size_t i = r * c_n + c;
                xhat_[i] = (x.data[i] - mean[c]) * inv_std_[c];
                y.data[i] = gamma_.value.data[c] * xhat_[i] + beta_.value.data[c];
            }
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        const std::size_t c_n = in_.channels;
        std::vector<double> sum_dy(c_n, 0.0), sum_dy_xhat(c_n, 0.0);
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = 0; c < c_n; ++c) {
                const std::size_t i = r * c_n + c;
                sum_dy[c] += dy.data[i];
                sum_dy_xhat[c] += dy.data[i] * xhat_[i];
            }
        for (std::size_t c = 0; c < c_n; ++c) {
            gamma_.grad.data[c] += sum_dy_xhat[c];
            beta_.grad.data[c] += sum_dy[c];
        }
        Tensor dx = dy;
        const double n = static_cast<double>(rows_);
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = 0; c < c_n; ++c) {
                const std::size_t i = r * c_n + c;
                const double g = gamma_.value.data[c] * inv_std_[c];
                if (mode_ == Mode::Train)
                    dx.data[i] = g * (dy.data[i] - sum_dy[c] / n - xhat_[i] * sum_dy_xhat[c] / n);
                else
                    dx.data[i] = g * dy.data[i];
            }
        return dx;
    }

    std::vector<Param*> params() override { return {&gamma_, &beta_}; }
    std::vector<Tensor*> buffers() override { return {&running_mean_, &running_var_}; }

private:
    FeatureShape in_;
    BatchNormSpec spec_;
    Param gamma_, beta_;
    Tensor running_mean_, running_var_;
    Mode mode_ = Mode::Infer;
    std::size_t rows_ = 0;
    std::vector<double> inv_std_, xhat_;
};

class Dropout final : public Layer {
public:
    Dropout(FeatureShape in, DropoutSpec s) : in_(in), rate_(s.rate) {}

    std::string name() const override { return "Dropout(" + format_double(rate_) + ")"; }
    FeatureShape input_shape() const override { return in_; }
    FeatureShape output_shape() const override { return in_; }

    Tensor forward(const Tensor& x, const LayerContext& ctx) override {
        batch_of(x, in_, name());
        active_ = ctx.mode == Mode::Train && rate_ > 0.0;
        if (!active_) return x;
        Rng rng(ctx.seed);
        const double keep = 1.0 - rate_;
        mask_.resize(x.size());
        Tensor y = x;
        for (std::size_t i = 0; i < x.size(); ++i) {
            mask_[i] = rng.uniform() < keep ? 1.0 / keep : 0.0;
            y.data[i] *= mask_[i];
        }
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        if (!active_) return dy;
        Tensor dx = dy;
        for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] *= mask_[i];
        return dx;
    }

private:
    FeatureShape in_;
    double rate_;
    bool active_ = false;
    std::vector<double> mask_;
};

// Gate order i, f, g (candidate), o.
class Lstm final : public Layer {
public:
    Lstm(FeatureShape in, LstmSpec s, Rng& init) : in_(in), spec_(s) {
        const auto c = in.channels, h = s.units;
        w_ = {"kernel", Tensor({c, 4 * h}), Tensor({c, 4 * h})};
        u_ = {"recurrent_kernel", Tensor({h, 4 * h}), Tensor({h, 4 * h})};
        b_ = {"bias", Tensor({4 * h}), Tensor({4 * h})};
        init_uniform(w_.value, fan_in_limit(c, Activation::Linear), init);
        init_uniform(u_.value, fan_in_limit(h, Activation::Linear), init);
        for (std::size_t j = h; j < 2 * h; ++j) b_.value.data[j] = 1.0;
    }

    std::string name() const override { return "LSTM(" + std::to_string(spec_.units) + ")"; }
    FeatureShape input_shape() const override { return in_; }
    FeatureShape output_shape() const override {
        return spec_.return_sequences ? FeatureShape{in_.steps, spec_.units, true} : FeatureShape{1, spec_.units, false};
    }

    Tensor forward(const Tensor& x, const LayerContext& ctx) override {
        const auto B = batch_of(x, in_, name());
        const auto T = in_.steps, C = in_.channels, H = spec_.units, G = 4 * H;
        batch_ = B;
        const bool train = ctx.mode == Mode::Train;
        Rng rng(ctx.seed);
        in_mask_.assign(B * C, 1.0);
        rec_mask_.assign(B * H, 1.0);
        if (train && spec_.dropout > 0.0) draw_mask(in_mask_, spec_.dropout, rng);
        if (train && spec_.recurrent_dropout > 0.0) draw_mask(rec_mask_, spec_.recurrent_dropout, rng);

        xin_.resize(B * T * C);
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t t = 0; t < T; ++t)
                for (std::size_t c = 0; c < C; ++c)
                    xin_[(b * T + t) * C + c] = x.data[(b * T + t) * C + c] * in_mask_[b * C + c];
        std::vector<double> gx(B * T * G);
        kernels::gemm(B * T, G, C, xin_.data(), w_.value.ptr(), gx.data(), false);

        gates_.assign(T * B * G, 0.0);
        cell_.assign((T + 1) * B * H, 0.0);
        hidden_.assign((T + 1) * B * H, 0.0);
        hmask_.assign(T * B * H, 0.0);
        std::vector<double> rec(B * G);
        for (std::size_t t = 0; t < T; ++t) {
            double* hm = hmask_.data() + t * B * H;
            const double* hprev = hidden_.data() + t * B * H;
            for (std::size_t i = 0; i < B * H; ++i) hm[i] = hprev[i] * rec_mask_[i];
            kernels::gemm(B, G, H, hm, u_.value.ptr(), rec.data(), false);
#pragma omp parallel for schedule(static) if (B * G > 65536)
            for (Index b = 0; b < static_cast<Index>(B); ++b) {
                double* gt = gates_.data() + (t * B + b) * G;
                const double* gxr = gx.data() + (b * T + t) * G;
                const double* rr = rec.data() + b * G;
                for (std::size_t j = 0; j < G; ++j) {
                    const double z = gxr[j] + rr[j] + b_.value.data[j];
                    gt[j] = (j >= 2 * H && j < 3 * H) ? std::tanh(z) : sigmoid(z);
                }
                const double* cp = cell_.data() + (t * B + b) * H;
                double* cn = cell_.data() + ((t + 1) * B + b) * H;
                double* hn = hidden_.data() + ((t + 1) * B + b) * H;
                for (std::size_t j = 0; j < H; ++j) {
                    cn[j] = gt[H + j] * cp[j] + gt[j] * gt[2 * H + j];
                    hn[j] = gt[3 * H + j] * std::tanh(cn[j]);
                }
            }
        }

        Tensor y = make_output(B, output_shape());
        if (spec_.return_sequences) {
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t t = 0; t < T; ++t)
                    std::copy_n(hidden_.data() + ((t + 1) * B + b) * H, H, y.ptr() + (b * T + t) * H);
        } else {
            std::copy_n(hidden_.data() + T * B * H, B * H, y.ptr());
        }
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        const auto B = batch_, T = in_.steps, C = in_.channels, H = spec_.units, G = 4 * H;
        std::vector<double> dh_next(B * H, 0.0), dc_next(B * H, 0.0), dgx(B * T * G), dg(B * G), dhm(B * H);
        for (std::size_t t = T; t-- > 0;) {
#pragma omp parallel for schedule(static) if (B * G > 65536)
            for (Index b = 0; b < static_cast<Index>(B); ++b) {
                const double* gt = gates_.data() + (t * B + b) * G;
                const double* cp = cell_.data() + (t * B + b) * H;
                const double* cn = cell_.data() + ((t + 1) * B + b) * H;
                double* dgb = dg.data() + b * G;
                for (std::size_t j = 0; j < H; ++j) {
                    double dh = dh_next[b * H + j];
                    if (spec_.return_sequences)
                        dh += dy.data[(b * T + t) * H + j];
                    else if (t == T - 1)
                        dh += dy.data[b * H + j];
                    const double i = gt[j], f = gt[H + j], g = gt[2 * H + j], o = gt[3 * H + j];
                    const double tc = std::tanh(cn[j]);
                    const double dc = dc_next[b * H + j] + dh * o * (1.0 - tc * tc);
                    dgb[j] = dc * g * i * (1.0 - i);
                    dgb[H + j] = dc * cp[j] * f * (1.0 - f);
                    dgb[2 * H + j] = dc * i * (1.0 - g * g);
                    dgb[3 * H + j] = dh * tc * o * (1.0 - o);
                    dc_next[b * H + j] = dc * f;
                }
                std::copy_n(dgb, G, dgx.data() + (b * T + t) * G);
            }
            const double* hm = hmask_.data() + t * B * H;
            kernels::gemm_tn(H, G, B, hm, dg.data(), u_.grad.ptr(), true);
            kernels::gemm_nt(B, H, G, dg.data(), u_.value.ptr(), dhm.data(), false);
            for (std::size_t i = 0; i < B * H; ++i) dh_next[i] = dhm[i] * rec_mask_[i];
        }
        kernels::gemm_tn(C, G, B * T, xin_.data(), dgx.data(), w_.grad.ptr(), true);
        kernels::column_sums(B * T, G, dgx.data(), b_.grad.ptr(), true);
        Tensor dx({B, T, C});
        kernels::gemm_nt(B * T, C, G, dgx.data(), w_.value.ptr(), dx.ptr(), false);
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t t = 0; t < T; ++t)
                for (std::size_t c = 0; c < C; ++c) dx.data[(b * T + t) * C + c] *= in_mask_[b * C + c];
        return dx;
    }

    std::vector<Param*> params() override { return {&w_, &u_, &b_}; }

private:
    static void draw_mask(std::vector<double>& m, double rate, Rng& rng) {
        const double keep = 1.0 - rate;
        for (auto& v : m) v = rng.uniform() < keep ? 1.0 / keep : 0.0;
    }

    FeatureShape in_;
    LstmSpec spec_;
    Param w_, u_, b_;
    std::size_t batch_ = 0;
    std::vector<double> in_mask_, rec_mask_, xin_, gates_, cell_, hidden_, hmask_;
};

Tensor reverse_steps(const Tensor& x, std::size_t B, std::size_t T, std::size_t C) {
    Tensor r({B, T, C});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t t = 0; t < T; ++t)
            std::copy_n(x.ptr() + (b * T + t) * C, C, r.ptr() + (b * T + (T - 1 - t)) * C);
    return r;
}

// Forward LSTM on the sequence, backward LSTM on the reversed sequence;
// output is the concatenation of their final states.
class BiLstm final : public Layer {
public:
    BiLstm(FeatureShape in, BiLstmSpec s, Rng& init)
        : in_(in),
          spec_(s),
          fwd_(in, LstmSpec{s.forward_units, 0.0, 0.0, false}, init),
          bwd_(in, LstmSpec{s.backward_units, 0.0, 0.0, false}, init) {}

    std::string name() const override {
        return "BiLSTM(" + std::to_string(spec_.forward_units) + "," + std::to_string(spec_.backward_units) + ")";
    }
    FeatureShape input_shape() const override { return in_; }
    FeatureShape output_shape() const override {
        return {1, spec_.forward_units + spec_.backward_units, false};
    }

    Tensor forward(const Tensor& x, const LayerContext& ctx) override {
        batch_ = batch_of(x, in_, name());
        const auto hf = fwd_.forward(x, {ctx.mode, mix_seed(ctx.seed, 1)});
        const auto hb = bwd_.forward(reverse_steps(x, batch_, in_.steps, in_.channels), {ctx.mode, mix_seed(ctx.seed, 2)});
        const auto F = spec_.forward_units, Bw = spec_.backward_units;
        Tensor y({batch_, F + Bw});
        for (std::size_t b = 0; b < batch_; ++b) {
            std::copy_n(hf.ptr() + b * F, F, y.ptr() + b * (F + Bw));
            std::copy_n(hb.ptr() + b * Bw, Bw, y.ptr() + b * (F + Bw) + F);
        }
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        const auto F = spec_.forward_units, Bw = spec_.backward_units;
        Tensor df({batch_, F}), db({batch_, Bw});
        for (std::size_t b = 0; b < batch_; ++b) {
            std::copy_n(dy.ptr() + b * (F + Bw), F, df.ptr() + b * F);
            std::copy_n(dy.ptr() + b * (F + Bw) + F, Bw, db.ptr() + b * Bw);
        }
        Tensor dx = fwd_.backward(df);
        const Tensor dxr = reverse_steps(bwd_.backward(db), batch_, in_.steps, in_.channels);
        for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] += dxr.data[i];
        return dx;
    }

    std::vector<Param*> params() override {
        auto p = fwd_.params();
        for (auto* q : bwd_.params()) p.push_back(q);
        return p;
    }

private:
    FeatureShape in_;
    BiLstmSpec spec_;
    Lstm fwd_, bwd_;
    std::size_t batch_ = 0;
};

// Self-attention: query = key = value = input.
class MultiHeadAttention final : public Layer {
public:
    MultiHeadAttention(FeatureShape in, AttentionSpec s, Rng& init) : in_(in), spec_(s) {
        const auto c = in.channels, hd = s.heads * s.key_dim;
        for (auto* p : {&wq_, &wk_, &wv_}) *p = Param{"", Tensor({c, hd}), Tensor({c, hd})};
        for (auto* p : {&bq_, &bk_, &bv_}) *p = Param{"", Tensor({hd}), Tensor({hd})};
        wq_.name = "query_kernel", wk_.name = "key_kernel", wv_.name = "value_kernel";
        bq_.name = "query_bias", bk_.name = "key_bias", bv_.name = "value_bias";
        wo_ = {"output_kernel", Tensor({hd, c}), Tensor({hd, c})};
        bo_ = {"output_bias", Tensor({c}), Tensor({c})};
        for (auto* p : {&wq_, &wk_, &wv_}) init_uniform(p->value, fan_in_limit(c, Activation::Linear), init);
        init_uniform(wo_.value, fan_in_limit(hd, Activation::Linear), init);
    }

    std::string name() const override {
        return "MultiHeadAttention(" + std::to_string(spec_.heads) + "," + std::to_string(spec_.key_dim) + ")";
    }
    FeatureShape input_shape() const override { return in_; }
    FeatureShape output_shape() const override { return in_; }

    Tensor forward(const Tensor& x, const LayerContext&) override {
        const auto B = batch_of(x, in_, name());
        const auto T = in_.steps, C = in_.channels, Hn = spec_.heads, D = spec_.key_dim, HD = Hn * D;
        batch_ = B;
        x_ = x.data;
        q_.resize(B * T * HD), k_.resize(B * T * HD), v_.resize(B * T * HD);
        project(x.ptr(), wq_, bq_, q_);
        project(x.ptr(), wk_, bk_, k_);
        project(x.ptr(), wv_, bv_, v_);
        attn_.assign(B * Hn * T * T, 0.0);
        o_.assign(B * T * HD, 0.0);
        const double scale = 1.0 / std::sqrt(static_cast<double>(D));
#pragma omp parallel for schedule(static) if (B * Hn * T * T * D > 65536)
        for (Index b = 0; b < static_cast<Index>(B); ++b)
            for (std::size_t h = 0; h < Hn; ++h)
                for (std::size_t i = 0; i < T; ++i) {
                    double* a = attn_.data() + ((b * Hn + h) * T + i) * T;
                    const double* qi = q_.data() + (b * T + i) * HD + h * D;
                    double mx = -INFINITY;
                    for (std::size_t j = 0; j < T; ++j) {
                        const double* kj = k_.data() + (b * T + j) * HD + h * D;
                        double s = 0.0;
                        for (std::size_t e = 0; e < D; ++e) s += qi[e] * kj[e];
                        a[j] = s * scale;
                        mx = std::max(mx, a[j]);
                    }
                    double z = 0.0;
                    for (std::size_t j = 0; j < T; ++j) z += (a[j] = std::exp(a[j] - mx));
                    for (std::size_t j = 0; j < T; ++j) a[j] /= z;
                    double* oi = o_.data() + (b * T + i) * HD + h * D;
                    for (std::size_t j = 0; j < T; ++j) {
                        const double* vj = v_.data() + (b * T + j) * HD + h * D;
                        for (std::size_t e = 0; e < D; ++e) oi[e] += a[j] * vj[e];
                    }
                }
        Tensor y({B, T, C});
        kernels::gemm(B * T, C, HD, o_.data(), wo_.value.ptr(), y.ptr(), false);
        add_bias_rows(y.ptr(), B * T, bo_.value.ptr(), C);
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        const auto B = batch_, T = in_.steps, C = in_.channels, Hn = spec_.heads, D = spec_.key_dim, HD = Hn * D;
        const auto rows = B * T;
        kernels::gemm_tn(HD, C, rows, o_.data(), dy.ptr(), wo_.grad.ptr(), true);
        kernels::column_sums(rows, C, dy.ptr(), bo_.grad.ptr(), true);
        std::vector<double> d_o(rows * HD);
        kernels::gemm_nt(rows, HD, C, dy.ptr(), wo_.value.ptr(), d_o.data(), false);

        std::vector<double> dq(rows * HD, 0.0), dk(rows * HD, 0.0), dv(rows * HD, 0.0);
        const double scale = 1.0 / std::sqrt(static_cast<double>(D));
#pragma omp parallel for schedule(static) if (B * Hn * T * T * D > 65536)
        for (Index b = 0; b < static_cast<Index>(B); ++b) {
            std::vector<double> da(T), ds(T);
            for (std::size_t h = 0; h < Hn; ++h)
                for (std::size_t i = 0; i < T; ++i) {
                    const double* a = attn_.data() + ((b * Hn + h) * T + i) * T;
                    const double* doi = d_o.data() + (b * T + i) * HD + h * D;
                    double dot_a = 0.0;
                    for (std::size_t j = 0; j < T; ++j) {
                        const double* vj = v_.data() + (b * T + j) * HD + h * D;
                        double s = 0.0;
                        for (std::size_t e = 0; e < D; ++e) s += doi[e] * vj[e];
                        da[j] = s;
                        dot_a += a[j] * s;
                        double* dvj = dv.data() + (b * T + j) * HD + h * D;
                        for (std::size_t e = 0; e < D; ++e) dvj[e] += a[j] * doi[e];
                    }
                    for (std::size_t j = 0; j < T; ++j) ds[j] = a[j] * (da[j] - dot_a) * scale;
                    const double* qi = q_.data() + (b * T + i) * HD + h * D;
                    double* dqi = dq.data() + (b * T + i) * HD + h * D;
                    for (std::size_t j = 0; j < T; ++j) {
                        const double* kj = k_.data() + (b * T + j) * HD + h * D;
                        double* dkj = dk.data() + (b * T + j) * HD + h * D;
                        for (std::size_t e = 0; e < D; ++e) {
                            dqi[e] += ds[j] * kj[e];
                            dkj[e] += ds[j] * qi[e];
                        }
                    }
                }
        }
        Tensor dx({B, T, C});
        backproject(dq, wq_, bq_, dx, false);
        backproject(dk, wk_, bk_, dx, true);
        backproject(dv, wv_, bv_, dx, true);
        return dx;
    }

    std::vector<Param*> params() override { return {&wq_, &bq_, &wk_, &bk_, &wv_, &bv_, &wo_, &bo_}; }

private:
    void project(const double* x, const Param& w, const Param& b, std::vector<double>& out) const {
        const auto rows = batch_ * in_.steps, HD = spec_.heads * spec_.key_dim;
        kernels::gemm(rows, HD, in_.channels, x, w.value.ptr(), out.data(), false);
        add_bias_rows(out.data(), rows, b.value.ptr(), HD);
    }
    void backproject(const std::vector<double>& d, Param& w, Param& b, Tensor& dx, bool accumulate) const {
        const auto rows = batch_ * in_.steps, HD = spec_.heads * spec_.key_dim, C = in_.channels;
        kernels::gemm_tn(C, HD, rows, x_.data(), d.data(), w.grad.ptr(), true);
        kernels::column_sums(rows, HD, d.data(), b.grad.ptr(), true);
        kernels::gemm_nt(rows, C, HD, d.data(), w.value.ptr(), dx.ptr(), accumulate);
    }

    FeatureShape in_;
    AttentionSpec spec_;
    Param wq_, bq_, wk_, bk_, wv_, bv_, wo_, bo_;
    std::size_t batch_ = 0;
    std::vector<double> x_, q_, k_, v_, attn_, o_;
};

// Flattens sequence inputs.
class Dense final : public Layer {
public:
    Dense(FeatureShape in, DenseSpec s, Rng& init) : in_(in), spec_(s) {
        const auto w = in.width();
        weight_ = {"kernel", Tensor({w, s.units}), Tensor({w, s.units})};
        bias_ = {"bias", Tensor({s.units}), Tensor({s.units})};
        init_uniform(weight_.value, fan_in_limit(w, s.activation), init);
    }

    std::string name() const override {
        return "Dense(" + std::to_string(spec_.units) + "," + std::string(to_string(spec_.activation)) + ")";
    }
    FeatureShape input_shape() const override { return in_; }
    FeatureShape output_shape() const override { return {1, spec_.units, false}; }

    Tensor forward(const Tensor& x, const LayerContext&) override {
        batch_ = batch_of(x, in_, name());
        x_ = x.data;
        Tensor y({batch_, spec_.units});
        kernels::gemm(batch_, spec_.units, in_.width(), x.ptr(), weight_.value.ptr(), y.ptr(), false);
        add_bias_rows(y.ptr(), batch_, bias_.value.ptr(), spec_.units);
        apply_activation(spec_.activation, y.ptr(), y.size());
        out_ = y.data;
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        std::vector<double> dz(dy.data);
        activation_backward(spec_.activation, out_.data(), dz.data(), dz.size());
        const auto w = in_.width();
        kernels::gemm_tn(w, spec_.units, batch_, x_.data(), dz.data(), weight_.grad.ptr(), true);
        kernels::column_sums(batch_, spec_.units, dz.data(), bias_.grad.ptr(), true);
        Tensor dx = in_.sequence ? Tensor({batch_, in_.steps, in_.channels}) : Tensor({batch_, w});
        kernels::gemm_nt(batch_, w, spec_.units, dz.data(), weight_.value.ptr(), dx.ptr(), false);
        return dx;
    }

    std::vector<Param*> params() override { return {&weight_, &bias_}; }

private:
    FeatureShape in_;
    DenseSpec spec_;
    Param weight_, bias_;
    std::size_t batch_ = 0;
    std::vector<double> x_, out_;
};

class Residual final : public Layer {
public:
    Residual(FeatureShape in, ResidualSpec s, Rng& init)
        : in_(in),
          spec_(s),
          conv_(in, Conv1DSpec{s.filters, s.kernel, Padding::Same, Activation::Linear}, init),
          bn_(in, BatchNormSpec{}) {}

    std::string name() const override {
        return "Residual(" + std::to_string(spec_.filters) + "," + std::to_string(spec_.kernel) + ")";
    }
    FeatureShape input_shape() const override { return in_; }
    FeatureShape output_shape() const override { return in_; }

    Tensor forward(const Tensor& x, const LayerContext& ctx) override {
        Tensor y = bn_.forward(conv_.forward(x, ctx), ctx);
        for (std::size_t i = 0; i < y.size(); ++i) y.data[i] = std::max(0.0, y.data[i] + x.data[i]);
        out_ = y.data;
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        Tensor ds = dy;
        for (std::size_t i = 0; i < ds.size(); ++i)
            if (out_[i] <= 0.0) ds.data[i] = 0.0;
        Tensor dx = conv_.backward(bn_.backward(ds));
        for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] += ds.data[i];
        return dx;
    }

    std::vector<Param*> params() override {
        auto p = conv_.params();
        for (auto* q : bn_.params()) p.push_back(q);
        return p;
    }
    std::vector<Tensor*> buffers() override { return bn_.buffers(); }

private:
    FeatureShape in_;
    ResidualSpec spec_;
    Conv1D conv_;
    BatchNorm bn_;
    std::vector<double> out_;
};

}  // namespace

std::unique_ptr<Layer> make_layer(const LayerSpec& spec, FeatureShape in, Rng& init) {
    return std::visit(
        [&](const auto& s) -> std::unique_ptr<Layer> {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, Conv1DSpec>) return std::make_unique<Conv1D>(in, s, init);
            else if constexpr (std::is_same_v<S, MaxPool1DSpec>) return std::make_unique<MaxPool1D>(in, s);
            else if constexpr (std::is_same_v<S, BatchNormSpec>) return std::make_unique<BatchNorm>(in, s);
            else if constexpr (std::is_same_v<S, DropoutSpec>) return std::make_unique<Dropout>(in, s);
            else if constexpr (std::is_same_v<S, LstmSpec>) return std::make_unique<Lstm>(in, s, init);
            else if constexpr (std::is_same_v<S, BiLstmSpec>) return std::make_unique<BiLstm>(in, s, init);
            else if constexpr (std::is_same_v<S, AttentionSpec>) return std::make_unique<MultiHeadAttention>(in, s, init);
            else if constexpr (std::is_same_v<S, DenseSpec>) return std::make_unique<Dense>(in, s, init);
            else return std::make_unique<Residual>(in, s, init);
        },
        spec);
}

}  // namespace nids
