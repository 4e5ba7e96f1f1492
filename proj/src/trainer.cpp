#include "nids/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nids/rng.hpp"
#include "nids/split.hpp"

namespace nids {

std::string_view to_string(Monitor m) { return m == Monitor::ValF1 ? "val_f1" : "val_loss"; }

std::optional<Monitor> parse_monitor(std::string_view s) {
    if (s == "val_loss") return Monitor::ValLoss;
    if (s == "val_f1") return Monitor::ValF1;
    return std::nullopt;
}

void TrainConfig::validate() const {
    if (epochs < 1) throw Error("train config: epochs must be >= 1");
    if (batch_size < 1) throw Error("train config: batch_size must be >= 1");
    if (patience < 1) throw Error("train config: patience must be >= 1");
    if (!(learning_rate > 0.0)) throw Error("train config: learning_rate must be positive");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
        throw Error("train config: validation_fraction must be in (0,1)");
    if (!(class_weights[0] > 0.0 && class_weights[1] > 0.0)) throw Error("train config: class weights must be positive");
}

DivergenceError::DivergenceError(std::size_t epoch, std::size_t batch, std::vector<EpochRecord> history)
    : Error("training diverged: non-finite loss or gradient at epoch " + std::to_string(epoch) + ", batch " +
            std::to_string(batch)),
      epoch_(epoch),
      batch_(batch),
      history_(std::move(history)) {}

bool EarlyStopping::update(std::size_t epoch, double value) {
    const bool better = best_epoch_ == 0 || (minimize_ ? value < best_ : value > best_);
    if (better) {
        best_ = value;
        best_epoch_ = epoch;
        wait_ = 0;
    } else {
        ++wait_;
    }
    return better;
}

double PlateauScheduler::update(double val_loss) {
    if (s_.kind == LrScheduleKind::Constant) return lr_;
    if (val_loss < best_) {
        best_ = val_loss;
        wait_ = 0;
    } else if (++wait_ >= s_.patience) {
        lr_ = std::max(lr_ * s_.factor, s_.min_lr);
        wait_ = 0;
    }
    return lr_;
}

Adam::Adam(std::vector<Param*> params, AdamParams p) : params_(std::move(params)), p_(p) {
    for (auto* q : params_) {
        m_.emplace_back(q->value.size(), 0.0);
        v_.emplace_back(q->value.size(), 0.0);
    }
}

void Adam::step(double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(p_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(p_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto& w = params_[i]->value.data;
        const auto& g = params_[i]->grad.data;
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t j = 0; j < w.size(); ++j) {
            m[j] = p_.beta1 * m[j] + (1.0 - p_.beta1) * g[j];
            v[j] = p_.beta2 * v[j] + (1.0 - p_.beta2) * g[j] * g[j];
            w[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + p_.epsilon);
        }
    }
}

namespace {

Tensor gather(const FeatureMatrix& x, std::span<const std::size_t> rows) {
    Tensor t({rows.size(), x.cols});
    for (std::size_t i = 0; i < rows.size(); ++i) std::copy_n(x.values.data() + rows[i] * x.cols, x.cols, t.ptr() + i * x.cols);
    return t;
}

bool grads_finite(Network& net) {
    for (auto* p : net.parameters())
        if (!p->grad.all_finite()) return false;
    return true;
}

}  // namespace

TrainResult train(Network& net, const FeatureMatrix& x, std::span<const std::uint8_t> y, const FeatureMatrix& vx,
                  std::span<const std::uint8_t> vy, const TrainConfig& cfg, const FocalLossParams& loss) {
    cfg.validate();
    loss.validate();
    if (x.rows == 0) throw Error("train: empty training set");
    if (vx.rows == 0) throw Error("train: empty validation set");
    if (y.size() != x.rows || vy.size() != vx.rows) throw ShapeError("train: label count does not match rows");
    if (x.cols != net.input_width() || vx.cols != net.input_width())
        throw ShapeError("train: matrix width " + std::to_string(x.cols) + " does not match network input " +
                         std::to_string(net.input_width()));

    TrainResult result;
    Adam adam(net.parameters(), cfg.adam);
    EarlyStopping stopper(cfg.patience, cfg.monitor == Monitor::ValLoss);
    PlateauScheduler scheduler(cfg.schedule, cfg.learning_rate);
    std::vector<Tensor> best_state = net.export_state();

    std::vector<std::size_t> order(x.rows);
    std::vector<std::uint8_t> batch_labels;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        Rng shuffler(mix_seed(cfg.rng_seed, epoch));
        shuffler.shuffle(order);

        const double lr = scheduler.rate();
        double loss_sum = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < x.rows; start += cfg.batch_size, ++batch_index) {
            const std::size_t n = std::min(cfg.batch_size, x.rows - start);
            const std::span<const std::size_t> rows(order.data() + start, n);
            batch_labels.resize(n);
            for (std::size_t i = 0; i < n; ++i) batch_labels[i] = y[rows[i]];

            net.zero_grad();
            const Tensor p = net.forward(gather(x, rows), Mode::Train, mix_seed(mix_seed(cfg.rng_seed, epoch), batch_index));
            const auto bl = batch_focal_loss(p.data, batch_labels, loss, cfg.class_weights);
            if (!std::isfinite(bl.value)) throw DivergenceError(epoch, batch_index, result.history);
            net.backward(Tensor({n, 1}, bl.grad));
            if (!grads_finite(net)) throw DivergenceError(epoch, batch_index, result.history);
            adam.step(lr);
            loss_sum += bl.value * static_cast<double>(n);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.learning_rate = lr;
        rec.train_loss = loss_sum / static_cast<double>(x.rows);
        const auto vp = net.predict_proba(vx);
        std::size_t tp = 0, fp = 0, fn = 0, correct = 0;
        for (std::size_t i = 0; i < vx.rows; ++i) {
            rec.val_loss += focal_loss(vp[i], vy[i], loss);
            const bool d = vp[i] >= 0.5;
            correct += d == (vy[i] != 0);
            tp += d && vy[i];
            fp += d && !vy[i];
            fn += !d && vy[i];
        }
        rec.val_loss /= static_cast<double>(vx.rows);
        if (!std::isfinite(rec.val_loss)) throw DivergenceError(epoch, batch_index, result.history);
        rec.val_accuracy = static_cast<double>(correct) / static_cast<double>(vx.rows);
        rec.val_f1 = tp == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
        result.history.push_back(rec);

        const double monitored = cfg.monitor == Monitor::ValLoss ? rec.val_loss : rec.val_f1;
        if (stopper.update(epoch, monitored) && cfg.restore_best) best_state = net.export_state();
        scheduler.update(rec.val_loss);
        if (stopper.should_stop()) {
            result.stopped_early = epoch < cfg.epochs;
            break;
        }
    }
    result.best_epoch = cfg.restore_best ? stopper.best_epoch() : result.history.back().epoch;
    if (cfg.restore_best) net.import_state(best_state);
    return result;
}

TrainResult train(Network& net, const FeatureMatrix& x, std::span<const std::uint8_t> y, const TrainConfig& cfg,
                  const FocalLossParams& loss) {
    cfg.validate();
    if (y.size() != x.rows) throw ShapeError("train: label count does not match rows");
    const auto split = stratified_split(as_strata(y), cfg.validation_fraction, mix_seed(cfg.rng_seed, 0x5a11));
    std::vector<std::uint8_t> ty, vy;
    for (auto i : split.train) ty.push_back(y[i]);
    for (auto i : split.holdout) vy.push_back(y[i]);
    return train(net, x.select_rows(split.train), ty, x.select_rows(split.holdout), vy, cfg, loss);
}

}  // namespace nids
