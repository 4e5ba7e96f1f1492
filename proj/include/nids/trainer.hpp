#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nids/loss.hpp"
#include "nids/network.hpp"

namespace nids {

struct AdamParams {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

enum class LrScheduleKind : std::uint8_t { Constant, ReduceOnPlateau };

struct LrSchedule {
    LrScheduleKind kind = LrScheduleKind::ReduceOnPlateau;
    double factor = 0.5;
    std::size_t patience = 3;
    double min_lr = 1e-6;
};

enum class Monitor : std::uint8_t { ValLoss, ValF1 };

std::string_view to_string(Monitor m);
std::optional<Monitor> parse_monitor(std::string_view s);

struct TrainConfig {
    std::size_t epochs = 50;
    std::size_t batch_size = 256;
    double learning_rate = 1e-3;
    AdamParams adam;
    LrSchedule schedule;
    std::size_t patience = 5;
    Monitor monitor = Monitor::ValLoss;
    bool restore_best = true;  // false keeps the last epoch's parameters
    double validation_fraction = 0.1;
    std::uint64_t rng_seed = 0;
    std::array<double, 2> class_weights{1.0, 1.0};

    void validate() const;
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
    double val_f1 = 0.0;
    double learning_rate = 0.0;
};

struct TrainResult {
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    bool stopped_early = false;
};

// Training aborted because the loss or a gradient stopped being finite.
// `history` holds every completed epoch.
class DivergenceError : public Error {
public:
    DivergenceError(std::size_t epoch, std::size_t batch, std::vector<EpochRecord> history);
    std::size_t epoch() const noexcept { return epoch_; }
    std::size_t batch() const noexcept { return batch_; }
    const std::vector<EpochRecord>& history() const noexcept { return history_; }

private:
    std::size_t epoch_, batch_;
    std::vector<EpochRecord> history_;
};

class EarlyStopping {
public:
    EarlyStopping(std::size_t patience, bool minimize) : patience_(patience), minimize_(minimize) {}
    // Returns true when `value` is a new best.
    bool update(std::size_t epoch, double value);
    bool should_stop() const noexcept { return wait_ >= patience_; }
    std::size_t best_epoch() const noexcept { return best_epoch_; }
    double best() const noexcept { return best_; }

private:
    std::size_t patience_;
    bool minimize_;
    double best_ = 0.0;
    std::size_t best_epoch_ = 0;
    std::size_t wait_ = 0;
};

class PlateauScheduler {
public:
    PlateauScheduler(LrSchedule s, double lr) : s_(s), lr_(lr) {}
    // Feeds one epoch's validation loss and returns the rate for the next epoch.
    double update(double val_loss);
    double rate() const noexcept { return lr_; }

private:
    LrSchedule s_;
    double lr_;
    double best_ = HUGE_VAL;
    std::size_t wait_ = 0;
};

class Adam {
public:
    Adam(std::vector<Param*> params, AdamParams p);
    void step(double lr);

private:
    std::vector<Param*> params_;
    AdamParams p_;
    std::vector<std::vector<double>> m_, v_;
    std::size_t t_ = 0;
};

// Trains on (x, y) and monitors (vx, vy). Returns with the network holding
// the best monitored epoch's parameters when cfg.restore_best is set.
TrainResult train(Network& net, const FeatureMatrix& x, std::span<const std::uint8_t> y, const FeatureMatrix& vx,
                  std::span<const std::uint8_t> vy, const TrainConfig& cfg, const FocalLossParams& loss);

// Holds out a stratified cfg.validation_fraction of the rows for monitoring.
TrainResult train(Network& net, const FeatureMatrix& x, std::span<const std::uint8_t> y, const TrainConfig& cfg,
                  const FocalLossParams& loss);

}  // namespace nids
