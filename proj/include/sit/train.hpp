#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sit/metrics.hpp"
#include "sit/model.hpp"

namespace sit {

// Hyperparameters: defaults reproduce the published configuration exactly.
struct TrainConfig {
    std::size_t d_proj = 128;
    std::size_t blocks = 2;
    std::size_t heads = 4;
    std::size_t ffn_dim = 512;
    double dropout = 0.1;
    std::string optimizer = "adam";
    double lr = 1e-4;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 300;
    std::size_t early_stop_patience = 10;
    std::size_t plateau_patience = 5;
    double plateau_factor = 0.5;
    std::uint64_t seed = 42;
    double val_fraction = 0.2;
    std::size_t backbone_channels = 1280;
    Variant variant = Variant::kFull;

    ModelConfig model_config() const {
        return {backbone_channels, d_proj, blocks, heads, ffn_dim, dropout};
    }
    void validate() const;  // throws ConfigParseError
};

// (1/n) sum (y_i - yhat_i)^2. Gradient helper returns d/dyhat_i.
double mse_loss(const std::vector<double>& y, const std::vector<double>& yhat);
double mse_loss_grad(double y, double yhat, std::size_t n);

// Bias-corrected Adam over a fixed parameter list.
class AdamOptimizer {
public:
    AdamOptimizer(std::vector<ParamView> params, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8);

    void step(double lr);  // consumes current gradients
    std::size_t timestep() const { return t_; }

private:
    std::vector<ParamView> params_;
    std::vector<Tensor> m_, v_;
    double beta1_, beta2_, eps_;
    std::size_t t_ = 0;
};

// Halves (well, multiplies by `factor`) the learning rate after `patience`
// epochs without a strictly lower validation loss.
class PlateauScheduler {
public:
    PlateauScheduler(double initial_lr, std::size_t patience, double factor);

    double update(double val_loss);  // once per epoch; returns the new lr
    double lr() const { return lr_; }
    double best() const { return best_; }

private:
    double lr_, best_, factor_;
    std::size_t patience_, since_improvement_ = 0;
};

enum class TrainSignal { kContinue, kStop };

// Snapshots the best-validation parameters; stops after `patience` epochs
// without strict improvement and restores the snapshot.
class EarlyStopper {
public:
    explicit EarlyStopper(std::size_t patience);

    TrainSignal update(double val_loss, const std::vector<ParamView>& params, std::size_t epoch);
    void restore(const std::vector<ParamView>& params) const;
    bool has_snapshot() const { return !snapshot_.empty(); }
    double best() const { return best_; }
    std::size_t best_epoch() const { return best_epoch_; }

private:
    std::size_t patience_, since_improvement_ = 0, best_epoch_ = 0;
    double best_;
    std::vector<Tensor> snapshot_;
};

struct Sample {
    Tensor features;
    double score;
};

struct EpochRecord {
    std::size_t epoch;      // 1-based
    double train_loss;
    double val_loss;
    double lr;              // in effect after the epoch's scheduler update
};

struct History {
    std::vector<EpochRecord> epochs;
    std::size_t stopped_epoch = 0;  // last epoch run
    std::size_t best_epoch = 0;     // epoch of the best validation loss
};

// The full training procedure: seeded shuffle-split, per-epoch seeded
// shuffling, batches of cfg.batch_size (last partial batch trained on),
// Train-mode forward + MSE backward + Adam step per batch, then validation,
// plateau scheduling, and early stopping. The best-validation snapshot is
// restored at the end of training. Deterministic given (seed, data, config).
History train(SITModel& model, const std::vector<Sample>& data, const TrainConfig& cfg);

// Eval-mode predictions over a sample list.
std::vector<double> predict(SITModel& model, const std::vector<Sample>& data);

// Deterministic split used by train(): indices shuffled by cfg.seed, the
// first floor(n * val_fraction) (clamped to [1, n-1]) going to validation.
void split_dataset(std::size_t n, double val_fraction, std::uint64_t seed,
                   std::vector<std::size_t>& train_idx, std::vector<std::size_t>& val_idx);

} // namespace sit
