#include "sit/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sit/error.hpp"
#include "sit/kernels.hpp"

namespace sit {
namespace {

// Fork labels off the run seed; fixed so that the draw schedule is part of
// the determinism contract.
constexpr std::uint64_t kSplitLabel = 101;
constexpr std::uint64_t kShuffleLabel = 102;

} // namespace

void TrainConfig::validate() const {
    if (optimizer != "adam") {
        throw ConfigParseError("unsupported optimizer: " + optimizer);
    }
    if (plateau_factor <= 0.0 || plateau_factor >= 1.0) {
        throw ConfigParseError("plateau_factor must lie in (0, 1)");
    }
    if (plateau_patience < 1 || early_stop_patience < 1) {
        throw ConfigParseError("patiences must be >= 1");
    }
    if (val_fraction <= 0.0 || val_fraction >= 1.0) {
        throw ConfigParseError("val_fraction must lie in (0, 1)");
    }
    if (lr <= 0.0) throw ConfigParseError("lr must be > 0");
    if (batch_size < 1) throw ConfigParseError("batch_size must be >= 1");
    if (max_epochs < 1) throw ConfigParseError("max_epochs must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0) {
        throw ConfigParseError("dropout must lie in [0, 1)");
    }
    if (heads == 0 || d_proj % heads != 0) {
        throw ConfigParseError("heads must divide d_proj exactly");
    }
}

double mse_loss(const std::vector<double>& y, const std::vector<double>& yhat) {
    if (y.size() != yhat.size()) {
        throw LengthMismatch("mse_loss lengths differ: " + std::to_string(y.size()) + " vs " +
                             std::to_string(yhat.size()));
    }
    if (y.empty()) throw EmptyBatch("mse_loss on empty batch");
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = y[i] - yhat[i];
        acc += d * d;
    }
    return acc / static_cast<double>(y.size());
}

double mse_loss_grad(double y, double yhat, std::size_t n) {
    return 2.0 * (yhat - y) / static_cast<double>(n);
}

// ------------------------------------------------------------------ Adam

AdamOptimizer::AdamOptimizer(std::vector<ParamView> params, double beta1, double beta2,
                             double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const ParamView& p : params_) {
        m_.emplace_back(p.value->shape());
        v_.emplace_back(p.value->shape());
    }
}

void AdamOptimizer::step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const auto& kt = kernels::active();
    for (std::size_t i = 0; i < params_.size(); ++i) {
        ParamView& p = params_[i];
        if (!p.grad->same_shape(*p.value)) {
            throw ShapeMismatch("adam_step gradient shape mismatch for " + p.name);
        }
        kt.adam_update(p.value->data(), m_[i].data(), v_[i].data(), p.grad->data(),
                       p.value->size(), lr, beta1_, beta2_, eps_, bc1, bc2);
    }
}

// ------------------------------------------------------------- Scheduler

PlateauScheduler::PlateauScheduler(double initial_lr, std::size_t patience, double factor)
    : lr_(initial_lr),
      best_(std::numeric_limits<double>::infinity()),
      factor_(factor),
      patience_(patience) {}

double PlateauScheduler::update(double val_loss) {
    if (val_loss < best_) {
        best_ = val_loss;
        since_improvement_ = 0;
    } else if (++since_improvement_ >= patience_) {
        lr_ *= factor_;
        since_improvement_ = 0;
    }
    return lr_;
}

// ------------------------------------------------------------ EarlyStop

EarlyStopper::EarlyStopper(std::size_t patience)
    : patience_(patience), best_(std::numeric_limits<double>::infinity()) {}

TrainSignal EarlyStopper::update(double val_loss, const std::vector<ParamView>& params,
                                 std::size_t epoch) {
    if (val_loss < best_) {
        best_ = val_loss;
        best_epoch_ = epoch;
        since_improvement_ = 0;
        snapshot_.clear();
        snapshot_.reserve(params.size());
        for (const ParamView& p : params) snapshot_.push_back(*p.value);
        return TrainSignal::kContinue;
    }
    if (++since_improvement_ >= patience_) {
        return TrainSignal::kStop;
    }
    return TrainSignal::kContinue;
}

void EarlyStopper::restore(const std::vector<ParamView>& params) const {
    if (snapshot_.empty()) return;
    if (snapshot_.size() != params.size()) {
        throw ShapeMismatch("early-stop snapshot does not match the parameter list");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        *params[i].value = snapshot_[i];
    }
}

// ----------------------------------------------------------------- train

void split_dataset(std::size_t n, double val_fraction, std::uint64_t seed,
                   std::vector<std::size_t>& train_idx, std::vector<std::size_t>& val_idx) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    RngStream rng = RngStream(seed).fork(kSplitLabel);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const std::size_t j = i + rng.next_u64() % (n - i);
        std::swap(order[i], order[j]);
    }
    std::size_t val_count = static_cast<std::size_t>(
        std::floor(static_cast<double>(n) * val_fraction));
    if (val_count < 1) val_count = 1;
    if (val_count > n - 1) val_count = n - 1;
    val_idx.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(val_count));
    train_idx.assign(order.begin() + static_cast<std::ptrdiff_t>(val_count), order.end());
}

std::vector<double> predict(SITModel& model, const std::vector<Sample>& data) {
    std::vector<double> out;
    out.reserve(data.size());
    for (const Sample& s : data) {
        out.push_back(model.forward(s.features, Mode::kEval));
    }
    return out;
}

History train(SITModel& model, const std::vector<Sample>& data, const TrainConfig& cfg) {
    cfg.validate();
    if (data.empty()) throw EmptyDataset("training dataset is empty");

    std::vector<std::size_t> train_idx, val_idx;
    split_dataset(data.size(), cfg.val_fraction, cfg.seed, train_idx, val_idx);

    std::vector<ParamView> params = model.params();
    AdamOptimizer adam(params);
    PlateauScheduler scheduler(cfg.lr, cfg.plateau_patience, cfg.plateau_factor);
    EarlyStopper stopper(cfg.early_stop_patience);
    RngStream shuffle_rng = RngStream(cfg.seed).fork(kShuffleLabel);

    History history;
    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        for (std::size_t i = 0; i + 1 < train_idx.size(); ++i) {
            const std::size_t j = i + shuffle_rng.next_u64() % (train_idx.size() - i);
            std::swap(train_idx[i], train_idx[j]);
        }

        double train_sse = 0.0;
        const double lr_in_effect = scheduler.lr();
        for (std::size_t start = 0; start < train_idx.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(start + cfg.batch_size, train_idx.size());
            const std::size_t batch = stop - start;
            model.zero_grad();
            for (std::size_t k = start; k < stop; ++k) {
                const Sample& s = data[train_idx[k]];
                const double yhat = model.forward(s.features, Mode::kTrain);
                if (!std::isfinite(yhat)) {
                    throw DivergenceDetected("non-finite prediction at epoch " +
                                             std::to_string(epoch));
                }
                const double err = yhat - s.score;
                train_sse += err * err;
                model.backward(mse_loss_grad(s.score, yhat, batch));
            }
            adam.step(lr_in_effect);
        }
        const double train_loss = train_sse / static_cast<double>(train_idx.size());

        double val_sse = 0.0;
        for (std::size_t k : val_idx) {
            const double yhat = model.forward(data[k].features, Mode::kEval);
            const double err = yhat - data[k].score;
            val_sse += err * err;
        }
        const double val_loss = val_sse / static_cast<double>(val_idx.size());
        if (!std::isfinite(train_loss) || !std::isfinite(val_loss)) {
            throw DivergenceDetected("non-finite loss at epoch " + std::to_string(epoch) +
                                     " (train " + std::to_string(train_loss) + ", val " +
                                     std::to_string(val_loss) + ")");
        }

        const double new_lr = scheduler.update(val_loss);
        const TrainSignal signal = stopper.update(val_loss, params, epoch);
        history.epochs.push_back({epoch, train_loss, val_loss, new_lr});
        history.stopped_epoch = epoch;
        if (signal == TrainSignal::kStop) break;
    }
    stopper.restore(params);
    history.best_epoch = stopper.best_epoch();
    return history;
}

} // namespace sit
