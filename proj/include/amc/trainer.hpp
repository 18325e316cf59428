#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <span>
#include <vector>

#include "amc/model.hpp"
#include "amc/nn/adam.hpp"

namespace amc::model {

struct LabeledSample {
    std::span<const std::complex<float>> samples;
    std::size_t label = 0;
    double snr_db = 0.0;
};

/// Views over records; the records must outlive the returned samples.
std::vector<LabeledSample> make_samples(std::span<const data::IQRecord> records, const LabelMap& labels);
std::vector<LabeledSample> make_samples(std::span<const data::IQRecord> records, const LabelMap& labels,
                                        std::span<const std::uint64_t> indices);

/// Tracks the best validation loss; an epoch counts as an improvement only
/// if it beats the best by more than min_delta.
class EarlyStopping {
public:
    EarlyStopping(int patience, double min_delta);

    /// Returns true when this epoch is the new best.
    bool update(double val_loss);
    bool should_stop() const { return counter_ >= patience_; }

    double best() const { return best_; }
    int counter() const { return counter_; }
    int patience() const { return patience_; }

private:
    int patience_;
    double min_delta_;
    double best_ = std::numeric_limits<double>::infinity();
    int counter_ = 0;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
};

struct TrainOptions {
    std::size_t batch_size = 256;
    int max_epochs = 100;
    int patience = 5;
    double min_delta = 1e-4;
    nn::AdamConfig adam{};
    unsigned threads = 1;
    std::uint64_t seed = 0;
    /// Called after every epoch; returning false ends training early.
    std::function<bool(const EpochRecord&)> on_epoch;
};

struct TrainState {
    int epoch = 0;
    int best_epoch = 0;
    double best_val_loss = std::numeric_limits<double>::infinity();
    int patience_counter = 0;
    bool early_stopped = false;
    std::uint64_t optimizer_steps = 0;
    std::vector<EpochRecord> history;
};

/// Mini-batch ADAM with early stopping on validation loss. On return the
/// model holds the weights of the best validation epoch.
template <typename T>
TrainState train(CnnModel<T>& model, std::span<const LabeledSample> train_set, std::span<const LabeledSample> val_set,
                 const TrainOptions& options);

struct Predictions {
    std::vector<std::vector<double>> probabilities;
    std::vector<std::size_t> labels;
};

template <typename T>
Predictions predict(const CnnModel<T>& model, std::span<const LabeledSample> samples, std::size_t batch = 64,
                    unsigned threads = 1);

/// Mean cross-entropy and accuracy of eval-mode predictions.
struct EvalSummary {
    double loss = 0.0;
    double accuracy = 0.0;
};
EvalSummary summarize(const Predictions& p, std::span<const LabeledSample> samples);

void write_history(std::ostream& out, const std::vector<EpochRecord>& history);

extern template TrainState train(CnnModel<float>&, std::span<const LabeledSample>, std::span<const LabeledSample>,
                                 const TrainOptions&);
extern template TrainState train(CnnModel<double>&, std::span<const LabeledSample>, std::span<const LabeledSample>,
                                 const TrainOptions&);
extern template Predictions predict(const CnnModel<float>&, std::span<const LabeledSample>, std::size_t, unsigned);
extern template Predictions predict(const CnnModel<double>&, std::span<const LabeledSample>, std::size_t, unsigned);

}  // namespace amc::model
