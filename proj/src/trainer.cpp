#include "amc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <iomanip>
#include <numeric>
#include <thread>

#include "amc/errors.hpp"
#include "amc/rng.hpp"

namespace amc::model {

std::vector<LabeledSample> make_samples(std::span<const data::IQRecord> records, const LabelMap& labels) {
    std::vector<LabeledSample> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back({r.samples, labels.label_of(r.modulation), double(r.snr_db)});
    return out;
}

std::vector<LabeledSample> make_samples(std::span<const data::IQRecord> records, const LabelMap& labels,
                                        std::span<const std::uint64_t> indices) {
    std::vector<LabeledSample> out;
    out.reserve(indices.size());
    for (auto i : indices) {
        if (i >= records.size())
            throw InvalidArgument("record index " + std::to_string(i) + " out of range (" +
                                  std::to_string(records.size()) + " records)");
        const auto& r = records[i];
        out.push_back({r.samples, labels.label_of(r.modulation), double(r.snr_db)});
    }
    return out;
}

EarlyStopping::EarlyStopping(int patience, double min_delta) : patience_(patience), min_delta_(min_delta) {
    if (patience < 1) throw InvalidArgument("patience must be at least 1 epoch");
    if (!(min_delta >= 0.0)) throw InvalidArgument("min_delta must be non-negative");
}

bool EarlyStopping::update(double val_loss) {
    if (val_loss < best_ - min_delta_) {
        best_ = val_loss;
        counter_ = 0;
        return true;
    }
    ++counter_;
    return false;
}

namespace {

constexpr unsigned kLanes = 8;

// Splits [0, n) into `parts` contiguous ranges; the split depends only on
// (n, parts) so reductions happen in a fixed order.
std::vector<std::pair<std::size_t, std::size_t>> partition(std::size_t n, unsigned parts) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    const std::size_t base = n / parts, extra = n % parts;
    std::size_t pos = 0;
    for (unsigned p = 0; p < parts; ++p) {
        const std::size_t len = base + (p < extra ? 1 : 0);
        out.emplace_back(pos, pos + len);
        pos += len;
    }
    return out;
}

// Worker exceptions are rethrown on the calling thread, lowest index first.
template <typename F>
void run_parallel(unsigned threads, F&& fn) {
    if (threads <= 1) {
        fn(0u);
        return;
    }
    std::vector<std::exception_ptr> errors(threads);
    {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (unsigned t = 0; t < threads; ++t)
            pool.emplace_back([&fn, &errors, t] {
                try {
                    fn(t);
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace

template <typename T>
TrainState train(CnnModel<T>& model, std::span<const LabeledSample> train_set, std::span<const LabeledSample> val_set,
                 const TrainOptions& options) {
    if (train_set.empty()) throw InvalidArgument("training set is empty");
    if (val_set.empty()) throw InvalidArgument("validation set is empty");
    if (options.batch_size < 1) throw InvalidArgument("batch size must be at least 1");
    if (options.max_epochs < 1) throw InvalidArgument("max epochs must be at least 1");
    for (const auto& s : train_set)
        if (s.label >= model.config().n_classes)
            throw InvalidArgument("training label " + std::to_string(s.label) + " outside the model's " +
                                  std::to_string(model.config().n_classes) + " classes");

    const unsigned threads = std::clamp(options.threads, 1u, kLanes);
    nn::Adam<T> adam(options.adam);
    EarlyStopping stopper(options.patience, options.min_delta);
    TrainState state;

    // Each batch is cut into kLanes fixed slices that are accumulated and
    // reduced in lane order, so results do not depend on the thread count.
    std::vector<ModelParams<T>> lane_grads(kLanes, ModelParams<T>::zeros_like(model.params()));
    ModelParams<T> total = ModelParams<T>::zeros_like(model.params());
    ModelParams<T> best = model.params();
    std::vector<double> lane_loss(kLanes);
    std::vector<std::size_t> lane_correct(kLanes);

    std::vector<std::size_t> order(train_set.size());
    for (int epoch = 1; epoch <= options.max_epochs; ++epoch) {
        state.epoch = epoch;
        const std::uint64_t epoch_seed = derive_seed(options.seed, static_cast<std::uint64_t>(epoch));
        std::iota(order.begin(), order.end(), std::size_t{0});
        auto shuffle_eng = make_engine(derive_seed(epoch_seed, Stream::Shuffle));
        std::shuffle(order.begin(), order.end(), shuffle_eng);

        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
            const std::size_t n = std::min(options.batch_size, order.size() - start);
            const auto ranges = partition(n, kLanes);
            run_parallel(threads, [&](unsigned t) {
                for (unsigned lane = t; lane < kLanes; lane += threads) {
                    auto& g = lane_grads[lane];
                    g.fill(T{0});
                    lane_loss[lane] = 0.0;
                    lane_correct[lane] = 0;
                    for (std::size_t i = ranges[lane].first; i < ranges[lane].second; ++i) {
                        const std::size_t idx = order[start + i];
                        const auto& s = train_set[idx];
                        const auto input = model.input_tensor(s.samples);
                        const auto st =
                            model.accumulate_gradients(input, s.label, s.snr_db, derive_seed(epoch_seed, idx), g);
                        lane_loss[lane] += st.loss;
                        lane_correct[lane] += st.correct ? 1 : 0;
                    }
                }
            });
            total.fill(T{0});
            for (unsigned lane = 0; lane < kLanes; ++lane) {
                if (ranges[lane].first == ranges[lane].second) continue;
                total.add(lane_grads[lane]);
                loss_sum += lane_loss[lane];
                correct += lane_correct[lane];
            }
            if (!std::isfinite(loss_sum)) throw TrainingDivergence("non-finite training loss", epoch);
            total.scale(static_cast<T>(1.0 / static_cast<double>(n)));
            auto params = model.params().tensors();
            const auto grads = std::as_const(total).tensors();
            try {
                adam.step(params, grads);
            } catch (const TrainingDivergence& e) {
                throw TrainingDivergence(e.what(), epoch);
            }
        }

        const auto val_pred = predict(model, val_set, 64, threads);
        const auto val = summarize(val_pred, val_set);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(train_set.size());
        rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(train_set.size());
        rec.val_loss = val.loss;
        rec.val_accuracy = val.accuracy;
        if (!std::isfinite(rec.val_loss)) throw TrainingDivergence("non-finite validation loss", epoch);
        state.history.push_back(rec);

        if (stopper.update(rec.val_loss)) {
            best = model.params();
            state.best_epoch = epoch;
        }
        state.best_val_loss = stopper.best();
        state.patience_counter = stopper.counter();
        state.optimizer_steps = adam.steps();

        const bool keep_going = !options.on_epoch || options.on_epoch(rec);
        if (stopper.should_stop()) {
            state.early_stopped = true;
            break;
        }
        if (!keep_going) break;
    }
    model.params() = std::move(best);
    return state;
}

template <typename T>
Predictions predict(const CnnModel<T>& model, std::span<const LabeledSample> samples, std::size_t batch,
                    unsigned threads) {
    if (batch < 1) throw InvalidArgument("prediction batch must be at least 1");
    threads = std::max(1u, threads);
    Predictions out;
    out.probabilities.resize(samples.size());
    out.labels.resize(samples.size());
    for (std::size_t start = 0; start < samples.size(); start += batch) {
        const std::size_t n = std::min(batch, samples.size() - start);
        const auto ranges = partition(n, threads);
        run_parallel(threads, [&](unsigned t) {
            for (std::size_t i = ranges[t].first; i < ranges[t].second; ++i) {
                const std::size_t idx = start + i;
                const auto p = model.probabilities(model.input_tensor(samples[idx].samples));
                out.probabilities[idx].assign(p.begin(), p.end());
                out.labels[idx] = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
            }
        });
    }
    return out;
}

EvalSummary summarize(const Predictions& p, std::span<const LabeledSample> samples) {
    if (samples.empty()) return {};
    double loss = 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        loss += nn::cross_entropy<double>(p.probabilities[i], samples[i].label);
        correct += p.labels[i] == samples[i].label ? 1 : 0;
    }
    return {loss / static_cast<double>(samples.size()),
            static_cast<double>(correct) / static_cast<double>(samples.size())};
}

void write_history(std::ostream& out, const std::vector<EpochRecord>& history) {
    out << "epoch,train_loss,val_loss,val_acc\n";
    const auto flags = out.flags();
    const auto prec = out.precision();
    out << std::setprecision(17);
    for (const auto& r : history)
        out << r.epoch << "," << r.train_loss << "," << r.val_loss << "," << r.val_accuracy << "\n";
    out.flags(flags);
    out.precision(prec);
}

template TrainState train(CnnModel<float>&, std::span<const LabeledSample>, std::span<const LabeledSample>,
                          const TrainOptions&);
template TrainState train(CnnModel<double>&, std::span<const LabeledSample>, std::span<const LabeledSample>,
                          const TrainOptions&);
template Predictions predict(const CnnModel<float>&, std::span<const LabeledSample>, std::size_t, unsigned);
template Predictions predict(const CnnModel<double>&, std::span<const LabeledSample>, std::size_t, unsigned);

}  // namespace amc::model
