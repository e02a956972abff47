#include "oslnet/training.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <sstream>
#include <thread>

#include "oslnet/errors.hpp"
#include "oslnet/random.hpp"

namespace oslnet {

namespace {

// Salts for deriving independent streams from one run seed.
enum Stream : std::uint64_t { kInit = 1, kShuffle = 2, kDropout = 100, kDropConnect = 200 };

bool is_large_margin(const LossKind& k) { return std::holds_alternative<LargeMarginLoss>(k); }

}  // namespace

void ModelSpec::validate() const {
    if (input_dim == 0) throw ConfigError("model: input_dim must be positive");
    if (hidden_widths.empty()) throw ConfigError("model: hidden_widths must not be empty");
    for (std::size_t w : hidden_widths)
        if (w == 0) throw ConfigError("model: hidden widths must be positive");
    if (class_count < 2) throw ConfigError("model: need at least 2 classes");
    if (classifier == ClassifierKind::osl && hidden_widths.back() < class_count) {
        throw ConfigError("model: last hidden width " + std::to_string(hidden_widths.back()) +
                          " is smaller than the class count " + std::to_string(class_count) +
                          "; each class needs at least one hidden neuron");
    }
    if (hidden_dropout && !(*hidden_dropout >= 0.0 && *hidden_dropout < 1.0))
        throw ConfigError("model: hidden_dropout must lie in [0, 1)");
    if (hidden_dropconnect && !(*hidden_dropconnect >= 0.0 && *hidden_dropconnect < 1.0))
        throw ConfigError("model: hidden_dropconnect must lie in [0, 1)");
    oslnet::validate(loss);
    if (is_large_margin(loss) && classifier == ClassifierKind::osl)
        throw ConfigError("model: large_margin loss requires an unmasked fc classifier, not osl");
}

void TrainConfig::validate() const {
    if (epochs == 0) throw ConfigError("train: epochs must be >= 1");
    if (batch_size == 0) throw ConfigError("train: batch_size must be >= 1");
    if (snapshot_count > 0 && granularity == Granularity::epoch && epochs % snapshot_count != 0) {
        throw ConfigError("train: epochs (" + std::to_string(epochs) +
                          ") must be a multiple of snapshot_count (" +
                          std::to_string(snapshot_count) + ")");
    }
    Optimizer probe(optimizer);
    (void)probe;
}

// ---------------------------------------------------------------- network

Network::Network(const ModelSpec& spec, std::uint64_t seed) : spec_(spec) {
    spec_.validate();
    Rng rng(Rng::mix(seed, kInit));
    std::size_t width = spec_.input_dim;
    for (std::size_t i = 0; i < spec_.hidden_widths.size(); ++i) {
        const std::size_t out = spec_.hidden_widths[i];
        DenseLayer dense(width, out, Activation::relu, spec_.hidden_bias, rng);
        HiddenBlock block{std::move(dense), std::nullopt};
        if (spec_.hidden_dropconnect) {
            block.layer = DropConnectLayer(std::get<DenseLayer>(block.layer), *spec_.hidden_dropconnect,
                                           Rng::mix(seed, kDropConnect + i));
        }
        if (spec_.hidden_dropout) block.dropout.emplace(*spec_.hidden_dropout, Rng::mix(seed, kDropout + i));
        hidden_.push_back(std::move(block));
        width = out;
    }
    if (spec_.classifier == ClassifierKind::osl) {
        osl_.emplace(width, spec_.class_count, rng, spec_.classifier_bias);
    } else {
        fc_.emplace(width, spec_.class_count, Activation::softmax, spec_.classifier_bias, rng);
    }
}

void Network::set_mode(Mode mode) {
    for (auto& block : hidden_) {
        if (auto* dc = std::get_if<DropConnectLayer>(&block.layer)) dc->set_mode(mode);
        if (block.dropout) block.dropout->set_mode(mode);
    }
}

Matrix Network::features(const Matrix& inputs) const {
    Matrix h = inputs;
    for (const auto& block : hidden_) {
        // dropout is the identity in evaluation mode
        h = std::visit([&](const auto& layer) { return layer.apply(h); }, block.layer);
    }
    return h;
}

Matrix Network::predict(const Matrix& inputs) const {
    const Matrix h = features(inputs);
    return osl_ ? osl_->apply(h) : fc_->apply(h);
}

Matrix Network::classifier_weights() const {
    return osl_ ? osl_->effective_weights() : fc_->weights();
}

std::vector<Matrix*> Network::parameters() {
    std::vector<Matrix*> out;
    for (auto& block : hidden_) {
        DenseLayer& dense = std::visit(
            [](auto& layer) -> DenseLayer& {
                if constexpr (std::is_same_v<std::decay_t<decltype(layer)>, DenseLayer>)
                    return layer;
                else
                    return layer.dense();
            },
            block.layer);
        out.push_back(&dense.weights());
        if (dense.has_bias()) out.push_back(&dense.bias());
    }
    if (osl_) {
        out.push_back(&osl_->weights());
        if (osl_->has_bias()) out.push_back(&osl_->bias());
    } else {
        out.push_back(&fc_->weights());
        if (fc_->has_bias()) out.push_back(&fc_->bias());
    }
    return out;
}

std::vector<const Matrix*> Network::parameters() const {
    auto mutable_params = const_cast<Network*>(this)->parameters();
    return {mutable_params.begin(), mutable_params.end()};
}

bool Network::masked_entries_zero() const {
    if (!osl_) return true;
    const Matrix& mask = osl_->mask().matrix();
    const Matrix& w = osl_->weights();
    for (std::size_t i = 0; i < w.size(); ++i)
        if (mask.data()[i] == 0.0 && w.data()[i] != 0.0) return false;
    return true;
}

Network::StepOutcome Network::forward_backward(const Matrix& inputs, Labels labels,
                                               double margin_lambda, const ClassCenters* centers) {
    set_mode(Mode::train);
    Matrix h = inputs;
    for (auto& block : hidden_) {
        h = std::visit([&](auto& layer) { return layer.forward(h); }, block.layer);
        if (block.dropout) h = block.dropout->forward(h);
    }

    const bool margin = is_large_margin(spec_.loss);
    Matrix logits;
    if (osl_) {
        logits = osl_->forward_pre(h);
    } else if (margin) {
        logits = large_margin_logits(fc_->weights(), h, labels, 2, margin_lambda);
        if (fc_->has_bias()) add_column_broadcast(logits, fc_->bias());
    } else {
        logits = fc_->forward_pre(h);
    }
    const Matrix probs = softmax(logits);

    StepOutcome out;
    LossResult loss = std::visit(
        [&](const auto& kind) -> LossResult {
            using T = std::decay_t<decltype(kind)>;
            if constexpr (std::is_same_v<T, FocalLoss>)
                return focal(probs, labels, kind.gamma);
            else if constexpr (std::is_same_v<T, TruncatedLqLoss>)
                return truncated_lq(probs, labels, kind.q, kind.k_thresh);
            else
                return cross_entropy(probs, labels);
        },
        spec_.loss);
    out.loss = loss.loss;
    for (std::size_t c = 0; c < probs.cols(); ++c)
        if (argmax_in_column(probs, c) == labels[c]) ++out.correct;

    Matrix grad_h;
    std::vector<Matrix> classifier_grads;
    if (osl_) {
        OslGrads g = osl_->backward_pre(loss.grad_logits);
        classifier_grads.push_back(std::move(g.weights));
        if (osl_->has_bias()) classifier_grads.push_back(std::move(g.bias));
        grad_h = std::move(g.input);
    } else if (margin) {
        LargeMarginGrads g =
            large_margin_backward(fc_->weights(), h, labels, margin_lambda, loss.grad_logits);
        classifier_grads.push_back(std::move(g.weights));
        if (fc_->has_bias()) classifier_grads.push_back(row_sums(loss.grad_logits));
        grad_h = std::move(g.features);
    } else {
        DenseGrads g = fc_->backward_pre(loss.grad_logits);
        classifier_grads.push_back(std::move(g.weights));
        if (fc_->has_bias()) classifier_grads.push_back(std::move(g.bias));
        grad_h = std::move(g.input);
    }

    if (const auto* center = std::get_if<CenterLoss>(&spec_.loss)) {
        if (!centers) throw StateError("center loss requires class centers");
        CenterLossResult c = center_loss(h, labels, *centers, center->lambda);
        out.loss += c.loss;
        grad_h += c.grad_features;
        out.center_update = std::move(c.center_update);
    }

    std::vector<Matrix> hidden_grads;
    for (std::size_t i = hidden_.size(); i-- > 0;) {
        auto& block = hidden_[i];
        if (block.dropout) grad_h = block.dropout->backward(grad_h);
        DenseGrads g = std::visit([&](const auto& layer) { return layer.backward(grad_h); }, block.layer);
        if (!g.bias.empty()) hidden_grads.push_back(std::move(g.bias));
        hidden_grads.push_back(std::move(g.weights));
        grad_h = std::move(g.input);
    }
    out.grads.assign(std::make_move_iterator(hidden_grads.rbegin()),
                     std::make_move_iterator(hidden_grads.rend()));
    for (auto& g : classifier_grads) out.grads.push_back(std::move(g));
    return out;
}

// ---------------------------------------------------------------- evaluation

double accuracy(const Matrix& probs, Labels labels) {
    if (labels.empty()) throw ArgumentError("accuracy: empty split");
    if (labels.size() != probs.cols()) throw ShapeError("accuracy: label count mismatch");
    std::size_t correct = 0;
    for (std::size_t c = 0; c < probs.cols(); ++c)
        if (argmax_in_column(probs, c) == labels[c]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(labels.size());
}

namespace {

template <typename Predictor>
double evaluate_with(const Predictor& predict, const Dataset& data, Split split) {
    const auto labels = data.labels_of(split);
    if (labels.empty()) throw ArgumentError("evaluate: the requested split is empty");
    return accuracy(predict(data.features_of(split)), labels);
}

}  // namespace

double evaluate(const Network& model, const Dataset& data, Split split) {
    if (data.dim() != model.spec().input_dim)
        throw ShapeError("evaluate: model input dim does not match the data");
    return evaluate_with([&](const Matrix& x) { return model.predict(x); }, data, split);
}

double evaluate(const SnapshotSet<Network>& snapshots, const Dataset& data, Split split) {
    return evaluate_with([&](const Matrix& x) { return ensemble_predict(snapshots, x); }, data, split);
}

double evaluate_cross_entropy(const Network& model, const Dataset& data, Split split) {
    const auto labels = data.labels_of(split);
    if (labels.empty()) throw ArgumentError("evaluate: the requested split is empty");
    return cross_entropy(model.predict(data.features_of(split)), labels).loss;
}

// ---------------------------------------------------------------- training

std::string fnv1a_hex(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << h;
    return os.str();
}

std::string config_fingerprint(const ModelSpec& spec, const TrainConfig& config) {
    std::ostringstream os;
    os.precision(17);
    os << "in=" << spec.input_dim << ";hidden=";
    for (std::size_t w : spec.hidden_widths) os << w << ',';
    os << ";k=" << spec.class_count << ";cls=" << static_cast<int>(spec.classifier)
       << ";drop=" << spec.hidden_dropout.value_or(-1) << ";dc=" << spec.hidden_dropconnect.value_or(-1)
       << ";loss=" << loss_name(spec.loss) << ";cb=" << spec.classifier_bias << ";hb=" << spec.hidden_bias;
    std::visit(
        [&](const auto& k) {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, FocalLoss>) os << ",g=" << k.gamma;
            if constexpr (std::is_same_v<T, CenterLoss>) os << ",l=" << k.lambda << ",a=" << k.center_rate;
            if constexpr (std::is_same_v<T, TruncatedLqLoss>) os << ",q=" << k.q << ",k=" << k.k_thresh;
            if constexpr (std::is_same_v<T, LargeMarginLoss>)
                os << ",m=" << k.m << ",ls=" << k.lambda_start << ",ld=" << k.lambda_decay
                   << ",lf=" << k.lambda_floor;
        },
        spec.loss);
    os << ";epochs=" << config.epochs << ";bs=" << config.batch_size
       << ";opt=" << static_cast<int>(config.optimizer.kind) << ',' << config.optimizer.lr << ','
       << config.optimizer.smoothing << ',' << config.optimizer.epsilon
       << ";sched=" << static_cast<int>(config.schedule) << ";gran=" << static_cast<int>(config.granularity)
       << ";snap=" << config.snapshot_count;
    return fnv1a_hex(os.str());
}

TrainOutcome train(const ModelSpec& spec, const TrainConfig& config, const Dataset& data) {
    const auto start = std::chrono::steady_clock::now();
    spec.validate();
    config.validate();
    data.validate();
    if (data.dim() != spec.input_dim) {
        throw ShapeError("train: data dim " + std::to_string(data.dim()) + " but model input dim " +
                         std::to_string(spec.input_dim));
    }
    if (data.class_count > spec.class_count)
        throw LabelError("train: data has more classes than the model");

    const auto train_idx = data.indices(Split::train);
    if (train_idx.empty()) throw ArgumentError("train: no training samples");

    TrainOutcome out{RunResult{}, Network(spec, config.seed), SnapshotSet<Network>{}};
    Network& model = out.model;
    Optimizer optimizer(config.optimizer);
    Rng shuffle_rng(Rng::mix(config.seed, kShuffle));

    const std::size_t batches_per_epoch = (train_idx.size() + config.batch_size - 1) / config.batch_size;
    const std::size_t total_iterations = batches_per_epoch * config.epochs;
    const bool per_epoch = config.granularity == Granularity::epoch;

    std::optional<CosineSchedule> schedule;
    if (config.snapshot_count > 0 || config.schedule == ScheduleKind::cosine) {
        const std::size_t cycles = std::max<std::size_t>(1, config.snapshot_count);
        const std::size_t steps = per_epoch ? config.epochs : total_iterations;
        if (steps % cycles != 0) {
            throw ConfigError("train: " + std::to_string(steps) + " schedule steps cannot be split into " +
                              std::to_string(cycles) + " equal cycles");
        }
        schedule.emplace(config.optimizer.lr, steps / cycles, cycles);
    }

    std::optional<ClassCenters> centers;
    if (const auto* c = std::get_if<CenterLoss>(&spec.loss))
        centers.emplace(spec.hidden_widths.back(), spec.class_count, c->center_rate);
    const auto* margin = std::get_if<LargeMarginLoss>(&spec.loss);

    std::vector<Matrix*> params = model.parameters();
    std::vector<std::size_t> order = train_idx;
    std::size_t iteration = 0;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        const double margin_lambda = margin ? margin->lambda_at_epoch(epoch) : 0.0;
        double loss_sum = 0.0;
        std::size_t correct = 0;

        for (std::size_t b = 0; b < batches_per_epoch; ++b, ++iteration) {
            const std::size_t lo = b * config.batch_size;
            const std::size_t hi = std::min(order.size(), lo + config.batch_size);
            const std::span<const std::size_t> batch_idx(order.data() + lo, hi - lo);
            const Matrix x = data.features.select_cols(batch_idx);
            std::vector<std::size_t> y;
            y.reserve(batch_idx.size());
            for (std::size_t i : batch_idx) y.push_back(data.labels[i]);

            auto step = model.forward_backward(x, y, margin_lambda, centers ? &*centers : nullptr);
            if (!std::isfinite(step.loss) || step.loss > kDivergenceThreshold) {
                throw DivergedError("training diverged at epoch " + std::to_string(epoch) +
                                        " (batch loss " + std::to_string(step.loss) + ")",
                                    epoch);
            }
            const double lr = schedule ? schedule->rate(per_epoch ? epoch : iteration) : config.optimizer.lr;
            optimizer.step(params, step.grads, lr);
            if (centers) apply_center_update(*centers, step.center_update);

            loss_sum += step.loss * static_cast<double>(batch_idx.size());
            correct += step.correct;

            if (config.snapshot_count > 0 && !per_epoch && schedule->is_cycle_boundary(iteration + 1))
                out.snapshots.capture(model, iteration + 1, *schedule);
        }

        if (!model.masked_entries_zero())
            throw StateError("orthogonality violated: a masked classifier weight became nonzero");
        out.result.loss_curve.push_back(loss_sum / static_cast<double>(order.size()));
        out.result.acc_curve.push_back(static_cast<double>(correct) / static_cast<double>(order.size()));

        if (config.snapshot_count > 0 && per_epoch && schedule->is_cycle_boundary(epoch + 1))
            out.snapshots.capture(model, epoch + 1, *schedule);
    }

    model.set_mode(Mode::eval);
    RunResult& r = out.result;
    r.seed = config.seed;
    r.config_hash = config_fingerprint(spec, config);
    if (config.snapshot_count > 0) {
        r.train_acc = evaluate(out.snapshots, data, Split::train);
        r.test_acc = evaluate(out.snapshots, data, Split::test);
        r.train_loss = cross_entropy(ensemble_predict(out.snapshots, data.features_of(Split::train)),
                                     data.labels_of(Split::train))
                           .loss;
    } else {
        r.train_acc = evaluate(model, data, Split::train);
        r.test_acc = evaluate(model, data, Split::test);
        r.train_loss = evaluate_cross_entropy(model, data, Split::train);
    }
    r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

// ---------------------------------------------------------------- rounds

PreparedData::PreparedData(DataRecipe recipe) : recipe_(std::move(recipe)) {
    if (const auto* blobs = std::get_if<BlobParams>(&recipe_.source)) {
        BlobParams p = *blobs;
        p.seed = recipe_.data_seed;
        base_ = generate_blobs(p);
    } else {
        const Dataset& loaded = std::get<Dataset>(recipe_.source);
        if (recipe_.per_round == RoundData::regenerate)
            throw ConfigError("data: a loaded dataset cannot be regenerated per round");
        const bool unsplit = !loaded.indices(Split::unassigned).empty();
        base_ = unsplit ? split_per_class(loaded, recipe_.train_fraction, recipe_.data_seed) : loaded;
    }
}

Dataset PreparedData::for_round(std::size_t round) const {
    const std::uint64_t round_seed = Rng::mix(recipe_.data_seed, round);
    Dataset d;
    switch (recipe_.per_round) {
        case RoundData::fixed: d = base_; break;
        case RoundData::resplit:
            if (const auto* loaded = std::get_if<Dataset>(&recipe_.source);
                loaded && !loaded->indices(Split::unassigned).empty())
                d = split_per_class(*loaded, recipe_.train_fraction, round_seed);
            else
                d = resplit(base_, round_seed);
            break;
        case RoundData::regenerate: {
            BlobParams p = std::get<BlobParams>(recipe_.source);
            p.seed = round_seed;
            d = generate_blobs(p);
            break;
        }
    }
    if (recipe_.reduce_per_class > 0)
        d = reduce_training(d, recipe_.reduce_per_class, Rng::mix(round_seed, 7));
    return d;
}

RoundsOutcome run_rounds(const ModelSpec& spec, const TrainConfig& config, const PreparedData& data,
                         std::size_t rounds, std::size_t workers) {
    if (rounds < 2) throw ArgumentError("run_rounds: need at least 2 rounds");
    spec.validate();
    config.validate();

    struct Slot {
        std::optional<RunResult> result;
        std::optional<Matrix> weights;
        std::optional<RoundFailure> failure;
    };
    std::vector<Slot> slots(rounds);
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (std::size_t i = next++; i < rounds; i = next++) {
            TrainConfig round_config = config;
            round_config.seed = config.seed + i;
            try {
                TrainOutcome t = train(spec, round_config, data.for_round(i));
                t.result.round = i;
                slots[i].result = std::move(t.result);
                slots[i].weights = t.model.classifier_weights();
            } catch (const DivergedError& e) {
                slots[i].failure = RoundFailure{i, round_config.seed, e.what(), true};
            } catch (const Error& e) {
                slots[i].failure = RoundFailure{i, round_config.seed, e.what(), false};
            }
        }
    };

    const std::size_t n_threads = std::clamp<std::size_t>(workers, 1, rounds);
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    }

    RoundsOutcome out;
    for (auto& s : slots) {
        if (s.result) {
            out.results.push_back(std::move(*s.result));
            out.classifier_weights.push_back(std::move(*s.weights));
        } else {
            out.failures.push_back(std::move(*s.failure));
        }
    }
    return out;
}

}  // namespace oslnet
