#include "oslnet/experiment.hpp"

#include <set>

#include "oslnet/errors.hpp"

namespace oslnet {

namespace {

// Typed field access on one JSON object; finish() rejects keys never read.
class Section {
public:
    Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
    }

    bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

    void mark(const std::string& key) { seen_.insert(key); }

    const Json& raw(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    template <class T>
    void read(const std::string& key, T& target) {
        seen_.insert(key);
        if (!has(key)) return;
        const Json& v = j_.at(key);
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ConfigError(field(key) + ": expected true or false");
            target = v.get<bool>();
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw ConfigError(field(key) + ": expected a string");
            target = v.get<std::string>();
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0))
                throw ConfigError(field(key) + ": expected a non-negative integer");
            target = v.get<T>();
        } else {
            if (!v.is_number()) throw ConfigError(field(key) + ": expected a number");
            target = v.get<T>();
        }
    }

    template <class T>
    void read(const std::string& key, std::optional<T>& target) {
        seen_.insert(key);
        if (!has(key)) return;
        T value{};
        read(key, value);
        target = value;
    }

    void finish() const {
        for (const auto& [key, value] : j_.items())
            if (!seen_.contains(key)) throw ConfigError(field(key) + ": unknown key");
    }

private:
    const Json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

ClassifierKind parse_classifier(const std::string& s, const std::string& field) {
    if (s == "fc") return ClassifierKind::fc;
    if (s == "osl") return ClassifierKind::osl;
    throw ConfigError(field + ": expected \"fc\" or \"osl\", got \"" + s + "\"");
}

Json loss_to_json(const LossKind& loss) {
    Json j{{"kind", loss_name(loss)}};
    std::visit(
        [&](const auto& k) {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, FocalLoss>) j["gamma"] = k.gamma;
            if constexpr (std::is_same_v<T, CenterLoss>) {
                j["lambda"] = k.lambda;
                j["center_rate"] = k.center_rate;
            }
            if constexpr (std::is_same_v<T, TruncatedLqLoss>) {
                j["q"] = k.q;
                j["k"] = k.k_thresh;
            }
            if constexpr (std::is_same_v<T, LargeMarginLoss>) {
                j["m"] = k.m;
                j["lambda_start"] = k.lambda_start;
                j["lambda_decay"] = k.lambda_decay;
                j["lambda_floor"] = k.lambda_floor;
            }
        },
        loss);
    return j;
}

Json model_to_json(const ModelSpec& m) {
    Json j{{"hidden_widths", m.hidden_widths},
           {"classifier", classifier_name(m.classifier)},
           {"loss", loss_to_json(m.loss)},
           {"classifier_bias", m.classifier_bias},
           {"hidden_bias", m.hidden_bias},
           {"hidden_dropout", nullptr},
           {"hidden_dropconnect", nullptr}};
    if (m.hidden_dropout) j["hidden_dropout"] = *m.hidden_dropout;
    if (m.hidden_dropconnect) j["hidden_dropconnect"] = *m.hidden_dropconnect;
    return j;
}

Json train_to_json(const TrainConfig& t) {
    return Json{{"epochs", t.epochs},
                {"batch_size", t.batch_size},
                {"optimizer",
                 {{"kind", t.optimizer.kind == OptimizerKind::rmsprop ? "rmsprop" : "sgd"},
                  {"lr", t.optimizer.lr},
                  {"smoothing", t.optimizer.smoothing},
                  {"epsilon", t.optimizer.epsilon}}},
                {"schedule", t.schedule == ScheduleKind::cosine ? "cosine" : "constant"},
                {"granularity", t.granularity == Granularity::iteration ? "iteration" : "epoch"},
                {"seed", t.seed},
                {"snapshot_count", t.snapshot_count}};
}

Json blobs_to_json(const BlobParams& p) {
    return Json{{"classes", p.classes},
                {"dim", p.dim},
                {"train_per_class", p.train_per_class},
                {"test_per_class", p.test_per_class},
                {"noise_scale", p.noise_scale},
                {"min_angle_deg", p.min_angle_deg}};
}

DataConfig parse_data(const Json& j, const std::filesystem::path& base_dir) {
    Section s(j, "data");
    DataConfig d;
    if (s.has("generator")) d.generator = parse_blob_params(s.raw("generator"));
    std::optional<std::string> file;
    s.read("file", file);
    if (file) {
        std::filesystem::path p = *file;
        d.file = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    }
    if (d.generator.has_value() == d.file.has_value())
        throw ConfigError("data: give exactly one of \"generator\" or \"file\"");
    std::string per_round = "resplit";
    s.read("per_round", per_round);
    if (per_round == "fixed")
        d.per_round = RoundData::fixed;
    else if (per_round == "resplit")
        d.per_round = RoundData::resplit;
    else if (per_round == "regenerate")
        d.per_round = RoundData::regenerate;
    else
        throw ConfigError("data.per_round: expected fixed, resplit or regenerate, got \"" + per_round + "\"");
    if (d.file && d.per_round == RoundData::regenerate)
        throw ConfigError("data.per_round: \"regenerate\" needs a generator");
    s.read("train_fraction", d.train_fraction);
    if (!(d.train_fraction > 0.0 && d.train_fraction < 1.0))
        throw ConfigError("data.train_fraction: must lie in (0, 1)");
    s.read("reduce_per_class", d.reduce_per_class);
    s.read("seed", d.seed);
    s.finish();
    return d;
}

Json data_to_json(const DataConfig& d) {
    Json j{{"per_round", round_data_name(d.per_round)},
           {"train_fraction", d.train_fraction},
           {"reduce_per_class", d.reduce_per_class},
           {"seed", d.seed}};
    if (d.generator) j["generator"] = blobs_to_json(*d.generator);
    if (d.file) j["file"] = d.file->generic_string();
    return j;
}

SweepConfig parse_sweep(const Json& j) {
    Section s(j, "sweep");
    SweepConfig sw;
    s.read("axis", sw.axis);
    if (sw.axis != "width" && sw.axis != "depth" && sw.axis != "reduction")
        throw ConfigError("sweep.axis: expected width, depth or reduction, got \"" + sw.axis + "\"");
    if (s.has("values")) {
        const Json& v = s.raw("values");
        if (!v.is_array()) throw ConfigError("sweep.values: expected an array");
        for (const auto& item : v) {
            if (item.is_string())
                sw.values.push_back(item.get<std::string>());
            else if (item.is_number_unsigned())
                sw.values.push_back(std::to_string(item.get<std::size_t>()));
            else
                throw ConfigError("sweep.values: entries must be non-negative integers or strings");
        }
    }
    s.finish();
    return sw;
}

}  // namespace

std::string classifier_name(ClassifierKind kind) { return kind == ClassifierKind::osl ? "osl" : "fc"; }

std::string round_data_name(RoundData mode) {
    switch (mode) {
        case RoundData::fixed: return "fixed";
        case RoundData::resplit: return "resplit";
        case RoundData::regenerate: return "regenerate";
    }
    return "?";
}

LossKind parse_loss(const Json& j) {
    if (j.is_string()) return parse_loss(Json{{"kind", j}});
    Section s(j, "model.loss");
    std::string kind;
    s.read("kind", kind);
    LossKind out;
    if (kind == "cross_entropy") {
        out = CrossEntropyLoss{};
    } else if (kind == "focal") {
        FocalLoss f;
        s.read("gamma", f.gamma);
        out = f;
    } else if (kind == "center") {
        CenterLoss c;
        s.read("lambda", c.lambda);
        s.read("center_rate", c.center_rate);
        out = c;
    } else if (kind == "truncated_lq") {
        TruncatedLqLoss t;
        s.read("q", t.q);
        s.read("k", t.k_thresh);
        out = t;
    } else if (kind == "large_margin") {
        LargeMarginLoss l;
        s.read("m", l.m);
        s.read("lambda_start", l.lambda_start);
        s.read("lambda_decay", l.lambda_decay);
        s.read("lambda_floor", l.lambda_floor);
        out = l;
    } else {
        throw ConfigError("model.loss.kind: unknown loss \"" + kind + "\"");
    }
    s.finish();
    try {
        validate(out);
    } catch (const Error& e) {
        throw ConfigError(std::string("model.loss: ") + e.what());
    }
    return out;
}

ModelSpec parse_model(const Json& j) {
    Section s(j, "model");
    ModelSpec m;
    if (s.has("hidden_widths")) {
        const Json& w = s.raw("hidden_widths");
        if (!w.is_array() || w.empty()) throw ConfigError("model.hidden_widths: expected a non-empty array");
        m.hidden_widths.clear();
        for (const auto& x : w) {
            if (!x.is_number_unsigned() || x.get<std::size_t>() == 0)
                throw ConfigError("model.hidden_widths: entries must be positive integers");
            m.hidden_widths.push_back(x.get<std::size_t>());
        }
    }
    std::string classifier = "fc";
    s.read("classifier", classifier);
    m.classifier = parse_classifier(classifier, "model.classifier");
    s.read("hidden_dropout", m.hidden_dropout);
    s.read("hidden_dropconnect", m.hidden_dropconnect);
    if (s.has("loss")) m.loss = parse_loss(s.raw("loss"));
    s.read("classifier_bias", m.classifier_bias);
    s.read("hidden_bias", m.hidden_bias);
    s.finish();
    if (m.hidden_dropout && !(*m.hidden_dropout >= 0.0 && *m.hidden_dropout < 1.0))
        throw ConfigError("model.hidden_dropout: must lie in [0, 1)");
    if (m.hidden_dropconnect && !(*m.hidden_dropconnect >= 0.0 && *m.hidden_dropconnect < 1.0))
        throw ConfigError("model.hidden_dropconnect: must lie in [0, 1)");
    if (std::holds_alternative<LargeMarginLoss>(m.loss) && m.classifier == ClassifierKind::osl)
        throw ConfigError("model.loss: large_margin requires an unmasked fc classifier, not osl");
    return m;
}

TrainConfig parse_train(const Json& j) {
    Section s(j, "train");
    TrainConfig t;
    s.read("epochs", t.epochs);
    s.read("batch_size", t.batch_size);
    if (s.has("optimizer")) {
        Section o(s.raw("optimizer"), "train.optimizer");
        std::string kind = "rmsprop";
        o.read("kind", kind);
        if (kind == "rmsprop")
            t.optimizer.kind = OptimizerKind::rmsprop;
        else if (kind == "sgd")
            t.optimizer.kind = OptimizerKind::sgd;
        else
            throw ConfigError("train.optimizer.kind: expected rmsprop or sgd, got \"" + kind + "\"");
        o.read("lr", t.optimizer.lr);
        o.read("smoothing", t.optimizer.smoothing);
        o.read("epsilon", t.optimizer.epsilon);
        o.finish();
    }
    std::string schedule = "constant";
    s.read("schedule", schedule);
    if (schedule == "constant")
        t.schedule = ScheduleKind::constant;
    else if (schedule == "cosine")
        t.schedule = ScheduleKind::cosine;
    else
        throw ConfigError("train.schedule: expected constant or cosine, got \"" + schedule + "\"");
    std::string granularity = "epoch";
    s.read("granularity", granularity);
    if (granularity == "epoch")
        t.granularity = Granularity::epoch;
    else if (granularity == "iteration")
        t.granularity = Granularity::iteration;
    else
        throw ConfigError("train.granularity: expected epoch or iteration, got \"" + granularity + "\"");
    s.read("seed", t.seed);
    s.read("snapshot_count", t.snapshot_count);
    s.finish();
    try {
        t.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(std::string("train.optimizer: ") + e.what());
    }
    return t;
}

BlobParams parse_blob_params(const Json& j) {
    Section s(j, "data.generator");
    BlobParams p;
    s.read("classes", p.classes);
    s.read("dim", p.dim);
    s.read("train_per_class", p.train_per_class);
    s.read("test_per_class", p.test_per_class);
    s.read("noise_scale", p.noise_scale);
    s.read("min_angle_deg", p.min_angle_deg);
    s.finish();
    if (p.classes < 2) throw ConfigError("data.generator.classes: need at least 2");
    if (p.dim == 0) throw ConfigError("data.generator.dim: must be positive");
    if (p.train_per_class == 0) throw ConfigError("data.generator.train_per_class: must be positive");
    if (!(p.noise_scale >= 0.0)) throw ConfigError("data.generator.noise_scale: must be >= 0");
    return p;
}

std::string ExperimentConfig::arm_hash(const ArmConfig& arm) const {
    const Json j{{"data", canonical.at("data")}, {"rounds", rounds}, {"arm", arm.name}, {"resolved", arm.resolved}};
    return fnv1a_hex(j.dump());
}

ExperimentConfig parse_experiment(const Json& doc, const std::filesystem::path& base_dir,
                                  const ConfigOverrides& overrides) {
    Section s(doc, "");
    ExperimentConfig cfg;
    if (!s.has("data")) throw ConfigError("data: missing section");
    cfg.data = parse_data(s.raw("data"), base_dir);
    s.read("rounds", cfg.rounds);
    if (cfg.rounds < 2) throw ConfigError("rounds: need at least 2");
    s.read("workers", cfg.workers);
    std::string output = cfg.output.string();
    s.read("output", output);
    cfg.output = output;
    if (!base_dir.empty() && cfg.output.is_relative()) cfg.output = (base_dir / cfg.output).lexically_normal();

    Json base_model = s.has("model") ? s.raw("model") : Json::object();
    Json base_train = s.has("train") ? s.raw("train") : Json::object();
    s.mark("model");
    s.mark("train");
    if (!base_model.is_object()) throw ConfigError("model: expected an object");
    if (!base_train.is_object()) throw ConfigError("train: expected an object");

    std::vector<Json> arm_docs;
    if (s.has("arms")) {
        const Json& arms = s.raw("arms");
        if (!arms.is_array() || arms.empty()) throw ConfigError("arms: expected a non-empty array");
        arm_docs.assign(arms.begin(), arms.end());
    } else {
        s.mark("arms");
        arm_docs.push_back(Json::object());
    }
    if (s.has("sweep")) cfg.sweep = parse_sweep(s.raw("sweep"));
    s.mark("sweep");
    s.finish();

    std::set<std::string> names;
    for (std::size_t i = 0; i < arm_docs.size(); ++i) {
        const std::string where = "arms[" + std::to_string(i) + "]";
        Section a(arm_docs[i], where);
        ArmConfig arm;
        a.read("name", arm.name);
        Json model = base_model;
        Json train = base_train;
        if (a.has("model")) model.merge_patch(a.raw("model"));
        if (a.has("train")) train.merge_patch(a.raw("train"));
        a.mark("model");
        a.mark("train");
        a.finish();
        if (overrides.seed) train["seed"] = *overrides.seed;
        try {
            arm.model = parse_model(model);
            arm.train = parse_train(train);
        } catch (const ConfigError& e) {
            throw ConfigError(where + ": " + e.what());
        }
        if (arm.name.empty()) arm.name = classifier_name(arm.model.classifier);
        if (!names.insert(arm.name).second) throw ConfigError(where + ".name: duplicate arm \"" + arm.name + "\"");
        arm.resolved = Json{{"model", model_to_json(arm.model)}, {"train", train_to_json(arm.train)}};
        cfg.arms.push_back(std::move(arm));
    }

    if (overrides.output) cfg.output = *overrides.output;
    if (overrides.workers) cfg.workers = *overrides.workers;
    if (cfg.workers == 0) throw ConfigError("workers: must be >= 1");

    cfg.canonical = Json{{"data", data_to_json(cfg.data)}, {"rounds", cfg.rounds}, {"arms", Json::array()}};
    for (const auto& arm : cfg.arms)
        cfg.canonical["arms"].push_back(Json{{"name", arm.name}, {"resolved", arm.resolved}});
    if (cfg.sweep) cfg.canonical["sweep"] = Json{{"axis", cfg.sweep->axis}, {"values", cfg.sweep->values}};
    cfg.hash = fnv1a_hex(cfg.canonical.dump());
    return cfg;
}

ExperimentConfig load_experiment(const std::filesystem::path& path, const ConfigOverrides& overrides) {
    return parse_experiment(load_json(path), path.parent_path(), overrides);
}

DataRecipe make_recipe(const DataConfig& data, std::vector<std::string>* warnings) {
    DataRecipe r;
    if (data.generator)
        r.source = *data.generator;
    else
        r.source = load_features(*data.file, warnings);
    r.per_round = data.per_round;
    r.train_fraction = data.train_fraction;
    r.reduce_per_class = data.reduce_per_class;
    r.data_seed = data.seed;
    return r;
}

void bind_to_data(ArmConfig& arm, const Dataset& data) {
    arm.model.input_dim = data.dim();
    arm.model.class_count = data.class_count;
    try {
        arm.model.validate();
    } catch (const ConfigError& e) {
        throw ConfigError("arm \"" + arm.name + "\": " + e.what());
    }
}

}  // namespace oslnet
