#include "oslnet/commands.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "oslnet/analysis.hpp"
#include "oslnet/errors.hpp"

namespace oslnet {

namespace fs = std::filesystem;

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const DegenerateTestError*>(&e) || dynamic_cast<const DegenerateWeightsError*>(&e))
        return kExitDegenerate;
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ParseError*>(&e) ||
        dynamic_cast<const ArgumentError*>(&e) || dynamic_cast<const PairingError*>(&e) ||
        dynamic_cast<const LabelError*>(&e))
        return kExitConfig;
    return kExitRuntime;
}

namespace {

std::string fixed(double v, int digits = 4) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

std::vector<double> test_accuracies(const std::vector<RunResult>& results) {
    std::vector<double> v;
    for (const auto& r : results) v.push_back(r.test_acc);
    return v;
}

std::vector<RunResult> all_results(const ExperimentOutcome& outcome) {
    std::vector<RunResult> all;
    for (const auto& a : outcome.arms) all.insert(all.end(), a.rounds.results.begin(), a.rounds.results.end());
    return all;
}

Json failures_json(const RoundsOutcome& rounds) {
    Json j = Json::array();
    for (const auto& f : rounds.failures)
        j.push_back(Json{{"round", f.round}, {"seed", f.seed}, {"diverged", f.diverged}, {"message", f.message}});
    return j;
}

Json summary_json(const ExperimentConfig& config, const ExperimentOutcome& outcome) {
    Json arms = Json::array();
    for (const auto& a : outcome.arms) {
        Json entry{{"name", a.arm.name},
                   {"config_hash", a.hash},
                   {"seed", a.arm.train.seed},
                   {"classifier", classifier_name(a.arm.model.classifier)},
                   {"loss", loss_name(a.arm.model.loss)},
                   {"settings", a.arm.resolved},
                   {"rounds_ok", a.rounds.results.size()},
                   {"failures", failures_json(a.rounds)}};
        if (a.arm.train.snapshot_count > 0) {
            entry["snapshot_cycles"] = a.arm.train.snapshot_count;
            if (a.arm.train.granularity == Granularity::epoch)
                entry["snapshot_cycle_epochs"] = a.arm.train.epochs / a.arm.train.snapshot_count;
        }
        if (!a.rounds.results.empty()) {
            entry["test_acc"] = to_json(aggregate(std::span<const RunResult>(a.rounds.results)));
            std::vector<double> train_acc, train_loss;
            for (const auto& r : a.rounds.results) {
                train_acc.push_back(r.train_acc);
                train_loss.push_back(r.train_loss);
            }
            entry["train_acc"] = to_json(aggregate(train_acc));
            entry["train_loss"] = to_json(aggregate(train_loss));
        }
        arms.push_back(std::move(entry));
    }

    // Every further arm against the first one.
    Json comparisons = Json::array();
    for (std::size_t i = 1; i < outcome.arms.size(); ++i) {
        Json c{{"a", outcome.arms[i].arm.name}, {"b", outcome.arms[0].arm.name}};
        try {
            c["ttest"] = to_json(compare_results(outcome.arms[i].rounds.results, outcome.arms[0].rounds.results));
        } catch (const Error& e) {
            c["error"] = e.what();
        }
        comparisons.push_back(std::move(c));
    }

    return Json{{"config_hash", config.hash},
                {"rounds", config.rounds},
                {"data", config.canonical.at("data")},
                {"warnings", outcome.warnings},
                {"arms", std::move(arms)},
                {"comparisons", std::move(comparisons)}};
}

Json angles_json(const ExperimentConfig& config, const ExperimentOutcome& outcome) {
    Json arms = Json::array();
    for (const auto& a : outcome.arms) {
        if (a.arm.model.classifier != ClassifierKind::osl) continue;
        Json rounds = Json::array();
        for (std::size_t i = 0; i < a.rounds.results.size(); ++i) {
            const RunResult& r = a.rounds.results[i];
            Json entry{{"round", r.round}, {"seed", r.seed}};
            try {
                const OrthogonalityCheck check = check_orthogonality(a.rounds.classifier_weights[i]);
                entry["max_angle_deviation_deg"] = check.max_angle_deviation;
                entry["max_abs_dot"] = check.max_abs_dot;
                entry["angles_deg"] = check.angles;
            } catch (const DegenerateWeightsError& e) {
                entry["error"] = e.what();
            }
            rounds.push_back(std::move(entry));
        }
        arms.push_back(Json{{"name", a.arm.name}, {"config_hash", a.hash}, {"seed", a.arm.train.seed},
                            {"rounds", std::move(rounds)}});
    }
    return Json{{"config_hash", config.hash}, {"arms", std::move(arms)}};
}

void report_arm(std::ostream& out, const ArmOutcome& a) {
    out << a.arm.name << ": ";
    if (a.rounds.results.empty()) {
        out << "no successful rounds";
    } else {
        const Summary s = aggregate(std::span<const RunResult>(a.rounds.results));
        out << "test acc " << fixed(s.mean) << " ± " << fixed(s.std) << " over " << s.n << " rounds";
    }
    if (!a.rounds.failures.empty()) out << ", " << a.rounds.failures.size() << " failed";
    out << '\n';
}

bool any_diverged(const ExperimentOutcome& outcome) {
    for (const auto& a : outcome.arms)
        for (const auto& f : a.rounds.failures)
            if (f.diverged) return true;
    return false;
}

std::vector<std::size_t> parse_stack(const std::string& text) {
    std::vector<std::size_t> widths;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t dash = std::min(text.find('-', pos), text.size());
        std::size_t w = 0;
        const auto [end, ec] = std::from_chars(text.data() + pos, text.data() + dash, w);
        if (ec != std::errc() || end != text.data() + dash || w == 0)
            throw ConfigError("sweep: bad layer stack \"" + text + "\"");
        widths.push_back(w);
        pos = dash + 1;
    }
    return widths;
}

std::size_t parse_count(const std::string& text) {
    std::size_t v = 0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || end != text.data() + text.size())
        throw ConfigError("sweep: expected a non-negative integer, got \"" + text + "\"");
    return v;
}

}  // namespace

OrthogonalityCheck check_orthogonality(const Matrix& w) {
    OrthogonalityCheck out;
    out.angles = angle_matrix(w).upper_triangle();
    for (double a : out.angles) out.max_angle_deviation = std::max(out.max_angle_deviation, std::abs(a - 90.0));
    for (std::size_t i = 0; i < w.cols(); ++i) {
        for (std::size_t j = i + 1; j < w.cols(); ++j) {
            double dot = 0.0;
            for (std::size_t r = 0; r < w.rows(); ++r) dot += w(r, i) * w(r, j);
            out.max_abs_dot = std::max(out.max_abs_dot, std::abs(dot));
        }
    }
    return out;
}

ExperimentOutcome run_experiment(const ExperimentConfig& config, std::ostream* log) {
    ExperimentOutcome outcome;
    const PreparedData data(make_recipe(config.data, &outcome.warnings));
    std::vector<ArmConfig> arms = config.arms;
    for (auto& arm : arms) bind_to_data(arm, data.base());

    for (auto& arm : arms) {
        ArmOutcome a{arm, config.arm_hash(arm), {}};
        a.rounds = run_rounds(arm.model, arm.train, data, config.rounds, config.workers);
        for (auto& r : a.rounds.results) {
            r.arm = arm.name;
            r.config_hash = a.hash;
        }
        if (log) report_arm(*log, a);
        outcome.arms.push_back(std::move(a));
    }
    return outcome;
}

int cmd_train(const fs::path& config_path, const ConfigOverrides& overrides, std::ostream& out,
              std::ostream& err) {
    try {
        const ExperimentConfig config = load_experiment(config_path, overrides);
        const ExperimentOutcome outcome = run_experiment(config, &err);
        for (const auto& w : outcome.warnings) err << "warning: " << w << '\n';

        fs::create_directories(config.output);
        save_results(config.output / "results.jsonl", all_results(outcome));
        save_json(config.output / "summary.json", summary_json(config, outcome));
        save_json(config.output / "angles.json", angles_json(config, outcome));

        for (const auto& a : outcome.arms) report_arm(out, a);
        out << "config hash " << config.hash << ", outputs in " << config.output.string() << '\n';
        if (any_diverged(outcome)) {
            err << "error: at least one round diverged\n";
            return kExitRuntime;
        }
        return kExitOk;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
}

TTestReport compare_results(std::vector<RunResult> a, std::vector<RunResult> b) {
    if (a.size() != b.size())
        throw PairingError("round counts differ: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    auto by_round = [](const RunResult& x, const RunResult& y) { return x.round < y.round; };
    std::sort(a.begin(), a.end(), by_round);
    std::sort(b.begin(), b.end(), by_round);
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].round != b[i].round || a[i].seed != b[i].seed) {
            throw PairingError("records " + std::to_string(i) + " do not pair: round " + std::to_string(a[i].round) +
                               " seed " + std::to_string(a[i].seed) + " vs round " + std::to_string(b[i].round) +
                               " seed " + std::to_string(b[i].seed));
        }
    }
    const auto acc_a = test_accuracies(a);
    const auto acc_b = test_accuracies(b);
    return paired_ttest(acc_a, acc_b);
}

namespace {

std::vector<RunResult> select_arm(const std::vector<RunResult>& all, const std::optional<std::string>& arm,
                                  const fs::path& path) {
    std::vector<std::string> names;
    for (const auto& r : all)
        if (std::find(names.begin(), names.end(), r.arm) == names.end()) names.push_back(r.arm);
    if (!arm) {
        if (names.size() > 1) {
            std::string list;
            for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
            throw ArgumentError(path.string() + " holds several arms (" + list + "); choose one");
        }
        return all;
    }
    std::vector<RunResult> out;
    for (const auto& r : all)
        if (r.arm == *arm) out.push_back(r);
    if (out.empty()) throw ArgumentError(path.string() + ": no records for arm \"" + *arm + "\"");
    return out;
}

}  // namespace

int cmd_compare(const CompareOptions& options, std::ostream& out, std::ostream& err) {
    try {
        const fs::path path_b = options.results_b.value_or(options.results_a);
        const auto a = select_arm(load_results(options.results_a), options.arm_a, options.results_a);
        const auto b = select_arm(load_results(path_b), options.arm_b, path_b);
        const TTestReport t = compare_results(a, b);
        out << "n " << t.n << "  mean diff " << fixed(t.mean_diff, 6) << "  std diff " << fixed(t.std_diff, 6)
            << "  t " << fixed(t.t_statistic, 4) << "  df " << t.degrees_of_freedom << "  p "
            << std::setprecision(6) << t.p_value << '\n'
            << (t.significant ? "significant" : "not significant") << " at " << kSignificanceLevel << '\n';
        return kExitOk;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& config, const std::string& axis,
                                const std::vector<std::string>& values, std::vector<RunResult>* results,
                                std::ostream* log) {
    if (axis != "width" && axis != "depth" && axis != "reduction")
        throw ConfigError("sweep: axis must be width, depth or reduction, got \"" + axis + "\"");
    if (values.empty()) throw ConfigError("sweep: no values given");

    std::vector<std::string> warnings;
    const DataRecipe base_recipe = make_recipe(config.data, &warnings);
    std::optional<PreparedData> shared;
    if (axis != "reduction") shared.emplace(base_recipe);

    std::vector<SweepRow> rows;
    for (const auto& value : values) {
        std::optional<PreparedData> reduced;
        if (axis == "reduction") {
            DataRecipe r = base_recipe;
            r.reduce_per_class = parse_count(value);
            reduced.emplace(std::move(r));
        }
        const PreparedData& data = reduced ? *reduced : *shared;

        for (ArmConfig arm : config.arms) {
            SweepRow row{value, arm.name, std::nullopt, ""};
            arm.model.input_dim = data.base().dim();
            arm.model.class_count = data.base().class_count;
            if (axis == "width") {
                arm.model.hidden_widths.back() = parse_count(value);
            } else if (axis == "depth") {
                std::vector<std::size_t> stack = parse_stack(value);
                if (stack.size() < 2 || stack.back() != arm.model.class_count)
                    throw ConfigError("sweep: stack \"" + value + "\" must list hidden widths and end with the class count " +
                                      std::to_string(arm.model.class_count));
                stack.pop_back();
                arm.model.hidden_widths = stack;
            }
            try {
                arm.model.validate();
            } catch (const ConfigError& e) {
                row.note = std::string("skipped: ") + e.what();
                if (log) *log << value << ' ' << arm.name << ": " << row.note << '\n';
                rows.push_back(std::move(row));
                continue;
            }

            const std::string hash = fnv1a_hex(config.arm_hash(arm) + "|" + axis + "=" + value);
            RoundsOutcome r = run_rounds(arm.model, arm.train, data, config.rounds, config.workers);
            for (auto& res : r.results) {
                res.arm = arm.name + "@" + axis + "=" + value;
                res.config_hash = hash;
            }
            if (!r.results.empty()) row.summary = aggregate(std::span<const RunResult>(r.results));
            if (!r.failures.empty())
                row.note = std::to_string(r.failures.size()) + " rounds failed: " + r.failures.front().message;
            if (log) {
                *log << axis << '=' << value << ' ' << arm.name << ": ";
                if (row.summary)
                    *log << fixed(row.summary->mean) << " ± " << fixed(row.summary->std);
                else
                    *log << "no successful rounds";
                *log << '\n';
            }
            if (results) results->insert(results->end(), r.results.begin(), r.results.end());
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
    auto quoted = [](const std::string& s) {
        std::string q = "\"";
        for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
        return q + "\"";
    };
    out << "value,arm,mean,std,n,note\n";
    for (const auto& r : rows) {
        out << r.value << ',' << r.arm << ',';
        if (r.summary)
            out << fixed(r.summary->mean, 6) << ',' << fixed(r.summary->std, 6) << ',' << r.summary->n;
        else
            out << ",,0";
        out << ',' << (r.note.empty() ? "" : quoted(r.note)) << '\n';
    }
}

int cmd_sweep(const fs::path& config_path, const std::optional<std::string>& axis,
              const std::vector<std::string>& values, const ConfigOverrides& overrides, std::ostream& out,
              std::ostream& err) {
    try {
        const ExperimentConfig config = load_experiment(config_path, overrides);
        std::string use_axis;
        std::vector<std::string> use_values = values;
        if (axis)
            use_axis = *axis;
        else if (config.sweep)
            use_axis = config.sweep->axis;
        else
            throw ConfigError("sweep: no axis given on the command line or in the config");
        if (use_values.empty() && config.sweep) use_values = config.sweep->values;

        std::vector<RunResult> results;
        const auto rows = run_sweep(config, use_axis, use_values, &results, &err);
        fs::create_directories(config.output);
        {
            std::ofstream csv(config.output / "sweep.csv", std::ios::binary);
            if (!csv) throw Error("cannot write " + (config.output / "sweep.csv").string());
            write_sweep_csv(csv, rows);
        }
        save_results(config.output / "results.jsonl", results);
        write_sweep_csv(out, rows);
        return kExitOk;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
}

int cmd_verify(const VerifyOptions& o, std::ostream& out, std::ostream& err) {
    try {
        const NormBoundReport r = verify_norm_bounds(o.d, o.k, o.bound, o.trials, o.seed);
        Json doc = to_json(r);
        doc["seed"] = o.seed;
        doc["config_hash"] = fnv1a_hex(Json{{"d", o.d}, {"k", o.k}, {"bound", o.bound}, {"trials", o.trials},
                                            {"seed", o.seed}}
                                           .dump());
        fs::create_directories(o.output);
        save_json(o.output / "verify.json", doc);

        out << "d " << r.d << "  k " << r.k << "  B " << r.bound << "  trials " << r.trials << '\n'
            << "masked: max ratio " << fixed(r.max_ratio_masked, 6) << "  mean " << fixed(r.mean_ratio_masked, 6)
            << '\n'
            << "full:   max ratio " << fixed(r.max_ratio_full, 6) << "  mean " << fixed(r.mean_ratio_full, 6) << '\n'
            << "mean masked/full " << fixed(r.mean_masked_over_full, 6) << "  (1/sqrt(k) = "
            << fixed(1.0 / std::sqrt(static_cast<double>(r.k)), 6) << ")\n"
            << "constant-B matrix: full ratio " << fixed(r.extremal_ratio_full, 12) << "  masked ratio "
            << fixed(r.extremal_ratio_masked, 6) << '\n'
            << "violations " << r.violations << '\n';
        if (r.violations > 0) {
            err << "error: norm bound violated " << r.violations << " times\n";
            return kExitRuntime;
        }
        return kExitOk;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
}

int cmd_gen_data(const BlobParams& params, const fs::path& csv_path, std::ostream& out, std::ostream& err) {
    try {
        const Dataset d = generate_blobs(params);
        if (csv_path.has_parent_path()) fs::create_directories(csv_path.parent_path());
        save_features(csv_path, d);
        out << "wrote " << d.size() << " samples of dim " << d.dim() << " in " << d.class_count << " classes to "
            << csv_path.string() << '\n';
        return kExitOk;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
}

}  // namespace oslnet
