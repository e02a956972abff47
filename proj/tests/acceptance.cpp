// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "oracles.hpp"
#include "oslnet/analysis.hpp"
#include "oslnet/commands.hpp"
#include "oslnet/errors.hpp"
#include "oslnet/layers.hpp"
#include "oslnet/losses.hpp"

using namespace oslnet;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string num(double v, int digits = 4) {
    std::ostringstream os;
    os << std::setprecision(digits) << v;
    return os.str();
}

struct Verdict {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const Verdict& v) {
    std::cout << (v.pass ? "[PASS] " : "[FAIL] ") << id << ". " << name << ": " << v.detail << std::endl;
    if (!v.pass) ++failures;
}

void run(int id, const std::string& name, const std::function<Verdict()>& body) {
    try {
        report(id, name, body());
    } catch (const std::exception& e) {
        report(id, name, Verdict{false, std::string("exception: ") + e.what()});
    }
}

double probe(const Matrix& out, const Matrix& r) {
    double s = 0.0;
    for (std::size_t i = 0; i < out.data().size(); ++i) s += out.data()[i] * r.data()[i];
    return s;
}

std::vector<std::size_t> random_labels(std::size_t n, std::size_t k, Rng& rng) {
    std::vector<std::size_t> y(n);
    for (auto& v : y) v = rng.below(k);
    return y;
}

// Worst relative error over 20 instances of one gradient check.
struct GradientTally {
    double worst = 0.0;
    std::size_t instances = 0;
    void add(const Matrix& analytic, const Matrix& numeric) {
        worst = std::max(worst, oracle::relative_error(analytic, numeric));
    }
};

Verdict gradient_correctness() {
    const auto start = Clock::now();
    std::vector<std::pair<std::string, GradientTally>> tallies;
    Rng rng(2024);

    GradientTally dense;
    for (int i = 0; i < 20; ++i, ++dense.instances) {
        DenseLayer layer(7, 5, Activation::relu, true, rng);
        Matrix x = oracle::random_matrix(7, 4, rng);
        const Matrix r = oracle::random_matrix(5, 4, rng);
        layer.forward(x);
        const DenseGrads g = layer.backward(r);
        auto f = [&] { return probe(layer.apply(x), r); };
        dense.add(g.weights, oracle::numeric_gradient(layer.weights(), f));
        dense.add(g.bias, oracle::numeric_gradient(layer.bias(), f));
        dense.add(g.input, oracle::numeric_gradient(x, f));
    }
    tallies.emplace_back("dense", dense);

    GradientTally osl;
    for (int i = 0; i < 20; ++i, ++osl.instances) {
        const std::size_t k = 2 + rng.below(7);
        const std::size_t d = k + rng.below(20);
        OslLayer layer(d, k, rng, i % 2 == 0);
        Matrix v = oracle::random_matrix(d, 4, rng);
        const Matrix r = oracle::random_matrix(k, 4, rng);
        layer.forward(v);
        const OslGrads g = layer.backward(r);
        auto f = [&] { return probe(layer.apply(v), r); };
        osl.add(g.weights, oracle::numeric_gradient(layer.weights(), f));
        osl.add(g.input, oracle::numeric_gradient(v, f));
        if (layer.has_bias()) osl.add(g.bias, oracle::numeric_gradient(layer.bias(), f));
    }
    tallies.emplace_back("osl", osl);

    GradientTally dropout;
    for (int i = 0; i < 20; ++i, ++dropout.instances) {
        DropoutLayer layer(0.5, static_cast<std::uint64_t>(i));
        layer.set_mode(Mode::eval);
        Matrix x = oracle::random_matrix(6, 4, rng);
        const Matrix r = oracle::random_matrix(6, 4, rng);
        layer.forward(x);
        const Matrix g = layer.backward(r);
        dropout.add(g, oracle::numeric_gradient(x, [&] { return probe(layer.forward(x), r); }));
    }
    tallies.emplace_back("dropout-eval", dropout);

    GradientTally dropconnect;
    for (int i = 0; i < 20; ++i, ++dropconnect.instances) {
        DropConnectLayer layer(DenseLayer(6, 5, Activation::relu, true, rng), 0.5, static_cast<std::uint64_t>(i));
        layer.set_mode(Mode::eval);
        Matrix x = oracle::random_matrix(6, 4, rng);
        const Matrix r = oracle::random_matrix(5, 4, rng);
        layer.forward(x);
        const DenseGrads g = layer.backward(r);
        auto f = [&] { return probe(layer.apply(x), r); };
        dropconnect.add(g.weights, oracle::numeric_gradient(layer.dense().weights(), f));
        dropconnect.add(g.bias, oracle::numeric_gradient(layer.dense().bias(), f));
        dropconnect.add(g.input, oracle::numeric_gradient(x, f));
    }
    tallies.emplace_back("dropconnect-eval", dropconnect);

    auto logit_loss = [&](const std::string& name, auto loss, auto accept) {
        GradientTally t;
        while (t.instances < 20) {
            const std::size_t k = 2 + rng.below(6), n = 1 + rng.below(6);
            Matrix z = oracle::random_matrix(k, n, rng, 2.0);
            const auto y = random_labels(n, k, rng);
            if (!accept(softmax(z), y)) continue;
            const Matrix g = loss(softmax(z), y).grad_logits;
            t.add(g, oracle::numeric_gradient(z, [&] { return loss(softmax(z), y).loss; }));
            ++t.instances;
        }
        tallies.emplace_back(name, t);
    };
    auto always = [](const Matrix&, const std::vector<std::size_t>&) { return true; };
    logit_loss("cross-entropy", [](const Matrix& p, Labels y) { return cross_entropy(p, y); }, always);
    logit_loss("focal", [](const Matrix& p, Labels y) { return focal(p, y, 0.3); }, always);
    logit_loss(
        "truncated-Lq", [](const Matrix& p, Labels y) { return truncated_lq(p, y, 0.5, 0.1); },
        [](const Matrix& p, const std::vector<std::size_t>& y) {
            for (std::size_t j = 0; j < y.size(); ++j)
                if (std::abs(p(y[j], j) - 0.1) < 1e-3) return false;
            return true;
        });

    GradientTally center;
    for (int i = 0; i < 20; ++i, ++center.instances) {
        const std::size_t d = 3 + rng.below(6), k = 2 + rng.below(5), n = 2 + rng.below(5);
        Matrix f = oracle::random_matrix(d, n, rng);
        ClassCenters c(d, k);
        c.centers = oracle::random_matrix(d, k, rng);
        const auto y = random_labels(n, k, rng);
        const CenterLossResult r = center_loss(f, y, c, 0.7);
        center.add(r.grad_features, oracle::numeric_gradient(f, [&] { return center_loss(f, y, c, 0.7).loss; }));
    }
    tallies.emplace_back("center", center);

    GradientTally margin;
    for (int i = 0; i < 20; ++i, ++margin.instances) {
        const std::size_t d = 3 + rng.below(5), k = 2 + rng.below(5), n = 1 + rng.below(5);
        Matrix w = oracle::random_matrix(d, k, rng);
        Matrix x = oracle::random_matrix(d, n, rng);
        const auto y = random_labels(n, k, rng);
        const double lambda = i % 2 ? 0.1 : 10.0;
        auto f = [&] { return cross_entropy(softmax(large_margin_logits(w, x, y, 2, lambda)), y).loss; };
        const LossResult ce = cross_entropy(softmax(large_margin_logits(w, x, y, 2, lambda)), y);
        const LargeMarginGrads g = large_margin_backward(w, x, y, lambda, ce.grad_logits);
        margin.add(g.weights, oracle::numeric_gradient(w, f));
        margin.add(g.features, oracle::numeric_gradient(x, f));
    }
    tallies.emplace_back("large-margin", margin);

    bool pass = true;
    std::ostringstream detail;
    for (const auto& [name, t] : tallies) {
        pass = pass && t.worst < 1e-5 && t.instances == 20;
        detail << name << " " << num(t.worst, 2) << ", ";
    }
    const double elapsed = seconds_since(start);
    pass = pass && elapsed < 60.0;
    detail << "worst relative errors over 20 instances each (limit 1e-5), " << num(elapsed, 3) << " s";
    return {pass, detail.str()};
}

Verdict norm_bounds() {
    const auto start = Clock::now();
    const NormBoundReport r = verify_norm_bounds(32, 8, 1.0, 1000, 7);
    const double elapsed = seconds_since(start);
    const bool pass = r.violations == 0 && std::abs(r.extremal_ratio_full - 1.0) <= 1e-9 && elapsed < 30.0;
    return {pass, std::to_string(r.violations) + " violations in 1000 trials; max ratios masked " +
                      num(r.max_ratio_masked) + ", full " + num(r.max_ratio_full) +
                      "; constant matrix full ratio " + num(r.extremal_ratio_full, 12) + "; " + num(elapsed, 3) +
                      " s"};
}

Verdict loss_identities() {
    Rng rng(77);
    double focal_gap = 0.0, softmax_gap = 0.0, ensemble_gap = 0.0;
    for (int i = 0; i < 100; ++i) {
        const std::size_t k = 2 + rng.below(10), n = 1 + rng.below(32);
        const Matrix p = softmax(oracle::random_matrix(k, n, rng, 4.0));
        const auto y = random_labels(n, k, rng);
        const LossResult a = focal(p, y, 0.0), b = cross_entropy(p, y);
        focal_gap = std::max(focal_gap, std::abs(a.loss - b.loss));
        for (std::size_t j = 0; j < a.grad_logits.data().size(); ++j)
            focal_gap = std::max(focal_gap, std::abs(a.grad_logits.data()[j] - b.grad_logits.data()[j]));
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t r = 0; r < k; ++r) s += p(r, j);
            softmax_gap = std::max(softmax_gap, std::abs(s - 1.0));
        }
    }
    // ensemble predictions of a trained snapshot model
    const Dataset d = generate_blobs(4, 16, 10, 10, 0.4, 5);
    ModelSpec spec;
    spec.input_dim = 16;
    spec.class_count = 4;
    spec.hidden_widths = {12};
    spec.classifier = ClassifierKind::osl;
    TrainConfig cfg;
    cfg.epochs = 20;
    cfg.snapshot_count = 4;
    const TrainOutcome out = train(spec, cfg, d);
    const Matrix p = ensemble_predict(out.snapshots, d.features);
    for (std::size_t j = 0; j < p.cols(); ++j) {
        double s = 0.0;
        for (std::size_t r = 0; r < p.rows(); ++r) s += p(r, j);
        ensemble_gap = std::max(ensemble_gap, std::abs(s - 1.0));
    }
    const bool pass = focal_gap <= 1e-12 && softmax_gap <= 1e-12 && ensemble_gap <= 1e-12;
    return {pass, "max |focal(γ=0) − CE| " + num(focal_gap, 3) + " over 100 batches; max |Σ softmax − 1| " +
                      num(softmax_gap, 3) + "; max |Σ ensemble − 1| " + num(ensemble_gap, 3) + " (" +
                      std::to_string(out.snapshots.size()) + " snapshots)"};
}

Verdict statistics_oracle() {
    Rng rng(91);
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
        const std::size_t n = i % 2 ? 20 : 60;
        std::vector<double> a(n), b(n);
        for (std::size_t j = 0; j < n; ++j) {
            a[j] = 0.88 + 0.015 * rng.normal();
            b[j] = 0.88 + 0.015 * rng.normal() + 0.004 * rng.uniform();
        }
        const TTestReport r = paired_ttest(a, b);
        const double t = oracle::paired_t(a, b);
        worst = std::max(worst, std::abs(r.p_value - oracle::t_two_tailed(t, static_cast<double>(n - 1))));
    }
    double table_worst = 0.0;
    for (double df : {19.0, 59.0}) {
        for (double alpha : {0.05, 0.005}) {
            const double crit = oracle::t_critical(alpha, df);
            table_worst = std::max(table_worst, std::abs(student_t_two_tailed_p(crit, df) - alpha));
        }
    }
    // three-decimal printed critical values: 2.093, 3.174 (df 19), 2.001, 2.916 (df 59)
    const double printed[4][3] = {{19, 0.05, 2.093}, {19, 0.005, 3.174}, {59, 0.05, 2.001}, {59, 0.005, 2.916}};
    bool table_consistent = true;
    for (const auto& row : printed)
        table_consistent = table_consistent && std::abs(oracle::t_critical(row[1], row[0]) - row[2]) < 5e-4;
    const bool pass = worst <= 1e-6 && table_worst <= 1e-6 && table_consistent;
    return {pass, "max |p − oracle p| " + num(worst, 3) + " over 200 paired tests (n 20 and 60); max |p(t_crit) − α| " +
                      num(table_worst, 3) + " at df 19, 59 and α 0.05, 0.005"};
}

struct BenchmarkArms {
    const ArmOutcome* fc = nullptr;
    const ArmOutcome* os = nullptr;
    const ArmOutcome* os_snap = nullptr;
    std::vector<const ArmOutcome*> osl;
};

BenchmarkArms find_arms(const ExperimentOutcome& outcome) {
    BenchmarkArms b;
    for (const auto& a : outcome.arms) {
        if (a.arm.name == "FC") b.fc = &a;
        if (a.arm.name == "OS") b.os = &a;
        if (a.arm.name == "OS-SnapShot") b.os_snap = &a;
        if (a.arm.model.classifier == ClassifierKind::osl) b.osl.push_back(&a);
    }
    if (!b.fc || !b.os || !b.os_snap) throw ConfigError("desk benchmark config must define FC, OS and OS-SnapShot arms");
    return b;
}

std::string summary_text(const Summary& s) { return num(s.mean) + " ± " + num(s.std, 3); }

Verdict orthogonality(const BenchmarkArms& arms) {
    std::size_t models = 0, pairs = 0, off = 0;
    double worst_dot = 0.0, worst_angle = 0.0;
    for (const ArmOutcome* a : arms.osl) {
        if (a->arm.train.epochs != 100) throw ConfigError("osl arms must train for 100 epochs");
        for (const Matrix& w : a->rounds.classifier_weights) {
            ++models;
            const AngleMatrix angles = angle_matrix(w);
            for (std::size_t i = 0; i < w.cols(); ++i) {
                for (std::size_t j = i + 1; j < w.cols(); ++j) {
                    ++pairs;
                    double dot = 0.0;
                    for (std::size_t r = 0; r < w.rows(); ++r) dot += w(r, i) * w(r, j);
                    const bool exact = angles.degrees(i, j) == 90.0 && dot == 0.0;
                    off += !exact;
                    worst_dot = std::max(worst_dot, std::abs(dot));
                    worst_angle = std::max(worst_angle, std::abs(angles.degrees(i, j) - 90.0));
                }
            }
        }
    }
    const bool pass = models > 0 && off == 0;
    return {pass, std::to_string(models) + " trained OSL models, " + std::to_string(pairs) + " class pairs, " +
                      std::to_string(off) + " not exactly 90° / 0.0; max |angle − 90| " + num(worst_angle, 3) +
                      ", max |dot| " + num(worst_dot, 3)};
}

Verdict os_vs_fc(const BenchmarkArms& arms, double elapsed) {
    const Summary fc = aggregate(std::span<const RunResult>(arms.fc->rounds.results));
    const Summary os = aggregate(std::span<const RunResult>(arms.os->rounds.results));
    const TTestReport t = compare_results(arms.os->rounds.results, arms.fc->rounds.results);
    const bool in_band = fc.mean >= 0.85 && fc.mean <= 0.92;
    const bool pass = fc.n == 20 && os.n == 20 && in_band && os.mean > fc.mean && os.std < fc.std &&
                      t.p_value < 0.05 && elapsed < 600.0;
    std::ostringstream d;
    d << "FC " << summary_text(fc) << (in_band ? " (in band)" : " (outside 0.85-0.92)") << ", OS "
      << summary_text(os) << "; mean OS > FC " << (os.mean > fc.mean ? "yes" : "no") << ", std OS < FC "
      << (os.std < fc.std ? "yes" : "no") << ", paired p " << num(t.p_value, 3) << "; " << num(elapsed, 3)
      << " s for all arms";
    return {pass, d.str()};
}

Verdict snapshot_gain(const BenchmarkArms& arms) {
    const Summary os = aggregate(std::span<const RunResult>(arms.os->rounds.results));
    const Summary snap = aggregate(std::span<const RunResult>(arms.os_snap->rounds.results));
    return {snap.n == 20 && os.n == 20 && snap.mean >= os.mean,
            "OS-SnapShot " + summary_text(snap) + " vs OS " + summary_text(os)};
}

Verdict training_parity(const BenchmarkArms& arms) {
    auto stats = [](const ArmOutcome& a) {
        std::vector<double> v;
        for (const auto& r : a.rounds.results) v.push_back(r.train_loss);
        return aggregate(v);
    };
    const Summary fc = stats(*arms.fc), os = stats(*arms.os);
    const bool pass = fc.mean < 0.05 && os.mean < 0.05;
    return {pass, "mean final train cross-entropy FC " + num(fc.mean, 3) + " (max " + num(fc.max, 3) + "), OS " +
                      num(os.mean, 3) + " (max " + num(os.max, 3) + "), limit 0.05"};
}

std::string results_without_wall_time(const fs::path& path) {
    std::ifstream in(path);
    std::string line, out;
    while (std::getline(in, line)) {
        Json j = Json::parse(line);
        j.erase("wall_time_s");
        out += j.dump() + '\n';
    }
    return out;
}

Verdict determinism(const fs::path& config, const fs::path& work) {
    std::ostringstream sink;
    ConfigOverrides first, second;
    first.output = work / "run_a";
    second.output = work / "run_b";
    second.workers = 3;
    if (cmd_train(config, first, sink, sink) != kExitOk || cmd_train(config, second, sink, sink) != kExitOk)
        return {false, "training failed: " + sink.str()};
    const std::string a = results_without_wall_time(work / "run_a" / "results.jsonl");
    const std::string b = results_without_wall_time(work / "run_b" / "results.jsonl");
    const auto lines = std::count(a.begin(), a.end(), '\n');
    return {!a.empty() && a == b, std::to_string(lines) + " records, " +
                                      (a == b ? "byte-identical" : "DIFFERENT") +
                                      " across two runs (1 and 3 workers), wall time excluded"};
}

Verdict width_sweep(const fs::path& config) {
    ExperimentConfig c = load_experiment(config);
    std::vector<ArmConfig> os_only;
    for (const auto& a : c.arms)
        if (a.model.classifier == ClassifierKind::osl) os_only.push_back(a);
    if (os_only.empty()) throw ConfigError("width sweep config needs an osl arm");
    c.arms = {os_only.front()};
    const auto start = Clock::now();
    const auto rows = run_sweep(c, "width", {"16", "32", "512"});
    double mean[3];
    for (int i = 0; i < 3; ++i) {
        if (!rows[i].summary) throw Error("width " + rows[i].value + ": " + rows[i].note);
        mean[i] = rows[i].summary->mean;
    }
    const bool pass = mean[0] > mean[2] && mean[1] > mean[2];
    return {pass, "OS mean test accuracy at width 16 " + num(mean[0]) + ", 32 " + num(mean[1]) + ", 512 " +
                      num(mean[2]) + "; " + num(seconds_since(start), 3) + " s"};
}

}  // namespace

int main() {
    const fs::path source = OSLNET_SOURCE_DIR;
    const fs::path work = OSLNET_WORK_DIR;
    fs::create_directories(work);
    const fs::path desk = source / "configs" / "desk_benchmark.json";

    run(1, "gradient correctness", gradient_correctness);

    std::optional<ExperimentOutcome> bench;
    double bench_seconds = 0.0;
    std::string bench_error;
    try {
        const auto start = Clock::now();
        ConfigOverrides o;
        o.output = work / "desk";
        bench = run_experiment(load_experiment(desk, o));
        bench_seconds = seconds_since(start);
    } catch (const std::exception& e) {
        bench_error = e.what();
    }
    auto with_bench = [&](auto check) {
        return [&, check] {
            if (!bench) return Verdict{false, "desk benchmark did not run: " + bench_error};
            return check(find_arms(*bench));
        };
    };

    run(2, "exact orthogonality", with_bench([](const BenchmarkArms& a) { return orthogonality(a); }));
    run(3, "norm bound verification", norm_bounds);
    run(4, "desk-scale OS vs FC ordering",
        with_bench([&](const BenchmarkArms& a) { return os_vs_fc(a, bench_seconds); }));
    run(5, "snapshot ensembling gain", with_bench([](const BenchmarkArms& a) { return snapshot_gain(a); }));
    run(6, "training parity", with_bench([](const BenchmarkArms& a) { return training_parity(a); }));
    run(7, "loss identities", loss_identities);
    run(8, "statistics oracle", statistics_oracle);
    run(9, "determinism", [&] { return determinism(desk, work); });
    run(10, "width sweep ordering", [&] { return width_sweep(source / "configs" / "width_sweep.json"); });

    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " of 10 criteria failed")
              << std::endl;
    return failures == 0 ? 0 : 1;
}
