#include "oslnet/serialize.hpp"

#include <fstream>
#include <sstream>

#include "oslnet/errors.hpp"

namespace oslnet {

Json to_json(const RunResult& r) {
    return Json{{"round", r.round},
                {"seed", r.seed},
                {"arm", r.arm},
                {"train_acc", r.train_acc},
                {"test_acc", r.test_acc},
                {"train_loss", r.train_loss},
                {"loss_curve", r.loss_curve},
                {"acc_curve", r.acc_curve},
                {"config_hash", r.config_hash},
                {"wall_time_s", r.wall_time_s}};
}

RunResult run_result_from_json(const Json& j) {
    RunResult r;
    try {
        r.round = j.at("round").get<std::size_t>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.arm = j.at("arm").get<std::string>();
        r.train_acc = j.at("train_acc").get<double>();
        r.test_acc = j.at("test_acc").get<double>();
        r.train_loss = j.value("train_loss", 0.0);
        r.loss_curve = j.value("loss_curve", std::vector<double>{});
        r.acc_curve = j.value("acc_curve", std::vector<double>{});
        r.config_hash = j.value("config_hash", std::string{});
        r.wall_time_s = j.value("wall_time_s", 0.0);
    } catch (const Json::exception& e) {
        throw ParseError(std::string("result record: ") + e.what());
    }
    return r;
}

void write_results(std::ostream& out, std::span<const RunResult> results) {
    for (const auto& r : results) out << to_json(r).dump() << '\n';
}

void save_results(const std::filesystem::path& path, std::span<const RunResult> results) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    write_results(out, results);
}

std::vector<RunResult> parse_results(std::istream& in) {
    std::vector<RunResult> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        Json j;
        try {
            j = Json::parse(line);
        } catch (const Json::parse_error& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
        }
        out.push_back(run_result_from_json(j));
    }
    return out;
}

std::vector<RunResult> load_results(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArgumentError("cannot open " + path.string());
    return parse_results(in);
}

Json to_json(const Summary& s) {
    return Json{{"n", s.n},          {"single", s.single}, {"mean", s.mean}, {"std", s.std},
                {"min", s.min},      {"q1", s.q1},         {"median", s.median},
                {"q3", s.q3},        {"max", s.max},       {"outliers", s.outliers}};
}

Json to_json(const TTestReport& t) {
    return Json{{"n", t.n},
                {"mean_diff", t.mean_diff},
                {"std_diff", t.std_diff},
                {"t", t.t_statistic},
                {"df", t.degrees_of_freedom},
                {"p", t.p_value},
                {"significant", t.significant}};
}

Json to_json(const NormBoundReport& r) {
    return Json{{"d", r.d},
                {"k", r.k},
                {"bound", r.bound},
                {"trials", r.trials},
                {"violations", r.violations},
                {"max_ratio_masked", r.max_ratio_masked},
                {"max_ratio_full", r.max_ratio_full},
                {"mean_ratio_masked", r.mean_ratio_masked},
                {"mean_ratio_full", r.mean_ratio_full},
                {"mean_masked_over_full", r.mean_masked_over_full},
                {"extremal_ratio_masked", r.extremal_ratio_masked},
                {"extremal_ratio_full", r.extremal_ratio_full}};
}

Json to_json(const Matrix& m) {
    Json rows = Json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

void save_json(const std::filesystem::path& path, const Json& doc) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << doc.dump(2) << '\n';
}

Json load_json(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string());
    try {
        return Json::parse(in, nullptr, true, true);
    } catch (const Json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

}  // namespace oslnet
