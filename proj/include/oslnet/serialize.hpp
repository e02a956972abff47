#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "oslnet/analysis.hpp"
#include "oslnet/training.hpp"

namespace oslnet {

using Json = nlohmann::json;

Json to_json(const RunResult& r);
RunResult run_result_from_json(const Json& j);

// One compact JSON object per line, rounds in the given order.
void write_results(std::ostream& out, std::span<const RunResult> results);
void save_results(const std::filesystem::path& path, std::span<const RunResult> results);
std::vector<RunResult> parse_results(std::istream& in);
std::vector<RunResult> load_results(const std::filesystem::path& path);

Json to_json(const Summary& s);
Json to_json(const TTestReport& t);
Json to_json(const NormBoundReport& r);
Json to_json(const Matrix& m);  // array of rows

// Writes `doc` pretty-printed with a trailing newline.
void save_json(const std::filesystem::path& path, const Json& doc);
Json load_json(const std::filesystem::path& path);

}  // namespace oslnet
