#include "oslnet/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "oslnet/errors.hpp"
#include "oslnet/random.hpp"

namespace oslnet {

std::vector<std::size_t> Dataset::indices(Split which) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < split.size(); ++i)
        if (split[i] == which) out.push_back(i);
    return out;
}

Matrix Dataset::features_of(Split which) const {
    const auto idx = indices(which);
    return features.select_cols(idx);
}

std::vector<std::size_t> Dataset::labels_of(Split which) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < split.size(); ++i)
        if (split[i] == which) out.push_back(labels[i]);
    return out;
}

std::vector<std::size_t> Dataset::class_counts(Split which) const {
    std::vector<std::size_t> counts(class_count, 0);
    for (std::size_t i = 0; i < split.size(); ++i)
        if (split[i] == which) ++counts[labels[i]];
    return counts;
}

void Dataset::validate() const {
    if (features.cols() != labels.size() || split.size() != labels.size()) {
        throw ShapeError("dataset: " + features.shape_str() + " features, " +
                         std::to_string(labels.size()) + " labels, " +
                         std::to_string(split.size()) + " split tags");
    }
    for (std::size_t y : labels)
        if (y >= class_count)
            throw LabelError("dataset: label " + std::to_string(y) + " >= class count " +
                             std::to_string(class_count));
    if (!features.all_finite()) throw ArgumentError("dataset: non-finite feature value");
}

// ---------------------------------------------------------------- synthetic

Dataset generate_blobs(const BlobParams& p) {
    if (p.classes < 2) throw ArgumentError("generate_blobs: need at least 2 classes");
    if (p.dim < p.classes) throw ArgumentError("generate_blobs: dim must be >= class count");
    if (p.train_per_class == 0 || p.test_per_class == 0)
        throw ArgumentError("generate_blobs: per-class sample counts must be positive");
    if (!(p.noise_scale >= 0.0)) throw ArgumentError("generate_blobs: negative noise scale");

    Rng rng(p.seed);
    const double max_cos = std::cos(p.min_angle_deg * std::numbers::pi / 180.0);
    constexpr int kMaxAttempts = 1000;

    Matrix means(p.dim, p.classes);
    for (std::size_t j = 0; j < p.classes; ++j) {
        bool placed = false;
        for (int attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
            std::vector<double> v(p.dim);
            for (double& x : v) x = rng.normal();
            const double norm = std::sqrt(dot(v, v));
            if (norm == 0.0) continue;
            for (double& x : v) x /= norm;
            placed = true;
            for (std::size_t i = 0; i < j && placed; ++i) {
                double c = 0.0;
                for (std::size_t r = 0; r < p.dim; ++r) c += v[r] * means(r, i);
                if (c > max_cos) placed = false;
            }
            if (placed)
                for (std::size_t r = 0; r < p.dim; ++r) means(r, j) = v[r];
        }
        if (!placed) {
            throw GeometryError("generate_blobs: could not place " + std::to_string(p.classes) +
                                " class means " + std::to_string(p.min_angle_deg) +
                                " degrees apart in dimension " + std::to_string(p.dim) +
                                "; try a larger dim");
        }
    }

    const std::size_t per_class = p.train_per_class + p.test_per_class;
    Dataset out;
    out.class_count = p.classes;
    out.provenance = Provenance::synthetic;
    out.features = Matrix(p.dim, per_class * p.classes);
    out.labels.reserve(per_class * p.classes);
    out.split.reserve(per_class * p.classes);
    std::size_t col = 0;
    for (std::size_t j = 0; j < p.classes; ++j) {
        for (std::size_t s = 0; s < per_class; ++s, ++col) {
            for (std::size_t r = 0; r < p.dim; ++r)
                out.features(r, col) = means(r, j) + p.noise_scale * rng.normal();
            out.labels.push_back(j);
            out.split.push_back(s < p.train_per_class ? Split::train : Split::test);
        }
    }
    return out;
}

Dataset generate_blobs(std::size_t k, std::size_t dim, std::size_t train_per_class,
                       std::size_t test_per_class, double noise_scale, std::uint64_t seed) {
    BlobParams p;
    p.classes = k;
    p.dim = dim;
    p.train_per_class = train_per_class;
    p.test_per_class = test_per_class;
    p.noise_scale = noise_scale;
    p.seed = seed;
    return generate_blobs(p);
}

// ---------------------------------------------------------------- CSV

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        fields.push_back(line.substr(start, comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return fields;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace

Dataset parse_features(std::istream& in, std::vector<std::string>* warnings) {
    std::vector<double> values;
    std::vector<std::size_t> labels;
    std::size_t dim = 0;
    std::size_t line_no = 0;
    std::string line;
    bool seen_data = false;

    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view view = trim(line);
        if (view.empty()) continue;
        if (view.front() == '#') {
            if (seen_data || line_no != 1)
                throw ParseError("line " + std::to_string(line_no) +
                                 ": header allowed only on the first line");
            continue;
        }
        const auto fields = split_fields(view);
        if (fields.size() < 2)
            throw ParseError("line " + std::to_string(line_no) + ": need a label and at least one feature");
        if (!seen_data) {
            dim = fields.size() - 1;
            seen_data = true;
        } else if (fields.size() - 1 != dim) {
            throw ParseError("line " + std::to_string(line_no) + ": expected " +
                             std::to_string(dim) + " features, found " +
                             std::to_string(fields.size() - 1));
        }

        const std::string_view label_text = trim(fields[0]);
        long long label = -1;
        auto [lp, lec] = std::from_chars(label_text.data(), label_text.data() + label_text.size(), label);
        if (lec != std::errc() || lp != label_text.data() + label_text.size() || label < 0) {
            throw ParseError("line " + std::to_string(line_no) + ": label '" +
                             std::string(label_text) + "' is not a non-negative integer");
        }
        labels.push_back(static_cast<std::size_t>(label));

        for (std::size_t f = 1; f < fields.size(); ++f) {
            const std::string_view text = trim(fields[f]);
            double v = 0.0;
            auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
            if (ec != std::errc() || p != text.data() + text.size() || !std::isfinite(v)) {
                throw ParseError("line " + std::to_string(line_no) + ", column " +
                                 std::to_string(f + 1) + ": '" + std::string(text) +
                                 "' is not a finite number");
            }
            values.push_back(v);
        }
    }
    if (labels.empty()) throw ParseError("feature file contains no samples");

    // values are sample-major; transpose into dim × n
    const std::size_t n = labels.size();
    Dataset out;
    out.features = Matrix(n, dim, std::move(values)).transpose();
    out.class_count = *std::max_element(labels.begin(), labels.end()) + 1;
    out.labels = std::move(labels);
    out.split.assign(n, Split::unassigned);
    out.provenance = Provenance::file;

    std::vector<std::size_t> counts(out.class_count, 0);
    for (std::size_t y : out.labels) ++counts[y];
    for (std::size_t j = 0; j < counts.size(); ++j) {
        if (counts[j] == 0 && warnings)
            warnings->push_back("class " + std::to_string(j) + " has no samples");
    }
    return out;
}

Dataset load_features(const std::filesystem::path& path, std::vector<std::string>* warnings) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open feature file " + path.string());
    return parse_features(in, warnings);
}

void write_features(std::ostream& out, const Dataset& data) {
    data.validate();
    out << "# label";
    for (std::size_t r = 0; r < data.dim(); ++r) out << ",f" << r;
    out << '\n';
    for (std::size_t c = 0; c < data.size(); ++c) {
        out << data.labels[c];
        for (std::size_t r = 0; r < data.dim(); ++r) out << ',' << format_double(data.features(r, c));
        out << '\n';
    }
}

void save_features(const std::filesystem::path& path, const Dataset& data) {
    std::ofstream out(path);
    if (!out) throw ArgumentError("cannot write feature file " + path.string());
    write_features(out, data);
}

// ---------------------------------------------------------------- splits

namespace {

std::vector<std::vector<std::size_t>> members_by_class(const Dataset& data,
                                                       std::initializer_list<Split> tags) {
    std::vector<std::vector<std::size_t>> by_class(data.class_count);
    for (std::size_t i = 0; i < data.size(); ++i)
        if (std::find(tags.begin(), tags.end(), data.split[i]) != tags.end())
            by_class[data.labels[i]].push_back(i);
    return by_class;
}

}  // namespace

Dataset split_per_class(const Dataset& data, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ArgumentError("split_per_class: train fraction must lie in (0, 1)");
    data.validate();
    Rng rng(seed);
    Dataset out = data;
    auto by_class = members_by_class(data, {Split::unassigned, Split::train, Split::test});
    for (std::size_t j = 0; j < by_class.size(); ++j) {
        auto& members = by_class[j];
        if (members.empty()) continue;
        if (members.size() < 2) {
            throw ArgumentError("split_per_class: class " + std::to_string(j) +
                                " has a single sample and cannot appear in both splits");
        }
        rng.shuffle(members);
        auto n_train = static_cast<std::size_t>(
            std::llround(static_cast<double>(members.size()) * train_fraction));
        n_train = std::clamp<std::size_t>(n_train, 1, members.size() - 1);
        for (std::size_t i = 0; i < members.size(); ++i)
            out.split[members[i]] = i < n_train ? Split::train : Split::test;
    }
    return out;
}

Dataset resplit(const Dataset& data, std::uint64_t seed) {
    data.validate();
    Rng rng(seed);
    Dataset out = data;
    const auto train_counts = data.class_counts(Split::train);
    auto by_class = members_by_class(data, {Split::train, Split::test});
    for (std::size_t j = 0; j < by_class.size(); ++j) {
        auto& members = by_class[j];
        rng.shuffle(members);
        for (std::size_t i = 0; i < members.size(); ++i)
            out.split[members[i]] = i < train_counts[j] ? Split::train : Split::test;
    }
    return out;
}

Dataset reduce_training(const Dataset& data, std::size_t n_remove_per_class, std::uint64_t seed) {
    data.validate();
    if (n_remove_per_class == 0) return data;
    Rng rng(seed);
    auto by_class = members_by_class(data, {Split::train});
    std::vector<bool> drop(data.size(), false);
    for (std::size_t j = 0; j < by_class.size(); ++j) {
        auto& members = by_class[j];
        if (members.empty()) continue;
        if (n_remove_per_class >= members.size()) {
            throw ArgumentError("reduce_training: removing " + std::to_string(n_remove_per_class) +
                                " samples would empty class " + std::to_string(j) + " (" +
                                std::to_string(members.size()) + " training samples)");
        }
        rng.shuffle(members);
        for (std::size_t i = 0; i < n_remove_per_class; ++i) drop[members[i]] = true;
    }
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < data.size(); ++i)
        if (!drop[i]) keep.push_back(i);

    Dataset out;
    out.features = data.features.select_cols(keep);
    out.class_count = data.class_count;
    out.provenance = data.provenance;
    for (std::size_t i : keep) {
        out.labels.push_back(data.labels[i]);
        out.split.push_back(data.split[i]);
    }
    return out;
}

}  // namespace oslnet
