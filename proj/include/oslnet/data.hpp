#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "oslnet/linalg.hpp"

namespace oslnet {

// `unassigned` marks freshly loaded samples before a train/test split.
enum class Split : std::uint8_t { unassigned, train, test };
enum class Provenance { synthetic, file };

struct Dataset {
    Matrix features;  // dim × n_samples
    std::vector<std::size_t> labels;
    std::size_t class_count = 0;
    std::vector<Split> split;
    Provenance provenance = Provenance::synthetic;

    std::size_t dim() const { return features.rows(); }
    std::size_t size() const { return labels.size(); }

    std::vector<std::size_t> indices(Split which) const;
    Matrix features_of(Split which) const;
    std::vector<std::size_t> labels_of(Split which) const;
    // Per-class sample counts within one split.
    std::vector<std::size_t> class_counts(Split which) const;

    // Checks sizes, label range and finiteness; throws on violation.
    void validate() const;
};

struct BlobParams {
    std::size_t classes = 8;
    std::size_t dim = 64;
    std::size_t train_per_class = 20;
    std::size_t test_per_class = 100;
    double noise_scale = 0.5;
    std::uint64_t seed = 0;
    // Class means are unit vectors at least this far apart (degrees).
    double min_angle_deg = 60.0;
};

// Gaussian blobs around random unit-vector means; deterministic per seed.
// Samples are stored class by class, train samples first within each class.
Dataset generate_blobs(const BlobParams& params);
Dataset generate_blobs(std::size_t k, std::size_t dim, std::size_t train_per_class,
                       std::size_t test_per_class, double noise_scale, std::uint64_t seed);

// CSV: first column integer label, remaining columns features, optional
// single header line starting with '#'. class_count is max label + 1; classes
// with no samples are reported through `warnings`.
Dataset parse_features(std::istream& in, std::vector<std::string>* warnings = nullptr);
Dataset load_features(const std::filesystem::path& path,
                      std::vector<std::string>* warnings = nullptr);
// Shortest round-trip number formatting, so load → write → load is exact.
void write_features(std::ostream& out, const Dataset& data);
void save_features(const std::filesystem::path& path, const Dataset& data);

// Random per-class split: round(n_c · train_fraction) samples of each class
// go to train, clamped so both sides keep at least one sample.
Dataset split_per_class(const Dataset& data, double train_fraction, std::uint64_t seed);

// Reassigns train/test tags at random within each class, keeping the
// per-class train and test counts.
Dataset resplit(const Dataset& data, std::uint64_t seed);

// Removes exactly n uniformly chosen training samples from every class; test
// samples are untouched.
Dataset reduce_training(const Dataset& data, std::size_t n_remove_per_class, std::uint64_t seed);

}  // namespace oslnet
