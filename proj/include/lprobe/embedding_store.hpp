#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "lprobe/matrix.hpp"

namespace lprobe {

enum class SplitTag { train, test, unsplit };

const char* to_string(SplitTag tag) noexcept;

/// Embedding matrix (one row per image), integer labels and the ordered class
/// catalog. Labels index into `classes`; the catalog order is frozen at ingest.
struct EmbeddingDataset {
    Matrix data;
    std::vector<std::uint32_t> labels;
    std::vector<std::string> classes;
    SplitTag split = SplitTag::unsplit;

    std::size_t rows() const noexcept { return data.rows(); }
    std::size_t dim() const noexcept { return data.cols(); }
    std::size_t num_classes() const noexcept { return classes.size(); }

    // Rows per class, indexed by label.
    std::vector<std::size_t> class_counts() const;

    // Throws ConsistencyError when labels and rows disagree or a label is out of range.
    void check_invariants() const;

    friend bool operator==(const EmbeddingDataset&, const EmbeddingDataset&) = default;
};

// EMB1, little-endian:
//   "EMB1" | u32 version=1 | u32 n_rows | u32 n_cols | u32 n_classes
//   | n_classes x (u16 byte length, UTF-8 bytes) | n_rows x u32 label
//   | n_rows x n_cols x f32 (row-major)
inline constexpr std::uint32_t kEmb1Version = 1;

EmbeddingDataset load_binary(const std::filesystem::path& path, SplitTag split = SplitTag::unsplit);
void save_binary(const EmbeddingDataset& ds, const std::filesystem::path& path);

// Header `label,f0,...,f{d-1}`; the label column holds class names. Classes are
// indexed in order of first appearance.
EmbeddingDataset load_csv(const std::filesystem::path& path, SplitTag split = SplitTag::unsplit);
void save_csv(const EmbeddingDataset& ds, const std::filesystem::path& path);

// Relabels `ds` onto `catalog`, which must hold the same class names in any
// order. Throws ConsistencyError naming the classes that differ.
EmbeddingDataset with_catalog(const EmbeddingDataset& ds, const std::vector<std::string>& catalog);

// Divides each row by its Euclidean norm. Zero-norm rows are an error.
EmbeddingDataset normalize_rows(const EmbeddingDataset& ds);

// Largest |norm - 1| over all rows, with the offending row index.
struct RowNormReport {
    double worst_deviation = 0.0;
    std::size_t worst_row = 0;
};
RowNormReport row_norm_deviation(const EmbeddingDataset& ds);

struct ManifestSplit {
    std::string file;  // relative to the manifest's directory
    std::size_t rows = 0;
    std::string checksum;
};

/// Sidecar JSON describing a set of EMB1 files:
///   {"dataset_name", "backbone_id", "pooling_descriptor", "dim",
///    "splits": {"<split>": {"file", "rows", "checksum"}}}
struct Manifest {
    std::string dataset_name;
    std::string backbone_id;
    std::string pooling_descriptor;
    std::size_t dim = 0;
    std::map<std::string, ManifestSplit> splits;
};

Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

// FNV-1a 64 of the file bytes, as 16 lowercase hex digits.
std::string file_checksum(const std::filesystem::path& path);

// Problems found when checking the manifest against the files it references.
// Empty means the manifest verifies.
std::vector<std::string> verify_manifest(const Manifest& manifest,
                                         const std::filesystem::path& manifest_dir);

}  // namespace lprobe
