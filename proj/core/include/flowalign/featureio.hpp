#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "flowalign/linalg.hpp"

namespace flowalign {

using Label = std::uint32_t;

/// One source-modality feature (an "image" feature) and its class.
struct FeatureRecord {
    Vector vec;
    Label label = 0;

    bool operator==(const FeatureRecord&) const = default;
};

/// One target vector per class (the "text" features), indexed by label.
class ClassEmbeddingTable {
public:
    ClassEmbeddingTable() = default;
    /// Validates equal dimensions and nonzero norms.
    explicit ClassEmbeddingTable(std::vector<Vector> embeddings);

    std::size_t size() const noexcept { return embeddings_.size(); }
    std::size_t dim() const noexcept { return embeddings_.empty() ? 0 : embeddings_.front().dim(); }
    const Vector& operator[](Label label) const;
    const std::vector<Vector>& embeddings() const noexcept { return embeddings_; }

    bool operator==(const ClassEmbeddingTable&) const = default;

private:
    std::vector<Vector> embeddings_;
};

enum class Split { train, val, test };

std::string_view to_string(Split split) noexcept;

struct DatasetMeta {
    std::size_t n_classes = 0;
    std::size_t shots = 0;
    std::size_t dim = 0;
    Split split = Split::train;

    bool operator==(const DatasetMeta&) const = default;
};

struct Dataset {
    DatasetMeta meta;
    ClassEmbeddingTable table;
    std::vector<FeatureRecord> records;

    bool operator==(const Dataset&) const = default;
};

/// Checks dims, labels and table invariants; throws DimError / LabelError.
void validate(const Dataset& dataset);

/// Number of records carrying each label.
std::vector<std::size_t> class_counts(const Dataset& dataset);

enum class FileFormat { binary, csv };

/// Infers the format from the extension: ".csv" is CSV, anything else binary.
FileFormat format_for_path(const std::filesystem::path& path) noexcept;

/// Upcasts to double and L2-normalizes every vector. meta.shots is taken as
/// record_count / N since the file formats do not carry it.
Dataset load_features(const std::filesystem::path& path, FileFormat format,
                      Split split = Split::train);

/// Writes the dataset; values are stored as float32.
void save_features(const Dataset& dataset, const std::filesystem::path& path, FileFormat format);

/// Unit-norm vector that survives a float32 store / upcast / renormalize
/// cycle bit-for-bit. Everything produced by generate_synthetic and
/// load_features is in this form, which makes file round-trips the identity.
Vector canonical_unit(const Vector& v);

/// CRC-32 (IEEE 802.3, as in zlib) of a byte range.
std::uint32_t crc32(std::span<const std::byte> bytes) noexcept;

struct SynthConfig {
    std::size_t n_classes = 8;
    std::size_t shots = 16;
    std::size_t dim = 32;
    /// Per-coordinate std of class centers is class_center_scale / sqrt(d),
    /// so a center has norm close to class_center_scale.
    double class_center_scale = 0.6;
    /// Per-coordinate std of the per-sample noise.
    double cluster_std = 0.15;
    /// Per-coordinate std of the per-class displacement between the image
    /// cluster and its class embedding.
    double modality_offset_std = 0.3;
    std::uint64_t seed = 0;
};

void validate(const SynthConfig& cfg);

struct SyntheticSplits {
    Dataset train;
    Dataset val;
    Dataset test;
};

/// Class embedding k = normalize(center_k); image feature of class k =
/// normalize(center_k + offset_k + noise). train and val hold K records per
/// class, test holds 4K. Records are ordered by class.
SyntheticSplits generate_synthetic(const SynthConfig& cfg);

/// Keeps exactly `shots` records per class, chosen uniformly without
/// replacement. Kept records stay in their original order.
Dataset kshot_subsample(const Dataset& dataset, std::size_t shots, std::uint64_t seed);

}  // namespace flowalign
