#include "flowalign/featureio.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "flowalign/errors.hpp"
#include "flowalign/rng.hpp"

namespace flowalign {
namespace {

constexpr std::array<char, 4> kMagic = {'F', 'M', 'A', '1'};

Vector upcast_of_float(const Vector& v) {
    Vector out(v.dim());
    for (std::size_t i = 0; i < v.dim(); ++i) {
        out[i] = static_cast<double>(static_cast<float>(v[i]));
    }
    return out;
}

Vector normalize_loaded(const Vector& v, const char* what) {
    if (norm(v) == 0.0) throw FormatError(std::string("zero-norm ") + what + " in feature file");
    return normalized(v);
}

class ByteWriter {
public:
    void put_u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFFu));
    }
    void put_f32(double v) { put_u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
    void put_raw(std::span<const char> chars) {
        for (char c : chars) bytes_.push_back(static_cast<std::byte>(c));
    }
    const std::vector<std::byte>& bytes() const noexcept { return bytes_; }

private:
    std::vector<std::byte> bytes_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::byte> bytes) : bytes_(bytes) {}

    std::uint32_t get_u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(std::to_integer<unsigned>(bytes_[pos_ + i])) << (8 * i);
        }
        pos_ += 4;
        return v;
    }
    double get_f32() { return static_cast<double>(std::bit_cast<float>(get_u32())); }
    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (remaining() < n) throw FormatError("feature file truncated");
    }

    std::span<const std::byte> bytes_;
    std::size_t pos_ = 0;
};

std::vector<std::byte> read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<char> chars((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::vector<std::byte> bytes(chars.size());
    std::transform(chars.begin(), chars.end(), bytes.begin(),
                   [](char c) { return static_cast<std::byte>(c); });
    return bytes;
}

void write_all(const std::filesystem::path& path, std::span<const std::byte> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

DatasetMeta make_meta(std::size_t n, std::size_t d, std::size_t records, Split split) {
    return DatasetMeta{n, n == 0 ? 0 : records / n, d, split};
}

Dataset load_binary(const std::filesystem::path& path, Split split) {
    const auto bytes = read_all(path);
    if (bytes.size() < kMagic.size() + 4 * 4) throw FormatError("feature file too short: " + path.string());
    for (std::size_t i = 0; i < kMagic.size(); ++i) {
        if (static_cast<char>(bytes[i]) != kMagic[i]) throw FormatError("bad magic in " + path.string());
    }
    const std::span<const std::byte> all(bytes);
    const auto body = all.first(all.size() - 4);
    ByteReader trailer(all.last(4));
    if (trailer.get_u32() != crc32(body)) throw FormatError("CRC32 mismatch in " + path.string());

    ByteReader in(body.subspan(kMagic.size()));
    const std::size_t d = in.get_u32();
    const std::size_t n = in.get_u32();
    const std::size_t count = in.get_u32();
    if (d == 0 || n == 0) throw FormatError("header declares zero dimension or zero classes");
    const std::size_t expected = (n * d + count * (d + 1)) * 4;
    if (in.remaining() != expected) throw FormatError("payload size does not match header in " + path.string());

    std::vector<Vector> embeddings;
    embeddings.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        Vector v(d);
        for (std::size_t i = 0; i < d; ++i) v[i] = in.get_f32();
        embeddings.push_back(normalize_loaded(v, "class embedding"));
    }
    Dataset ds{make_meta(n, d, count, split), ClassEmbeddingTable(std::move(embeddings)), {}};
    ds.records.reserve(count);
    for (std::size_t r = 0; r < count; ++r) {
        const Label label = in.get_u32();
        if (label >= n) {
            throw LabelError("record " + std::to_string(r) + " has label " + std::to_string(label) +
                             " but N = " + std::to_string(n));
        }
        Vector v(d);
        for (std::size_t i = 0; i < d; ++i) v[i] = in.get_f32();
        ds.records.push_back({normalize_loaded(v, "feature"), label});
    }
    return ds;
}

void save_binary(const Dataset& ds, const std::filesystem::path& path) {
    ByteWriter out;
    out.put_raw(kMagic);
    out.put_u32(static_cast<std::uint32_t>(ds.table.dim()));
    out.put_u32(static_cast<std::uint32_t>(ds.table.size()));
    out.put_u32(static_cast<std::uint32_t>(ds.records.size()));
    for (const auto& e : ds.table.embeddings()) {
        for (double v : e) out.put_f32(v);
    }
    for (const auto& rec : ds.records) {
        out.put_u32(rec.label);
        for (double v : rec.vec) out.put_f32(v);
    }
    const std::uint32_t crc = crc32(out.bytes());
    out.put_u32(crc);
    write_all(path, out.bytes());
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    return fields;
}

double parse_double(const std::string& s, std::size_t line_no) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw FormatError("line " + std::to_string(line_no) + ": bad number '" + s + "'");
    }
}

std::size_t parse_count(const std::string& s, std::size_t line_no) {
    const double v = parse_double(s, line_no);
    if (v < 0 || v != std::floor(v) || v > 4294967295.0) {
        throw FormatError("line " + std::to_string(line_no) + ": bad integer '" + s + "'");
    }
    return static_cast<std::size_t>(v);
}

Dataset load_csv(const std::filesystem::path& path, Split split) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line)) throw FormatError("missing header in " + path.string());
    const auto header = split_csv(line);
    if (header.size() != 2) throw FormatError("header must be 'd,N' in " + path.string());
    const std::size_t d = parse_count(header[0], line_no);
    const std::size_t n = parse_count(header[1], line_no);
    if (d == 0 || n == 0) throw FormatError("header declares zero dimension or zero classes");

    std::vector<Vector> embeddings(n);
    std::vector<bool> seen(n, false);
    std::vector<FeatureRecord> records;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split_csv(line);
        if (fields.size() < 2 || (fields[0] != "T" && fields[0] != "I")) {
            throw FormatError("line " + std::to_string(line_no) + ": expected T or I row");
        }
        if (fields.size() != d + 2) {
            throw DimError("line " + std::to_string(line_no) + ": expected " + std::to_string(d) +
                           " values, got " + std::to_string(fields.size() - 2));
        }
        const std::size_t label = parse_count(fields[1], line_no);
        if (label >= n) {
            throw LabelError("line " + std::to_string(line_no) + ": label " + std::to_string(label) +
                             " but N = " + std::to_string(n));
        }
        Vector v(d);
        for (std::size_t i = 0; i < d; ++i) {
            v[i] = static_cast<double>(static_cast<float>(parse_double(fields[i + 2], line_no)));
        }
        if (fields[0] == "T") {
            if (!records.empty()) throw FormatError("class embedding row after feature rows");
            if (seen[label]) throw FormatError("duplicate class embedding " + std::to_string(label));
            seen[label] = true;
            embeddings[label] = normalize_loaded(v, "class embedding");
        } else {
            records.push_back({normalize_loaded(v, "feature"), static_cast<Label>(label)});
        }
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
        throw FormatError("missing class embeddings in " + path.string());
    }
    Dataset ds{make_meta(n, d, records.size(), split), ClassEmbeddingTable(std::move(embeddings)),
               std::move(records)};
    return ds;
}

void append_row(std::string& out, char kind, Label label, const Vector& v) {
    out += kind;
    out += ',';
    out += std::to_string(label);
    char buf[32];
    for (double x : v) {
        std::snprintf(buf, sizeof(buf), ",%.9g", static_cast<double>(static_cast<float>(x)));
        out += buf;
    }
    out += '\n';
}

void save_csv(const Dataset& ds, const std::filesystem::path& path) {
    std::string out = std::to_string(ds.table.dim()) + "," + std::to_string(ds.table.size()) + "\n";
    for (std::size_t k = 0; k < ds.table.size(); ++k) {
        append_row(out, 'T', static_cast<Label>(k), ds.table[static_cast<Label>(k)]);
    }
    for (const auto& rec : ds.records) append_row(out, 'I', rec.label, rec.vec);
    write_all(path, std::as_bytes(std::span(out.data(), out.size())));
}

Vector gaussian_vector(Rng& rng, std::size_t dim, double std) {
    Vector v(dim);
    for (double& x : v) x = gauss(rng, 0.0, std);
    return v;
}

}  // namespace

ClassEmbeddingTable::ClassEmbeddingTable(std::vector<Vector> embeddings)
    : embeddings_(std::move(embeddings)) {
    for (const auto& e : embeddings_) {
        if (e.dim() != embeddings_.front().dim()) throw DimError("class embeddings differ in dimension");
        if (e.dim() == 0) throw DimError("class embedding has zero dimension");
        if (norm(e) == 0.0) throw ZeroNormError("class embedding has zero norm");
    }
}

const Vector& ClassEmbeddingTable::operator[](Label label) const {
    if (label >= embeddings_.size()) {
        throw LabelError("label " + std::to_string(label) + " not in class table of size " +
                         std::to_string(embeddings_.size()));
    }
    return embeddings_[label];
}

std::string_view to_string(Split split) noexcept {
    switch (split) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "unknown";
}

void validate(const Dataset& dataset) {
    const std::size_t d = dataset.table.dim();
    if (dataset.meta.dim != d) throw DimError("dataset meta dim does not match class table");
    if (dataset.meta.n_classes != dataset.table.size()) {
        throw LabelError("dataset meta N does not match class table size");
    }
    for (const auto& rec : dataset.records) {
        if (rec.vec.dim() != d) throw DimError("record dimension does not match class table");
        if (rec.label >= dataset.table.size()) {
            throw LabelError("record label " + std::to_string(rec.label) + " out of range");
        }
    }
}

std::vector<std::size_t> class_counts(const Dataset& dataset) {
    std::vector<std::size_t> counts(dataset.table.size(), 0);
    for (const auto& rec : dataset.records) {
        if (rec.label >= counts.size()) throw LabelError("record label out of range");
        ++counts[rec.label];
    }
    return counts;
}

FileFormat format_for_path(const std::filesystem::path& path) noexcept {
    return path.extension() == ".csv" ? FileFormat::csv : FileFormat::binary;
}

Dataset load_features(const std::filesystem::path& path, FileFormat format, Split split) {
    if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());
    return format == FileFormat::csv ? load_csv(path, split) : load_binary(path, split);
}

void save_features(const Dataset& dataset, const std::filesystem::path& path, FileFormat format) {
    validate(dataset);
    if (format == FileFormat::csv) {
        save_csv(dataset, path);
    } else {
        save_binary(dataset, path);
    }
}

Vector canonical_unit(const Vector& v) {
    Vector u = normalized(v);
    for (int iter = 0; iter < 8; ++iter) {
        Vector next = normalized(upcast_of_float(u));
        if (next == u) break;
        u = std::move(next);
    }
    return u;
}

std::uint32_t crc32(std::span<const std::byte> bytes) noexcept {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    // zlib takes a uInt length; feed large buffers in chunks.
    constexpr std::size_t kChunk = 1u << 30;
    for (std::size_t off = 0; off < bytes.size(); off += kChunk) {
        const std::size_t len = std::min(kChunk, bytes.size() - off);
        crc = ::crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + off), static_cast<uInt>(len));
    }
    return static_cast<std::uint32_t>(crc);
}

void validate(const SynthConfig& cfg) {
    if (cfg.n_classes < 2) throw ArgError("synthetic data needs at least 2 classes");
    if (cfg.shots == 0 || cfg.dim == 0) throw ArgError("synthetic shots and dim must be positive");
    if (!(cfg.class_center_scale > 0.0)) throw ArgError("class_center_scale must be positive");
    if (!(cfg.cluster_std >= 0.0) || !(cfg.modality_offset_std >= 0.0)) {
        throw ArgError("synthetic standard deviations must be non-negative");
    }
}

SyntheticSplits generate_synthetic(const SynthConfig& cfg) {
    validate(cfg);
    Rng rng(cfg.seed);
    const std::size_t n = cfg.n_classes;
    const std::size_t d = cfg.dim;

    std::vector<Vector> centers;
    centers.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        Vector c = gaussian_vector(rng, d, cfg.class_center_scale / std::sqrt(static_cast<double>(d)));
        while (norm(c) == 0.0) c = gaussian_vector(rng, d, 1.0);
        centers.push_back(std::move(c));
    }
    std::vector<Vector> offsets;
    offsets.reserve(n);
    for (std::size_t k = 0; k < n; ++k) offsets.push_back(gaussian_vector(rng, d, cfg.modality_offset_std));

    std::vector<Vector> embeddings;
    embeddings.reserve(n);
    for (const auto& c : centers) embeddings.push_back(canonical_unit(c));
    const ClassEmbeddingTable table(std::move(embeddings));

    auto make_split = [&](Split split, std::size_t per_class) {
        Dataset ds{DatasetMeta{n, per_class, d, split}, table, {}};
        ds.records.reserve(n * per_class);
        for (std::size_t k = 0; k < n; ++k) {
            const Vector mean = centers[k] + offsets[k];
            for (std::size_t s = 0; s < per_class; ++s) {
                Vector x = mean + gaussian_vector(rng, d, cfg.cluster_std);
                if (norm(x) == 0.0) x = mean;
                ds.records.push_back({canonical_unit(x), static_cast<Label>(k)});
            }
        }
        return ds;
    };

    SyntheticSplits out;
    out.train = make_split(Split::train, cfg.shots);
    out.val = make_split(Split::val, cfg.shots);
    out.test = make_split(Split::test, 4 * cfg.shots);
    return out;
}

Dataset kshot_subsample(const Dataset& dataset, std::size_t shots, std::uint64_t seed) {
    if (shots == 0) throw ArgError("kshot_subsample: shots must be positive");
    const std::size_t n = dataset.table.size();
    std::vector<std::vector<std::size_t>> by_class(n);
    for (std::size_t i = 0; i < dataset.records.size(); ++i) {
        const Label label = dataset.records[i].label;
        if (label >= n) throw LabelError("kshot_subsample: record label out of range");
        by_class[label].push_back(i);
    }
    Rng rng(seed);
    std::vector<bool> keep(dataset.records.size(), false);
    for (std::size_t k = 0; k < n; ++k) {
        auto& idx = by_class[k];
        if (idx.size() < shots) {
            throw ArgError("kshot_subsample: class " + std::to_string(k) + " has " +
                           std::to_string(idx.size()) + " records, need " + std::to_string(shots));
        }
        for (std::size_t j = 0; j < shots; ++j) {
            const std::size_t pick = j + rng.uniform_index(idx.size() - j);
            std::swap(idx[j], idx[pick]);
            keep[idx[j]] = true;
        }
    }
    Dataset out{dataset.meta, dataset.table, {}};
    out.meta.shots = shots;
    out.records.reserve(n * shots);
    for (std::size_t i = 0; i < dataset.records.size(); ++i) {
        if (keep[i]) out.records.push_back(dataset.records[i]);
    }
    return out;
}

}  // namespace flowalign
