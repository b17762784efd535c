#include "flowalign/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <iterator>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowalign/errors.hpp"
#include "flowalign/featureio.hpp"

namespace flowalign {
namespace {

constexpr const char* kFormatTag = "fma-checkpoint-1";

std::vector<std::byte> encode_params(const VelocityFieldParams& params) {
    std::vector<std::byte> bytes;
    bytes.reserve(params.param_count() * 8);
    for (auto tensor : params.tensors()) {
        for (double v : tensor) {
            const auto bits = std::bit_cast<std::uint64_t>(v);
            for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::byte>((bits >> (8 * i)) & 0xFFu));
        }
    }
    return bytes;
}

}  // namespace

std::filesystem::path blob_path_for(const std::filesystem::path& manifest) {
    auto blob = manifest;
    blob.replace_extension(".bin");
    return blob;
}

void save_checkpoint(const std::filesystem::path& manifest, const VelocityFieldParams& params,
                     const CheckpointInfo& info) {
    validate(params);
    const auto blob = blob_path_for(manifest);
    if (blob == manifest) throw IoError("checkpoint manifest must not use the .bin extension");
    const auto bytes = encode_params(params);

    nlohmann::ordered_json j;
    j["format"] = kFormatTag;
    j["widths"] = params.widths;
    j["time_embed_dim"] = params.time_embed_dim;
    j["activation"] = "silu";
    j["seed"] = info.seed;
    j["hyperparameters"] = info.hyperparameters;
    j["blob"] = blob.filename().string();
    j["param_count"] = params.param_count();
    j["crc32"] = crc32(bytes);

    {
        std::ofstream out(blob, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + blob.string() + " for writing");
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("write failed: " + blob.string());
    }
    std::ofstream out(manifest, std::ios::trunc);
    if (!out) throw IoError("cannot open " + manifest.string() + " for writing");
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + manifest.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& manifest) {
    std::ifstream in(manifest);
    if (!in) throw IoError("cannot open checkpoint " + manifest.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("checkpoint manifest " + manifest.string() + " is not valid JSON: " + e.what());
    }

    Checkpoint ck;
    std::uint32_t expected_crc = 0;
    std::size_t count = 0;
    std::filesystem::path blob;
    try {
        if (j.at("format").get<std::string>() != kFormatTag) throw FormatError("unknown checkpoint format");
        if (j.at("activation").get<std::string>() != "silu") throw FormatError("unknown activation");
        const auto widths = j.at("widths").get<std::vector<std::size_t>>();
        const auto te = j.at("time_embed_dim").get<std::size_t>();
        if (widths.size() < 2 || widths.back() == 0 || widths.front() != widths.back() + te) {
            throw FormatError("checkpoint widths inconsistent with time_embed_dim");
        }
        NetConfig cfg{widths.back(), std::vector<std::size_t>(widths.begin() + 1, widths.end() - 1), te};
        ck.params = zero_params(cfg);
        ck.info.seed = j.at("seed").get<std::uint64_t>();
        ck.info.hyperparameters = j.at("hyperparameters").get<std::map<std::string, double>>();
        expected_crc = j.at("crc32").get<std::uint32_t>();
        count = j.at("param_count").get<std::size_t>();
        blob = manifest.parent_path() / j.at("blob").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("checkpoint manifest " + manifest.string() + ": " + e.what());
    } catch (const ArgError& e) {
        throw FormatError(std::string("checkpoint manifest: ") + e.what());
    }
    if (count != ck.params.param_count()) throw FormatError("checkpoint parameter count does not match widths");

    std::ifstream bin(blob, std::ios::binary);
    if (!bin) throw IoError("cannot open checkpoint blob " + blob.string());
    std::vector<char> chars((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
    if (chars.size() != count * 8) throw FormatError("checkpoint blob size does not match parameter count");
    const auto bytes = std::as_bytes(std::span(chars.data(), chars.size()));
    if (crc32(bytes) != expected_crc) throw FormatError("checkpoint blob CRC32 mismatch");

    std::size_t pos = 0;
    for (auto tensor : ck.params.tensors()) {
        for (double& v : tensor) {
            std::uint64_t bits = 0;
            for (int i = 0; i < 8; ++i) {
                bits |= static_cast<std::uint64_t>(std::to_integer<unsigned>(bytes[pos + i])) << (8 * i);
            }
            pos += 8;
            v = std::bit_cast<double>(bits);
        }
        if (!all_finite(tensor)) throw FormatError("checkpoint contains non-finite parameters");
    }
    return ck;
}

}  // namespace flowalign
