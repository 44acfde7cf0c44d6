#include "retmil/features_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "retmil/error.hpp"

namespace retmil {

namespace {

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open feature file " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

FeatureHeader parse_header(const std::vector<unsigned char>& bytes, const std::filesystem::path& path) {
    const std::string where = path.string() + ": ";
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kFeatureMagic, 4) != 0) {
        throw FormatError(where + "bad magic at offset 0, expected \"RMIL\"");
    }
    if (bytes.size() < kFeatureHeaderBytes) {
        throw FormatError(where + "truncated header at offset " + std::to_string(bytes.size()) + ", need " +
                          std::to_string(kFeatureHeaderBytes) + " bytes");
    }
    FeatureHeader h;
    h.version = get_u32(bytes.data() + 4);
    h.tokens = get_u32(bytes.data() + 8);
    h.dim = get_u32(bytes.data() + 12);
    if (h.version != kFeatureVersion) {
        throw FormatError(where + "unsupported version " + std::to_string(h.version) + " at offset 4");
    }
    if (h.tokens == 0) throw FormatError(where + "N must be positive (offset 8)");
    if (h.dim == 0) throw FormatError(where + "d must be positive (offset 12)");
    return h;
}

}  // namespace

FeatureHeader read_feature_header(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open feature file " + path.string());
    std::vector<unsigned char> bytes(kFeatureHeaderBytes);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    bytes.resize(static_cast<std::size_t>(in.gcount()));
    return parse_header(bytes, path);
}

template <typename T>
void write_features(const std::filesystem::path& path, const FeatureSequence<T>& seq) {
    static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);
    std::vector<unsigned char> out;
    out.reserve(kFeatureHeaderBytes + seq.tokens() * seq.dim() * 4);
    out.insert(out.end(), kFeatureMagic, kFeatureMagic + 4);
    put_u32(out, kFeatureVersion);
    put_u32(out, static_cast<std::uint32_t>(seq.tokens()));
    put_u32(out, static_cast<std::uint32_t>(seq.dim()));
    for (T v : seq.features().values()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw IoError("cannot write feature file " + path.string());
    file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!file) throw IoError("short write to " + path.string());
}

template <typename T>
FeatureSequence<T> read_features(const std::filesystem::path& path) {
    const auto bytes = slurp(path);
    const FeatureHeader h = parse_header(bytes, path);
    const std::size_t count = static_cast<std::size_t>(h.tokens) * h.dim;
    const std::size_t expected = kFeatureHeaderBytes + count * 4;
    if (bytes.size() < expected) {
        throw FormatError(path.string() + ": truncated payload at offset " + std::to_string(bytes.size()) +
                          ", expected " + std::to_string(expected) + " bytes");
    }
    if (bytes.size() > expected) {
        throw FormatError(path.string() + ": trailing bytes at offset " + std::to_string(expected));
    }
    Buffer<T> values(count);
    for (std::size_t i = 0; i < count; ++i) {
        values[i] = static_cast<T>(std::bit_cast<float>(get_u32(bytes.data() + kFeatureHeaderBytes + 4 * i)));
    }
    Tensor<T> t = Tensor<T>::from({h.tokens, h.dim}, std::move(values));
    try {
        return FeatureSequence<T>(std::move(t));
    } catch (const InputError& e) {
        throw FormatError(path.string() + ": " + e.what());
    } catch (const NumericError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

template void write_features<float>(const std::filesystem::path&, const FeatureSequence<float>&);
template void write_features<double>(const std::filesystem::path&, const FeatureSequence<double>&);
template FeatureSequence<float> read_features<float>(const std::filesystem::path&);
template FeatureSequence<double> read_features<double>(const std::filesystem::path&);

}  // namespace retmil
