#include "retmil/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <vector>

#include "retmil/error.hpp"
#include "retmil/run_config.hpp"

namespace retmil {

using nlohmann::json;

namespace {

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFFu));
}

class ByteReader {
public:
    ByteReader(std::vector<unsigned char> bytes, std::string name) : bytes_(std::move(bytes)), name_(std::move(name)) {}

    std::uint32_t u32() {
        need(4);
        const unsigned char* p = bytes_.data() + pos_;
        pos_ += 4;
        return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
               (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
    }

    std::string text(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }

    std::size_t offset() const { return pos_; }
    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) {
            throw FormatError(name_ + ": truncated at offset " + std::to_string(pos_));
        }
    }

    std::vector<unsigned char> bytes_;
    std::string name_;
    std::size_t pos_ = 0;
};

}  // namespace

std::filesystem::path checkpoint_sidecar(const std::filesystem::path& path) {
    return std::filesystem::path(path.string() + ".json");
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const RetMILModel<T>& model, const json& extra) {
    std::vector<unsigned char> out{'R', 'M', 'C', 'K'};
    put_u32(out, kCheckpointVersion);
    put_u32(out, static_cast<std::uint32_t>(model.params().size()));
    for (const auto& [name, p] : model.params()) {
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out.insert(out.end(), name.begin(), name.end());
        put_u32(out, static_cast<std::uint32_t>(p.rank()));
        for (std::size_t d : p.shape()) put_u32(out, static_cast<std::uint32_t>(d));
        for (T v : p.values()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
    {
        std::ofstream file(path, std::ios::binary | std::ios::trunc);
        if (!file) throw IoError("cannot write checkpoint " + path.string());
        file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
        if (!file) throw IoError("short write to " + path.string());
    }
    json side = {{"format", "retmil-checkpoint"}, {"version", kCheckpointVersion}, {"model", to_json(model.config())}};
    for (const auto& item : extra.items()) side[item.key()] = item.value();
    std::ofstream file(checkpoint_sidecar(path), std::ios::trunc);
    if (!file) throw IoError("cannot write " + checkpoint_sidecar(path).string());
    file << side.dump(2) << '\n';
}

ModelConfig read_checkpoint_config(const std::filesystem::path& path) {
    const auto side_path = checkpoint_sidecar(path);
    std::ifstream in(side_path);
    if (!in) throw IoError("cannot open checkpoint sidecar " + side_path.string());
    json side;
    try {
        side = json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError(side_path.string() + " is not valid JSON: " + e.what());
    }
    if (!side.is_object() || side.value("format", "") != "retmil-checkpoint" || !side.contains("model")) {
        throw FormatError(side_path.string() + " is not a checkpoint sidecar");
    }
    return model_config_from_json(side.at("model"));
}

template <typename T>
RetMILModel<T> load_checkpoint(const std::filesystem::path& path) {
    auto model = RetMILModel<T>::create(read_checkpoint_config(path), 0);
    std::ifstream file(path, std::ios::binary);
    if (!file) throw IoError("cannot open checkpoint " + path.string());
    ByteReader in({std::istreambuf_iterator<char>(file), std::istreambuf_iterator<char>()}, path.string());
    if (in.text(4) != "RMCK") throw FormatError(path.string() + ": bad magic at offset 0, expected \"RMCK\"");
    if (in.u32() != kCheckpointVersion) throw FormatError(path.string() + ": unsupported version at offset 4");
    const std::uint32_t count = in.u32();
    if (count != model.params().size()) {
        throw FormatError(path.string() + ": holds " + std::to_string(count) + " parameters, model has " +
                          std::to_string(model.params().size()));
    }
    typename ParamStore<T>::Snapshot values;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::size_t at = in.offset();
        const std::string name = in.text(in.u32());
        if (!model.params().contains(name)) {
            throw FormatError(path.string() + ": unknown parameter '" + name + "' at offset " + std::to_string(at));
        }
        const auto& target = model.params().get(name);
        Shape shape(in.u32());
        for (auto& d : shape) d = in.u32();
        if (shape != target.shape()) {
            throw FormatError(path.string() + ": parameter '" + name + "' has shape " + shape_str(shape) +
                              ", expected " + shape_str(target.shape()));
        }
        std::vector<T> v(target.numel());
        for (auto& x : v) x = static_cast<T>(std::bit_cast<float>(in.u32()));
        values.emplace(name, std::move(v));
    }
    if (!in.done()) throw FormatError(path.string() + ": trailing bytes at offset " + std::to_string(in.offset()));
    model.params().restore(values);
    return model;
}

template void save_checkpoint<float>(const std::filesystem::path&, const RetMILModel<float>&, const json&);
template void save_checkpoint<double>(const std::filesystem::path&, const RetMILModel<double>&, const json&);
template RetMILModel<float> load_checkpoint<float>(const std::filesystem::path&);
template RetMILModel<double> load_checkpoint<double>(const std::filesystem::path&);

}  // namespace retmil
