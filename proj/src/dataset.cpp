#include "retmil/dataset.hpp"

#include <fstream>
#include <set>

#include "retmil/error.hpp"
#include "retmil/features_io.hpp"

namespace retmil {

using nlohmann::json;

std::string to_string(Split split) {
    switch (split) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "train";
}

Split parse_split(const std::string& name) {
    if (name == "train") return Split::train;
    if (name == "val") return Split::val;
    if (name == "test") return Split::test;
    throw InputError("unknown split '" + name + "' (expected train, val or test)");
}

std::filesystem::path Manifest::resolve(const ManifestEntry& entry) const {
    return entry.path.is_absolute() ? entry.path : base_dir / entry.path;
}

std::size_t Manifest::count(Split split) const {
    std::size_t n = 0;
    for (const auto& e : entries) n += e.split == split ? 1 : 0;
    return n;
}

namespace {

void reject_unknown(const json& object, const std::set<std::string>& allowed, const std::string& where) {
    if (!object.is_object()) throw FormatError(where + " must be a JSON object");
    for (const auto& item : object.items()) {
        if (!allowed.count(item.key())) throw FormatError(where + ": unknown key '" + item.key() + "'");
    }
}

template <typename V>
V required(const json& object, const char* key, const std::string& where) {
    if (!object.contains(key)) throw FormatError(where + ": missing key '" + key + "'");
    try {
        return object.at(key).get<V>();
    } catch (const json::exception&) {
        throw FormatError(where + ": key '" + key + "' has the wrong type");
    }
}

}  // namespace

Manifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError("manifest " + path.string() + " is not valid JSON: " + e.what());
    }
    const std::string where = "manifest " + path.string();
    reject_unknown(doc, {"version", "num_classes", "d", "entries", "generator"}, where);
    if (doc.contains("version") && doc.at("version") != 1) throw FormatError(where + ": unsupported version");
    Manifest m;
    m.num_classes = required<std::size_t>(doc, "num_classes", where);
    m.d = required<std::size_t>(doc, "d", where);
    if (doc.contains("generator")) m.generator = doc.at("generator");
    m.base_dir = path.parent_path();
    const json entries = required<json>(doc, "entries", where);
    if (!entries.is_array()) throw FormatError(where + ": 'entries' must be an array");
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const std::string at = where + " entry " + std::to_string(i);
        const json& e = entries[i];
        reject_unknown(e, {"id", "path", "label", "split"}, at);
        ManifestEntry entry;
        entry.path = required<std::string>(e, "path", at);
        entry.id = e.contains("id") ? required<std::string>(e, "id", at) : entry.path.stem().string();
        entry.label = required<std::size_t>(e, "label", at);
        try {
            entry.split = parse_split(required<std::string>(e, "split", at));
        } catch (const InputError& err) {
            throw FormatError(at + ": " + err.what());
        }
        m.entries.push_back(std::move(entry));
    }
    return m;
}

void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
    json doc;
    doc["version"] = 1;
    doc["num_classes"] = manifest.num_classes;
    doc["d"] = manifest.d;
    json entries = json::array();
    for (const auto& e : manifest.entries) {
        entries.push_back({{"id", e.id}, {"path", e.path.generic_string()}, {"label", e.label}, {"split", to_string(e.split)}});
    }
    doc["entries"] = std::move(entries);
    if (manifest.generator) doc["generator"] = *manifest.generator;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write manifest " + path.string());
    out << doc.dump(2) << '\n';
    if (!out) throw IoError("short write to " + path.string());
}

void validate_manifest(const Manifest& manifest, bool require_all_splits) {
    if (manifest.num_classes < 2) throw InputError("manifest: num_classes must be at least 2");
    if (manifest.d == 0) throw InputError("manifest: d must be positive");
    for (const auto& e : manifest.entries) {
        if (e.label >= manifest.num_classes) {
            throw InputError("manifest: entry '" + e.id + "' has label " + std::to_string(e.label) + " >= " +
                             std::to_string(manifest.num_classes));
        }
        const auto file = manifest.resolve(e);
        if (!std::filesystem::exists(file)) throw InputError("manifest: missing feature file " + file.string());
        const auto header = read_feature_header(file);
        if (header.dim != manifest.d) {
            throw InputError("manifest: " + file.string() + " has d=" + std::to_string(header.dim) + ", expected " +
                             std::to_string(manifest.d));
        }
    }
    if (require_all_splits) {
        for (Split s : {Split::train, Split::val, Split::test}) {
            if (manifest.count(s) == 0) throw InputError("manifest: split '" + to_string(s) + "' is empty");
        }
    }
}

template <typename T>
std::vector<BagRecord<T>> load_split(const Manifest& manifest, Split split) {
    std::vector<BagRecord<T>> out;
    for (const auto& e : manifest.entries) {
        if (e.split != split) continue;
        if (e.label >= manifest.num_classes) throw InputError("manifest: entry '" + e.id + "' label out of range");
        auto features = read_features<T>(manifest.resolve(e));
        if (features.dim() != manifest.d) throw InputError("manifest: entry '" + e.id + "' has the wrong width");
        out.push_back({e.id, std::move(features), e.label});
    }
    return out;
}

template std::vector<BagRecord<float>> load_split<float>(const Manifest&, Split);
template std::vector<BagRecord<double>> load_split<double>(const Manifest&, Split);

}  // namespace retmil
