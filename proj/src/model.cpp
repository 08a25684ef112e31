#include "xmc/model.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "xmc/binio.hpp"

namespace xmc {

using nlohmann::json;

void save_model(const ScorerParams& p, const ModelMeta& meta, const std::string& path) {
    json manifest;
    manifest["format"] = "AXM1";
    manifest["encoder"] = p.encoder == EncoderKind::recurrent ? "recurrent" : "mean";
    manifest["vocab"] = p.vocab;
    manifest["embed_dim"] = p.embed_dim;
    manifest["hidden"] = p.hidden;
    std::vector<int64_t> fc_dims;
    for (const auto& w : p.fc) fc_dims.push_back(w.rows);
    manifest["fc"] = fc_dims;
    manifest["num_nodes"] = p.num_nodes();
    manifest["first_node"] = p.first_node;
    manifest["level"] = meta.level;
    manifest["tree_seed"] = meta.tree_seed;
    if (!meta.note.empty()) manifest["note"] = meta.note;
    json sections = json::array();
    visit_params(p, [&](const char* name, const std::vector<float>& v) {
        sections.push_back({{"name", name}, {"count", v.size()}});
    });
    manifest["sections"] = sections;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    binio::write_magic(out, "AXM1");
    const std::string text = manifest.dump();
    binio::write_pod<uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    visit_params(p, [&](const char*, const std::vector<float>& v) { binio::write_array(out, v); });
    if (!out) throw std::runtime_error("failed writing " + path);
}

ScorerParams load_model(const std::string& path, ModelMeta* meta) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    binio::expect_magic(in, "AXM1", path);
    const auto manifest_len = binio::read_pod<uint64_t>(in);
    std::string text(manifest_len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(manifest_len));
    if (!in) throw std::runtime_error(path + ": truncated manifest");

    json manifest;
    try {
        manifest = json::parse(text);
    } catch (const json::exception& e) {
        throw std::runtime_error(path + ": bad manifest: " + e.what());
    }
    if (manifest.value("format", "") != "AXM1")
        throw std::runtime_error(path + ": not a model file");

    const std::string enc = manifest.at("encoder").get<std::string>();
    std::vector<int64_t> fc_dims = manifest.at("fc").get<std::vector<int64_t>>();
    ScorerParams p = make_scorer<float>(
        enc == "mean" ? EncoderKind::mean : EncoderKind::recurrent,
        manifest.at("vocab").get<int64_t>(), manifest.at("embed_dim").get<int64_t>(),
        manifest.at("hidden").get<int64_t>(), fc_dims, manifest.at("num_nodes").get<int64_t>(),
        manifest.at("first_node").get<int64_t>(), 0);
    p.level = manifest.at("level").get<int64_t>();

    size_t idx = 0;
    const auto& sections = manifest.at("sections");
    visit_params(p, [&](const char* name, std::vector<float>& v) {
        if (idx >= sections.size())
            throw std::runtime_error(path + ": manifest lists too few sections");
        const auto& sec = sections[idx++];
        if (sec.at("name").get<std::string>() != name ||
            sec.at("count").get<size_t>() != v.size())
            throw std::runtime_error(path + ": section mismatch at " + std::string(name));
        binio::read_array(in, v, v.size());
    });
    if (idx != sections.size()) throw std::runtime_error(path + ": extra sections in manifest");

    if (meta) {
        meta->level = manifest.at("level").get<int64_t>();
        meta->tree_seed = manifest.at("tree_seed").get<uint64_t>();
        meta->note = manifest.value("note", "");
    }
    return p;
}

} // namespace xmc
