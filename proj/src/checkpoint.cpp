#include "medfuse/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace medfuse {

namespace {

constexpr char kMagic[4] = {'M', 'E', 'D', 'R'};

void put_u32_le(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64_le(std::string& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

double get_f64_le(const unsigned char* p) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

}  // namespace

void save_container(const std::string& path, CheckpointType type, nlohmann::json header,
                    const std::vector<std::pair<std::string, const Tensor*>>& arrays) {
    nlohmann::json arr_meta = nlohmann::json::array();
    std::size_t offset = 0;
    for (const auto& [name, t] : arrays) {
        arr_meta.push_back({{"name", name}, {"shape", t->shape()}, {"offset", offset}});
        offset += t->size() * 8;
    }
    header["arrays"] = std::move(arr_meta);
    const std::string header_str = header.dump();

    std::string out;
    out.append(kMagic, 4);
    out.push_back(static_cast<char>(type));
    put_u32_le(out, static_cast<std::uint32_t>(header_str.size()));
    out += header_str;
    for (const auto& [name, t] : arrays) {
        for (std::size_t i = 0; i < t->size(); ++i) put_f64_le(out, (*t)[i]);
    }

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("write failed: " + path);
}

Container load_container(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    if (bytes.size() < 9) {
        throw CheckpointError(CheckpointError::Kind::truncated, path + ": truncated checkpoint");
    }
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw CheckpointError(CheckpointError::Kind::bad_magic, path + ": bad magic");
    }
    const auto tag = static_cast<std::uint8_t>(bytes[4]);
    if (tag != 0x01 && tag != 0x02 && tag != 0x03) {
        throw CheckpointError(CheckpointError::Kind::bad_version,
                              path + ": unsupported checkpoint type/version " +
                                  std::to_string(tag));
    }
    std::uint32_t header_len = 0;
    for (int i = 0; i < 4; ++i) {
        header_len |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[5 + i]))
                      << (8 * i);
    }
    if (bytes.size() < 9 + static_cast<std::size_t>(header_len)) {
        throw CheckpointError(CheckpointError::Kind::truncated, path + ": truncated header");
    }

    Container c;
    c.type = static_cast<CheckpointType>(tag);
    try {
        c.header = nlohmann::json::parse(bytes.substr(9, header_len));
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(CheckpointError::Kind::bad_header,
                              path + ": unparsable header: " + e.what());
    }

    const std::size_t payload_start = 9 + header_len;
    const auto* payload = reinterpret_cast<const unsigned char*>(bytes.data()) + payload_start;
    const std::size_t payload_size = bytes.size() - payload_start;
    for (const auto& meta : c.header.at("arrays")) {
        const std::vector<std::size_t> shape = meta.at("shape").get<std::vector<std::size_t>>();
        const std::size_t offset = meta.at("offset").get<std::size_t>();
        std::size_t n = 1;
        for (std::size_t e : shape) n *= e;
        if (offset + n * 8 > payload_size) {
            throw CheckpointError(CheckpointError::Kind::truncated,
                                  path + ": truncated array " + meta.at("name").get<std::string>());
        }
        Tensor t(shape);
        for (std::size_t i = 0; i < n; ++i) t[i] = get_f64_le(payload + offset + i * 8);
        c.arrays.emplace_back(meta.at("name").get<std::string>(), std::move(t));
    }
    return c;
}

nlohmann::json config_to_json(const ModelConfig& cfg) {
    return {{"encoders", cfg.encoders},
            {"decoders", cfg.decoders},
            {"t_enc", cfg.t_enc},
            {"t_dec", cfg.t_dec},
            {"f_enc", cfg.f_enc},
            {"f_dec", cfg.f_dec},
            {"hidden", cfg.hidden},
            {"att_hidden", cfg.att_hidden},
            {"mean_scale", cfg.mean_scale},
            {"share_attention", cfg.share_attention},
            {"teacher_forcing", cfg.teacher_forcing}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    cfg.encoders = j.at("encoders").get<std::size_t>();
    cfg.decoders = j.at("decoders").get<std::size_t>();
    cfg.t_enc = j.at("t_enc").get<std::size_t>();
    cfg.t_dec = j.at("t_dec").get<std::size_t>();
    cfg.f_enc = j.at("f_enc").get<std::size_t>();
    cfg.f_dec = j.at("f_dec").get<std::size_t>();
    cfg.hidden = j.at("hidden").get<std::size_t>();
    cfg.att_hidden = j.at("att_hidden").get<std::size_t>();
    cfg.mean_scale = j.at("mean_scale").get<bool>();
    cfg.share_attention = j.at("share_attention").get<bool>();
    cfg.teacher_forcing = j.at("teacher_forcing").get<bool>();
    cfg.validate();
    return cfg;
}

void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                     const ParameterStore& params, std::uint64_t seed) {
    std::vector<std::pair<std::string, const Tensor*>> arrays;
    params.for_each_array(
        [&](const std::string& name, const Tensor& t) { arrays.emplace_back(name, &t); });
    nlohmann::json header = {{"config", config_to_json(cfg)}, {"seed", seed}};
    save_container(path, CheckpointType::network, std::move(header), arrays);
}

std::pair<ModelConfig, ParameterStore> load_checkpoint(const std::string& path) {
    Container c = load_container(path);
    if (c.type != CheckpointType::network) {
        throw CheckpointError(CheckpointError::Kind::bad_version,
                              path + ": not a network checkpoint");
    }
    ModelConfig cfg = config_from_json(c.header.at("config"));
    ParameterStore params(cfg);
    std::size_t idx = 0;
    params.for_each_array([&](const std::string& name, Tensor& t) {
        if (idx >= c.arrays.size() || c.arrays[idx].first != name ||
            !c.arrays[idx].second.same_shape(t)) {
            throw CheckpointError(CheckpointError::Kind::bad_header,
                                  path + ": array list does not match config, expected " + name);
        }
        t = std::move(c.arrays[idx].second);
        ++idx;
    });
    return {cfg, std::move(params)};
}

}  // namespace medfuse
