#include "npf/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace npf {

namespace {

constexpr char kMagic[8] = {'N', 'P', 'F', 'C', 'K', 'P', 'T', '\n'};
constexpr uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr uint64_t kFnvPrime = 1099511628211ULL;

uint64_t fnv1a(const std::string& bytes) {
    uint64_t h = kFnvOffset;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= kFnvPrime;
    }
    return h;
}

template <typename T>
void put(std::string& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    if constexpr (sizeof(T) > 1) {
        // force little-endian byte order
        unsigned char bytes[sizeof(T)];
        std::memcpy(bytes, &value, sizeof(T));
        uint16_t probe = 1;
        if (*reinterpret_cast<unsigned char*>(&probe) != 1)
            for (size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
        out.append(reinterpret_cast<char*>(bytes), sizeof(T));
    } else {
        out.append(reinterpret_cast<char*>(&value), sizeof(T));
    }
}

class Reader {
  public:
    Reader(const std::string& buf, size_t at) : buf_(buf), at_(at) {}
    template <typename T>
    T get() {
        if (at_ + sizeof(T) > buf_.size()) throw std::runtime_error("checkpoint: truncated file");
        unsigned char bytes[sizeof(T)];
        std::memcpy(bytes, buf_.data() + at_, sizeof(T));
        uint16_t probe = 1;
        if (sizeof(T) > 1 && *reinterpret_cast<unsigned char*>(&probe) != 1)
            for (size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
        T value;
        std::memcpy(&value, bytes, sizeof(T));
        at_ += sizeof(T);
        return value;
    }
    std::string get_bytes(size_t n) {
        if (at_ + n > buf_.size()) throw std::runtime_error("checkpoint: truncated file");
        std::string s = buf_.substr(at_, n);
        at_ += n;
        return s;
    }
    size_t at() const { return at_; }

  private:
    const std::string& buf_;
    size_t at_;
};

}  // namespace

const CheckpointComponent* Checkpoint::find(const std::string& name) const {
    for (const auto& c : components)
        if (c.name == name) return &c;
    return nullptr;
}

void Checkpoint::save(const std::string& path) const {
    std::string payload;
    put<uint32_t>(payload, kVersion);
    put<uint32_t>(payload, static_cast<uint32_t>(components.size()));
    for (const auto& c : components) {
        put<uint32_t>(payload, static_cast<uint32_t>(c.name.size()));
        payload += c.name;
        put<uint32_t>(payload, static_cast<uint32_t>(c.config_json.size()));
        payload += c.config_json;
        put<uint64_t>(payload, c.train_steps);
        put<uint64_t>(payload, static_cast<uint64_t>(c.params.size()));
        for (double p : c.params) put<double>(payload, p);
    }

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
    out.write(kMagic, sizeof(kMagic));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    std::string tail;
    put<uint64_t>(tail, fnv1a(payload));
    out.write(tail.data(), static_cast<std::streamsize>(tail.size()));
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < sizeof(kMagic) + 8 + 8 || std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("checkpoint: not a checkpoint file: " + path);

    const std::string payload = buf.substr(sizeof(kMagic), buf.size() - sizeof(kMagic) - 8);
    Reader tail(buf, buf.size() - 8);
    const uint64_t stored = tail.get<uint64_t>();
    if (stored != fnv1a(payload))
        throw std::runtime_error("checkpoint: checksum mismatch, refusing " + path);

    Reader r(payload, 0);
    const uint32_t version = r.get<uint32_t>();
    if (version != kVersion)
        throw std::runtime_error("checkpoint: version " + std::to_string(version) +
                                 " not supported (expected " + std::to_string(kVersion) + ")");
    Checkpoint ck;
    const uint32_t count = r.get<uint32_t>();
    for (uint32_t i = 0; i < count; ++i) {
        CheckpointComponent c;
        c.name = r.get_bytes(r.get<uint32_t>());
        c.config_json = r.get_bytes(r.get<uint32_t>());
        c.train_steps = r.get<uint64_t>();
        const uint64_t n = r.get<uint64_t>();
        c.params.resize(n);
        for (uint64_t k = 0; k < n; ++k) c.params[k] = r.get<double>();
        ck.components.push_back(std::move(c));
    }
    return ck;
}

namespace {

using nlohmann::json;

json icnn_config_json(const IcnnConfig& cfg) {
    return json{{"type", "icnn"},
                {"input_dim", cfg.input_dim},
                {"width", cfg.width},
                {"depth", cfg.depth},
                {"quad_rank", cfg.quad_rank},
                {"final_quad_rank", cfg.final_quad_rank},
                {"iso_quad", cfg.iso_quad},
                {"activation", activation_name(cfg.activation)},
                {"delta_min", cfg.delta_min}};
}

json mlp_config_json(const MlpConfig& cfg) {
    return json{{"type", "mlp"},
                {"input_dim", cfg.input_dim},
                {"output_dim", cfg.output_dim},
                {"hidden", cfg.hidden},
                {"activation", activation_name(cfg.activation)}};
}

}  // namespace

CheckpointComponent component_from_icnn(const std::string& name, const IcnnParams& params,
                                        uint64_t train_steps) {
    CheckpointComponent c;
    c.name = name;
    c.config_json = icnn_config_json(params.cfg).dump();
    c.train_steps = train_steps;
    c.params = params.theta;
    return c;
}

IcnnParams icnn_from_component(const CheckpointComponent& c) {
    json j = json::parse(c.config_json);
    if (j.at("type") != "icnn")
        throw std::runtime_error("checkpoint: component '" + c.name + "' is not an icnn");
    IcnnConfig cfg;
    cfg.input_dim = j.at("input_dim");
    cfg.width = j.at("width");
    cfg.depth = j.at("depth");
    cfg.quad_rank = j.at("quad_rank");
    cfg.final_quad_rank = j.at("final_quad_rank");
    cfg.iso_quad = j.at("iso_quad");
    cfg.activation = activation_from_name(j.at("activation"));
    cfg.delta_min = j.at("delta_min");
    IcnnParams p;
    p.cfg = cfg;
    p.layout = IcnnLayout::build(cfg);
    if (static_cast<long>(c.params.size()) != p.layout.total)
        throw std::runtime_error("checkpoint: parameter count mismatch for '" + c.name + "'");
    p.theta = c.params;
    return p;
}

CheckpointComponent component_from_mlp(const std::string& name, const MlpParams& params,
                                       uint64_t train_steps) {
    CheckpointComponent c;
    c.name = name;
    c.config_json = mlp_config_json(params.cfg).dump();
    c.train_steps = train_steps;
    c.params = params.theta;
    return c;
}

MlpParams mlp_from_component(const CheckpointComponent& c) {
    json j = json::parse(c.config_json);
    if (j.at("type") != "mlp")
        throw std::runtime_error("checkpoint: component '" + c.name + "' is not an mlp");
    MlpConfig cfg;
    cfg.input_dim = j.at("input_dim");
    cfg.output_dim = j.at("output_dim");
    cfg.hidden = j.at("hidden").get<std::vector<int>>();
    cfg.activation = activation_from_name(j.at("activation"));
    MlpParams p;
    p.cfg = cfg;
    p.layout = MlpLayout::build(cfg);
    if (static_cast<long>(c.params.size()) != p.layout.total)
        throw std::runtime_error("checkpoint: parameter count mismatch for '" + c.name + "'");
    p.theta = c.params;
    return p;
}

CheckpointComponent component_from_drift(const std::string& name, const DriftNet& drift,
                                         uint64_t train_steps) {
    return component_from_mlp(name, drift.net, train_steps);
}

DriftNet drift_from_component(const CheckpointComponent& c) {
    DriftNet d;
    d.net = mlp_from_component(c);
    if (d.net.cfg.input_dim != 2 * d.net.cfg.output_dim + 1)
        throw std::runtime_error("checkpoint: drift component must map (2d + 1) -> d");
    d.dim = d.net.cfg.output_dim;
    return d;
}

}  // namespace npf
