#include "melpc/checkpoint.hpp"

#include <sstream>

#include "melpc/io_util.hpp"

namespace melpc::model {

namespace {
constexpr uint16_t kCheckpointVersion = 1;
}

uint64_t fnv1a64(const std::string& text) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

namespace {

void put_tensor(std::string& out, const std::string& name, const nn::Shape& shape,
                const std::vector<float>& data) {
    put_u32(out, static_cast<uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<uint32_t>(shape.rank));
    for (int i = 0; i < shape.rank; ++i) put_u32(out, static_cast<uint32_t>(shape.d[i]));
    for (float v : data) put_f32(out, v);
}

struct RawTensor {
    std::string name;
    nn::Shape shape;
    std::vector<float> data;
};

RawTensor get_tensor(ByteReader& r) {
    RawTensor t;
    const uint32_t name_len = r.u32();
    if (name_len > 4096) throw DataError("unreasonable tensor name length");
    t.name = r.bytes(name_len);
    const uint32_t rank = r.u32();
    if (rank < 1 || rank > 4) throw DataError("tensor " + t.name + ": bad rank");
    t.shape.rank = static_cast<int>(rank);
    for (uint32_t i = 0; i < rank; ++i) t.shape.d[i] = static_cast<int>(r.u32());
    const int64_t n = t.shape.numel();
    if (n <= 0 || n > (int64_t(1) << 31)) throw DataError("tensor " + t.name + ": bad dims");
    t.data.resize(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) t.data[static_cast<size_t>(i)] = r.f32();
    return t;
}

}  // namespace

void save_checkpoint(const std::string& path, const PredNet& net, bool include_moments) {
    std::ostringstream blob;
    blob << net.config().serialize();
    blob << "adam_step=" << net.adam_step_count() << "\n";
    blob << "has_moments=" << (include_moments ? 1 : 0) << "\n";
    std::string cfg_text = blob.str();
    cfg_text += "config_hash=" + std::to_string(fnv1a64(cfg_text)) + "\n";

    std::string out;
    out += "PNCK";
    put_u16(out, kCheckpointVersion);
    put_u32(out, static_cast<uint32_t>(cfg_text.size()));
    out += cfg_text;
    for (const auto& e : net.params()) {
        put_tensor(out, e.name, e.shape, e.value);
        if (include_moments) {
            put_tensor(out, "opt.m." + e.name, e.shape, e.m);
            put_tensor(out, "opt.v." + e.name, e.shape, e.v);
        }
    }
    atomic_write_file(path, out);
}

PredNet load_checkpoint(const std::string& path) {
    std::string data = read_file(path);
    ByteReader r(data);
    try {
        if (r.bytes(4) != "PNCK") throw DataError("bad magic, not a checkpoint file");
        const uint16_t version = r.u16();
        if (version != kCheckpointVersion)
            throw DataError("unsupported checkpoint version " + std::to_string(version));
        const uint32_t cfg_len = r.u32();
        const std::string cfg_text = r.bytes(cfg_len);

        int64_t adam_step = 0;
        bool has_moments = false;
        std::string model_cfg_text;
        uint64_t stored_hash = 0;
        std::string hashed_region;
        {
            std::istringstream in(cfg_text);
            std::string line;
            while (std::getline(in, line)) {
                if (line.rfind("adam_step=", 0) == 0) {
                    adam_step = std::stoll(line.substr(10));
                    hashed_region += line + "\n";
                } else if (line.rfind("has_moments=", 0) == 0) {
                    has_moments = line.substr(12) == "1";
                    hashed_region += line + "\n";
                } else if (line.rfind("config_hash=", 0) == 0) {
                    stored_hash = std::stoull(line.substr(12));
                } else {
                    model_cfg_text += line + "\n";
                    hashed_region += line + "\n";
                }
            }
        }
        if (stored_hash != fnv1a64(hashed_region))
            throw DataError("config hash mismatch (corrupt or edited checkpoint)");

        PredNet net(PredNetConfig::parse(model_cfg_text));
        net.set_adam_step_count(adam_step);

        size_t expected = net.params().size() * (has_moments ? 3 : 1);
        for (size_t i = 0; i < expected; ++i) {
            RawTensor t = get_tensor(r);
            std::string base = t.name;
            int kind = 0;  // 0 value, 1 m, 2 v
            if (base.rfind("opt.m.", 0) == 0) {
                base = base.substr(6);
                kind = 1;
            } else if (base.rfind("opt.v.", 0) == 0) {
                base = base.substr(6);
                kind = 2;
            }
            ParamEntry<float>* e = net.find_param(base);
            if (!e) throw DataError("tensor " + t.name + ": not part of this model config");
            if (e->shape != t.shape)
                throw DataError("tensor " + t.name + ": expected shape " + e->shape.str() +
                                ", file has " + t.shape.str());
            if (kind == 0)
                e->value = std::move(t.data);
            else if (kind == 1)
                e->m = std::move(t.data);
            else
                e->v = std::move(t.data);
        }
        if (r.remaining() != 0) throw DataError("trailing bytes after last tensor");
        return net;
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
}

}  // namespace melpc::model
