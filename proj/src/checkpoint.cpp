// SPDX-License-Identifier: Apache-2.0
#include "mmpunc/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include "mmpunc/error.hpp"

namespace mmpunc {

namespace {

constexpr char kMagic[4] = {'U', 'P', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& buf, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

struct Reader {
    const std::string& buf;
    const std::string& path;
    std::size_t off = 0;

    void need(std::size_t n) const {
        if (off + n > buf.size()) {
            throw FormatError("checkpoint " + path + ": truncated file");
        }
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[off + i])) << (8 * i);
        }
        off += 4;
        return v;
    }
    double f64() {
        need(8);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) {
            bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[off + i]))
                    << (8 * i);
        }
        off += 8;
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string str(std::size_t n) {
        need(n);
        std::string s = buf.substr(off, n);
        off += n;
        return s;
    }
};

void put_record(std::string& buf, const std::string& name,
                const std::vector<std::size_t>& shape, const std::vector<double>& payload) {
    put_u32(buf, static_cast<std::uint32_t>(name.size()));
    buf.append(name);
    put_u32(buf, static_cast<std::uint32_t>(shape.size()));
    for (std::size_t d : shape) put_u32(buf, static_cast<std::uint32_t>(d));
    for (double v : payload) put_f64(buf, v);
}

std::vector<double> encode_config(const ModelConfig& c) {
    return {static_cast<double>(c.vocab_size),     static_cast<double>(c.d_model),
            static_cast<double>(c.heads),          static_cast<double>(c.encoder_layers),
            static_cast<double>(c.fusion_layers),  static_cast<double>(c.ff_dim()),
            static_cast<double>(c.ve_len),         static_cast<double>(c.feat_dim),
            static_cast<double>(c.conv_kernel),    static_cast<double>(c.conv_stride),
            c.position_encoding ? 1.0 : 0.0,       c.dropout};
}

ModelConfig decode_config(const std::string& path, const std::vector<double>& v) {
    if (v.size() != 12) {
        throw FormatError("checkpoint " + path + ": config record has " +
                          std::to_string(v.size()) + " fields, expected 12");
    }
    ModelConfig c;
    c.vocab_size = static_cast<std::size_t>(v[0]);
    c.d_model = static_cast<std::size_t>(v[1]);
    c.heads = static_cast<std::size_t>(v[2]);
    c.encoder_layers = static_cast<std::size_t>(v[3]);
    c.fusion_layers = static_cast<std::size_t>(v[4]);
    c.d_ff = static_cast<std::size_t>(v[5]);
    c.ve_len = static_cast<std::size_t>(v[6]);
    c.feat_dim = static_cast<std::size_t>(v[7]);
    c.conv_kernel = static_cast<std::size_t>(v[8]);
    c.conv_stride = static_cast<std::size_t>(v[9]);
    c.position_encoding = v[10] != 0.0;
    c.dropout = v[11];
    return c;
}

double seed_to_f64(std::uint64_t seed) {
    double v;
    std::memcpy(&v, &seed, 8);
    return v;
}

std::uint64_t seed_from_f64(double v) {
    std::uint64_t seed;
    std::memcpy(&seed, &v, 8);
    return seed;
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model, const AdamState& opt,
                     long step, std::uint64_t seed) {
    std::string buf;
    buf.append(kMagic, 4);
    put_u32(buf, kVersion);

    const auto& params = model.params().all();
    const std::uint32_t n_records =
        static_cast<std::uint32_t>(4 + params.size() + 2 * opt.slots.size());
    put_u32(buf, n_records);

    put_record(buf, "meta:config", {12}, encode_config(model.config()));
    put_record(buf, "meta:step", {1}, {static_cast<double>(step)});
    put_record(buf, "meta:seed", {1}, {seed_to_f64(seed)});
    put_record(buf, "meta:adam_t", {1}, {static_cast<double>(opt.t)});
    for (const auto& [name, t] : params) {
        put_record(buf, "p:" + name, t.shape(), t.values());
    }
    for (const auto& [name, slot] : opt.slots) {
        put_record(buf, "m:" + name, {slot.m.size()}, slot.m);
        put_record(buf, "v:" + name, {slot.v.size()}, slot.v);
    }

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write checkpoint " + tmp);
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (!out) throw IoError("failed writing checkpoint " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw IoError("cannot move checkpoint into place at " + path);
    }
}

Checkpoint read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 12 || std::memcmp(buf.data(), kMagic, 4) != 0) {
        throw FormatError("checkpoint " + path + ": bad magic bytes");
    }
    Reader r{buf, path, 4};
    const std::uint32_t version = r.u32();
    if (version != kVersion) {
        throw FormatError("checkpoint " + path + ": unsupported version " +
                          std::to_string(version));
    }
    const std::uint32_t n_records = r.u32();

    Checkpoint cp;
    bool have_config = false, have_step = false, have_seed = false, have_adam_t = false;
    for (std::uint32_t rec = 0; rec < n_records; ++rec) {
        const std::uint32_t name_len = r.u32();
        const std::string name = r.str(name_len);
        const std::uint32_t rank = r.u32();
        std::vector<std::size_t> shape(rank);
        std::size_t numel = 1;
        for (std::uint32_t i = 0; i < rank; ++i) {
            shape[i] = r.u32();
            numel *= shape[i];
        }
        std::vector<double> payload(numel);
        for (double& v : payload) v = r.f64();

        if (name == "meta:config") {
            cp.config = decode_config(path, payload);
            have_config = true;
        } else if (name == "meta:step") {
            cp.step = static_cast<long>(payload.at(0));
            have_step = true;
        } else if (name == "meta:seed") {
            cp.seed = seed_from_f64(payload.at(0));
            have_seed = true;
        } else if (name == "meta:adam_t") {
            cp.adam_t = static_cast<long>(payload.at(0));
            have_adam_t = true;
        } else if (name.rfind("p:", 0) == 0) {
            cp.params.emplace(name.substr(2), Tensor::from(shape, std::move(payload)));
        } else if (name.rfind("m:", 0) == 0) {
            cp.adam_m.emplace(name.substr(2), std::move(payload));
        } else if (name.rfind("v:", 0) == 0) {
            cp.adam_v.emplace(name.substr(2), std::move(payload));
        } else {
            throw FormatError("checkpoint " + path + ": unknown record '" + name + "'");
        }
    }
    if (r.off != buf.size()) {
        throw FormatError("checkpoint " + path + ": trailing bytes after last record");
    }
    if (!have_config || !have_step || !have_seed || !have_adam_t) {
        throw FormatError("checkpoint " + path + ": missing metadata records");
    }
    return cp;
}

void apply_checkpoint(Model& model, AdamState& opt, const Checkpoint& cp) {
    for (auto& [name, param] : model.params().all()) {
        auto it = cp.params.find(name);
        if (it == cp.params.end()) {
            throw FormatError("checkpoint is missing parameter '" + name + "'");
        }
        if (it->second.shape() != param.shape()) {
            throw ShapeError("parameter '" + name + "': checkpoint shape " +
                             shape_str(it->second) + " does not match model " +
                             shape_str(param));
        }
        Tensor dst = param;
        dst.values() = it->second.values();
    }
    // Shapes can agree while semantics differ (head count, dropout, position
    // encoding), so the config record is still compared as a whole.
    if (!model.config().same_dims(cp.config)) {
        throw ConfigError("checkpoint dimensions do not match the model configuration");
    }
    opt.t = cp.adam_t;
    for (auto& [name, slot] : opt.slots) {
        auto mi = cp.adam_m.find(name);
        auto vi = cp.adam_v.find(name);
        if (mi == cp.adam_m.end() || vi == cp.adam_v.end()) {
            throw FormatError("checkpoint is missing optimizer state for '" + name + "'");
        }
        if (mi->second.size() != slot.m.size() || vi->second.size() != slot.v.size()) {
            throw ShapeError("optimizer state for '" + name +
                             "': checkpoint size does not match model");
        }
        slot.m = mi->second;
        slot.v = vi->second;
    }
}

Model load_model(const Checkpoint& cp, AdamState& opt) {
    Model model(cp.config, /*init_seed=*/0);
    opt = make_adam_state(model.params());
    apply_checkpoint(model, opt, cp);
    return model;
}

}  // namespace mmpunc
