#include "cmpx/neural/models.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace cmpx {

Tensor voxel_tensor(const VoxelGrid& grid)
{
    constexpr int R = VoxelGrid::kResolution;
    Tensor t({1, R, R, R});
    for (int i = 0; i < R; ++i)
        for (int j = 0; j < R; ++j)
            for (int k = 0; k < R; ++k)
                t.data[(static_cast<std::size_t>(k) * R + i) * R + j] = grid.occupied(i, j, k) ? 1.0 : 0.0;
    return t;
}

Network make_scene_encoder()
{
    constexpr int R = VoxelGrid::kResolution;
    return Network({R, R, R}, {
                                  LayerSpec::conv2d(R, 16, 5, 2),
                                  LayerSpec::prelu(),
                                  LayerSpec::conv2d(16, 8, 3, 1),
                                  LayerSpec::prelu(),
                                  LayerSpec::maxpool2d(2),
                                  LayerSpec::flatten(),
                                  LayerSpec::linear(512, 128),
                                  LayerSpec::prelu(),
                                  LayerSpec::linear(128, kLatentSize),
                              });
}

Network make_generator_trunk(int config_dim, double dropout)
{
    const int widths[] = {kLatentSize + 2 * config_dim, 896, 512, 256, 128};
    std::vector<LayerSpec> layers;
    for (int i = 0; i < 4; ++i) {
        layers.push_back(LayerSpec::linear(widths[i], widths[i + 1]));
        layers.push_back(LayerSpec::prelu());
        layers.push_back(LayerSpec::dropout(dropout));
    }
    layers.push_back(LayerSpec::linear(128, 64));
    layers.push_back(LayerSpec::prelu());
    layers.push_back(LayerSpec::linear(64, config_dim));
    return Network({widths[0]}, std::move(layers));
}

Network make_discriminator(int config_dim)
{
    const int in = kLatentSize + config_dim;
    return Network({in}, {
                             LayerSpec::linear(in, 256),
                             LayerSpec::prelu(),
                             LayerSpec::linear(256, 256),
                             LayerSpec::prelu(),
                             LayerSpec::linear(256, 1),
                         });
}

GeneratorModel GeneratorModel::create(int config_dim, Rng& rng)
{
    GeneratorModel m{make_scene_encoder(), make_generator_trunk(config_dim)};
    m.encoder.init(rng);
    m.trunk.init(rng);
    return m;
}

Tensor GeneratorModel::encode(const VoxelGrid& grid) const
{
    return encoder.forward(voxel_tensor(grid), Mode::DeterministicInfer);
}

DiscriminatorModel DiscriminatorModel::create(int config_dim, Rng& rng)
{
    DiscriminatorModel m{make_discriminator(config_dim)};
    m.mlp.init(rng);
    return m;
}

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'C', 'M', 'P', 'X', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_u64(std::ostream& out, std::uint64_t v)
{
    unsigned char b[8];
    for (int i = 0; i < 8; ++i)
        b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& in)
{
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in)
        throw IoError("checkpoint truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

// A named slice of some flat buffer.
struct ArrayRef {
    std::string name;
    std::size_t offset;
    std::size_t length;
};

std::vector<ArrayRef> layer_arrays(const Network& net, const std::string& prefix)
{
    std::vector<ArrayRef> out;
    for (std::size_t i = 0; i < net.layers().size(); ++i) {
        const LayerSpec& L = net.layers()[i];
        const std::size_t off = net.param_offset(i);
        const std::string base = prefix + "." + std::to_string(i);
        if (L.kind == LayerKind::Linear || L.kind == LayerKind::Conv2d) {
            const std::size_t nb = static_cast<std::size_t>(L.out);
            const std::size_t nw = net.layer_param_count(i) - nb;
            out.push_back({base + ".weight", off, nw});
            out.push_back({base + ".bias", off + nw, nb});
        } else if (L.kind == LayerKind::PReLU) {
            out.push_back({base + ".slope", off, 1});
        }
    }
    return out;
}

json network_json(const std::string& name, const Network& net)
{
    json layers = json::array();
    for (std::size_t i = 0; i < net.layers().size(); ++i) {
        const LayerSpec& L = net.layers()[i];
        json l{{"kind", to_string(L.kind)}, {"output_shape", net.shape_at(i + 1)}};
        switch (L.kind) {
        case LayerKind::Linear:
            l["in"] = L.in;
            l["out"] = L.out;
            break;
        case LayerKind::Conv2d:
            l["in"] = L.in;
            l["out"] = L.out;
            l["kernel"] = L.kernel;
            l["stride"] = L.stride;
            break;
        case LayerKind::MaxPool2d:
            l["kernel"] = L.kernel;
            break;
        case LayerKind::Dropout:
            l["drop"] = L.drop;
            break;
        default:
            break;
        }
        layers.push_back(l);
    }
    return {{"name", name}, {"input_shape", net.input_shape()}, {"layers", layers}};
}

Network network_from_json(const json& j)
{
    std::vector<LayerSpec> layers;
    for (const json& l : j.at("layers")) {
        LayerSpec s;
        s.kind = parse_layer_kind(l.at("kind").get<std::string>());
        s.in = l.value("in", 0);
        s.out = l.value("out", 0);
        s.kernel = l.value("kernel", 0);
        s.stride = l.value("stride", 1);
        s.drop = l.value("drop", 0.5);
        layers.push_back(s);
    }
    return Network(j.at("input_shape").get<std::vector<int>>(), std::move(layers));
}

struct Slot {
    std::string name;
    double* data;
    std::size_t length;
};

std::vector<Slot> slots_for(const std::string& prefix, const Network& net, double* base)
{
    std::vector<Slot> out;
    for (const ArrayRef& a : layer_arrays(net, prefix))
        out.push_back({a.name, base + a.offset, a.length});
    return out;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path)
{
    // Copies so the slot list can hold mutable pointers uniformly.
    Checkpoint c = ckpt;
    std::vector<Slot> slots;
    json nets = json::array();
    auto add_net = [&](const std::string& name, Network& net) {
        nets.push_back(network_json(name, net));
        auto s = slots_for(name, net, net.params().data());
        slots.insert(slots.end(), s.begin(), s.end());
    };
    add_net("encoder", c.generator.encoder);
    add_net("trunk", c.generator.trunk);
    if (c.discriminator)
        add_net("discriminator", c.discriminator->mlp);

    json header{{"format", "cmpx-checkpoint"}, {"seed", c.seed}, {"networks", nets}};
    if (c.optimizer) {
        OptimizerState& o = *c.optimizer;
        auto add_accum = [&](const std::string& name, const Network& net, std::vector<double>& acc) {
            acc.resize(net.param_count(), 0.0);
            auto s = slots_for(name + ".accum", net, acc.data());
            slots.insert(slots.end(), s.begin(), s.end());
        };
        add_accum("encoder", c.generator.encoder, o.encoder_accum);
        add_accum("trunk", c.generator.trunk, o.trunk_accum);
        if (c.discriminator)
            add_accum("discriminator", c.discriminator->mlp, o.disc_accum);
        header["optimizer"] = {{"generator_epochs", o.generator_epochs},
                               {"discriminator_epochs", o.discriminator_epochs}};
    }
    json arrays = json::array();
    for (const Slot& s : slots)
        arrays.push_back({{"name", s.name}, {"length", s.length}});
    header["arrays"] = arrays;

    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write checkpoint " + path.string());
    out.write(kMagic, 8);
    const std::uint32_t v = kVersion;
    const unsigned char vb[4] = {static_cast<unsigned char>(v & 0xff), static_cast<unsigned char>((v >> 8) & 0xff),
                                 static_cast<unsigned char>((v >> 16) & 0xff),
                                 static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(vb), 4);
    const std::string text = header.dump();
    put_u64(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const Slot& s : slots) {
        put_u64(out, s.length);
        for (std::size_t i = 0; i < s.length; ++i)
            put_u64(out, std::bit_cast<std::uint64_t>(s.data[i]));
    }
    if (!out)
        throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot read checkpoint " + path.string());
    char magic[8];
    unsigned char vb[4];
    in.read(magic, 8);
    in.read(reinterpret_cast<char*>(vb), 4);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw IoError("not a checkpoint file: " + path.string());
    const std::uint32_t version = vb[0] | (vb[1] << 8) | (vb[2] << 16) | (static_cast<std::uint32_t>(vb[3]) << 24);
    if (version != kVersion)
        throw IoError("unsupported checkpoint version " + std::to_string(version));
    const std::uint64_t hlen = get_u64(in);
    if (hlen > (1u << 26))
        throw IoError("checkpoint header too large");
    std::string text(hlen, '\0');
    in.read(text.data(), static_cast<std::streamsize>(hlen));
    if (!in)
        throw IoError("checkpoint truncated");

    Checkpoint c;
    json header;
    try {
        header = json::parse(text);
        c.seed = header.at("seed").get<std::uint64_t>();
        bool have_encoder = false, have_trunk = false;
        for (const json& n : header.at("networks")) {
            const std::string name = n.at("name").get<std::string>();
            if (name == "encoder") {
                c.generator.encoder = network_from_json(n);
                have_encoder = true;
            } else if (name == "trunk") {
                c.generator.trunk = network_from_json(n);
                have_trunk = true;
            } else if (name == "discriminator") {
                c.discriminator = DiscriminatorModel{network_from_json(n)};
            } else {
                throw IoError("unknown network '" + name + "' in checkpoint");
            }
        }
        if (!have_encoder || !have_trunk)
            throw IoError("checkpoint lacks generator networks");
    } catch (const json::exception& e) {
        throw IoError(std::string("malformed checkpoint header: ") + e.what());
    } catch (const ContractError& e) {
        throw IoError(std::string("invalid architecture in checkpoint: ") + e.what());
    }

    std::vector<Slot> slots;
    auto add = [&](const std::string& name, Network& net, double* base) {
        auto s = slots_for(name, net, base);
        slots.insert(slots.end(), s.begin(), s.end());
    };
    add("encoder", c.generator.encoder, c.generator.encoder.params().data());
    add("trunk", c.generator.trunk, c.generator.trunk.params().data());
    if (c.discriminator)
        add("discriminator", c.discriminator->mlp, c.discriminator->mlp.params().data());
    if (header.contains("optimizer")) {
        OptimizerState o;
        o.generator_epochs = header["optimizer"].value("generator_epochs", std::size_t{0});
        o.discriminator_epochs = header["optimizer"].value("discriminator_epochs", std::size_t{0});
        o.encoder_accum.assign(c.generator.encoder.param_count(), 0.0);
        o.trunk_accum.assign(c.generator.trunk.param_count(), 0.0);
        if (c.discriminator)
            o.disc_accum.assign(c.discriminator->mlp.param_count(), 0.0);
        c.optimizer = std::move(o);
        add("encoder.accum", c.generator.encoder, c.optimizer->encoder_accum.data());
        add("trunk.accum", c.generator.trunk, c.optimizer->trunk_accum.data());
        if (c.discriminator)
            add("discriminator.accum", c.discriminator->mlp, c.optimizer->disc_accum.data());
    }
    const json& arrays = header.at("arrays");
    if (arrays.size() != slots.size())
        throw IoError("checkpoint array table does not match its networks");
    for (std::size_t k = 0; k < slots.size(); ++k) {
        const Slot& s = slots[k];
        if (arrays[k].at("name").get<std::string>() != s.name)
            throw IoError("checkpoint array order mismatch at " + s.name);
        const std::uint64_t len = get_u64(in);
        if (len != s.length)
            throw IoError("checkpoint array " + s.name + " has the wrong length");
        for (std::size_t i = 0; i < s.length; ++i)
            s.data[i] = std::bit_cast<double>(get_u64(in));
    }
    return c;
}

}  // namespace cmpx
