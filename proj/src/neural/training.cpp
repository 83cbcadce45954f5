#include "cmpx/neural/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "cmpx/env/scenarios.hpp"

namespace cmpx {

namespace {

using nlohmann::json;

json vec_json(const Config& v)
{
    return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Config json_vec(const json& a)
{
    const auto v = a.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

bool lex_less(const Config& a, const Config& b)
{
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

// Batches of tuple indices; each batch holds tuples of a single scene.
template <typename Tuple>
std::vector<std::vector<std::size_t>> scene_batches(const std::vector<Tuple>& tuples,
                                                    const std::vector<std::size_t>& order, std::size_t batch_size,
                                                    Rng& rng)
{
    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (std::size_t idx : order)
        groups[tuples[idx].scene_id].push_back(idx);
    std::vector<std::vector<std::size_t>> batches;
    for (auto& [scene, idx] : groups) {
        std::shuffle(idx.begin(), idx.end(), rng);
        for (std::size_t s = 0; s < idx.size(); s += batch_size)
            batches.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(s),
                                 idx.begin() + static_cast<std::ptrdiff_t>(std::min(idx.size(), s + batch_size)));
    }
    std::shuffle(batches.begin(), batches.end(), rng);
    return batches;
}

std::vector<std::size_t> canonical_order(const std::vector<GeneratorTuple>& t)
{
    std::vector<std::size_t> order(t.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const GeneratorTuple& x = t[a];
        const GeneratorTuple& y = t[b];
        if (x.scene_id != y.scene_id)
            return x.scene_id < y.scene_id;
        if (x.q_curr != y.q_curr)
            return lex_less(x.q_curr, y.q_curr);
        if (x.q_targ != y.q_targ)
            return lex_less(x.q_targ, y.q_targ);
        return lex_less(x.q_next, y.q_next);
    });
    return order;
}

std::vector<std::size_t> canonical_order(const std::vector<DiscriminatorTuple>& t)
{
    std::vector<std::size_t> order(t.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const DiscriminatorTuple& x = t[a];
        const DiscriminatorTuple& y = t[b];
        if (x.scene_id != y.scene_id)
            return x.scene_id < y.scene_id;
        if (x.q != y.q)
            return lex_less(x.q, y.q);
        return x.d < y.d;
    });
    return order;
}

const VoxelGrid& voxels_of(const std::map<std::size_t, VoxelGrid>& voxels, std::size_t scene)
{
    auto it = voxels.find(scene);
    if (it == voxels.end())
        throw ContractError("dataset tuple references scene " + std::to_string(scene) + " without voxels");
    return it->second;
}

// Trunk input rows [z, q_curr, q_targ] for the given tuples.
Tensor trunk_input(const Tensor& z, const std::vector<GeneratorTuple>& tuples, const std::vector<std::size_t>& idx,
                   int n)
{
    const int B = static_cast<int>(idx.size());
    Tensor x({B, kLatentSize + 2 * n});
    for (int b = 0; b < B; ++b) {
        double* r = x.row(b);
        const GeneratorTuple& t = tuples[idx[static_cast<std::size_t>(b)]];
        std::copy(z.data.begin(), z.data.begin() + kLatentSize, r);
        std::copy(t.q_curr.data(), t.q_curr.data() + n, r + kLatentSize);
        std::copy(t.q_targ.data(), t.q_targ.data() + n, r + kLatentSize + n);
    }
    return x;
}

Tensor disc_input(const Tensor& z, const std::vector<DiscriminatorTuple>& tuples, const std::vector<std::size_t>& idx,
                  int n)
{
    const int B = static_cast<int>(idx.size());
    Tensor x({B, kLatentSize + n});
    for (int b = 0; b < B; ++b) {
        double* r = x.row(b);
        const DiscriminatorTuple& t = tuples[idx[static_cast<std::size_t>(b)]];
        std::copy(z.data.begin(), z.data.begin() + kLatentSize, r);
        std::copy(t.q.data(), t.q.data() + n, r + kLatentSize);
    }
    return x;
}

// Rows from any scenes, each with its own scene latent.
Tensor mixed_disc_input(const std::map<std::size_t, Tensor>& latent, const std::vector<DiscriminatorTuple>& tuples,
                        const std::vector<std::size_t>& idx, int n)
{
    const int B = static_cast<int>(idx.size());
    Tensor x({B, kLatentSize + n});
    for (int b = 0; b < B; ++b) {
        const DiscriminatorTuple& t = tuples[idx[static_cast<std::size_t>(b)]];
        auto it = latent.find(t.scene_id);
        if (it == latent.end())
            throw ContractError("dataset tuple references scene " + std::to_string(t.scene_id) + " without voxels");
        double* r = x.row(b);
        std::copy(it->second.data.begin(), it->second.data.begin() + kLatentSize, r);
        std::copy(t.q.data(), t.q.data() + n, r + kLatentSize);
    }
    return x;
}

void check_shapes(const GeneratorModel& model, const GeneratorDataset& data)
{
    const int n = model.config_dim();
    for (const GeneratorTuple& t : data.tuples)
        if (t.q_curr.size() != n || t.q_targ.size() != n || t.q_next.size() != n)
            throw ContractError("generator dataset tuple has the wrong configuration dimension");
}

}  // namespace

std::filesystem::path save_dataset(const GeneratorDataset& data, const std::filesystem::path& dir,
                                   const std::string& stem)
{
    std::filesystem::create_directories(dir / "voxels");
    std::map<std::size_t, std::string> refs;
    for (const auto& [id, grid] : data.voxels) {
        const std::string ref = "voxels/scene_" + std::to_string(id) + ".vox";
        save_voxels(grid, dir / ref);
        refs[id] = ref;
    }
    const auto path = dir / (stem + ".jsonl");
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write dataset " + path.string());
    for (const GeneratorTuple& t : data.tuples) {
        auto it = refs.find(t.scene_id);
        if (it == refs.end())
            throw ContractError("dataset tuple references scene " + std::to_string(t.scene_id) + " without voxels");
        const json j{{"scene_id", t.scene_id},
                     {"voxel_ref", it->second},
                     {"q_curr", vec_json(t.q_curr)},
                     {"q_targ", vec_json(t.q_targ)},
                     {"q_next", vec_json(t.q_next)}};
        out << j.dump() << '\n';
    }
    if (!out)
        throw IoError("failed writing dataset " + path.string());
    return path;
}

GeneratorDataset load_dataset(const std::filesystem::path& jsonl)
{
    std::ifstream in(jsonl);
    if (!in)
        throw IoError("cannot read dataset " + jsonl.string());
    const auto base = jsonl.parent_path();
    GeneratorDataset data;
    std::map<std::size_t, std::string> refs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty())
            continue;
        try {
            const json j = json::parse(line);
            GeneratorTuple t;
            t.scene_id = j.at("scene_id").get<std::size_t>();
            t.q_curr = json_vec(j.at("q_curr"));
            t.q_targ = json_vec(j.at("q_targ"));
            t.q_next = json_vec(j.at("q_next"));
            const std::string ref = j.at("voxel_ref").get<std::string>();
            auto [it, inserted] = refs.emplace(t.scene_id, ref);
            if (!inserted && it->second != ref)
                throw IoError("scene " + std::to_string(t.scene_id) + " has conflicting voxel references");
            data.tuples.push_back(std::move(t));
        } catch (const json::exception& e) {
            throw IoError(jsonl.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    for (const auto& [id, ref] : refs)
        data.voxels[id] = load_voxels(base / ref);
    return data;
}

DiscriminatorDataset make_discriminator_dataset(const GeneratorDataset& data,
                                                const std::function<double(const Config&)>& label,
                                                std::size_t negatives_per_positive, double r_min, double r_max,
                                                Rng& rng, std::size_t max_positives_per_scene)
{
    std::map<std::size_t, std::vector<std::size_t>> by_scene;
    for (std::size_t i = 0; i < data.tuples.size(); ++i)
        by_scene[data.tuples[i].scene_id].push_back(i);
    std::vector<std::size_t> chosen;
    for (auto& [scene, idx] : by_scene) {
        if (idx.size() > max_positives_per_scene) {
            std::shuffle(idx.begin(), idx.end(), rng);
            idx.resize(max_positives_per_scene);
            std::sort(idx.begin(), idx.end());
        }
        chosen.insert(chosen.end(), idx.begin(), idx.end());
    }

    DiscriminatorDataset out;
    out.voxels = data.voxels;
    for (std::size_t i : chosen) {
        const GeneratorTuple& t = data.tuples[i];
        out.tuples.push_back({t.scene_id, t.q_curr, label(t.q_curr)});
        for (std::size_t k = 0; k < negatives_per_positive; ++k) {
            Config q = random_unit_vector(rng) * uniform(rng, r_min, r_max);
            const double d = label(q);
            out.tuples.push_back({t.scene_id, std::move(q), d});
        }
    }
    return out;
}

void add_scene_samples(DiscriminatorDataset& data, std::size_t scene_id, const VoxelGrid& grid, std::size_t n,
                       const std::function<double(const Config&)>& label, double r_min, double r_max, Rng& rng)
{
    auto [it, inserted] = data.voxels.emplace(scene_id, grid);
    if (!inserted && !(it->second == grid))
        throw ContractError("add_scene_samples: scene id already used by a different grid");
    for (std::size_t k = 0; k < n; ++k) {
        Config q = random_unit_vector(rng);
        if (k % 2 == 1)
            q *= uniform(rng, r_min, r_max);
        const double d = label(q);
        data.tuples.push_back({scene_id, std::move(q), d});
    }
}

double generator_loss(const GeneratorModel& model, const GeneratorDataset& data)
{
    if (data.empty())
        return std::numeric_limits<double>::quiet_NaN();
    check_shapes(model, data);
    const int n = model.config_dim();
    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < data.tuples.size(); ++i)
        groups[data.tuples[i].scene_id].push_back(i);
    double total = 0.0;
    for (const auto& [scene, idx] : groups) {
        const Tensor z = model.encode(voxels_of(data.voxels, scene));
        const Tensor y = model.trunk.forward(trunk_input(z, data.tuples, idx, n), Mode::DeterministicInfer);
        for (std::size_t b = 0; b < idx.size(); ++b) {
            const Config& target = data.tuples[idx[b]].q_next;
            for (int j = 0; j < n; ++j) {
                const double e = y.row(static_cast<int>(b))[j] - target[j];
                total += e * e;
            }
        }
    }
    return total / static_cast<double>(data.tuples.size());
}

std::vector<EpochStats> train_generator(GeneratorModel& model, const GeneratorDataset& train,
                                        const GeneratorDataset* validation, const TrainOptions& opts,
                                        OptimizerState* state)
{
    if (train.empty())
        throw ContractError("train_generator: empty dataset");
    if (opts.batch_size < 1 || !(opts.lr > 0.0))
        throw ContractError("train_generator: invalid options");
    check_shapes(model, train);
    const int n = model.config_dim();

    OptimizerState local;
    OptimizerState& st = state ? *state : local;
    st.encoder_accum.resize(model.encoder.param_count(), 0.0);
    st.trunk_accum.resize(model.trunk.param_count(), 0.0);

    std::map<std::size_t, Tensor> vox;
    for (const auto& [id, grid] : train.voxels)
        vox.emplace(id, voxel_tensor(grid));
    const std::vector<std::size_t> order = canonical_order(train.tuples);

    std::vector<double> g_enc(model.encoder.param_count());
    std::vector<double> g_trunk(model.trunk.param_count());
    std::vector<EpochStats> stats;
    for (std::size_t e = 0; e < opts.epochs; ++e) {
        const std::size_t epoch = ++st.generator_epochs;
        Rng rng(derive_seed(opts.seed, epoch, 0x67656e));
        double total = 0.0;
        for (const auto& batch : scene_batches(train.tuples, order, opts.batch_size, rng)) {
            const std::size_t scene = train.tuples[batch.front()].scene_id;
            auto vit = vox.find(scene);
            if (vit == vox.end())
                throw ContractError("dataset tuple references scene " + std::to_string(scene) + " without voxels");
            ForwardCache enc_cache, trunk_cache;
            const Tensor z = model.encoder.forward(vit->second, Mode::Train, nullptr, &enc_cache);
            DropoutSource drop(rng);
            const Tensor y =
                model.trunk.forward(trunk_input(z, train.tuples, batch, n), Mode::Train, &drop, &trunk_cache);

            const int B = static_cast<int>(batch.size());
            Tensor dy(y.shape);
            for (int b = 0; b < B; ++b) {
                const Config& target = train.tuples[batch[static_cast<std::size_t>(b)]].q_next;
                for (int j = 0; j < n; ++j) {
                    const double err = y.row(b)[j] - target[j];
                    total += err * err;
                    dy.row(b)[j] = 2.0 * err / B;
                }
            }
            std::fill(g_trunk.begin(), g_trunk.end(), 0.0);
            std::fill(g_enc.begin(), g_enc.end(), 0.0);
            const Tensor dx = model.trunk.backward(trunk_cache, dy, g_trunk);
            Tensor dz({1, kLatentSize});
            for (int b = 0; b < B; ++b)
                for (int j = 0; j < kLatentSize; ++j)
                    dz.data[static_cast<std::size_t>(j)] += dx.row(b)[j];
            model.encoder.backward(enc_cache, dz, g_enc);
            adagrad_step(model.trunk.params(), st.trunk_accum, g_trunk, opts.lr);
            adagrad_step(model.encoder.params(), st.encoder_accum, g_enc, opts.lr);
        }
        EpochStats s;
        s.epoch = epoch;
        s.train_loss = total / static_cast<double>(train.tuples.size());
        s.val_loss = validation ? generator_loss(model, *validation) : std::numeric_limits<double>::quiet_NaN();
        stats.push_back(s);
    }
    return stats;
}

double discriminator_loss(const DiscriminatorModel& disc, const GeneratorModel& gen, const DiscriminatorDataset& data)
{
    if (data.tuples.empty())
        return std::numeric_limits<double>::quiet_NaN();
    const int n = disc.config_dim();
    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < data.tuples.size(); ++i)
        groups[data.tuples[i].scene_id].push_back(i);
    double total = 0.0;
    for (const auto& [scene, idx] : groups) {
        const Tensor z = gen.encode(voxels_of(data.voxels, scene));
        const Tensor y = disc.mlp.forward(disc_input(z, data.tuples, idx, n), Mode::DeterministicInfer);
        for (std::size_t b = 0; b < idx.size(); ++b) {
            const double e = y.data[b] - data.tuples[idx[b]].d;
            total += e * e;
        }
    }
    return total / static_cast<double>(data.tuples.size());
}

std::vector<EpochStats> train_discriminator(DiscriminatorModel& disc, const GeneratorModel& gen,
                                            const DiscriminatorDataset& train, const DiscriminatorDataset* validation,
                                            const TrainOptions& opts, OptimizerState* state)
{
    if (train.tuples.empty())
        throw ContractError("train_discriminator: empty dataset");
    if (opts.batch_size < 1 || !(opts.lr > 0.0))
        throw ContractError("train_discriminator: invalid options");
    const int n = disc.config_dim();
    if (n != gen.config_dim())
        throw ContractError("train_discriminator: generator and discriminator dimensions differ");
    for (const DiscriminatorTuple& t : train.tuples)
        if (t.q.size() != n || !std::isfinite(t.d))
            throw ContractError("discriminator dataset tuple is malformed");

    OptimizerState local;
    OptimizerState& st = state ? *state : local;
    st.disc_accum.resize(disc.mlp.param_count(), 0.0);

    std::map<std::size_t, Tensor> latent;
    for (const auto& [id, grid] : train.voxels)
        latent.emplace(id, gen.encode(grid));
    const std::vector<std::size_t> order = canonical_order(train.tuples);

    std::vector<double> grad(disc.mlp.param_count());
    std::vector<EpochStats> stats;
    for (std::size_t e = 0; e < opts.epochs; ++e) {
        const std::size_t epoch = ++st.discriminator_epochs;
        Rng rng(derive_seed(opts.seed, epoch, 0x646973));
        double total = 0.0;
        std::vector<std::size_t> shuffled = order;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        for (std::size_t s0 = 0; s0 < shuffled.size(); s0 += opts.batch_size) {
            const std::vector<std::size_t> batch(
                shuffled.begin() + static_cast<std::ptrdiff_t>(s0),
                shuffled.begin() + static_cast<std::ptrdiff_t>(std::min(shuffled.size(), s0 + opts.batch_size)));
            ForwardCache cache;
            const Tensor y =
                disc.mlp.forward(mixed_disc_input(latent, train.tuples, batch, n), Mode::Train, nullptr, &cache);
            const int B = static_cast<int>(batch.size());
            Tensor dy(y.shape);
            for (int b = 0; b < B; ++b) {
                const double err = y.data[static_cast<std::size_t>(b)] - train.tuples[batch[static_cast<std::size_t>(b)]].d;
                total += err * err;
                dy.data[static_cast<std::size_t>(b)] = 2.0 * err / B;
            }
            std::fill(grad.begin(), grad.end(), 0.0);
            disc.mlp.backward(cache, dy, grad);
            adagrad_step(disc.mlp.params(), st.disc_accum, grad, opts.lr);
        }
        EpochStats s;
        s.epoch = epoch;
        s.train_loss = total / static_cast<double>(train.tuples.size());
        s.val_loss =
            validation ? discriminator_loss(disc, gen, *validation) : std::numeric_limits<double>::quiet_NaN();
        stats.push_back(s);
    }
    return stats;
}

}  // namespace cmpx
