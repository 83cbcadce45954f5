#include "cmpx/bench/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace cmpx {

namespace {

using nlohmann::json;

constexpr std::size_t kValSceneBase = 1'000'000;
constexpr std::size_t kExtraSceneBase = 2'000'000;

json parse_object(const std::string& text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw IoError(std::string("malformed config: ") + e.what());
    }
    if (!j.is_object())
        throw ContractError("config must be an object");
    return j;
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where)
{
    for (const auto& [k, v] : j.items())
        if (!allowed.count(k))
            throw ContractError(where + ": unknown key '" + k + "'");
}

void read_train_options(const json& j, TrainOptions& o, const std::string& where)
{
    check_keys(j, {"epochs", "lr", "batch_size"}, where);
    o.epochs = j.value("epochs", o.epochs);
    o.lr = j.value("lr", o.lr);
    o.batch_size = j.value("batch_size", o.batch_size);
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text))
        throw IoError("cannot write " + path.string());
}

std::string fmt_double(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

DataConfig data_config_from_json(const std::string& text)
{
    const json j = parse_object(text);
    DataConfig c;
    try {
        c.seed = j.value("seed", c.seed);
        if (!j.contains("data"))
            return c;
        const json& d = j.at("data");
        check_keys(d,
                   {"train_scenes", "train_pairs", "val_scenes", "val_pairs", "n_obstacles", "time_budget",
                    "max_iters", "smoothing_attempts", "stride", "include_reverse", "adherence"},
                   "data");
        c.train_scenes = d.value("train_scenes", c.train_scenes);
        c.train_pairs = d.value("train_pairs", c.train_pairs);
        c.val_scenes = d.value("val_scenes", c.val_scenes);
        c.val_pairs = d.value("val_pairs", c.val_pairs);
        c.params.n_obstacles = d.value("n_obstacles", c.params.n_obstacles);
        c.oracle.time_budget = d.value("time_budget", c.oracle.time_budget);
        c.oracle.max_iters = d.value("max_iters", c.oracle.max_iters);
        c.oracle.smoothing_attempts = d.value("smoothing_attempts", c.oracle.smoothing_attempts);
        c.oracle.stride = d.value("stride", c.oracle.stride);
        c.oracle.include_reverse = d.value("include_reverse", c.oracle.include_reverse);
        if (d.contains("adherence"))
            c.oracle.adherence = parse_adherence(d.at("adherence").get<std::string>());
    } catch (const json::exception& e) {
        throw ContractError(std::string("invalid data config: ") + e.what());
    }
    return c;
}

DataReport generate_data(const DataConfig& cfg, const std::filesystem::path& dir)
{
    if (cfg.train_scenes == 0 || cfg.train_pairs == 0)
        throw ContractError("generate_data: empty training set requested");
    std::filesystem::create_directories(dir);
    DataReport rep;

    const TrainingSet train = gen_training_set(cfg.seed, cfg.train_scenes, cfg.train_pairs, cfg.oracle, cfg.params);
    rep.train_file = save_dataset(train.build.data, dir, "train");
    rep.train_tuples = train.build.data.tuples.size();
    rep.train_success = train.build.success_rate();

    std::vector<SceneRecord> val_scenes;
    std::vector<std::size_t> val_ids;
    for (std::size_t i = 0; i < cfg.val_scenes; ++i) {
        val_scenes.push_back(gen_scenario1(derive_seed(cfg.seed, 0x76616c, i), cfg.val_pairs, cfg.params));
        val_ids.push_back(kValSceneBase + i);
    }
    if (!val_scenes.empty()) {
        const DatasetBuild val = gen_dataset(val_scenes, val_ids, cfg.oracle, derive_seed(cfg.seed, 0x76616c));
        rep.val_file = save_dataset(val.data, dir, "val");
        rep.val_tuples = val.data.tuples.size();
        rep.val_success = val.success_rate();
    }

    json scenes = json::array();
    for (std::size_t i = 0; i < train.scenes.size(); ++i)
        scenes.push_back({{"scene_id", train.scene_ids[i]}, {"seed", train.scenes[i].scene.seed()}});
    const json report{{"seed", cfg.seed},
                      {"train_tuples", rep.train_tuples},
                      {"train_oracle_success", rep.train_success},
                      {"train_scenes", scenes},
                      {"val_tuples", rep.val_tuples},
                      {"val_oracle_success", rep.val_success}};
    write_text(dir / "data_report.json", report.dump(2) + "\n");
    return rep;
}

TrainConfig train_config_from_json(const std::string& text, const std::filesystem::path& base)
{
    const json j = parse_object(text);
    auto resolve = [&](const std::string& p) {
        const std::filesystem::path fp(p);
        return fp.is_absolute() || base.empty() ? fp : base / fp;
    };
    TrainConfig c;
    try {
        c.seed = j.value("seed", c.seed);
        if (!j.contains("training"))
            return c;
        const json& t = j.at("training");
        check_keys(t,
                   {"dataset", "validation", "resume", "generator", "discriminator", "use_discriminator",
                    "disc_negatives", "disc_r_min", "disc_r_max", "disc_max_positives", "disc_extra_scenes",
                    "disc_extra_samples"},
                   "training");
        if (t.contains("dataset"))
            c.dataset = resolve(t.at("dataset").get<std::string>());
        if (t.contains("validation"))
            c.validation = resolve(t.at("validation").get<std::string>());
        if (t.contains("resume"))
            c.resume = resolve(t.at("resume").get<std::string>());
        if (t.contains("generator"))
            read_train_options(t.at("generator"), c.generator, "training.generator");
        if (t.contains("discriminator"))
            read_train_options(t.at("discriminator"), c.discriminator, "training.discriminator");
        c.train_discriminator = t.value("use_discriminator", c.train_discriminator);
        c.disc_negatives = t.value("disc_negatives", c.disc_negatives);
        c.disc_r_min = t.value("disc_r_min", c.disc_r_min);
        c.disc_r_max = t.value("disc_r_max", c.disc_r_max);
        c.disc_max_positives = t.value("disc_max_positives", c.disc_max_positives);
        c.disc_extra_scenes = t.value("disc_extra_scenes", c.disc_extra_scenes);
        c.disc_extra_samples = t.value("disc_extra_samples", c.disc_extra_samples);
    } catch (const json::exception& e) {
        throw ContractError(std::string("invalid training config: ") + e.what());
    }
    return c;
}

TrainReport run_training(const TrainConfig& cfg)
{
    const GeneratorDataset train = load_dataset(cfg.dataset);
    std::optional<GeneratorDataset> val;
    if (cfg.validation)
        val = load_dataset(*cfg.validation);
    if (train.empty())
        throw ContractError("training dataset is empty");
    const int n = static_cast<int>(train.tuples.front().q_curr.size());

    TrainReport rep;
    Checkpoint& ck = rep.checkpoint;
    if (cfg.resume) {
        ck = load_checkpoint(*cfg.resume);
        if (ck.generator.config_dim() != n)
            throw ContractError("resume checkpoint does not match the dataset dimension");
    } else {
        Rng init(derive_seed(cfg.seed, 1));
        ck.generator = GeneratorModel::create(n, init);
    }
    if (!ck.optimizer)
        ck.optimizer = OptimizerState{};
    ck.seed = cfg.seed;

    TrainOptions gopt = cfg.generator;
    gopt.seed = cfg.seed;
    for (const EpochStats& s : train_generator(ck.generator, train, val ? &*val : nullptr, gopt, &*ck.optimizer))
        rep.losses.push_back({s.epoch, "generator", s.train_loss, s.val_loss});

    if (!cfg.train_discriminator || cfg.discriminator.epochs == 0)
        return rep;

    const SphereConstraint sys;
    const auto label = [&sys](const Config& q) { return sys.distance(q); };
    Rng drng(derive_seed(cfg.seed, 2));
    DiscriminatorDataset dtrain = make_discriminator_dataset(train, label, cfg.disc_negatives, cfg.disc_r_min,
                                                             cfg.disc_r_max, drng, cfg.disc_max_positives);
    for (std::size_t i = 0; i < cfg.disc_extra_scenes; ++i) {
        const SceneRecord extra = gen_scenario1(derive_seed(cfg.seed, 3, i), 0);
        add_scene_samples(dtrain, kExtraSceneBase + i, extra.scene.voxels(), cfg.disc_extra_samples, label,
                          cfg.disc_r_min, cfg.disc_r_max, drng);
    }
    std::optional<DiscriminatorDataset> dval;
    if (val)
        dval = make_discriminator_dataset(*val, label, cfg.disc_negatives, cfg.disc_r_min, cfg.disc_r_max, drng);

    if (!ck.discriminator) {
        Rng init(derive_seed(cfg.seed, 4));
        ck.discriminator = DiscriminatorModel::create(n, init);
    }
    TrainOptions dopt = cfg.discriminator;
    dopt.seed = derive_seed(cfg.seed, 5);
    for (const EpochStats& s :
         train_discriminator(*ck.discriminator, ck.generator, dtrain, dval ? &*dval : nullptr, dopt, &*ck.optimizer))
        rep.losses.push_back({s.epoch, "discriminator", s.train_loss, s.val_loss});
    return rep;
}

std::string loss_csv(const std::vector<LossRow>& rows)
{
    std::ostringstream out;
    out << "epoch,model,train_loss,val_loss\n";
    for (const LossRow& r : rows)
        out << r.epoch << ',' << r.model << ',' << fmt_double(r.train_loss) << ','
            << (std::isfinite(r.val_loss) ? fmt_double(r.val_loss) : "") << '\n';
    return out.str();
}

}  // namespace cmpx
