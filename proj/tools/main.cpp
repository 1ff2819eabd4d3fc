#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rlomm/baselines.hpp"
#include "rlomm/data.hpp"
#include "rlomm/eval.hpp"
#include "rlomm/rl.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rlomm;

namespace {

struct RunConfig {
    SynthConfig synth;
    TrainingConfig training;
    HmmConfig hmm;
    MdpConfig mdp;
    double grid_cell_m = 5.0;
    double downsample_rate = 1.0;  // 1 = keep everything
};

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
    for (const auto& [key, _] : j.items()) {
        if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) {
                return key == a;
            }) == allowed.end())
            throw InvalidConfig("unknown config key '" + key + "' in " + where);
    }
}

template <typename T>
void take(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void parse_synth(const json& j, SynthConfig& c) {
    check_keys(j,
               {"style", "blocks", "block_m", "trajectory_count", "speed_mps",
                "period_s", "noise_sigma_m", "seed", "lane_offset_m",
                "min_route_segments", "max_route_segments", "origin_lat", "origin_lon"},
               "synth");
    if (j.contains("style")) {
        const auto s = j.at("style").get<std::string>();
        if (s == "grid") c.style = NetworkStyle::Grid;
        else if (s == "radial") c.style = NetworkStyle::Radial;
        else throw InvalidConfig("synth.style must be 'grid' or 'radial'");
    }
    take(j, "blocks", c.blocks);
    take(j, "block_m", c.block_m);
    take(j, "trajectory_count", c.trajectory_count);
    take(j, "speed_mps", c.speed_mps);
    take(j, "period_s", c.period_s);
    take(j, "noise_sigma_m", c.noise_sigma_m);
    take(j, "seed", c.seed);
    take(j, "lane_offset_m", c.lane_offset_m);
    take(j, "min_route_segments", c.min_route_segments);
    take(j, "max_route_segments", c.max_route_segments);
    take(j, "origin_lat", c.origin_lat);
    take(j, "origin_lon", c.origin_lon);
}

void parse_reward(const json& j, RewardConfig& c) {
    check_keys(j,
               {"alpha", "beta", "gamma_rc", "streak_threshold", "history_capacity",
                "connectivity_cutoff"},
               "reward");
    take(j, "alpha", c.alpha);
    take(j, "beta", c.beta);
    take(j, "gamma_rc", c.gamma_rc);
    take(j, "streak_threshold", c.streak_threshold);
    take(j, "history_capacity", c.history_capacity);
    take(j, "connectivity_cutoff", c.connectivity_cutoff);
}

void parse_training(const json& j, TrainingConfig& c) {
    check_keys(j,
               {"lr", "batch_size", "epochs", "target_sync_interval", "discount",
                "lambda", "tau", "k", "epsilon", "epsilon_final", "lr_final",
                "patience", "n_c", "traj_batch", "updates_per_batch",
                "seed", "replay_capacity", "d", "d_a", "gin_layers", "gcn_layers"},
               "training");
    take(j, "lr", c.lr);
    take(j, "batch_size", c.batch_size);
    take(j, "epochs", c.epochs);
    take(j, "target_sync_interval", c.target_sync_interval);
    take(j, "discount", c.discount);
    take(j, "lambda", c.lambda);
    take(j, "tau", c.tau);
    take(j, "k", c.k);
    take(j, "epsilon", c.epsilon);
    take(j, "epsilon_final", c.epsilon_final);
    take(j, "lr_final", c.lr_final);
    take(j, "patience", c.patience);
    take(j, "n_c", c.n_c);
    take(j, "traj_batch", c.traj_batch);
    take(j, "updates_per_batch", c.updates_per_batch);
    take(j, "seed", c.seed);
    take(j, "replay_capacity", c.replay_capacity);
    take(j, "d", c.dims.d);
    take(j, "d_a", c.dims.d_a);
    take(j, "gin_layers", c.dims.gin_layers);
    take(j, "gcn_layers", c.dims.gcn_layers);
}

void parse_hmm(const json& j, HmmConfig& c) {
    check_keys(j, {"sigma_m", "beta_m", "n_c", "hop_cutoff"}, "hmm");
    take(j, "sigma_m", c.sigma_m);
    take(j, "beta_m", c.beta_m);
    take(j, "n_c", c.n_c);
    take(j, "hop_cutoff", c.hop_cutoff);
}

void parse_mdp(const json& j, MdpConfig& c) {
    check_keys(j,
               {"discount", "max_sweeps", "tolerance", "n_c", "hop_cutoff",
                "connectivity_bonus"},
               "mdp");
    take(j, "discount", c.discount);
    take(j, "max_sweeps", c.max_sweeps);
    take(j, "tolerance", c.tolerance);
    take(j, "n_c", c.n_c);
    take(j, "hop_cutoff", c.hop_cutoff);
    take(j, "connectivity_bonus", c.connectivity_bonus);
}

RunConfig parse_config(const std::string& path) {
    RunConfig c;
    if (path.empty()) return c;
    std::ifstream in(path);
    if (!in) throw InvalidConfig("cannot open config " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw InvalidConfig(path + ": " + e.what());
    }
    check_keys(j, {"synth", "training", "reward", "hmm", "mdp", "grid_cell_m",
                   "downsample_rate"},
               "config root");
    if (j.contains("synth")) parse_synth(j.at("synth"), c.synth);
    if (j.contains("training")) parse_training(j.at("training"), c.training);
    if (j.contains("reward")) parse_reward(j.at("reward"), c.training.reward);
    if (j.contains("hmm")) parse_hmm(j.at("hmm"), c.hmm);
    if (j.contains("mdp")) parse_mdp(j.at("mdp"), c.mdp);
    take(j, "grid_cell_m", c.grid_cell_m);
    take(j, "downsample_rate", c.downsample_rate);
    return c;
}

json effective_config_json(const RunConfig& c) {
    return json{
        {"synth",
         {{"style", c.synth.style == NetworkStyle::Grid ? "grid" : "radial"},
          {"blocks", c.synth.blocks},
          {"block_m", c.synth.block_m},
          {"trajectory_count", c.synth.trajectory_count},
          {"speed_mps", c.synth.speed_mps},
          {"period_s", c.synth.period_s},
          {"noise_sigma_m", c.synth.noise_sigma_m},
          {"seed", c.synth.seed},
          {"lane_offset_m", c.synth.lane_offset_m},
          {"min_route_segments", c.synth.min_route_segments},
          {"max_route_segments", c.synth.max_route_segments},
          {"origin_lat", c.synth.origin_lat},
          {"origin_lon", c.synth.origin_lon}}},
        {"training",
         {{"lr", c.training.lr},
          {"batch_size", c.training.batch_size},
          {"epochs", c.training.epochs},
          {"target_sync_interval", c.training.target_sync_interval},
          {"discount", c.training.discount},
          {"lambda", c.training.lambda},
          {"tau", c.training.tau},
          {"k", c.training.k},
          {"epsilon", c.training.epsilon},
          {"epsilon_final", c.training.epsilon_final},
          {"lr_final", c.training.lr_final},
          {"patience", c.training.patience},
          {"n_c", c.training.n_c},
          {"traj_batch", c.training.traj_batch},
          {"updates_per_batch", c.training.updates_per_batch},
          {"seed", c.training.seed},
          {"replay_capacity", c.training.replay_capacity},
          {"d", c.training.dims.d},
          {"d_a", c.training.dims.d_a},
          {"gin_layers", c.training.dims.gin_layers},
          {"gcn_layers", c.training.dims.gcn_layers}}},
        {"reward",
         {{"alpha", c.training.reward.alpha},
          {"beta", c.training.reward.beta},
          {"gamma_rc", c.training.reward.gamma_rc},
          {"streak_threshold", c.training.reward.streak_threshold},
          {"history_capacity", c.training.reward.history_capacity},
          {"connectivity_cutoff", c.training.reward.connectivity_cutoff}}},
        {"hmm",
         {{"sigma_m", c.hmm.sigma_m},
          {"beta_m", c.hmm.beta_m},
          {"n_c", c.hmm.n_c},
          {"hop_cutoff", c.hmm.hop_cutoff}}},
        {"mdp",
         {{"discount", c.mdp.discount},
          {"max_sweeps", c.mdp.max_sweeps},
          {"tolerance", c.mdp.tolerance},
          {"n_c", c.mdp.n_c},
          {"hop_cutoff", c.mdp.hop_cutoff},
          {"connectivity_bonus", c.mdp.connectivity_bonus}}},
        {"grid_cell_m", c.grid_cell_m},
        {"downsample_rate", c.downsample_rate}};
}

void echo_config(const std::string& out_dir, const RunConfig& c) {
    fs::create_directories(out_dir);
    std::ofstream(fs::path(out_dir) / "config_effective.json")
        << effective_config_json(c).dump(2) << '\n';
}

struct LoadedData {
    std::vector<RoadSegment> segments;
    Dataset trajs;
    DatasetManifest manifest;
};

LoadedData load_dir(const std::string& dir) {
    LoadedData d;
    d.manifest = read_manifest((fs::path(dir) / "manifest.json").string());
    d.segments = load_road_csv((fs::path(dir) / d.manifest.road_csv).string());
    d.trajs = load_trajectories((fs::path(dir) / d.manifest.trajectory_csv).string());
    if (!d.manifest.labels_csv.empty() &&
        fs::exists(fs::path(dir) / d.manifest.labels_csv))
        load_labels((fs::path(dir) / d.manifest.labels_csv).string(), d.trajs);
    return d;
}

void write_subset(const std::string& dir, const std::vector<RoadSegment>& segments,
                  const Dataset& ds, std::uint64_t seed, const std::string& labeler) {
    fs::create_directories(dir);
    save_road_csv((fs::path(dir) / "roads.csv").string(), segments);
    save_trajectories((fs::path(dir) / "trajectories.csv").string(), ds);
    DatasetManifest m;
    m.road_csv = "roads.csv";
    m.trajectory_csv = "trajectories.csv";
    m.seed = seed;
    m.labeler = labeler;
    const bool labeled =
        !ds.empty() && std::all_of(ds.begin(), ds.end(), [](const LabeledTrajectory& t) {
            return t.truth.size() == t.points.size();
        });
    if (labeled) {
        m.labels_csv = "labels.csv";
        save_labels((fs::path(dir) / "labels.csv").string(), ds);
    }
    write_manifest((fs::path(dir) / "manifest.json").string(), m);
}

Dataset maybe_downsample(Dataset ds, double rate) {
    if (rate == 1.0) return ds;
    for (auto& t : ds) t = downsample(t, rate);
    return ds;
}

/// Loads a trained model: dims from the run's config echo next to the
/// checkpoint when present, otherwise from cfg.
ModelParams load_model(const std::string& ckpt, const ModelDims& dims) {
    std::mt19937_64 rng(0);
    ModelParams model = ModelParams::init(dims, rng);
    auto ps = model.all();
    ad::load_checkpoint(ckpt, ps);
    return model;
}

struct SplitDirs {
    Dataset train, val, test;
};

/// Uses train/ val/ test/ subdirectories when the dataset was already split,
/// otherwise splits in-process with the given seed.
SplitDirs load_split(const std::string& data_dir, std::uint64_t seed,
                     std::vector<RoadSegment>& segments_out) {
    SplitDirs s;
    if (fs::exists(fs::path(data_dir) / "train" / "manifest.json")) {
        auto tr = load_dir((fs::path(data_dir) / "train").string());
        segments_out = tr.segments;
        s.train = std::move(tr.trajs);
        s.val = load_dir((fs::path(data_dir) / "val").string()).trajs;
        if (fs::exists(fs::path(data_dir) / "test" / "manifest.json"))
            s.test = load_dir((fs::path(data_dir) / "test").string()).trajs;
        return s;
    }
    auto d = load_dir(data_dir);
    segments_out = std::move(d.segments);
    auto sp = split(std::move(d.trajs), seed);
    s.train = std::move(sp.train);
    s.val = std::move(sp.val);
    s.test = std::move(sp.test);
    return s;
}

std::vector<std::vector<int>> run_method(
    const std::string& method, const Dataset& ds, const LinkConnectionGraph& roads,
    const RunConfig& cfg, const WorldModel* world, const ModelParams* model,
    int workers) {
    std::vector<std::vector<int>> preds(ds.size());
    auto run_range = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            if (method == "hmm")
                preds[i] = HmmOnlineMatcher::match(ds[i].points, roads, cfg.hmm);
            else if (method == "mdp")
                preds[i] = mdp_value_iteration_match(ds[i].points, roads, cfg.mdp);
            else if (method == "greedy")
                preds[i] = greedy_nearest_match(ds[i].points, roads);
            else
                preds[i] = OnlineMatcher::match(ds[i].points, roads, *world, *model,
                                                cfg.training.k, cfg.training.n_c);
        }
    };
    if (workers <= 1 || ds.size() < 2) {
        run_range(0, ds.size());
        return preds;
    }
    const std::size_t w = std::min<std::size_t>(std::size_t(workers), ds.size());
    std::vector<std::thread> pool;
    const std::size_t chunk = (ds.size() + w - 1) / w;
    for (std::size_t t = 0; t < w; ++t)
        pool.emplace_back(run_range, t * chunk,
                          std::min(ds.size(), (t + 1) * chunk));
    for (auto& th : pool) th.join();
    return preds;
}

int cmd_generate(const std::string& config, const std::string& out,
                 std::uint64_t seed) {
    RunConfig cfg = parse_config(config);
    cfg.synth.seed = seed;
    auto world = synth_generate(cfg.synth);
    write_dataset(out, world, cfg.synth);
    echo_config(out, cfg);
    std::cout << "wrote " << world.segments.size() << " segments, "
              << world.trajectories.size() << " trajectories to " << out << "\n";
    return 0;
}

int cmd_label(const std::string& config, const std::string& data,
              const std::string& out) {
    RunConfig cfg = parse_config(config);
    auto d = load_dir(data);
    auto roads = LinkConnectionGraph::build(d.segments);
    auto labeled = hmm_label(std::move(d.trajs), roads, cfg.hmm);
    write_subset(out, d.segments, labeled, d.manifest.seed, "hmm");
    echo_config(out, cfg);
    std::cout << "labeled " << labeled.size() << " trajectories\n";
    return 0;
}

int cmd_split(const std::string& config, const std::string& data,
              const std::string& out, std::uint64_t seed) {
    RunConfig cfg = parse_config(config);
    auto d = load_dir(data);
    auto sp = split(std::move(d.trajs), seed);
    write_subset((fs::path(out) / "train").string(), d.segments, sp.train, seed,
                 d.manifest.labeler);
    write_subset((fs::path(out) / "val").string(), d.segments, sp.val, seed,
                 d.manifest.labeler);
    write_subset((fs::path(out) / "test").string(), d.segments, sp.test, seed,
                 d.manifest.labeler);
    echo_config(out, cfg);
    std::cout << "split " << sp.train.size() << "/" << sp.val.size() << "/"
              << sp.test.size() << "\n";
    return 0;
}

int cmd_train(const std::string& config, const std::string& data,
              const std::string& out, std::uint64_t seed) {
    RunConfig cfg = parse_config(config);
    cfg.training.seed = seed;
    std::vector<RoadSegment> segments;
    auto sp = load_split(data, seed, segments);
    if (cfg.downsample_rate != 1.0) {
        sp.train = maybe_downsample(std::move(sp.train), cfg.downsample_rate);
        sp.val = maybe_downsample(std::move(sp.val), cfg.downsample_rate);
    }
    auto roads = LinkConnectionGraph::build(segments);
    auto world = WorldModel::build(roads, cfg.grid_cell_m, sp.train);
    std::mt19937_64 rng(seed);
    auto nets = DualNetworks::init(cfg.training.dims, rng);
    auto res = train(nets, roads, world, sp.train, sp.val, cfg.training, out);
    echo_config(out, cfg);
    const auto& last = res.metrics.empty() ? EpochMetrics{} : res.metrics.back();
    std::cout << "trained " << res.metrics.size() << " epochs ("
              << (res.early_stopped ? "early stop" : "full run")
              << "), final val AccT " << last.val_acct << "\n";
    return 0;
}

int cmd_match(const std::string& config, const std::string& data,
              const std::string& ckpt) {
    RunConfig cfg = parse_config(config);
    std::vector<RoadSegment> segments;
    auto sp = load_split(data, cfg.training.seed, segments);
    auto roads = LinkConnectionGraph::build(segments);
    auto world = WorldModel::build(roads, cfg.grid_cell_m, sp.train);
    auto model = load_model(ckpt, cfg.training.dims);
    OnlineMatcher matcher(roads, world, model, cfg.training.k, cfg.training.n_c);

    auto emit = [](const std::vector<std::pair<int, int>>& pairs) {
        for (const auto& [idx, seg] : pairs)
            std::cout << idx << "," << seg << "\n";
        std::cout.flush();
    };
    std::string line;
    int line_no = 0;
    while (std::getline(std::cin, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        std::vector<std::string> f;
        std::string cur;
        for (char ch : line) {
            if (ch == ',') { f.push_back(cur); cur.clear(); }
            else if (ch != '\r') cur += ch;
        }
        f.push_back(cur);
        // Accepts lat,lon,timestamp or traj_id,lat,lon,timestamp.
        const std::size_t base = f.size() == 4 ? 1 : 0;
        if (f.size() != 3 && f.size() != 4)
            throw ParseError("stdin line " + std::to_string(line_no) +
                             ": expected lat,lon,timestamp");
        GeoPoint p{std::stod(f[base]), std::stod(f[base + 1]),
                   std::stoll(f[base + 2])};
        emit(matcher.push_point(p));
    }
    emit(matcher.flush());
    return 0;
}

int cmd_eval(const std::string& config, const std::string& method,
             const std::string& data, const std::string& out,
             const std::string& ckpt, int workers) {
    RunConfig cfg = parse_config(config);
    std::vector<RoadSegment> segments;
    auto sp = load_split(data, cfg.training.seed, segments);
    const Dataset& ds = sp.test.empty() ? sp.val : sp.test;
    auto roads = LinkConnectionGraph::build(segments);

    std::optional<WorldModel> world;
    std::optional<ModelParams> model;
    if (method == "rlomm") {
        if (ckpt.empty()) throw InvalidConfig("--ckpt is required for method rlomm");
        world = WorldModel::build(roads, cfg.grid_cell_m, sp.train);
        model = load_model(ckpt, cfg.training.dims);
    }
    // The learned matcher holds a shared tape per instance; keep it on one
    // worker and fan out only the pure baselines.
    const int w = method == "rlomm" ? 1 : workers;
    auto preds = run_method(method, ds, roads, cfg,
                            world ? &*world : nullptr, model ? &*model : nullptr, w);
    auto report = build_report(method, preds, ds);
    if (!out.empty()) {
        std::ofstream o(out);
        if (!o) throw std::runtime_error("cannot write " + out);
        o << report.to_json() << '\n';
    }
    std::cout << report.to_table();
    return 0;
}

int cmd_bench(const std::string& config, const std::string& method,
              const std::string& data, const std::string& ckpt, int steps,
              const std::string& out) {
    RunConfig cfg = parse_config(config);
    std::vector<RoadSegment> segments;
    auto sp = load_split(data, cfg.training.seed, segments);
    auto roads = LinkConnectionGraph::build(segments);

    Trajectory stream;
    for (const auto& t : sp.train) {
        for (const auto& p : t.points) {
            stream.push_back(p);
            if (int(stream.size()) >= steps) break;
        }
        if (int(stream.size()) >= steps) break;
    }
    if (int(stream.size()) < steps)
        throw TooSmall("dataset provides fewer than the requested stream steps");

    std::optional<WorldModel> world;
    std::optional<ModelParams> model;
    if (method == "rlomm") {
        if (ckpt.empty()) throw InvalidConfig("--ckpt is required for method rlomm");
        world = WorldModel::build(roads, cfg.grid_cell_m, sp.train);
        model = load_model(ckpt, cfg.training.dims);
    }

    auto factory = [&]() -> std::function<void(int)> {
        if (method == "hmm") {
            auto m = std::make_shared<HmmOnlineMatcher>(roads, cfg.hmm);
            return [m, &stream](int i) { m->push_point(stream[std::size_t(i)]); };
        }
        if (method == "greedy") {
            return [&](int i) { (void)roads.candidates(stream[std::size_t(i)], 1); };
        }
        if (method == "mdp") {
            // Offline baseline re-invoked per arriving point, as an online
            // emulation: cost grows with the prefix length.
            return [&](int i) {
                Trajectory prefix(stream.begin(), stream.begin() + i + 1);
                (void)mdp_value_iteration_match(prefix, roads, cfg.mdp);
            };
        }
        auto m = std::make_shared<OnlineMatcher>(roads, *world, *model,
                                                 cfg.training.k, cfg.training.n_c);
        return [m, &stream](int i) { m->push_point(stream[std::size_t(i)]); };
    };
    auto summary = latency_harness(factory, steps);
    json j{{"method", method},
           {"steps", steps},
           {"ratio_late_over_early", summary.ratio},
           {"median_ns", median(summary.step_ns)},
           {"step_ns", summary.step_ns}};
    if (!out.empty()) std::ofstream(out) << j.dump(2) << '\n';
    std::cout << "method " << method << ": median step "
              << median(summary.step_ns) / 1000.0 << " us, late/early ratio "
              << summary.ratio << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Online map matching engine"};
    app.require_subcommand(1);

    std::string config, data, out, ckpt, method = "rlomm";
    std::uint64_t seed = 0;
    int workers = 1, steps = 100;
    bool seed_set = false;

    auto add_common = [&](CLI::App* c, bool needs_seed) {
        c->add_option("--config", config, "JSON config file");
        c->add_option("--workers", workers, "worker threads for per-trajectory work");
        auto* s = c->add_option_function<std::uint64_t>(
            "--seed", [&](std::uint64_t v) { seed = v; seed_set = true; }, "RNG seed");
        if (needs_seed) s->required();
    };

    auto* g = app.add_subcommand("generate", "synthesize a dataset");
    add_common(g, true);
    g->add_option("--out", out, "output directory")->required();

    auto* l = app.add_subcommand("label", "annotate trajectories with the HMM");
    add_common(l, false);
    l->add_option("--data", data, "dataset directory")->required();
    l->add_option("--out", out, "output directory")->required();

    auto* s = app.add_subcommand("split", "shuffle into train/val/test");
    add_common(s, false);
    s->add_option("--data", data, "dataset directory")->required();
    s->add_option("--out", out, "output directory")->required();

    auto* t = app.add_subcommand("train", "train the matcher");
    add_common(t, true);
    t->add_option("--data", data, "dataset directory")->required();
    t->add_option("--out", out, "run output directory")->required();

    auto* m = app.add_subcommand("match", "stream points on stdin, matches on stdout");
    add_common(m, false);
    m->add_option("--data", data, "dataset directory (world context)")->required();
    m->add_option("--ckpt", ckpt, "checkpoint file")->required();

    auto* e = app.add_subcommand("eval", "score a method on the test split");
    add_common(e, false);
    e->add_option("--method", method, "hmm|mdp|greedy|rlomm");
    e->add_option("--data", data, "dataset directory")->required();
    e->add_option("--out", out, "report JSON path");
    e->add_option("--ckpt", ckpt, "checkpoint file (rlomm)");

    auto* b = app.add_subcommand("bench", "per-step latency harness");
    add_common(b, false);
    b->add_option("--method", method, "hmm|mdp|greedy|rlomm");
    b->add_option("--data", data, "dataset directory")->required();
    b->add_option("--ckpt", ckpt, "checkpoint file (rlomm)");
    b->add_option("--steps", steps, "stream length");
    b->add_option("--out", out, "report JSON path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        return app.exit(err) == 0 ? 0 : 2;
    }

    try {
        if (!seed_set) seed = 0;
        if (method != "hmm" && method != "mdp" && method != "greedy" &&
            method != "rlomm")
            throw InvalidConfig("unknown method '" + method + "'");
        if (g->parsed()) return cmd_generate(config, out, seed);
        if (l->parsed()) return cmd_label(config, data, out);
        if (s->parsed()) return cmd_split(config, data, out, seed_set ? seed : 1);
        if (t->parsed()) return cmd_train(config, data, out, seed);
        if (m->parsed()) return cmd_match(config, data, ckpt);
        if (e->parsed()) return cmd_eval(config, method, data, out, ckpt, workers);
        if (b->parsed()) return cmd_bench(config, method, data, ckpt, steps, out);
        return 2;
    } catch (const InvalidConfig& ex) {
        std::cerr << "config error: " << ex.what() << "\n";
        return 2;
    } catch (const ParseError& ex) {
        std::cerr << "data error: " << ex.what() << "\n";
        return 3;
    } catch (const NonMonotoneTime& ex) {
        std::cerr << "data error: " << ex.what() << "\n";
        return 3;
    } catch (const TooSmall& ex) {
        std::cerr << "data error: " << ex.what() << "\n";
        return 3;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
}
