#include "rlomm/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

namespace rlomm {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    fields.push_back(cur);
    return fields;
}

double parse_double(const std::string& s, int line_no) {
    double v = 0.0;
    const auto* b = s.data();
    const auto* e = s.data() + s.size();
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc{} || p != e)
        throw ParseError("line " + std::to_string(line_no) + ": bad number '" + s + "'");
    return v;
}

std::int64_t parse_int(const std::string& s, int line_no) {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw ParseError("line " + std::to_string(line_no) + ": bad integer '" + s + "'");
    return v;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    return out;
}

void append_point_csv(std::string& buf, std::int64_t traj_id, const GeoPoint& p) {
    char line[96];
    std::snprintf(line, sizeof line, "%lld,%.9f,%.9f,%lld\n",
                  static_cast<long long>(traj_id), p.lat, p.lon,
                  static_cast<long long>(p.time));
    buf += line;
}

struct LocalPoint {
    double x = 0.0;  // east meters
    double y = 0.0;  // north meters
};

struct WorldBuilder {
    const SynthConfig& cfg;
    GridSpec proj;
    std::vector<RoadSegment> segments;

    explicit WorldBuilder(const SynthConfig& c)
        : cfg(c), proj({c.origin_lat, c.origin_lon, 0}, 1.0, 1, 1) {}

    // One directed segment from node a to node b, geometry shifted
    // lane_offset_m to the right of the travel direction.
    void add_segment(std::int64_t a, std::int64_t b, LocalPoint pa, LocalPoint pb) {
        const double dx = pb.x - pa.x, dy = pb.y - pa.y;
        const double len = std::hypot(dx, dy);
        const double rx = dy / len * cfg.lane_offset_m;
        const double ry = -dx / len * cfg.lane_offset_m;
        RoadSegment seg;
        seg.id = static_cast<int>(segments.size());
        seg.from_node = a;
        seg.to_node = b;
        seg.polyline = {proj.point_at(pa.x + rx, pa.y + ry),
                        proj.point_at(pb.x + rx, pb.y + ry)};
        segments.push_back(std::move(seg));
    }

    void add_twin_pair(std::int64_t a, std::int64_t b, LocalPoint pa, LocalPoint pb) {
        add_segment(a, b, pa, pb);
        add_segment(b, a, pb, pa);
    }

    void build_grid() {
        const int n = cfg.blocks + 1;  // nodes per side
        auto node = [n](int r, int c) { return std::int64_t(r) * n + c; };
        auto pos = [this](int r, int c) {
            return LocalPoint{c * cfg.block_m, r * cfg.block_m};
        };
        for (int r = 0; r < n; ++r)
            for (int c = 0; c + 1 < n; ++c)
                add_twin_pair(node(r, c), node(r, c + 1), pos(r, c), pos(r, c + 1));
        for (int r = 0; r + 1 < n; ++r)
            for (int c = 0; c < n; ++c)
                add_twin_pair(node(r, c), node(r + 1, c), pos(r, c), pos(r + 1, c));
    }

    void build_radial() {
        constexpr int kSpokes = 8;
        const double center = cfg.block_m * (cfg.blocks + 2);  // keep box positive
        auto node = [](int ring, int spoke) {
            return std::int64_t(1) + std::int64_t(ring) * kSpokes + spoke;
        };
        auto pos = [&](int ring, int spoke) {
            const double r = cfg.block_m * (ring + 1);
            const double a = 2.0 * std::numbers::pi * spoke / kSpokes;
            return LocalPoint{center + r * std::cos(a), center + r * std::sin(a)};
        };
        const LocalPoint hub{center, center};
        for (int s = 0; s < kSpokes; ++s) {
            add_twin_pair(0, node(0, s), hub, pos(0, s));
            for (int k = 0; k + 1 < cfg.blocks; ++k)
                add_twin_pair(node(k, s), node(k + 1, s), pos(k, s), pos(k + 1, s));
        }
        for (int k = 0; k < cfg.blocks; ++k)
            for (int s = 0; s < kSpokes; ++s)
                add_twin_pair(node(k, s), node(k, (s + 1) % kSpokes), pos(k, s),
                              pos(k, (s + 1) % kSpokes));
    }
};

}  // namespace

void SynthConfig::validate() const {
    if (blocks < 1 || block_m <= 0 || trajectory_count < 1 || speed_mps <= 0 ||
        period_s <= 0 || min_route_segments < 1 ||
        max_route_segments < min_route_segments || lane_offset_m < 0)
        throw InvalidConfig("synthetic config has non-positive dimensions");
    if (noise_sigma_m < 0) throw InvalidConfig("noise sigma must be >= 0");
}

Dataset load_trajectories(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    Dataset out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        if (line_no == 1 && line.starts_with("traj_id")) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 4)
            throw ParseError("line " + std::to_string(line_no) +
                             ": expected traj_id,lat,lon,timestamp");
        const std::int64_t id = parse_int(f[0], line_no);
        GeoPoint p{parse_double(f[1], line_no), parse_double(f[2], line_no),
                   parse_int(f[3], line_no)};
        if (out.empty() || out.back().id != id) {
            out.push_back({id, {}, {}});
        } else if (p.time <= out.back().points.back().time) {
            throw NonMonotoneTime("trajectory " + std::to_string(id) +
                                  ": non-increasing timestamp at line " +
                                  std::to_string(line_no));
        }
        out.back().points.push_back(p);
    }
    return out;
}

void save_trajectories(const std::string& path, const Dataset& trajs) {
    std::string buf = "traj_id,lat,lon,timestamp\n";
    for (const auto& t : trajs)
        for (const auto& p : t.points) append_point_csv(buf, t.id, p);
    open_out(path) << buf;
}

void load_labels(const std::string& path, Dataset& trajs) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    std::unordered_map<std::int64_t, LabeledTrajectory*> by_id;
    for (auto& t : trajs) {
        by_id[t.id] = &t;
        t.truth.assign(t.points.size(), -1);
    }
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        if (line_no == 1 && line.starts_with("traj_id")) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 3)
            throw ParseError("line " + std::to_string(line_no) +
                             ": expected traj_id,point_idx,seg_id");
        const std::int64_t id = parse_int(f[0], line_no);
        const std::int64_t idx = parse_int(f[1], line_no);
        const std::int64_t seg = parse_int(f[2], line_no);
        auto it = by_id.find(id);
        if (it == by_id.end()) continue;  // labels for absent trajectories are ignored
        if (idx < 0 || idx >= std::int64_t(it->second->points.size()))
            throw ParseError("line " + std::to_string(line_no) +
                             ": point index out of range");
        it->second->truth[static_cast<std::size_t>(idx)] = static_cast<int>(seg);
    }
}

void save_labels(const std::string& path, const Dataset& trajs) {
    std::string buf = "traj_id,point_idx,seg_id\n";
    char line[64];
    for (const auto& t : trajs)
        for (std::size_t i = 0; i < t.truth.size(); ++i) {
            std::snprintf(line, sizeof line, "%lld,%zu,%d\n",
                          static_cast<long long>(t.id), i, t.truth[i]);
            buf += line;
        }
    open_out(path) << buf;
}

LabeledTrajectory downsample(const LabeledTrajectory& traj, double keep_rate) {
    std::size_t step = 0;
    if (keep_rate == 0.5) step = 2;
    else if (keep_rate == 0.25) step = 4;
    else if (keep_rate == 0.125) step = 8;
    else throw InvalidConfig("keep_rate must be 0.5, 0.25, or 0.125");

    LabeledTrajectory out;
    out.id = traj.id;
    for (std::size_t i = 0; i < traj.points.size(); i += step) {
        out.points.push_back(traj.points[i]);
        if (i < traj.truth.size()) out.truth.push_back(traj.truth[i]);
    }
    return out;
}

SplitResult split(Dataset dataset, std::uint64_t seed) {
    if (dataset.size() < 10)
        throw TooSmall("split requires at least 10 trajectories");
    std::mt19937_64 rng(seed);
    std::shuffle(dataset.begin(), dataset.end(), rng);

    const std::size_t n = dataset.size();
    const std::size_t n_val = n * 2 / 10;
    const std::size_t n_test = n / 10;
    const std::size_t n_train = n - n_val - n_test;

    SplitResult r;
    r.train.assign(dataset.begin(), dataset.begin() + n_train);
    r.val.assign(dataset.begin() + n_train, dataset.begin() + n_train + n_val);
    r.test.assign(dataset.begin() + n_train + n_val, dataset.end());
    return r;
}

SynthWorld synth_generate(const SynthConfig& cfg) {
    cfg.validate();
    WorldBuilder wb(cfg);
    if (cfg.style == NetworkStyle::Grid) wb.build_grid();
    else wb.build_radial();

    SynthWorld world;
    world.segments = wb.segments;
    const auto graph = LinkConnectionGraph::build(wb.segments);

    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<int> route_len(cfg.min_route_segments,
                                                 cfg.max_route_segments);
    std::uniform_int_distribution<int> start_seg(0, graph.size() - 1);
    std::normal_distribution<double> noise(0.0, 1.0);

    auto seg_length = [&](int id) {
        const auto& s = graph.segment(id);
        return haversine_m(s.start(), s.end());
    };

    for (int ti = 0; ti < cfg.trajectory_count; ++ti) {
        // Random walk over directed segments; U-turns only as a last resort.
        std::vector<int> route{start_seg(rng)};
        const int want = route_len(rng);
        while (static_cast<int>(route.size()) < want) {
            const int cur = route.back();
            const auto& outs = graph.out_edges(cur);
            std::vector<int> forward;
            for (int nxt : outs) {
                const auto& a = graph.segment(cur);
                const auto& b = graph.segment(nxt);
                if (!(b.from_node == a.to_node && b.to_node == a.from_node))
                    forward.push_back(nxt);
            }
            const auto& pool = forward.empty() ? outs : forward;
            if (pool.empty()) break;
            std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
            route.push_back(pool[pick(rng)]);
        }

        std::vector<double> cum{0.0};
        for (int id : route) cum.push_back(cum.back() + seg_length(id));
        const double total = cum.back();

        LabeledTrajectory traj;
        traj.id = ti;
        const double spacing = cfg.speed_mps * cfg.period_s;
        std::size_t seg_idx = 0;
        for (int n = 0;; ++n) {
            const double d = n * spacing;
            if (d >= total) break;
            while (d >= cum[seg_idx + 1]) ++seg_idx;
            const auto& seg = graph.segment(route[seg_idx]);
            const double frac = (d - cum[seg_idx]) / (cum[seg_idx + 1] - cum[seg_idx]);
            const double x0 = wb.proj.east_offset_m(seg.start());
            const double y0 = wb.proj.north_offset_m(seg.start());
            const double x1 = wb.proj.east_offset_m(seg.end());
            const double y1 = wb.proj.north_offset_m(seg.end());
            double x = x0 + frac * (x1 - x0);
            double y = y0 + frac * (y1 - y0);
            if (cfg.noise_sigma_m > 0) {
                const double lim = 4.0 * cfg.noise_sigma_m;
                x += std::clamp(noise(rng) * cfg.noise_sigma_m, -lim, lim);
                y += std::clamp(noise(rng) * cfg.noise_sigma_m, -lim, lim);
            }
            GeoPoint p = wb.proj.point_at(x, y);
            p.time = static_cast<std::int64_t>(std::llround(n * cfg.period_s));
            traj.points.push_back(p);
            traj.truth.push_back(route[seg_idx]);
        }
        if (!traj.points.empty()) world.trajectories.push_back(std::move(traj));
    }
    return world;
}

void write_dataset(const std::string& out_dir, const SynthWorld& world,
                   const SynthConfig& cfg) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    save_road_csv((dir / "roads.csv").string(), world.segments);
    save_trajectories((dir / "trajectories.csv").string(), world.trajectories);
    save_labels((dir / "labels.csv").string(), world.trajectories);
    DatasetManifest m;
    m.road_csv = "roads.csv";
    m.trajectory_csv = "trajectories.csv";
    m.labels_csv = "labels.csv";
    m.seed = cfg.seed;
    m.labeler = "generator";
    write_manifest((dir / "manifest.json").string(), m);
}

DatasetManifest read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    DatasetManifest m;
    m.road_csv = j.at("road_csv").get<std::string>();
    m.trajectory_csv = j.at("trajectory_csv").get<std::string>();
    m.labels_csv = j.value("labels_csv", std::string{});
    m.seed = j.at("seed").get<std::uint64_t>();
    m.labeler = j.value("labeler", std::string{});
    return m;
}

void write_manifest(const std::string& path, const DatasetManifest& m) {
    nlohmann::json j{{"road_csv", m.road_csv},
                     {"trajectory_csv", m.trajectory_csv},
                     {"labels_csv", m.labels_csv},
                     {"seed", m.seed},
                     {"labeler", m.labeler}};
    open_out(path) << j.dump(2) << '\n';
}

Dataset hmm_label(Dataset trajs, const LinkConnectionGraph& roads,
                  const HmmConfig& cfg) {
    for (auto& t : trajs) t.truth = HmmOnlineMatcher::match(t.points, roads, cfg);
    return trajs;
}

}  // namespace rlomm
