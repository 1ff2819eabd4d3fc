#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <random>

#include "rlomm/roadnet.hpp"

using namespace rlomm;

namespace {

const GridSpec kRef({40.0, 116.3, 0}, 1.0, 1, 1);

RoadSegment seg(int id, double x0, double y0, double x1, double y1) {
    RoadSegment s;
    s.id = id;
    s.polyline = {kRef.point_at(x0, y0), kRef.point_at(x1, y1)};
    return s;
}

}  // namespace

TEST_CASE("shared endpoint yields a directed edge only") {
    auto g = LinkConnectionGraph::build({seg(0, 0, 0, 100, 0), seg(1, 100, 0, 200, 0)});
    CHECK(g.out_edges(0) == std::vector<int>{1});
    CHECK(g.out_edges(1).empty());
    CHECK(g.in_edges(1) == std::vector<int>{0});
    CHECK(g.in_edges(0).empty());
}

TEST_CASE("single segment has no edges") {
    auto g = LinkConnectionGraph::build({seg(0, 0, 0, 100, 0)});
    CHECK(g.size() == 1);
    CHECK(g.out_edges(0).empty());
}

TEST_CASE("a loop segment gets no implicit self-edge") {
    RoadSegment loop;
    loop.id = 0;
    loop.polyline = {kRef.point_at(0, 0), kRef.point_at(50, 0), kRef.point_at(0, 0)};
    auto g = LinkConnectionGraph::build({loop});
    CHECK(g.out_edges(0).empty());
}

TEST_CASE("duplicate and non-dense ids are rejected") {
    CHECK_THROWS_AS(
        (void)LinkConnectionGraph::build({seg(0, 0, 0, 1, 0), seg(0, 2, 0, 3, 0)}),
        DuplicateId);
    CHECK_THROWS_AS((void)LinkConnectionGraph::build({}), EmptyNetwork);
}

TEST_CASE("point to segment distance") {
    const auto s = seg(0, 0, 0, 100, 0);
    CHECK(point_segment_distance_m(kRef.point_at(30, 0), s, kRef) ==
          doctest::Approx(0.0).epsilon(1e-6));
    CHECK(point_segment_distance_m(kRef.point_at(50, 10), s, kRef) ==
          doctest::Approx(10.0).epsilon(0.005));
    // Beyond the end: clamped to the endpoint.
    CHECK(point_segment_distance_m(kRef.point_at(103, 4), s, kRef) ==
          doctest::Approx(5.0).epsilon(0.005));
}

TEST_CASE("candidates are the nearest segments in ascending order") {
    auto g = LinkConnectionGraph::build({seg(0, 0, 5, 100, 5), seg(1, 0, 10, 100, 10),
                                         seg(2, 0, 20, 100, 20)});
    const auto p = kRef.point_at(50, 0);
    auto c = g.candidates(p, 2);
    REQUIRE(c.size() == 2);
    CHECK(c[0].segment_id == 0);
    CHECK(c[0].distance_m == doctest::Approx(5.0).epsilon(0.01));
    CHECK(c[1].segment_id == 1);

    CHECK(g.candidates(p, 10).size() == 3);
}

TEST_CASE("equidistant candidates break ties toward the lower id") {
    auto g = LinkConnectionGraph::build({seg(1, 0, 7, 100, 7), seg(0, 0, -7, 100, -7)});
    auto c = g.candidates(kRef.point_at(50, 0), 1);
    REQUIRE(c.size() == 1);
    CHECK(c[0].segment_id == 0);
}

TEST_CASE("candidate retrieval equals a brute-force scan") {
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> pos(0.0, 2000.0);
    std::vector<RoadSegment> segs;
    for (int i = 0; i < 1000; ++i) {
        const double x = pos(rng), y = pos(rng);
        segs.push_back(seg(i, x, y, x + 40, y + 25));
    }
    auto g = LinkConnectionGraph::build(segs);
    for (int trial = 0; trial < 40; ++trial) {
        const GeoPoint p = kRef.point_at(pos(rng), pos(rng));
        auto fast = g.candidates(p, 10);

        std::vector<Candidate> slow;
        for (const auto& s : segs)
            slow.push_back({s.id, point_segment_distance_m(p, s, kRef)});
        std::sort(slow.begin(), slow.end(), [](const auto& a, const auto& b) {
            return a.distance_m != b.distance_m ? a.distance_m < b.distance_m
                                                : a.segment_id < b.segment_id;
        });
        slow.resize(10);

        REQUIRE(fast.size() == slow.size());
        for (std::size_t i = 0; i < fast.size(); ++i) {
            CHECK(fast[i].segment_id == slow[i].segment_id);
            CHECK(fast[i].distance_m == doctest::Approx(slow[i].distance_m));
        }
    }
}

TEST_CASE("connectivity degree is hop count clamped at one") {
    // 0 -> 1 -> 2, and isolated 3.
    auto g = LinkConnectionGraph::build({seg(0, 0, 0, 100, 0), seg(1, 100, 0, 200, 0),
                                         seg(2, 200, 0, 300, 0), seg(3, 0, 500, 9, 500)});
    CHECK(g.connectivity_delta(0, 0, 20) == 1);
    CHECK(g.connectivity_delta(0, 1, 20) == 1);
    CHECK(g.connectivity_delta(0, 2, 20) == 2);
    CHECK_FALSE(g.connectivity_delta(0, 3, 20).has_value());
    CHECK_FALSE(g.connectivity_delta(2, 0, 20).has_value());
    CHECK(g.hops(0, 0, 20) == 0);
    CHECK(g.hops(0, 2, 20) == 2);
    CHECK_THROWS_AS((void)g.connectivity_delta(0, 99, 20), UnknownSegment);
}

TEST_CASE("BFS hop count equals exhaustive path enumeration on small graphs") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 30; ++trial) {
        // Random chain-with-shortcuts layout over <= 12 segments.
        const int n = 12;
        std::vector<RoadSegment> segs;
        std::uniform_int_distribution<int> coin(0, 3);
        for (int i = 0; i < n; ++i) {
            // Segments share endpoints at integer nodes; add skip connections.
            const double a = i * 100.0;
            const double b = (coin(rng) == 0 ? (i + 2) : (i + 1)) * 100.0;
            segs.push_back(seg(i, a, 0, b, 0));
        }
        auto g = LinkConnectionGraph::build(segs);

        // Exhaustive DFS enumeration up to the cutoff.
        const int cutoff = 20;
        auto enumerate = [&](int u, int v) -> std::optional<int> {
            int best = -1;
            std::vector<std::pair<int, int>> stack{{u, 0}};
            while (!stack.empty()) {
                auto [cur, depth] = stack.back();
                stack.pop_back();
                if (cur == v && (best < 0 || depth < best)) best = depth;
                if (depth >= cutoff) continue;
                for (int nxt : g.out_edges(cur))
                    if (depth + 1 <= cutoff && (best < 0 || depth + 1 < best))
                        stack.push_back({nxt, depth + 1});
            }
            if (best < 0) return std::nullopt;
            return best;
        };

        std::uniform_int_distribution<int> pickn(0, n - 1);
        for (int q = 0; q < 10; ++q) {
            const int u = pickn(rng), v = pickn(rng);
            CHECK(g.hops(u, v, cutoff) == enumerate(u, v));
        }
    }
}

TEST_CASE("feature normalization spans [0,1] and degenerates to zero") {
    // Two segments spanning the full box hit the extremes.
    auto g = LinkConnectionGraph::build({seg(0, 0, 0, 400, 400), seg(1, 400, 400, 0, 0)});
    GridSpec spec({40.0, 116.3, 0}, 5.0, 100, 100);
    auto f = segment_features(g, spec);
    REQUIRE(f.size() == 2);
    for (const auto& row : f)
        for (double v : row) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    CHECK(f[0][4] == doctest::Approx(0.0));  // start lat at the min
    CHECK(f[0][6] == doctest::Approx(1.0));  // end lat at the max

    // A single segment has degenerate ranges everywhere except endpoints span.
    auto g1 = LinkConnectionGraph::build({seg(0, 10, 10, 10, 10.0)});
    auto f1 = segment_features(g1, spec);
    for (double v : f1[0]) CHECK(v == doctest::Approx(0.0));
}

TEST_CASE("road CSV round trip") {
    namespace fs = std::filesystem;
    const auto path = (fs::temp_directory_path() / "roads_rt.csv").string();
    std::vector<RoadSegment> segs{seg(0, 0, 0, 100, 0), seg(1, 100, 0, 200, 50)};
    segs[0].from_node = 10;
    segs[0].to_node = 11;
    segs[1].from_node = 11;
    segs[1].to_node = 12;
    save_road_csv(path, segs);
    auto back = load_road_csv(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].id == 0);
    CHECK(back[0].from_node == 10);
    CHECK(back[1].to_node == 12);
    CHECK(back[1].polyline.size() == 2);
    CHECK(back[1].polyline[1].lat == doctest::Approx(segs[1].polyline[1].lat));
    CHECK(back[1].polyline[1].lon == doctest::Approx(segs[1].polyline[1].lon));
    fs::remove(path);
}
