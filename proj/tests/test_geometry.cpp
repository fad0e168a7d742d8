#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "saskit/geometry.hpp"
#include "saskit/rng.hpp"

using namespace saskit;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path);
    out << content;
    return path.string();
}

PointCloud random_cloud(int n, uint64_t seed) {
    Rng rng(seed);
    PointCloud cloud;
    for (int i = 0; i < n; ++i)
        cloud.points.push_back({rng.normal(), rng.normal(), rng.normal()});
    return cloud;
}

}  // namespace

TEST_CASE("load_cloud xyz parses points in file order") {
    const auto path = write_temp("pts.xyz", "0 0 0\n1 0 0\n0 1 0\n0 0 1\n");
    const PointCloud cloud = load_cloud(path, CloudFormat::xyz_ascii);
    REQUIRE(cloud.size() == 4);
    CHECK(cloud.points[1][0] == 1.0);
    CHECK(cloud.points[3][2] == 1.0);
}

TEST_CASE("load_cloud xyz ignores extra columns and blank lines") {
    const auto path = write_temp("pts_extra.xyz", "0 0 0 9 9\n\n1 0 0 1\n0 1 0\n0 0 1\n");
    CHECK(load_cloud(path, CloudFormat::xyz_ascii).size() == 4);
}

TEST_CASE("load_cloud xyz reports the malformed line") {
    const auto path = write_temp("bad.xyz", "0 0 0\n1 2\n0 1 0\n0 0 1\n");
    CHECK_THROWS_WITH_AS(load_cloud(path, CloudFormat::xyz_ascii),
                         doctest::Contains(":2:"), std::runtime_error);
}

TEST_CASE("load_cloud rejects clouds below 4 points") {
    const auto path = write_temp("small.xyz", "0 0 0\n1 0 0\n0 1 0\n");
    CHECK_THROWS_AS(load_cloud(path, CloudFormat::xyz_ascii), std::runtime_error);
}

TEST_CASE("load_cloud ply reads a unit cube bit-exactly") {
    std::string ply = "ply\nformat ascii 1.0\ncomment unit cube\nelement vertex 8\n"
                      "property float x\nproperty float y\nproperty float z\nend_header\n";
    std::vector<Vec3> corners;
    for (int i = 0; i < 8; ++i) {
        const Vec3 c{static_cast<double>((i >> 2) & 1), static_cast<double>((i >> 1) & 1),
                     static_cast<double>(i & 1)};
        corners.push_back(c);
        ply += std::to_string(c[0]) + " " + std::to_string(c[1]) + " " + std::to_string(c[2]) +
               "\n";
    }
    const PointCloud cloud = load_cloud(write_temp("cube.ply", ply), CloudFormat::ply_ascii);
    REQUIRE(cloud.size() == 8);
    for (int i = 0; i < 8; ++i)
        for (int a = 0; a < 3; ++a) CHECK(cloud.points[i][a] == corners[i][a]);
}

TEST_CASE("load_cloud ply skips non-vertex elements and extra properties") {
    const std::string ply =
        "ply\nformat ascii 1.0\nelement vertex 4\nproperty float x\nproperty float y\n"
        "property float z\nproperty float confidence\nelement face 1\n"
        "property list uchar int vertex_indices\nend_header\n"
        "0 0 0 0.5\n1 0 0 0.5\n0 1 0 0.5\n0 0 1 0.5\n3 0 1 2\n";
    const PointCloud cloud = load_cloud(write_temp("fx.ply", ply), CloudFormat::ply_ascii);
    REQUIRE(cloud.size() == 4);
    CHECK(cloud.points[1][0] == 1.0);
}

TEST_CASE("normalize_unit_sphere centers and scales symmetric cubes") {
    PointCloud cloud;
    for (int i = 0; i < 8; ++i)
        cloud.points.push_back({(i & 1) ? 5.0 : -5.0, (i & 2) ? 5.0 : -5.0,
                                (i & 4) ? 5.0 : -5.0});
    const PointCloud out = normalize_unit_sphere(cloud);
    const Vec3 c = centroid(out.points);
    CHECK(norm(c) < 1e-9);
    for (const auto& p : out.points) CHECK(norm(p) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("normalize_unit_sphere rejects coincident points") {
    PointCloud cloud;
    for (int i = 0; i < 10; ++i) cloud.points.push_back({2.0, -1.0, 3.0});
    CHECK_THROWS_AS(normalize_unit_sphere(cloud), std::runtime_error);
}

TEST_CASE("normalize_unit_sphere preserves pairwise distance ratios") {
    const PointCloud cloud = random_cloud(1024, 99);
    const PointCloud out = normalize_unit_sphere(cloud);
    const double ref = dist(cloud.points[0], cloud.points[1]) /
                       dist(out.points[0], out.points[1]);
    for (int i = 0; i < 60; ++i) {
        const int a = (i * 37) % 1024, b = (i * 101 + 7) % 1024;
        if (a == b) continue;
        const double ratio = dist(cloud.points[a], cloud.points[b]) /
                             dist(out.points[a], out.points[b]);
        CHECK(ratio == doctest::Approx(ref).epsilon(1e-9));
    }
}

TEST_CASE("normalize_unit_sphere is idempotent") {
    const PointCloud once = normalize_unit_sphere(random_cloud(256, 5));
    const PointCloud twice = normalize_unit_sphere(once);
    for (int i = 0; i < once.size(); ++i)
        CHECK(dist(once.points[i], twice.points[i]) < 1e-9);
}

TEST_CASE("fps picks the farthest collinear point") {
    PointCloud cloud;
    for (double x : {0.0, 1.0, 2.0, 3.0, 10.0}) cloud.points.push_back({x, 0.0, 0.0});
    CHECK(farthest_point_sample(cloud, 2, 0) == std::vector<int>{0, 4});
}

TEST_CASE("fps with count == size is a permutation") {
    const PointCloud cloud = random_cloud(64, 3);
    auto sel = farthest_point_sample(cloud, 64, 7);
    std::sort(sel.begin(), sel.end());
    for (int i = 0; i < 64; ++i) CHECK(sel[i] == i);
}

TEST_CASE("fps matches the exhaustive greedy oracle") {
    for (uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        const PointCloud cloud = normalize_unit_sphere(random_cloud(256, seed));
        const int root = default_fps_seed(cloud);
        CHECK(farthest_point_sample(cloud, 64, root) ==
              oracle::fps_bruteforce(cloud.points, 64, root));
    }
}

TEST_CASE("fps rejects count above the point count") {
    const PointCloud cloud = random_cloud(16, 1);
    CHECK_THROWS_AS(farthest_point_sample(cloud, 17, 0), std::invalid_argument);
}

TEST_CASE("knn_group with S=1 keeps only the center") {
    const PointCloud cloud = random_cloud(32, 11);
    const TokenSet tokens = knn_group(cloud, {3, 7, 19}, 1, 16);
    for (int t = 0; t < 3; ++t) {
        REQUIRE(tokens.patches[t].size() == 1);
        CHECK(tokens.patches[t][0] == tokens.center_indices[t]);
    }
}

TEST_CASE("knn_group matches the sort-all oracle on a 1d grid") {
    PointCloud cloud;
    for (int i = -8; i <= 8; ++i) cloud.points.push_back({static_cast<double>(i), 0.0, 0.0});
    const int center = 8;  // point at x = 0
    const TokenSet tokens = knn_group(cloud, {center}, 3, 16);
    const auto expected = oracle::knn_bruteforce(cloud.points, cloud.points[center], 3);
    std::vector<int> got = tokens.patches[0];
    std::sort(got.begin(), got.end());
    std::vector<int> want = expected;
    std::sort(want.begin(), want.end());
    CHECK(got == want);
}

TEST_CASE("knn_group produces G=64 patches of size 32 on a 1024-point cloud") {
    const PointCloud cloud = normalize_unit_sphere(random_cloud(1024, 21));
    const auto fps = farthest_point_sample(cloud, 64, default_fps_seed(cloud));
    const TokenSet tokens = knn_group(cloud, fps, 32, 32);
    REQUIRE(tokens.count() == 64);
    for (const auto& patch : tokens.patches) CHECK(patch.size() == 32);
}

TEST_CASE("encode_patch of a degenerate patch is the zero projection") {
    const Vec3 center{0.3, -0.2, 0.9};
    const std::vector<Vec3> patch(8, center);
    for (double v : encode_patch(patch, center, 16)) CHECK(v == 0.0);
}

TEST_CASE("encode_patch is deterministic across calls") {
    Rng rng(77);
    std::vector<Vec3> patch;
    for (int i = 0; i < 16; ++i) patch.push_back({rng.normal(), rng.normal(), rng.normal()});
    const Vec3 center = patch[0];
    const auto a = encode_patch(patch, center, 64);
    const auto b = encode_patch(patch, center, 64);
    CHECK(a == b);
}

TEST_CASE("encode_patch is translation invariant") {
    Rng rng(78);
    std::vector<Vec3> patch;
    for (int i = 0; i < 16; ++i)
        patch.push_back({rng.uniform(), rng.uniform(), rng.uniform()});
    const Vec3 center = patch[3];
    const Vec3 shift{12.5, -3.25, 8.0};
    std::vector<Vec3> moved;
    for (const auto& p : patch) moved.push_back(add(p, shift));
    const auto a = encode_patch(patch, center, 32);
    const auto b = encode_patch(moved, add(center, shift), 32);
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

TEST_CASE("encode_patch is invariant to patch member order") {
    Rng rng(79);
    std::vector<Vec3> patch;
    for (int i = 0; i < 12; ++i) patch.push_back({rng.normal(), rng.normal(), rng.normal()});
    const Vec3 center{0.1, 0.2, 0.3};
    const auto a = encode_patch(patch, center, 32);
    std::vector<Vec3> shuffled = patch;
    rng.shuffle(shuffled);
    const auto b = encode_patch(shuffled, center, 32);
    for (size_t i = 0; i < a.size(); ++i)
        CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

TEST_CASE("encode_patch rejects dim below 16") {
    CHECK_THROWS_AS(encode_patch({{0, 0, 0}}, {0, 0, 0}, 8), std::invalid_argument);
}

TEST_CASE("encode_patch is coordinate-based: rotations change features") {
    Rng rng(80);
    std::vector<Vec3> patch;
    for (int i = 0; i < 16; ++i) patch.push_back({rng.normal(), rng.normal(), rng.normal()});
    const Vec3 center = patch[0];
    const Matrix r = random_rotation(rng);
    std::vector<Vec3> turned;
    for (const auto& p : patch) turned.push_back(rotate(r, p));
    const auto a = encode_patch(patch, center, 32);
    const auto b = encode_patch(turned, rotate(r, center), 32);
    double diff = 0.0;
    for (size_t i = 0; i < a.size(); ++i) diff = std::max(diff, std::abs(a[i] - b[i]));
    CHECK(diff > 1e-6);
}
