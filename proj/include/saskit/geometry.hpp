#pragma once

#include <array>
#include <string>
#include <vector>

#include "saskit/matrix.hpp"
#include "saskit/rng.hpp"

namespace saskit {

inline double dist2(const Vec3& a, const Vec3& b) {
    const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
    return dx * dx + dy * dy + dz * dz;
}

inline double dist(const Vec3& a, const Vec3& b) { return std::sqrt(dist2(a, b)); }

inline Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 add(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 scale(const Vec3& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }
inline double norm(const Vec3& a) { return std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]); }

inline Vec3 rotate(const Matrix& r, const Vec3& p) {
    return {r(0, 0) * p[0] + r(0, 1) * p[1] + r(0, 2) * p[2],
            r(1, 0) * p[0] + r(1, 1) * p[1] + r(1, 2) * p[2],
            r(2, 0) * p[0] + r(2, 1) * p[1] + r(2, 2) * p[2]};
}

/// Raw 3D points, optionally tagged with a domain / provenance label.
struct PointCloud {
    std::vector<Vec3> points;
    std::string source_tag;

    int size() const { return static_cast<int>(points.size()); }
};

enum class CloudFormat { xyz_ascii, ply_ascii };

/// Parses a point cloud from disk. XYZ: one point per line, whitespace
/// separated, extra columns ignored. PLY: ascii 1.0 only, reads the x/y/z
/// properties of the vertex element and skips everything else.
/// Throws std::runtime_error with a line number on malformed rows, and on
/// clouds with fewer than 4 points.
PointCloud load_cloud(const std::string& path, CloudFormat format);

/// Centers the cloud at the origin and scales the farthest point to radius 1.
/// Throws if all points coincide.
PointCloud normalize_unit_sphere(const PointCloud& cloud);

Vec3 centroid(const std::vector<Vec3>& points);

/// Index of the point nearest the centroid (ties to the smallest index).
/// Used as the default FPS seed so runs are deterministic without config.
int default_fps_seed(const PointCloud& cloud);

/// Greedy farthest point sampling. The first selected index is seed_index;
/// each subsequent pick maximizes the minimum distance to the already
/// selected set, ties broken by smallest index.
std::vector<int> farthest_point_sample(const PointCloud& cloud, int count, int seed_index);

/// G patch tokens: FPS centers, per-patch point index lists of size S, and
/// a G x d feature matrix produced by encode_patch.
struct TokenSet {
    std::vector<Vec3> centers;
    std::vector<int> center_indices;          // into the parent cloud
    std::vector<std::vector<int>> patches;    // each exactly S indices, center first
    Matrix features;                          // G x d

    int count() const { return static_cast<int>(centers.size()); }
    int patch_size() const { return patches.empty() ? 0 : static_cast<int>(patches[0].size()); }
};

/// Groups the S nearest points around each center (center always included,
/// remaining slots filled by ascending distance, ties by smallest index)
/// and fills in patch features.
TokenSet knn_group(const PointCloud& cloud, const std::vector<int>& center_indices,
                   int patch_size, int feature_dim = 256);

/// Deterministic stand-in for a learned patch encoder: a fixed seeded random
/// projection of [mean, covariance upper triangle, min, max] of the
/// center-relative patch points. Translation-invariant and invariant to the
/// order of patch members; rotations of the whole cloud do change it.
std::vector<double> encode_patch(const std::vector<Vec3>& patch_points, const Vec3& center,
                                 int dim);

/// Center-relative coordinates of one patch as an S x 3 matrix.
Matrix patch_relative_points(const PointCloud& cloud, const TokenSet& tokens, int token);

}  // namespace saskit
