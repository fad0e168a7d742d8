#include "saskit/geometry.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>

namespace saskit {

namespace {

std::runtime_error parse_error(const std::string& path, int line_no, const std::string& what) {
    std::ostringstream os;
    os << path << ":" << line_no << ": " << what;
    return std::runtime_error(os.str());
}

bool parse_point_row(const std::string& line, Vec3& out) {
    std::istringstream is(line);
    return static_cast<bool>(is >> out[0] >> out[1] >> out[2]);
}

bool is_blank(const std::string& line) {
    return line.find_first_not_of(" \t\r\n") == std::string::npos;
}

PointCloud load_xyz(const std::string& path, std::ifstream& in) {
    PointCloud cloud;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) continue;
        Vec3 p;
        if (!parse_point_row(line, p))
            throw parse_error(path, line_no, "expected at least 3 numeric columns");
        if (!std::isfinite(p[0]) || !std::isfinite(p[1]) || !std::isfinite(p[2]))
            throw parse_error(path, line_no, "non-finite coordinate");
        cloud.points.push_back(p);
    }
    return cloud;
}

struct PlyElement {
    std::string name;
    long count = 0;
    std::vector<std::string> property_names;  // empty name for list properties
};

PointCloud load_ply(const std::string& path, std::ifstream& in) {
    std::string line;
    int line_no = 0;

    auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            ++line_no;
            if (!is_blank(line)) return true;
        }
        return false;
    };

    if (!next_line() || line.substr(0, 3) != "ply")
        throw parse_error(path, line_no, "missing ply magic");
    if (!next_line() || line.find("format ascii 1.0") == std::string::npos)
        throw parse_error(path, line_no, "only 'format ascii 1.0' is supported");

    std::vector<PlyElement> elements;
    while (next_line()) {
        std::istringstream is(line);
        std::string keyword;
        is >> keyword;
        if (keyword == "comment" || keyword == "obj_info") continue;
        if (keyword == "element") {
            PlyElement e;
            if (!(is >> e.name >> e.count))
                throw parse_error(path, line_no, "malformed element declaration");
            elements.push_back(e);
        } else if (keyword == "property") {
            if (elements.empty()) throw parse_error(path, line_no, "property before element");
            std::string type;
            is >> type;
            if (type == "list") {
                elements.back().property_names.push_back("");
            } else {
                std::string name;
                if (!(is >> name)) throw parse_error(path, line_no, "malformed property");
                elements.back().property_names.push_back(name);
            }
        } else if (keyword == "end_header") {
            break;
        } else {
            throw parse_error(path, line_no, "unknown header keyword '" + keyword + "'");
        }
    }

    const auto vertex_it = std::find_if(elements.begin(), elements.end(),
                                        [](const PlyElement& e) { return e.name == "vertex"; });
    if (vertex_it == elements.end())
        throw parse_error(path, line_no, "no vertex element in header");

    int ix = -1, iy = -1, iz = -1;
    for (size_t i = 0; i < vertex_it->property_names.size(); ++i) {
        const std::string& n = vertex_it->property_names[i];
        if (n == "x") ix = static_cast<int>(i);
        if (n == "y") iy = static_cast<int>(i);
        if (n == "z") iz = static_cast<int>(i);
    }
    if (ix < 0 || iy < 0 || iz < 0)
        throw parse_error(path, line_no, "vertex element lacks x/y/z properties");

    PointCloud cloud;
    for (const auto& element : elements) {
        if (element.name == "vertex") {
            for (long r = 0; r < element.count; ++r) {
                if (!next_line()) throw parse_error(path, line_no, "unexpected end of vertex data");
                std::istringstream is(line);
                std::vector<double> values;
                double v;
                while (is >> v) values.push_back(v);
                const int needed = std::max(ix, std::max(iy, iz)) + 1;
                if (static_cast<int>(values.size()) < needed)
                    throw parse_error(path, line_no, "vertex row has too few values");
                cloud.points.push_back({values[ix], values[iy], values[iz]});
            }
            break;  // later elements are ignored
        }
        for (long r = 0; r < element.count; ++r) {
            if (!next_line()) throw parse_error(path, line_no, "unexpected end of element data");
        }
    }
    return cloud;
}

}  // namespace

PointCloud load_cloud(const std::string& path, CloudFormat format) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    PointCloud cloud =
        format == CloudFormat::xyz_ascii ? load_xyz(path, in) : load_ply(path, in);
    if (cloud.size() < 4)
        throw std::runtime_error(path + ": cloud has fewer than 4 points");
    return cloud;
}

Vec3 centroid(const std::vector<Vec3>& points) {
    Vec3 c{0, 0, 0};
    for (const auto& p : points) {
        c[0] += p[0];
        c[1] += p[1];
        c[2] += p[2];
    }
    const double inv = 1.0 / static_cast<double>(points.size());
    return {c[0] * inv, c[1] * inv, c[2] * inv};
}

PointCloud normalize_unit_sphere(const PointCloud& cloud) {
    if (cloud.size() < 2)
        throw std::invalid_argument("normalize_unit_sphere: need at least 2 points");
    const Vec3 c = centroid(cloud.points);
    double radius = 0.0;
    double span = 0.0;
    for (const auto& p : cloud.points) {
        radius = std::max(radius, norm(sub(p, c)));
        span = std::max({span, std::abs(p[0]), std::abs(p[1]), std::abs(p[2])});
    }
    if (radius <= 1e-12 * std::max(1.0, span))
        throw std::runtime_error("normalize_unit_sphere: degenerate cloud (zero radius)");
    PointCloud out;
    out.source_tag = cloud.source_tag;
    out.points.reserve(cloud.points.size());
    const double inv = 1.0 / radius;
    for (const auto& p : cloud.points) out.points.push_back(scale(sub(p, c), inv));
    return out;
}

// Distance ties resolve to the smallest index. A relative tolerance makes
// the tie detection robust to the ~1e-16 noise a rigid rotation leaves on
// recomputed distances; without it, shapes whose points are equidistant from
// the centroid (spheres) re-tokenize differently after rotation.
namespace {
constexpr double kTieRelTolerance = 1e-9;
}

int default_fps_seed(const PointCloud& cloud) {
    if (cloud.points.empty()) throw std::invalid_argument("default_fps_seed: empty cloud");
    const Vec3 c = centroid(cloud.points);
    double best_d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < cloud.size(); ++i)
        best_d = std::min(best_d, dist2(cloud.points[i], c));
    const double threshold = best_d * (1.0 + kTieRelTolerance) + 1e-30;
    for (int i = 0; i < cloud.size(); ++i)
        if (dist2(cloud.points[i], c) <= threshold) return i;
    return 0;
}

std::vector<int> farthest_point_sample(const PointCloud& cloud, int count, int seed_index) {
    const int n = cloud.size();
    if (count < 1 || count > n)
        throw std::invalid_argument("farthest_point_sample: count out of range");
    if (seed_index < 0 || seed_index >= n)
        throw std::invalid_argument("farthest_point_sample: seed index out of range");

    std::vector<int> selected;
    selected.reserve(count);
    selected.push_back(seed_index);
    std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
    std::vector<bool> chosen(n, false);
    chosen[seed_index] = true;

    int current = seed_index;
    while (static_cast<int>(selected.size()) < count) {
        for (int i = 0; i < n; ++i)
            min_d2[i] = std::min(min_d2[i], dist2(cloud.points[i], cloud.points[current]));
        double best_d = -1.0;
        for (int i = 0; i < n; ++i)
            if (!chosen[i]) best_d = std::max(best_d, min_d2[i]);
        const double threshold = best_d * (1.0 - kTieRelTolerance);
        int best = -1;
        for (int i = 0; i < n; ++i) {
            if (!chosen[i] && min_d2[i] >= threshold) {  // ties keep the smallest index
                best = i;
                break;
            }
        }
        selected.push_back(best);
        chosen[best] = true;
        current = best;
    }
    return selected;
}

namespace {

constexpr int kStatsDim = 15;  // mean(3) + cov upper triangle(6) + min(3) + max(3)
constexpr uint64_t kProjectionSeed = 0x5341531ULL;

// One fixed projection matrix per output dimension, immutable once built.
const Matrix& patch_projection(int dim) {
    static std::mutex mu;
    static std::map<int, Matrix> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(dim);
    if (it != cache.end()) return it->second;
    Rng rng(kProjectionSeed);
    Matrix proj(dim, kStatsDim);
    const double s = 1.0 / std::sqrt(static_cast<double>(kStatsDim));
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < kStatsDim; ++j) proj(i, j) = rng.normal() * s;
    return cache.emplace(dim, std::move(proj)).first->second;
}

}  // namespace

std::vector<double> encode_patch(const std::vector<Vec3>& patch_points, const Vec3& center,
                                 int dim) {
    if (dim < 16) throw std::invalid_argument("encode_patch: dim must be >= 16");
    if (patch_points.empty()) throw std::invalid_argument("encode_patch: empty patch");

    const int s = static_cast<int>(patch_points.size());
    std::vector<Vec3> rel(patch_points.size());
    for (size_t i = 0; i < patch_points.size(); ++i) rel[i] = sub(patch_points[i], center);

    Vec3 mean{0, 0, 0};
    Vec3 lo = rel[0], hi = rel[0];
    for (const auto& q : rel) {
        for (int a = 0; a < 3; ++a) {
            mean[a] += q[a];
            lo[a] = std::min(lo[a], q[a]);
            hi[a] = std::max(hi[a], q[a]);
        }
    }
    for (int a = 0; a < 3; ++a) mean[a] /= s;

    double cov[3][3] = {};
    for (const auto& q : rel) {
        const Vec3 d = sub(q, mean);
        for (int a = 0; a < 3; ++a)
            for (int b = a; b < 3; ++b) cov[a][b] += d[a] * d[b];
    }
    for (int a = 0; a < 3; ++a)
        for (int b = a; b < 3; ++b) cov[a][b] /= s;

    std::vector<double> stats(kStatsDim);
    stats[0] = mean[0];
    stats[1] = mean[1];
    stats[2] = mean[2];
    stats[3] = cov[0][0];
    stats[4] = cov[0][1];
    stats[5] = cov[0][2];
    stats[6] = cov[1][1];
    stats[7] = cov[1][2];
    stats[8] = cov[2][2];
    stats[9] = lo[0];
    stats[10] = lo[1];
    stats[11] = lo[2];
    stats[12] = hi[0];
    stats[13] = hi[1];
    stats[14] = hi[2];

    return matvec(patch_projection(dim), stats);
}

TokenSet knn_group(const PointCloud& cloud, const std::vector<int>& center_indices,
                   int patch_size, int feature_dim) {
    const int n = cloud.size();
    if (patch_size < 1 || patch_size > n)
        throw std::invalid_argument("knn_group: patch size out of range");
    if (center_indices.empty()) throw std::invalid_argument("knn_group: no centers");

    TokenSet tokens;
    const int g = static_cast<int>(center_indices.size());
    tokens.center_indices = center_indices;
    tokens.centers.reserve(g);
    tokens.patches.reserve(g);
    tokens.features = Matrix(g, feature_dim);

    std::vector<std::pair<double, int>> by_dist;
    by_dist.reserve(n);
    for (int t = 0; t < g; ++t) {
        const int ci = center_indices[t];
        if (ci < 0 || ci >= n) throw std::invalid_argument("knn_group: bad center index");
        const Vec3& center = cloud.points[ci];
        tokens.centers.push_back(center);

        by_dist.clear();
        for (int i = 0; i < n; ++i) {
            if (i == ci) continue;
            by_dist.emplace_back(dist2(cloud.points[i], center), i);
        }
        const int rest = patch_size - 1;
        std::partial_sort(by_dist.begin(), by_dist.begin() + rest, by_dist.end());

        std::vector<int> patch;
        patch.reserve(patch_size);
        patch.push_back(ci);  // patches always cover their center
        for (int i = 0; i < rest; ++i) patch.push_back(by_dist[i].second);

        std::vector<Vec3> pts;
        pts.reserve(patch_size);
        for (int idx : patch) pts.push_back(cloud.points[idx]);
        const std::vector<double> f = encode_patch(pts, center, feature_dim);
        std::copy(f.begin(), f.end(), tokens.features.row(t));

        tokens.patches.push_back(std::move(patch));
    }
    return tokens;
}

Matrix patch_relative_points(const PointCloud& cloud, const TokenSet& tokens, int token) {
    const auto& patch = tokens.patches.at(token);
    const Vec3& center = tokens.centers.at(token);
    Matrix out(static_cast<int>(patch.size()), 3);
    for (size_t i = 0; i < patch.size(); ++i) {
        const Vec3 q = sub(cloud.points.at(patch[i]), center);
        out(static_cast<int>(i), 0) = q[0];
        out(static_cast<int>(i), 1) = q[1];
        out(static_cast<int>(i), 2) = q[2];
    }
    return out;
}

}  // namespace saskit
