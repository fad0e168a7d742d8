#include "saskit/serialization.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <stdexcept>

namespace saskit {

std::string strategy_name(Strategy s) {
    switch (s) {
        case Strategy::cds_bfs: return "cds_bfs";
        case Strategy::cds_spectral: return "cds_spectral";
        case Strategy::gcs: return "gcs";
        case Strategy::zorder: return "zorder";
        case Strategy::hilbert: return "hilbert";
        case Strategy::fps_order: return "fps_order";
        case Strategy::random_order: return "random";
        case Strategy::euclid_centroid_sort: return "euclid_centroid_sort";
        case Strategy::naive_curvature_sort: return "naive_curvature_sort";
    }
    return "unknown";
}

bool is_permutation(const std::vector<int>& permutation) {
    const int n = static_cast<int>(permutation.size());
    std::vector<bool> seen(n, false);
    for (int v : permutation) {
        if (v < 0 || v >= n || seen[v]) return false;
        seen[v] = true;
    }
    return true;
}

namespace {

int centroid_nearest_token(const std::vector<Vec3>& centers) {
    const Vec3 c = centroid(centers);
    int best = 0;
    double best_d = dist2(centers[0], c);
    for (int i = 1; i < static_cast<int>(centers.size()); ++i) {
        const double d = dist2(centers[i], c);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

// Ascending stable sort of scores, ties by index.
std::vector<int> argsort_scores(const std::vector<double>& scores) {
    std::vector<int> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return scores[a] < scores[b]; });
    return order;
}

}  // namespace

SerializationOrder serialize_cds_bfs(const TokenGraph& graph, const std::vector<Vec3>& centers,
                                     int neighbor_k) {
    if (graph.kind != GraphKind::cds)
        throw std::invalid_argument("serialize_cds_bfs: graph kind must be cds");
    const int n = graph.size;
    if (n != static_cast<int>(centers.size()))
        throw std::invalid_argument("serialize_cds_bfs: size mismatch");
    const int k = std::min(std::max(neighbor_k, 1), n - 1);

    // top-k strongest affinities per node; ties by smallest index
    std::vector<std::vector<int>> neighbors(n);
    std::vector<std::pair<double, int>> ranked;
    ranked.reserve(n);
    for (int i = 0; i < n; ++i) {
        ranked.clear();
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            ranked.emplace_back(-graph.affinity(i, j), j);
        }
        std::partial_sort(ranked.begin(), ranked.begin() + k, ranked.end());
        neighbors[i].reserve(k);
        for (int m = 0; m < k; ++m) neighbors[i].push_back(ranked[m].second);
    }

    SerializationOrder order;
    order.strategy = Strategy::cds_bfs;
    order.root = centroid_nearest_token(centers);
    order.permutation.reserve(n);

    std::vector<bool> visited(n, false);
    std::queue<int> frontier;
    visited[order.root] = true;
    order.permutation.push_back(order.root);
    frontier.push(order.root);
    while (!frontier.empty()) {
        const int u = frontier.front();
        frontier.pop();
        for (int v : neighbors[u]) {  // already in descending affinity order
            if (visited[v]) continue;
            visited[v] = true;
            order.permutation.push_back(v);
            frontier.push(v);
        }
    }

    if (static_cast<int>(order.permutation.size()) < n) {
        const Vec3 c = centroid(centers);
        std::vector<double> cd(n);
        for (int i = 0; i < n; ++i) cd[i] = dist2(centers[i], c);
        for (int i : argsort_scores(cd))
            if (!visited[i]) order.permutation.push_back(i);
    }
    return order;
}

SerializationOrder serialize_cds_spectral(const TokenGraph& graph,
                                          const std::vector<Vec3>& centers) {
    if (graph.kind != GraphKind::cds)
        throw std::invalid_argument("serialize_cds_spectral: graph kind must be cds");
    if (graph.size != static_cast<int>(centers.size()))
        throw std::invalid_argument("serialize_cds_spectral: size mismatch");

    const Matrix l = laplacian(graph.affinity, LaplacianMode::symmetric_normalized);
    const SpectralBasis basis = sym_eig(l, LaplacianMode::symmetric_normalized);

    int fiedler = -1;
    for (int k = 0; k < basis.size(); ++k) {
        if (basis.eigenvalues[k] > 1e-8) {
            fiedler = k;
            break;
        }
    }
    if (fiedler < 0)
        throw std::runtime_error("serialize_cds_spectral: no eigenvalue above 1e-8");

    // Sort key is the generalized-eigenproblem embedding D^{-1/2} phi: the
    // symmetric-normalized eigenvector alone is degree-weighted, which can
    // swap low-degree endpoints out of the sweep order.
    const int n = graph.size;
    std::vector<double> embedding(n);
    for (int i = 0; i < n; ++i) {
        double degree = 0.0;
        for (int j = 0; j < n; ++j)
            if (j != i) degree += graph.affinity(i, j);
        embedding[i] = basis.eigenvectors(i, fiedler) / std::sqrt(degree);
    }

    const int root = centroid_nearest_token(centers);
    if (embedding[root] > 0.0)
        for (double& e : embedding) e = -e;

    SerializationOrder order;
    order.strategy = Strategy::cds_spectral;
    order.root = root;
    order.scores = embedding;
    order.permutation = argsort_scores(embedding);
    return order;
}

SerializationOrder serialize_gcs(const HeatDescriptor& descriptor) {
    const int n = descriptor.count();
    if (n < 1) throw std::invalid_argument("serialize_gcs: empty descriptor");
    std::vector<double> scores(n);
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int k = 0; k < descriptor.values.cols(); ++k) {
            const double v = descriptor.values(i, k);
            s += v * v;
        }
        scores[i] = std::sqrt(s);
    }
    SerializationOrder order;
    order.strategy = Strategy::gcs;
    order.scores = scores;
    order.permutation = argsort_scores(scores);
    order.root = order.permutation[0];
    return order;
}

std::vector<std::array<uint32_t, 3>> quantize_centers(const std::vector<Vec3>& centers,
                                                      int bits) {
    if (bits < 1 || bits > 16)
        throw std::invalid_argument("quantize_centers: bits must be in [1, 16]");
    Vec3 lo = centers.at(0), hi = centers.at(0);
    for (const auto& p : centers)
        for (int a = 0; a < 3; ++a) {
            lo[a] = std::min(lo[a], p[a]);
            hi[a] = std::max(hi[a], p[a]);
        }
    const uint32_t cells = 1u << bits;
    std::vector<std::array<uint32_t, 3>> q(centers.size());
    for (size_t i = 0; i < centers.size(); ++i) {
        for (int a = 0; a < 3; ++a) {
            const double span = hi[a] - lo[a] + 1e-9;  // pad so the max stays in range
            double t = (centers[i][a] - lo[a]) / span;
            t = std::clamp(t, 0.0, 1.0 - 1e-12);
            q[i][a] = static_cast<uint32_t>(t * cells);
        }
    }
    return q;
}

uint64_t morton_code(uint32_t x, uint32_t y, uint32_t z, int bits) {
    uint64_t code = 0;
    for (int b = 0; b < bits; ++b) {
        code |= static_cast<uint64_t>((z >> b) & 1u) << (3 * b);
        code |= static_cast<uint64_t>((y >> b) & 1u) << (3 * b + 1);
        code |= static_cast<uint64_t>((x >> b) & 1u) << (3 * b + 2);
    }
    return code;
}

uint64_t hilbert_index(uint32_t x, uint32_t y, uint32_t z, int bits) {
    // Skilling, "Programming the Hilbert curve" (2004): transform the axes
    // into the transpose form of the Hilbert index, then interleave.
    uint32_t coords[3] = {x, y, z};
    const uint32_t m = 1u << (bits - 1);

    // inverse undo
    for (uint32_t q = m; q > 1; q >>= 1) {
        const uint32_t p = q - 1;
        for (int i = 0; i < 3; ++i) {
            if (coords[i] & q) {
                coords[0] ^= p;
            } else {
                const uint32_t t = (coords[0] ^ coords[i]) & p;
                coords[0] ^= t;
                coords[i] ^= t;
            }
        }
    }
    // gray encode
    for (int i = 1; i < 3; ++i) coords[i] ^= coords[i - 1];
    uint32_t t = 0;
    for (uint32_t q = m; q > 1; q >>= 1)
        if (coords[2] & q) t ^= q - 1;
    for (int i = 0; i < 3; ++i) coords[i] ^= t;

    // interleave transpose form, coords[0] carrying the top bit per level
    uint64_t index = 0;
    for (int b = bits - 1; b >= 0; --b)
        for (int i = 0; i < 3; ++i)
            index = (index << 1) | ((coords[i] >> b) & 1u);
    return index;
}

namespace {

SerializationOrder order_from_codes(const std::vector<uint64_t>& codes, Strategy strategy) {
    std::vector<int> order(codes.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return codes[a] < codes[b]; });
    SerializationOrder out;
    out.strategy = strategy;
    out.permutation = std::move(order);
    out.scores.reserve(codes.size());
    for (uint64_t c : codes) out.scores.push_back(static_cast<double>(c));
    return out;
}

}  // namespace

SerializationOrder serialize_zorder(const std::vector<Vec3>& centers, int bits) {
    const auto q = quantize_centers(centers, bits);
    std::vector<uint64_t> codes(q.size());
    for (size_t i = 0; i < q.size(); ++i) codes[i] = morton_code(q[i][0], q[i][1], q[i][2], bits);
    return order_from_codes(codes, Strategy::zorder);
}

SerializationOrder serialize_hilbert(const std::vector<Vec3>& centers, int bits) {
    const auto q = quantize_centers(centers, bits);
    std::vector<uint64_t> codes(q.size());
    for (size_t i = 0; i < q.size(); ++i)
        codes[i] = hilbert_index(q[i][0], q[i][1], q[i][2], bits);
    return order_from_codes(codes, Strategy::hilbert);
}

SerializationOrder serialize_fps_order(const TokenSet& tokens) {
    SerializationOrder order;
    order.strategy = Strategy::fps_order;
    order.permutation.resize(tokens.count());
    std::iota(order.permutation.begin(), order.permutation.end(), 0);
    return order;
}

SerializationOrder serialize_random(int count, uint64_t seed) {
    SerializationOrder order;
    order.strategy = Strategy::random_order;
    order.permutation.resize(count);
    std::iota(order.permutation.begin(), order.permutation.end(), 0);
    Rng rng(seed);
    rng.shuffle(order.permutation);
    return order;
}

SerializationOrder serialize_euclid_centroid(const std::vector<Vec3>& centers) {
    const Vec3 c = centroid(centers);
    std::vector<double> scores(centers.size());
    for (size_t i = 0; i < centers.size(); ++i) scores[i] = dist(centers[i], c);
    SerializationOrder order;
    order.strategy = Strategy::euclid_centroid_sort;
    order.scores = scores;
    order.permutation = argsort_scores(scores);
    order.root = order.permutation[0];
    return order;
}

SerializationOrder serialize_naive_curvature(const TokenSet& tokens, const PointCloud& cloud) {
    const int g = tokens.count();
    std::vector<double> scores(g);
    for (int t = 0; t < g; ++t) {
        const auto& patch = tokens.patches[t];
        Vec3 mean{0, 0, 0};
        for (int idx : patch) mean = add(mean, cloud.points.at(idx));
        mean = scale(mean, 1.0 / static_cast<double>(patch.size()));
        Matrix cov(3, 3);
        for (int idx : patch) {
            const Vec3 d = sub(cloud.points[idx], mean);
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b) cov(a, b) += d[a] * d[b];
        }
        for (auto& v : cov.data()) v /= static_cast<double>(patch.size());
        const SpectralBasis eig = sym_eig(cov);
        const double trace = eig.eigenvalues[0] + eig.eigenvalues[1] + eig.eigenvalues[2];
        scores[t] = trace > 0.0 ? std::max(eig.eigenvalues[0], 0.0) / trace : 0.0;
    }
    SerializationOrder order;
    order.strategy = Strategy::naive_curvature_sort;
    order.scores = scores;
    order.permutation = argsort_scores(scores);
    order.root = order.permutation[0];
    return order;
}

SerializationOrder serialize_baseline(Strategy strategy, const TokenSet& tokens,
                                      const PointCloud& cloud, uint64_t seed) {
    switch (strategy) {
        case Strategy::fps_order: return serialize_fps_order(tokens);
        case Strategy::random_order: return serialize_random(tokens.count(), seed);
        case Strategy::euclid_centroid_sort: return serialize_euclid_centroid(tokens.centers);
        case Strategy::naive_curvature_sort: return serialize_naive_curvature(tokens, cloud);
        default:
            throw std::invalid_argument("serialize_baseline: not a baseline strategy");
    }
}

namespace {

SasSequence sequence_from_perms(const Matrix& features,
                                std::vector<std::vector<int>> perms) {
    const int g = static_cast<int>(perms[0].size());
    SasSequence seq;
    seq.tokens_per_segment = g;
    seq.segment_perms = std::move(perms);
    seq.features = Matrix(static_cast<int>(seq.segment_perms.size()) * g, features.cols());
    int row = 0;
    for (const auto& perm : seq.segment_perms) {
        for (int t : perm) {
            std::copy(features.row(t), features.row(t) + features.cols(),
                      seq.features.row(row));
            ++row;
        }
    }
    return seq;
}

}  // namespace

Matrix serialize_features(const Matrix& features, const SerializationOrder& order) {
    if (order.count() != features.rows())
        throw std::invalid_argument("serialize_features: permutation size mismatch");
    Matrix out(features.rows(), features.cols());
    for (int r = 0; r < features.rows(); ++r)
        std::copy(features.row(order.permutation[r]),
                  features.row(order.permutation[r]) + features.cols(), out.row(r));
    return out;
}

SasSequence build_sas_sequence(const Matrix& features, const SerializationOrder& order_cds,
                               const SerializationOrder& order_gcs) {
    const int g = features.rows();
    if (order_cds.count() != g || order_gcs.count() != g)
        throw std::invalid_argument("build_sas_sequence: permutation size mismatch");
    std::vector<int> cds = order_cds.permutation;
    std::vector<int> gcs = order_gcs.permutation;
    std::vector<int> cds_rev(cds.rbegin(), cds.rend());
    std::vector<int> gcs_rev(gcs.rbegin(), gcs.rend());
    return sequence_from_perms(features, {cds, cds_rev, gcs, gcs_rev});
}

SasSequence build_bidirectional_sequence(const Matrix& features,
                                         const SerializationOrder& order) {
    if (order.count() != features.rows())
        throw std::invalid_argument("build_bidirectional_sequence: permutation size mismatch");
    std::vector<int> fwd = order.permutation;
    std::vector<int> rev(fwd.rbegin(), fwd.rend());
    return sequence_from_perms(features, {fwd, rev});
}

SasSequence assemble_sequence(const Matrix& features, const SasSequence& layout) {
    if (features.rows() != layout.tokens_per_segment)
        throw std::invalid_argument("assemble_sequence: token count mismatch");
    return sequence_from_perms(features, layout.segment_perms);
}

}  // namespace saskit
