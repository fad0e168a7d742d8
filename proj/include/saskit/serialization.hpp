#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "saskit/geometry.hpp"
#include "saskit/token_graph.hpp"

namespace saskit {

enum class Strategy {
    cds_bfs,
    cds_spectral,
    gcs,
    zorder,
    hilbert,
    fps_order,
    random_order,
    euclid_centroid_sort,
    naive_curvature_sort,
};

std::string strategy_name(Strategy s);

/// A permutation over tokens together with the producing strategy. scores
/// and root are filled when the strategy defines them.
struct SerializationOrder {
    std::vector<int> permutation;
    Strategy strategy = Strategy::cds_bfs;
    int root = -1;
    std::vector<double> scores;

    int count() const { return static_cast<int>(permutation.size()); }
};

/// True iff permutation is a bijection on {0..G-1}; every strategy upholds it.
bool is_permutation(const std::vector<int>& permutation);

/// BFS over the CDS kernel graph from the centroid-nearest token. Each
/// dequeued node appends its unvisited neighbors in descending affinity
/// order; the neighbor set is the neighbor_k strongest affinities per node.
/// Tokens unreachable under that truncation are appended by ascending
/// centroid distance.
SerializationOrder serialize_cds_bfs(const TokenGraph& graph, const std::vector<Vec3>& centers,
                                     int neighbor_k);

/// Ascending sort of the generalized Fiedler embedding D^{-1/2} phi_1, where
/// phi_1 is the eigenvector of the smallest eigenvalue above 1e-8 of the
/// symmetric-normalized Laplacian. The global sign is flipped when the
/// centroid-nearest token's entry is positive, so the root end of the sweep
/// comes first.
SerializationOrder serialize_cds_spectral(const TokenGraph& graph,
                                          const std::vector<Vec3>& centers);

/// Ascending curvature order: scalar score |h_i|_2 of the multi-scale heat
/// descriptor, starting from the lowest-curvature token.
SerializationOrder serialize_gcs(const HeatDescriptor& descriptor);

/// Morton code of each quantized center (bits per axis over the padded
/// bounding box), ascending.
SerializationOrder serialize_zorder(const std::vector<Vec3>& centers, int bits);

/// 3D Hilbert index via the Skilling transpose algorithm, ascending.
SerializationOrder serialize_hilbert(const std::vector<Vec3>& centers, int bits);

// Quantization + curve index helpers, exposed for the oracles in tests.
std::vector<std::array<uint32_t, 3>> quantize_centers(const std::vector<Vec3>& centers,
                                                      int bits);
uint64_t morton_code(uint32_t x, uint32_t y, uint32_t z, int bits);
uint64_t hilbert_index(uint32_t x, uint32_t y, uint32_t z, int bits);

/// Tokens in FPS selection order (the order knn_group received them).
SerializationOrder serialize_fps_order(const TokenSet& tokens);

/// Seeded shuffle.
SerializationOrder serialize_random(int count, uint64_t seed);

/// Ascending distance of each center to the global centroid.
SerializationOrder serialize_euclid_centroid(const std::vector<Vec3>& centers);

/// Ascending PCA curvature proxy lambda_min / (l1+l2+l3) of each patch's
/// covariance; planar patches sort first.
SerializationOrder serialize_naive_curvature(const TokenSet& tokens, const PointCloud& cloud);

SerializationOrder serialize_baseline(Strategy strategy, const TokenSet& tokens,
                                      const PointCloud& cloud, uint64_t seed);

/// Four-segment bidirectional sequence over both spectra:
/// [X_cds; X_rev(cds); X_gcs; X_rev(gcs)], total length 4G.
struct SasSequence {
    Matrix features;  // (segments * G) x d
    std::vector<std::vector<int>> segment_perms;
    int tokens_per_segment = 0;

    int segments() const { return static_cast<int>(segment_perms.size()); }
    int length() const { return features.rows(); }
    /// Token index owning sequence position `pos`.
    int token_at(int pos) const {
        return segment_perms[pos / tokens_per_segment][pos % tokens_per_segment];
    }
};

/// Feature rows reordered into rank space: row r = features[perm[r]].
Matrix serialize_features(const Matrix& features, const SerializationOrder& order);

SasSequence build_sas_sequence(const Matrix& features, const SerializationOrder& order_cds,
                               const SerializationOrder& order_gcs);

/// Two-segment variant [X_pi; X_rev(pi)] used by single-spectrum ablations.
SasSequence build_bidirectional_sequence(const Matrix& features,
                                         const SerializationOrder& order);

/// Re-assembles a SasSequence layout with different token features (same
/// permutations). Used when masked features replace the originals.
SasSequence assemble_sequence(const Matrix& features, const SasSequence& layout);

}  // namespace saskit
