#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "saskit/geometry.hpp"
#include "saskit/matrix.hpp"

namespace saskit {

enum class GraphKind { cds, gcs };

/// Dense symmetric affinity over tokens. Diagonal is exactly 1 (self
/// affinity exp(0)), every entry lies in (0, 1].
struct TokenGraph {
    int size = 0;
    Matrix affinity;
    GraphKind kind = GraphKind::cds;
    double kernel_scale = 0.0;
    bool degenerate_scale = false;  // set when the adaptive scale fell back
};

/// Median of the off-diagonal upper-triangle entries; even counts take the
/// mean of the two middle values. Throws when every off-diagonal entry is 0.
double median_scale(const Matrix& pairwise_distances);

Matrix pairwise_center_distances(const std::vector<Vec3>& centers);

/// Gaussian kernel w(i,j) = exp(-d(i,j)^2 / scale^2) with unit diagonal.
Matrix kernel_affinity(const Matrix& distances, double scale);

/// w_CDS(i,j) = exp(-|u_i - u_j|^2 / sigma^2); sigma defaults to the median
/// pairwise center distance.
TokenGraph build_cds_graph(const std::vector<Vec3>& centers,
                           std::optional<double> scale = std::nullopt);

/// Undirected KNN graph over token centers with Euclidean edge weights.
/// Disconnected components are joined by minimum-distance bridge edges.
struct GeodesicGraph {
    int size = 0;
    std::vector<std::vector<std::pair<int, double>>> adjacency;  // (node, weight)
    std::vector<std::pair<int, int>> bridges;                    // edges added to connect
};

GeodesicGraph build_geodesic_graph(const std::vector<Vec3>& centers, int knn_k);

/// All-pairs shortest path lengths via Dijkstra from every node.
Matrix geodesic_distances(const GeodesicGraph& graph);
Matrix geodesic_distances(const std::vector<Vec3>& centers, int knn_k);

enum class LaplacianMode { combinatorial, symmetric_normalized };

/// Graph Laplacian of a symmetric nonnegative weight matrix. Self weights
/// (the diagonal) are not treated as edges. Throws on zero-degree nodes.
Matrix laplacian(const Matrix& weights, LaplacianMode mode);

/// Eigendecomposition with ascending eigenvalues and orthonormal columns.
/// Sign convention: the largest-magnitude entry of each eigenvector is
/// positive (ties to the smallest index).
struct SpectralBasis {
    std::vector<double> eigenvalues;
    Matrix eigenvectors;  // columns
    LaplacianMode laplacian_mode = LaplacianMode::combinatorial;

    int size() const { return static_cast<int>(eigenvalues.size()); }
};

/// Cyclic Jacobi sweeps, off-diagonal Frobenius threshold 1e-12, at most
/// 100 sweeps. Throws (reporting the residual) if that is not reached.
SpectralBasis sym_eig(const Matrix& m,
                      LaplacianMode mode_tag = LaplacianMode::combinatorial);

/// Multi-scale heat kernel diagonal: values[i][s] = sum_k e^{-l_k t_s} phi_k(i)^2.
struct HeatDescriptor {
    std::vector<double> scales;
    Matrix values;  // G x num_scales

    int count() const { return values.rows(); }
};

/// Diffusion scales t_s = {0.01, 0.1, 1, 10} / lambda_max, so the descriptor
/// is invariant to a global rescaling of the spectrum.
std::vector<double> default_heat_scales(const SpectralBasis& basis);

HeatDescriptor heat_descriptor(const SpectralBasis& basis, const std::vector<double>& scales);

/// w_GCS(i,j) = exp(-|h_i - h_j|^2 / gamma^2); gamma defaults to the median
/// pairwise descriptor distance. Identical descriptors fall back to
/// gamma = 1 / all weights 1 with the degenerate flag set.
TokenGraph build_gcs_graph(const HeatDescriptor& descriptor,
                           std::optional<double> scale = std::nullopt);

}  // namespace saskit
