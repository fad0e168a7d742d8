#pragma once

#include <vector>

#include "saskit/geometry.hpp"
#include "saskit/serialization.hpp"
#include "saskit/token_graph.hpp"

namespace saskit {

/// Symmetric Chamfer Distance, L2 form: mean squared nearest-neighbor
/// distance from a to b plus the same from b to a.
double chamfer_distance(const std::vector<Vec3>& a, const std::vector<Vec3>& b);

/// Same metric over S x 3 point matrices (rows are points).
double chamfer_distance(const Matrix& a, const Matrix& b);

/// k nearest centers of each token by Euclidean distance, self excluded,
/// ties by smallest index.
std::vector<std::vector<int>> topo_neighbors(const std::vector<Vec3>& centers, int k);

/// k most cosine-similar feature rows per token, self excluded, ties by
/// smallest index.
std::vector<std::vector<int>> geo_neighbors(const Matrix& features, int k);

/// Sequence-window NPR: fraction of each token's reference neighbors whose
/// sequence rank lies within h of the token's rank, averaged over tokens.
double npr_window(const SerializationOrder& order,
                  const std::vector<std::vector<int>>& reference_neighbors, int h);

/// NPR of a concatenated multi-traversal sequence: every token occurs once
/// per traversal, so its sequence-local window is the union of the per-order
/// windows. Reversed traversals preserve rank distances and add nothing.
double npr_window_union(const std::vector<const SerializationOrder*>& orders,
                        const std::vector<std::vector<int>>& reference_neighbors, int h);

/// BFS-reference NPR (r-hop neighborhoods on the KNN graph, intersected with
/// each ordering's rank-local tokens; overlap normalized by the BFS set).
double npr_bfs_reference(const SerializationOrder& order, const SerializationOrder& bfs_order,
                         const GeodesicGraph& graph, int r);

}  // namespace saskit
