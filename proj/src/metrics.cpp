#include "saskit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace saskit {

double chamfer_distance(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("chamfer_distance: empty point set");
    double sum_ab = 0.0;
    for (const auto& p : a) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& q : b) best = std::min(best, dist2(p, q));
        sum_ab += best;
    }
    double sum_ba = 0.0;
    for (const auto& q : b) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& p : a) best = std::min(best, dist2(p, q));
        sum_ba += best;
    }
    return sum_ab / static_cast<double>(a.size()) + sum_ba / static_cast<double>(b.size());
}

double chamfer_distance(const Matrix& a, const Matrix& b) {
    if (a.cols() != 3 || b.cols() != 3)
        throw std::invalid_argument("chamfer_distance: expected S x 3 matrices");
    std::vector<Vec3> pa(a.rows()), pb(b.rows());
    for (int i = 0; i < a.rows(); ++i) pa[i] = {a(i, 0), a(i, 1), a(i, 2)};
    for (int i = 0; i < b.rows(); ++i) pb[i] = {b(i, 0), b(i, 1), b(i, 2)};
    return chamfer_distance(pa, pb);
}

std::vector<std::vector<int>> topo_neighbors(const std::vector<Vec3>& centers, int k) {
    const int n = static_cast<int>(centers.size());
    if (k < 1 || k >= n) throw std::invalid_argument("topo_neighbors: need 1 <= k < G");
    std::vector<std::vector<int>> out(n);
    std::vector<std::pair<double, int>> ranked;
    ranked.reserve(n);
    for (int i = 0; i < n; ++i) {
        ranked.clear();
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            ranked.emplace_back(dist2(centers[i], centers[j]), j);
        }
        std::partial_sort(ranked.begin(), ranked.begin() + k, ranked.end());
        out[i].reserve(k);
        for (int m = 0; m < k; ++m) out[i].push_back(ranked[m].second);
    }
    return out;
}

std::vector<std::vector<int>> geo_neighbors(const Matrix& features, int k) {
    const int n = features.rows();
    if (k < 1 || k >= n) throw std::invalid_argument("geo_neighbors: need 1 <= k < G");
    std::vector<double> norms(n, 0.0);
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int c = 0; c < features.cols(); ++c) s += features(i, c) * features(i, c);
        norms[i] = std::sqrt(s);
    }
    std::vector<std::vector<int>> out(n);
    std::vector<std::pair<double, int>> ranked;
    ranked.reserve(n);
    for (int i = 0; i < n; ++i) {
        ranked.clear();
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            double dot = 0.0;
            for (int c = 0; c < features.cols(); ++c) dot += features(i, c) * features(j, c);
            const double denom = norms[i] * norms[j];
            const double cos_sim = denom > 0.0 ? dot / denom : 0.0;
            ranked.emplace_back(-cos_sim, j);  // descending similarity, ties by index
        }
        std::partial_sort(ranked.begin(), ranked.begin() + k, ranked.end());
        out[i].reserve(k);
        for (int m = 0; m < k; ++m) out[i].push_back(ranked[m].second);
    }
    return out;
}

namespace {

std::vector<int> ranks_of(const SerializationOrder& order) {
    std::vector<int> rank(order.count());
    for (int pos = 0; pos < order.count(); ++pos) rank[order.permutation[pos]] = pos;
    return rank;
}

}  // namespace

double npr_window(const SerializationOrder& order,
                  const std::vector<std::vector<int>>& reference_neighbors, int h) {
    const int n = order.count();
    if (h < 1) throw std::invalid_argument("npr_window: h must be >= 1");
    if (static_cast<int>(reference_neighbors.size()) != n)
        throw std::invalid_argument("npr_window: size mismatch");
    const std::vector<int> rank = ranks_of(order);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto& refs = reference_neighbors[i];
        if (refs.empty()) throw std::invalid_argument("npr_window: empty reference neighborhood");
        int hits = 0;
        for (int j : refs)
            if (j != i && std::abs(rank[j] - rank[i]) <= h) ++hits;
        total += static_cast<double>(hits) / static_cast<double>(refs.size());
    }
    return total / static_cast<double>(n);
}

double npr_window_union(const std::vector<const SerializationOrder*>& orders,
                        const std::vector<std::vector<int>>& reference_neighbors, int h) {
    if (orders.empty()) throw std::invalid_argument("npr_window_union: no orders");
    if (h < 1) throw std::invalid_argument("npr_window_union: h must be >= 1");
    const int n = orders[0]->count();
    if (static_cast<int>(reference_neighbors.size()) != n)
        throw std::invalid_argument("npr_window_union: size mismatch");
    std::vector<std::vector<int>> ranks;
    ranks.reserve(orders.size());
    for (const auto* order : orders) {
        if (order->count() != n) throw std::invalid_argument("npr_window_union: size mismatch");
        ranks.push_back(ranks_of(*order));
    }
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto& refs = reference_neighbors[i];
        if (refs.empty())
            throw std::invalid_argument("npr_window_union: empty reference neighborhood");
        int hits = 0;
        for (int j : refs) {
            if (j == i) continue;
            for (const auto& rank : ranks) {
                if (std::abs(rank[j] - rank[i]) <= h) {
                    ++hits;
                    break;
                }
            }
        }
        total += static_cast<double>(hits) / static_cast<double>(refs.size());
    }
    return total / static_cast<double>(n);
}

double npr_bfs_reference(const SerializationOrder& order, const SerializationOrder& bfs_order,
                         const GeodesicGraph& graph, int r) {
    const int n = graph.size;
    if (order.count() != n || bfs_order.count() != n)
        throw std::invalid_argument("npr_bfs_reference: size mismatch");
    if (r < 1) throw std::invalid_argument("npr_bfs_reference: r must be >= 1");

    const std::vector<int> rank_a = ranks_of(order);
    const std::vector<int> rank_b = ranks_of(bfs_order);

    std::vector<int> hop(n);
    std::vector<int> frontier, next;
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        // r-hop neighborhood of i on the KNN graph (i excluded)
        std::fill(hop.begin(), hop.end(), -1);
        hop[i] = 0;
        frontier = {i};
        std::vector<int> hood;
        for (int level = 1; level <= r; ++level) {
            next.clear();
            for (int u : frontier) {
                for (const auto& [v, w] : graph.adjacency[u]) {
                    (void)w;
                    if (hop[v] < 0) {
                        hop[v] = level;
                        next.push_back(v);
                        hood.push_back(v);
                    }
                }
            }
            frontier.swap(next);
        }
        const int m = static_cast<int>(hood.size());

        // rank-locality: keep hop neighbors whose rank distance is at most m
        std::vector<bool> in_a(n, false);
        int count_a = 0, count_b = 0, overlap = 0;
        for (int j : hood)
            if (std::abs(rank_a[j] - rank_a[i]) <= m) {
                in_a[j] = true;
                ++count_a;
            }
        for (int j : hood)
            if (std::abs(rank_b[j] - rank_b[i]) <= m) {
                ++count_b;
                if (in_a[j]) ++overlap;
            }
        if (count_b == 0) {
            total += count_a == 0 ? 1.0 : 0.0;
        } else {
            total += static_cast<double>(overlap) / static_cast<double>(count_b);
        }
    }
    return total / static_cast<double>(n);
}

}  // namespace saskit
