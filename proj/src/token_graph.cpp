#include "saskit/token_graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <sstream>
#include <stdexcept>

namespace saskit {

double median_scale(const Matrix& pairwise_distances) {
    const int n = pairwise_distances.rows();
    if (n != pairwise_distances.cols() || n < 2)
        throw std::invalid_argument("median_scale: need a square matrix of size >= 2");
    std::vector<double> entries;
    entries.reserve(static_cast<size_t>(n) * (n - 1) / 2);
    bool any_positive = false;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double d = pairwise_distances(i, j);
            if (d > 0.0) any_positive = true;
            entries.push_back(d);
        }
    }
    if (!any_positive)
        throw std::runtime_error("median_scale: all off-diagonal distances are zero");
    std::sort(entries.begin(), entries.end());
    const size_t m = entries.size();
    if (m % 2 == 1) return entries[m / 2];
    return 0.5 * (entries[m / 2 - 1] + entries[m / 2]);
}

Matrix pairwise_center_distances(const std::vector<Vec3>& centers) {
    const int n = static_cast<int>(centers.size());
    Matrix d(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) d(i, j) = d(j, i) = dist(centers[i], centers[j]);
    return d;
}

Matrix kernel_affinity(const Matrix& distances, double scale) {
    if (scale <= 0.0 || !std::isfinite(scale))
        throw std::invalid_argument("kernel_affinity: scale must be positive");
    const int n = distances.rows();
    Matrix w(n, n);
    const double inv = 1.0 / (scale * scale);
    for (int i = 0; i < n; ++i) {
        w(i, i) = 1.0;
        for (int j = i + 1; j < n; ++j) {
            const double d = distances(i, j);
            // keep entries strictly positive even when the exponent underflows
            const double v = std::max(std::exp(-d * d * inv), 1e-300);
            w(i, j) = w(j, i) = v;
        }
    }
    return w;
}

TokenGraph build_cds_graph(const std::vector<Vec3>& centers, std::optional<double> scale) {
    if (centers.size() < 2) throw std::invalid_argument("build_cds_graph: need >= 2 centers");
    const Matrix d = pairwise_center_distances(centers);
    const double sigma = scale ? *scale : median_scale(d);
    TokenGraph g;
    g.size = static_cast<int>(centers.size());
    g.kind = GraphKind::cds;
    g.kernel_scale = sigma;
    g.affinity = kernel_affinity(d, sigma);
    return g;
}

namespace {

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    bool unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        parent[std::max(a, b)] = std::min(a, b);
        return true;
    }
};

}  // namespace

GeodesicGraph build_geodesic_graph(const std::vector<Vec3>& centers, int knn_k) {
    const int n = static_cast<int>(centers.size());
    if (n < 2) throw std::invalid_argument("build_geodesic_graph: need >= 2 centers");
    if (knn_k < 1) throw std::invalid_argument("build_geodesic_graph: knn_k must be >= 1");
    const int k = std::min(knn_k, n - 1);

    GeodesicGraph g;
    g.size = n;
    g.adjacency.assign(n, {});

    std::vector<std::vector<bool>> has_edge(n, std::vector<bool>(n, false));
    auto add_edge = [&](int a, int b, double w) {
        if (has_edge[a][b]) return;
        has_edge[a][b] = has_edge[b][a] = true;
        g.adjacency[a].emplace_back(b, w);
        g.adjacency[b].emplace_back(a, w);
    };

    std::vector<std::pair<double, int>> by_dist;
    by_dist.reserve(n);
    for (int i = 0; i < n; ++i) {
        by_dist.clear();
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            by_dist.emplace_back(dist2(centers[i], centers[j]), j);
        }
        std::partial_sort(by_dist.begin(), by_dist.begin() + k, by_dist.end());
        for (int m = 0; m < k; ++m)
            add_edge(i, by_dist[m].second, std::sqrt(by_dist[m].first));
    }

    UnionFind uf(n);
    for (int i = 0; i < n; ++i)
        for (const auto& [j, w] : g.adjacency[i]) uf.unite(i, j);

    // Bridge components with the globally shortest cross edge until connected.
    while (true) {
        int best_i = -1, best_j = -1;
        double best_d2 = std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                if (uf.find(i) == uf.find(j)) continue;
                const double d2ij = dist2(centers[i], centers[j]);
                if (d2ij < best_d2) {
                    best_d2 = d2ij;
                    best_i = i;
                    best_j = j;
                }
            }
        }
        if (best_i < 0) break;  // single component
        add_edge(best_i, best_j, std::sqrt(best_d2));
        uf.unite(best_i, best_j);
        g.bridges.emplace_back(best_i, best_j);
    }
    return g;
}

Matrix geodesic_distances(const GeodesicGraph& graph) {
    const int n = graph.size;
    Matrix d(n, n, std::numeric_limits<double>::infinity());
    std::vector<double> dist_to(n);
    using Item = std::pair<double, int>;
    for (int src = 0; src < n; ++src) {
        std::fill(dist_to.begin(), dist_to.end(), std::numeric_limits<double>::infinity());
        dist_to[src] = 0.0;
        std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
        heap.emplace(0.0, src);
        while (!heap.empty()) {
            const auto [du, u] = heap.top();
            heap.pop();
            if (du > dist_to[u]) continue;
            for (const auto& [v, w] : graph.adjacency[u]) {
                const double cand = du + w;
                if (cand < dist_to[v]) {
                    dist_to[v] = cand;
                    heap.emplace(cand, v);
                }
            }
        }
        for (int j = 0; j < n; ++j) d(src, j) = dist_to[j];
        d(src, src) = 0.0;
    }
    // Bridging guarantees connectivity, so enforce exact symmetry only.
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double v = std::min(d(i, j), d(j, i));
            d(i, j) = d(j, i) = v;
        }
    return d;
}

Matrix geodesic_distances(const std::vector<Vec3>& centers, int knn_k) {
    return geodesic_distances(build_geodesic_graph(centers, knn_k));
}

Matrix laplacian(const Matrix& weights, LaplacianMode mode) {
    const int n = weights.rows();
    if (n != weights.cols()) throw std::invalid_argument("laplacian: matrix not square");
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            if (std::abs(weights(i, j) - weights(j, i)) > 1e-10)
                throw std::invalid_argument("laplacian: weights not symmetric");
            if (weights(i, j) < 0.0)
                throw std::invalid_argument("laplacian: negative weight");
        }

    std::vector<double> degree(n, 0.0);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j)
            if (j != i) degree[i] += weights(i, j);
        if (degree[i] <= 0.0) {
            std::ostringstream os;
            os << "laplacian: zero-degree node " << i;
            throw std::runtime_error(os.str());
        }
    }

    Matrix l(n, n);
    if (mode == LaplacianMode::combinatorial) {
        for (int i = 0; i < n; ++i) {
            l(i, i) = degree[i];
            for (int j = i + 1; j < n; ++j) l(i, j) = l(j, i) = -weights(i, j);
        }
    } else {
        std::vector<double> inv_sqrt(n);
        for (int i = 0; i < n; ++i) inv_sqrt[i] = 1.0 / std::sqrt(degree[i]);
        for (int i = 0; i < n; ++i) {
            l(i, i) = 1.0;
            for (int j = i + 1; j < n; ++j)
                l(i, j) = l(j, i) = -weights(i, j) * inv_sqrt[i] * inv_sqrt[j];
        }
    }
    return l;
}

namespace {

double off_diagonal_norm(const Matrix& a) {
    double s = 0.0;
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j)
            if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
}

void fix_eigenvector_signs(Matrix& v) {
    const int n = v.rows();
    for (int col = 0; col < n; ++col) {
        int arg = 0;
        double best = std::abs(v(0, col));
        for (int i = 1; i < n; ++i) {
            const double m = std::abs(v(i, col));
            if (m > best) {  // ties keep the smallest index
                best = m;
                arg = i;
            }
        }
        if (v(arg, col) < 0.0)
            for (int i = 0; i < n; ++i) v(i, col) = -v(i, col);
    }
}

}  // namespace

SpectralBasis sym_eig(const Matrix& m, LaplacianMode mode_tag) {
    const int n = m.rows();
    if (n != m.cols() || n < 1) throw std::invalid_argument("sym_eig: matrix not square");
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (std::abs(m(i, j) - m(j, i)) > 1e-10)
                throw std::invalid_argument("sym_eig: matrix not symmetric");

    Matrix a = m;
    // symmetrize exactly so sweeps preserve symmetry bit-for-bit
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) a(j, i) = a(i, j) = 0.5 * (a(i, j) + a(j, i));
    Matrix v = Matrix::identity(n);

    constexpr double kOffThreshold = 1e-12;
    constexpr int kMaxSweeps = 100;

    double off = off_diagonal_norm(a);
    int sweep = 0;
    for (; sweep < kMaxSweeps && off > kOffThreshold; ++sweep) {
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double app = a(p, p), aqq = a(q, q);
                const double theta = 0.5 * (aqq - app) / apq;
                double t;
                if (std::abs(theta) > 1e150) {
                    t = 0.5 / theta;  // avoid theta^2 overflow
                } else {
                    t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                    if (theta < 0.0) t = -t;
                }
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                a(p, p) = app - t * apq;
                a(q, q) = aqq + t * apq;
                a(p, q) = a(q, p) = 0.0;
                for (int r = 0; r < n; ++r) {
                    if (r == p || r == q) continue;
                    const double arp = a(r, p), arq = a(r, q);
                    a(r, p) = a(p, r) = c * arp - s * arq;
                    a(r, q) = a(q, r) = s * arp + c * arq;
                }
                for (int r = 0; r < n; ++r) {
                    const double vrp = v(r, p), vrq = v(r, q);
                    v(r, p) = c * vrp - s * vrq;
                    v(r, q) = s * vrp + c * vrq;
                }
            }
        }
        off = off_diagonal_norm(a);
    }
    if (off > kOffThreshold) {
        std::ostringstream os;
        os << "sym_eig: no convergence after " << kMaxSweeps
           << " sweeps, off-diagonal residual " << off;
        throw std::runtime_error(os.str());
    }

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int x, int y) { return a(x, x) < a(y, y); });

    SpectralBasis basis;
    basis.laplacian_mode = mode_tag;
    basis.eigenvalues.resize(n);
    basis.eigenvectors = Matrix(n, n);
    for (int col = 0; col < n; ++col) {
        basis.eigenvalues[col] = a(order[col], order[col]);
        for (int r = 0; r < n; ++r) basis.eigenvectors(r, col) = v(r, order[col]);
    }
    fix_eigenvector_signs(basis.eigenvectors);
    return basis;
}

std::vector<double> default_heat_scales(const SpectralBasis& basis) {
    if (basis.eigenvalues.empty())
        throw std::invalid_argument("default_heat_scales: empty basis");
    const double lambda_max = std::max(basis.eigenvalues.back(), 1e-12);
    return {0.01 / lambda_max, 0.1 / lambda_max, 1.0 / lambda_max, 10.0 / lambda_max};
}

HeatDescriptor heat_descriptor(const SpectralBasis& basis, const std::vector<double>& scales) {
    if (scales.empty()) throw std::invalid_argument("heat_descriptor: no scales");
    for (size_t s = 0; s < scales.size(); ++s) {
        if (scales[s] <= 0.0) throw std::invalid_argument("heat_descriptor: scales must be positive");
        if (s > 0 && scales[s] <= scales[s - 1])
            throw std::invalid_argument("heat_descriptor: scales must be ascending");
    }
    const int n = basis.size();
    HeatDescriptor h;
    h.scales = scales;
    h.values = Matrix(n, static_cast<int>(scales.size()));
    std::vector<double> decay(n);
    for (size_t s = 0; s < scales.size(); ++s) {
        for (int k = 0; k < n; ++k) decay[k] = std::exp(-basis.eigenvalues[k] * scales[s]);
        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            for (int k = 0; k < n; ++k) {
                const double phi = basis.eigenvectors(i, k);
                acc += decay[k] * phi * phi;
            }
            h.values(i, static_cast<int>(s)) = std::max(acc, 1e-300);
        }
    }
    return h;
}

TokenGraph build_gcs_graph(const HeatDescriptor& descriptor, std::optional<double> scale) {
    const int n = descriptor.count();
    if (n < 2) throw std::invalid_argument("build_gcs_graph: need >= 2 descriptors");
    const int dims = descriptor.values.cols();
    Matrix d(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            double s = 0.0;
            for (int k = 0; k < dims; ++k) {
                const double diff = descriptor.values(i, k) - descriptor.values(j, k);
                s += diff * diff;
            }
            d(i, j) = d(j, i) = std::sqrt(s);
        }
    }

    TokenGraph g;
    g.size = n;
    g.kind = GraphKind::gcs;
    if (scale) {
        g.kernel_scale = *scale;
        g.affinity = kernel_affinity(d, *scale);
        return g;
    }

    double max_off = 0.0, positive_sum = 0.0;
    int positive_count = 0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            max_off = std::max(max_off, d(i, j));
            if (d(i, j) > 0.0) {
                positive_sum += d(i, j);
                ++positive_count;
            }
        }
    if (max_off == 0.0) {
        // all descriptors identical: every weight is exp(0) = 1
        g.kernel_scale = 1.0;
        g.degenerate_scale = true;
        g.affinity = Matrix(n, n, 1.0);
        return g;
    }
    double gamma = median_scale(d);
    if (gamma <= 0.0) {
        gamma = positive_sum / positive_count;  // median degenerate, fall back to mean
        g.degenerate_scale = true;
    }
    g.kernel_scale = gamma;
    g.affinity = kernel_affinity(d, gamma);
    return g;
}

}  // namespace saskit
