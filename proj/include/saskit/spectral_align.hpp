#pragma once

#include <optional>
#include <vector>

#include "saskit/matrix.hpp"
#include "saskit/serialization.hpp"
#include "saskit/token_graph.hpp"

namespace saskit {

/// Graph Fourier Transform: X_hat = Phi^T X. Orthonormal Phi preserves the
/// Frobenius norm.
Matrix gft(const SpectralBasis& basis, const Matrix& signal);

/// Inverse transform X = Phi X_hat; exact inverse of gft.
Matrix igft(const SpectralBasis& basis, const Matrix& spectral);

/// Spectral-domain anchor: source features are averaged token-wise,
/// projected onto the target basis, then reduced to one d-vector by
/// averaging the spectral rows.
struct SpectralPrototype {
    GraphKind basis_kind = GraphKind::cds;
    std::vector<double> vector;  // d
    int source_count = 0;
};

SpectralPrototype compute_prototype(const SpectralBasis& target_basis,
                                    const std::vector<Matrix>& source_features,
                                    GraphKind kind);

enum class AlignMode { off, adaptive_cosine, fixed_alpha, simple_shift };

struct AlignmentConfig {
    AlignMode mode = AlignMode::adaptive_cosine;
    double alpha = 0.5;     // fixed_alpha mode
    double beta = 0.5;      // simple_shift mode
    double eps_low = 0.05;  // lower clamp for adaptive alpha
};

/// Row-wise spectral update, exactly as written:
///   X_i <- alpha_i X_i + (1 - alpha_i)(P - X_i)
/// In adaptive mode alpha_i = clamp((1 + cos(X_i, P)) / 2, eps_low, 1);
/// rows with zero norm are left unchanged (alpha = 1).
Matrix spectral_shift(const Matrix& spectral_tokens, const SpectralPrototype& prototype,
                      const AlignmentConfig& config);

/// Spatial-domain baseline: X_i <- beta X_i + (1 - beta)(P - X_i).
Matrix simple_shift(const Matrix& features, const std::vector<double>& prototype_spatial,
                    double beta);

/// Rank-serialized source features per serialization strategy. Entry i of a
/// matrix is the feature of the i-th visited token of that source cloud.
struct SourceBank {
    std::vector<Matrix> cds;
    std::vector<Matrix> gcs;
};

struct AlignTarget {
    const Matrix& features;  // G x d, token order
    const TokenGraph& cds_graph;
    const TokenGraph& gcs_graph;
    const SerializationOrder& cds_order;
    const SerializationOrder& gcs_order;
};

struct AlignMetrics {
    double pre_cosine_cds = 0.0, post_cosine_cds = 0.0;
    double pre_cosine_gcs = 0.0, post_cosine_gcs = 0.0;
    double shift_norm = 0.0;  // |out - in|_F
};

struct AlignResult {
    Matrix aligned;  // G x d, token order
    AlignMetrics metrics;
};

/// Full test-time alignment: per spectrum, permute the target graph and
/// features into rank space, project onto the combinatorial Laplacian
/// eigenbasis, shift toward the source prototype, transform back, and
/// average the CDS- and GCS-aligned results. Never touches model state.
AlignResult align_pipeline(const AlignTarget& target, const SourceBank& bank,
                           const AlignmentConfig& config);

}  // namespace saskit
