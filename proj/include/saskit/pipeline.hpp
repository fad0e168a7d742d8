#pragma once

#include <cstdint>

#include "saskit/geometry.hpp"
#include "saskit/serialization.hpp"
#include "saskit/ssm.hpp"
#include "saskit/token_graph.hpp"

namespace saskit {

struct PipelineConfig {
    int tokens = 64;        // G
    int patch_size = 32;    // S
    int feature_dim = 256;  // d
    int knn_k = 6;          // geodesic graph and BFS neighbor truncation
    int curve_bits = 10;    // z-order / hilbert quantization
    bool spectral_cds = true;  // CDS order used inside SAS sequences
};

/// Everything derived from one (already normalized) cloud: tokens, graphs,
/// heat descriptor, and the full set of serialization orders.
struct CloudInstance {
    PointCloud cloud;
    TokenSet tokens;
    TokenGraph cds_graph;
    GeodesicGraph geo_graph;
    HeatDescriptor descriptor;
    TokenGraph gcs_graph;
    SerializationOrder cds_bfs;
    SerializationOrder cds_spectral;
    SerializationOrder gcs;
    SerializationOrder zorder;
    SerializationOrder hilbert;

    const SerializationOrder& sas_cds(bool spectral) const {
        return spectral ? cds_spectral : cds_bfs;
    }
};

CloudInstance build_instance(const PointCloud& normalized_cloud, const PipelineConfig& config);

enum class LayoutKind { full_sas, cds_only, gcs_only, zorder, hilbert, fps_order, random_order };

/// Sequence layout for one instance: four segments for full SAS, two for the
/// single-order variants.
SasSequence make_layout(const CloudInstance& instance, LayoutKind kind,
                        const PipelineConfig& config, uint64_t seed);

/// Ground-truth center-relative patch points for every token.
std::vector<Matrix> instance_patches(const CloudInstance& instance);

/// Assembles the (prompt, query) pair consumed by the toy model.
IclInstance make_icl_instance(const CloudInstance& prompt, const CloudInstance& query,
                              LayoutKind kind, const PipelineConfig& config, uint64_t seed);

}  // namespace saskit
