#include "saskit/pipeline.hpp"

#include <stdexcept>

namespace saskit {

CloudInstance build_instance(const PointCloud& normalized_cloud, const PipelineConfig& config) {
    CloudInstance inst;
    inst.cloud = normalized_cloud;

    const std::vector<int> fps =
        farthest_point_sample(inst.cloud, config.tokens, default_fps_seed(inst.cloud));
    inst.tokens = knn_group(inst.cloud, fps, config.patch_size, config.feature_dim);

    inst.cds_graph = build_cds_graph(inst.tokens.centers);
    inst.cds_bfs = serialize_cds_bfs(inst.cds_graph, inst.tokens.centers, config.knn_k);
    inst.cds_spectral = serialize_cds_spectral(inst.cds_graph, inst.tokens.centers);

    inst.geo_graph = build_geodesic_graph(inst.tokens.centers, config.knn_k);
    const Matrix geo = geodesic_distances(inst.geo_graph);
    const Matrix heat_weights = kernel_affinity(geo, median_scale(geo));
    const SpectralBasis heat_basis =
        sym_eig(laplacian(heat_weights, LaplacianMode::symmetric_normalized),
                LaplacianMode::symmetric_normalized);
    inst.descriptor = heat_descriptor(heat_basis, default_heat_scales(heat_basis));
    inst.gcs_graph = build_gcs_graph(inst.descriptor);
    inst.gcs = serialize_gcs(inst.descriptor);

    inst.zorder = serialize_zorder(inst.tokens.centers, config.curve_bits);
    inst.hilbert = serialize_hilbert(inst.tokens.centers, config.curve_bits);

    for (const SerializationOrder* order :
         {&inst.cds_bfs, &inst.cds_spectral, &inst.gcs, &inst.zorder, &inst.hilbert}) {
        if (!is_permutation(order->permutation))
            throw std::runtime_error("build_instance: " + strategy_name(order->strategy) +
                                     " produced a non-bijective order");
    }
    return inst;
}

SasSequence make_layout(const CloudInstance& instance, LayoutKind kind,
                        const PipelineConfig& config, uint64_t seed) {
    const Matrix& features = instance.tokens.features;
    switch (kind) {
        case LayoutKind::full_sas:
            return build_sas_sequence(features, instance.sas_cds(config.spectral_cds),
                                      instance.gcs);
        case LayoutKind::cds_only:
            return build_bidirectional_sequence(features,
                                                instance.sas_cds(config.spectral_cds));
        case LayoutKind::gcs_only:
            return build_bidirectional_sequence(features, instance.gcs);
        case LayoutKind::zorder:
            return build_bidirectional_sequence(features, instance.zorder);
        case LayoutKind::hilbert:
            return build_bidirectional_sequence(features, instance.hilbert);
        case LayoutKind::fps_order:
            return build_bidirectional_sequence(features, serialize_fps_order(instance.tokens));
        case LayoutKind::random_order:
            return build_bidirectional_sequence(
                features, serialize_random(instance.tokens.count(), seed));
    }
    throw std::invalid_argument("make_layout: unknown layout kind");
}

std::vector<Matrix> instance_patches(const CloudInstance& instance) {
    std::vector<Matrix> patches;
    patches.reserve(instance.tokens.count());
    for (int t = 0; t < instance.tokens.count(); ++t)
        patches.push_back(patch_relative_points(instance.cloud, instance.tokens, t));
    return patches;
}

IclInstance make_icl_instance(const CloudInstance& prompt, const CloudInstance& query,
                              LayoutKind kind, const PipelineConfig& config, uint64_t seed) {
    IclInstance icl;
    icl.prompt_features = prompt.tokens.features;
    icl.prompt_layout = make_layout(prompt, kind, config, mix_seed(seed, 1));
    icl.query_features = query.tokens.features;
    icl.query_layout = make_layout(query, kind, config, mix_seed(seed, 2));
    icl.query_patches = instance_patches(query);
    return icl;
}

}  // namespace saskit
