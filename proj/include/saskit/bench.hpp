#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "saskit/geometry.hpp"
#include "saskit/pipeline.hpp"
#include "saskit/spectral_align.hpp"
#include "saskit/ssm.hpp"

namespace saskit {

enum class ShapeKind { sphere, torus, folded_sheet, box_composite, spiked_sphere };

std::string shape_kind_name(ShapeKind kind);
ShapeKind shape_kind_from_name(const std::string& name);

/// Deterministic parametric sampling of one synthetic shape (unnormalized).
PointCloud gen_shape(ShapeKind kind, int n_points, uint64_t seed);

struct Perturbation {
    enum class Kind { rotate, gaussian_noise, occlude };
    Kind kind = Kind::rotate;
    uint64_t seed = 0;

    bool uniform_random = true;  // rotate: random rotation vs axis/angle below
    Vec3 axis{0.0, 0.0, 1.0};
    double angle = 0.0;

    double noise_std = 0.0;  // gaussian_noise

    double fraction = 0.0;    // occlude: fraction removed, in [0, 0.9]
    int min_remaining = 128;  // occlude: 4*S floor
};

/// rotate: rigid rotation about the centroid. gaussian_noise: iid per
/// coordinate. occlude: drops the requested fraction on one side of a seeded
/// random plane (keeps ceil((1-f)*P) points, original order preserved).
PointCloud perturb(const PointCloud& cloud, const Perturbation& p);

struct BenchRow {
    std::string shape_id;
    std::string strategy;
    std::string perturbation;
    std::string metric;
    double value = 0.0;
};

/// rows are fully deterministic (the byte-identical CSV contract);
/// wall-clock measurements go into timing_rows and a separate file.
struct BenchReport {
    std::vector<BenchRow> rows;
    std::vector<BenchRow> timing_rows;
    std::string config_snapshot_json;
    std::string summary_json;
};

std::string rows_to_csv(const std::vector<BenchRow>& rows);
void sort_rows(std::vector<BenchRow>& rows);

/// Writes report.csv, timings.csv (when present), summary.json and
/// config_snapshot.json under out_dir.
void write_report(const BenchReport& report, const std::string& out_dir);

struct CorpusConfig {
    std::vector<ShapeKind> kinds{ShapeKind::sphere, ShapeKind::torus, ShapeKind::folded_sheet,
                                 ShapeKind::box_composite, ShapeKind::spiked_sphere};
    int seeds_per_kind = 4;
    int n_points = 1024;
    uint64_t base_seed = 42;
};

struct DriftConfig {
    CorpusConfig corpus;
    PipelineConfig pipeline;
    int rotations = 20;
    int neighbors_k = 8;  // reference neighborhood size
    int window_h = 8;     // sequence window half-width
    std::vector<std::string> strategies{"sas", "hilbert", "zorder"};
};

/// Structural-drift study: per shape x rotation x strategy, Topo-NPR and
/// Geo-NPR of the serialization. SAS permutations are hard-asserted to be
/// rotation-invariant.
BenchReport run_drift_bench(const DriftConfig& config);

struct BfsSpectralConfig {
    CorpusConfig corpus{{ShapeKind::sphere, ShapeKind::torus}, 4, 1024, 42};
    PipelineConfig pipeline;
    int hops = 2;
};

/// BFS-vs-spectral study: NPR of the spectral CDS order against the BFS
/// reference plus wall-clock per variant.
BenchReport run_bfs_vs_spectral(const BfsSpectralConfig& config);

/// Desk-scale masked-reconstruction task. Prompts and queries are canonical
/// clouds; a rotated copy of each query serves as the unseen target for the
/// alignment ablations. The identity gate and the per-mode transition gain
/// keep the linear recurrence order-sensitive at this scale.
struct ToyTaskConfig {
    CorpusConfig corpus{{ShapeKind::sphere, ShapeKind::torus, ShapeKind::folded_sheet,
                         ShapeKind::box_composite, ShapeKind::spiked_sphere},
                        4,
                        256,
                        42};
    PipelineConfig pipeline{24, 24, 32, 6, 10, true};  // desk-scale G/S/d
    int enc_layers = 2;
    int dec_layers = 1;
    int epochs = 30;
    double lr = 0.01;
    double mask_ratio = 0.7;
    double a_norm = 2.2627;  // ~0.4 per-mode gain at d=32 (0.4 * sqrt(32))
    std::string gate = "identity";
    double max_grad_norm = 1.0;  // global-norm clip; 0 disables
    bool rotate_train_queries = true;   // per-pair random poses during training
    double occlude_train_fraction = 0.0;  // per-pair plane occlusion of queries
    double noise_train_std = 0.0;         // per-pair gaussian jitter of queries
    uint64_t model_seed = 7;
};

extern const std::vector<std::string> kAblationVariants;

struct AblationConfig {
    ToyTaskConfig task;
    std::vector<std::string> variants = kAblationVariants;
    int seeds = 4;
    double fixed_alpha = 0.5;
};

/// Trains / evaluates the masked-reconstruction toy task with the requested
/// variants substituted; queries carry an unseen rotation at eval time.
/// Training-time variants share models where only evaluation differs
/// (the SGA family evaluates one full-SAS model under different alignment
/// configs).
BenchReport run_ablation_suite(const AblationConfig& config);

/// Single-variant entry point.
BenchReport run_ablation(const std::string& variant, const ToyTaskConfig& task, int seeds = 4,
                         double fixed_alpha = 0.5);

/// The toy task's training instances for one layout (prompt/query pairs over
/// the default corpus), for callers that drive train_toy directly.
std::vector<IclInstance> build_toy_instances(const ToyTaskConfig& task, LayoutKind layout);

// Config snapshots (JSON text) round-trip through these.
std::string drift_config_to_json(const DriftConfig& c);
DriftConfig drift_config_from_json(const std::string& text);
std::string bfs_spectral_config_to_json(const BfsSpectralConfig& c);
BfsSpectralConfig bfs_spectral_config_from_json(const std::string& text);
std::string ablation_config_to_json(const AblationConfig& c);
AblationConfig ablation_config_from_json(const std::string& text);

}  // namespace saskit
