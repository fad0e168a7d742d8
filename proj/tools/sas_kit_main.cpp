// sas-kit: serialization, metrics, alignment, and benchmark drivers around
// the saskit library. Every report-producing command writes a config
// snapshot sufficient to reproduce its CSV byte-for-byte.
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "saskit/bench.hpp"
#include "saskit/gradcheck.hpp"
#include "saskit/metrics.hpp"
#include "saskit/pipeline.hpp"
#include "saskit/spectral_align.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace saskit;

namespace {

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_text(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

CloudFormat format_for(const std::string& path, const std::string& explicit_format) {
    if (explicit_format == "xyz") return CloudFormat::xyz_ascii;
    if (explicit_format == "ply") return CloudFormat::ply_ascii;
    if (!explicit_format.empty())
        throw std::runtime_error("unknown format '" + explicit_format + "'");
    const std::string ext = fs::path(path).extension().string();
    if (ext == ".ply") return CloudFormat::ply_ascii;
    return CloudFormat::xyz_ascii;
}

json matrix_json(const Matrix& m) {
    json rows = json::array();
    for (int i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

struct CloudSource {
    std::string input;   // file path; empty means synthetic
    std::string format;  // "", "xyz", "ply"
    std::string shape = "sphere";
    int points = 1024;
    uint64_t seed = 1;

    PointCloud load() const {
        if (!input.empty())
            return normalize_unit_sphere(load_cloud(input, format_for(input, format)));
        return normalize_unit_sphere(gen_shape(shape_kind_from_name(shape), points, seed));
    }

    json to_json() const {
        return json{{"input", input}, {"format", format}, {"shape", shape},
                    {"points", points}, {"seed", seed}};
    }
    void from_json(const json& j) {
        input = j.at("input").get<std::string>();
        format = j.at("format").get<std::string>();
        shape = j.at("shape").get<std::string>();
        points = j.at("points").get<int>();
        seed = j.at("seed").get<uint64_t>();
    }
};

void add_pipeline_flags(CLI::App* cmd, PipelineConfig& pipeline) {
    cmd->add_option("--tokens", pipeline.tokens, "patch tokens per cloud (G)");
    cmd->add_option("--patch-size", pipeline.patch_size, "points per patch (S)");
    cmd->add_option("--dim", pipeline.feature_dim, "patch feature dimension (d)");
    cmd->add_option("--knn-k", pipeline.knn_k, "geodesic / BFS neighbor count");
    cmd->add_option("--bits", pipeline.curve_bits, "curve quantization bits per axis");
}

int run_serialize(const CloudSource& source, const std::string& strategy,
                  const PipelineConfig& pipeline, uint64_t order_seed,
                  const std::string& out_dir, bool csv, bool dump_graph) {
    const PointCloud cloud = source.load();
    const CloudInstance inst = build_instance(cloud, pipeline);

    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    SerializationOrder order;
    if (strategy == "cds_bfs") {
        order = serialize_cds_bfs(inst.cds_graph, inst.tokens.centers, pipeline.knn_k);
    } else if (strategy == "cds_spectral") {
        order = serialize_cds_spectral(inst.cds_graph, inst.tokens.centers);
    } else if (strategy == "gcs") {
        order = serialize_gcs(inst.descriptor);
    } else if (strategy == "zorder") {
        order = serialize_zorder(inst.tokens.centers, pipeline.curve_bits);
    } else if (strategy == "hilbert") {
        order = serialize_hilbert(inst.tokens.centers, pipeline.curve_bits);
    } else if (strategy == "fps_order") {
        order = serialize_baseline(Strategy::fps_order, inst.tokens, inst.cloud, order_seed);
    } else if (strategy == "random") {
        order = serialize_baseline(Strategy::random_order, inst.tokens, inst.cloud, order_seed);
    } else if (strategy == "euclid_centroid_sort") {
        order = serialize_baseline(Strategy::euclid_centroid_sort, inst.tokens, inst.cloud,
                                   order_seed);
    } else if (strategy == "naive_curvature_sort") {
        order = serialize_baseline(Strategy::naive_curvature_sort, inst.tokens, inst.cloud,
                                   order_seed);
    } else {
        throw std::runtime_error("unknown strategy '" + strategy + "'");
    }
    const double elapsed_ms =
        std::chrono::duration<double, std::milli>(clock::now() - t0).count();

    json result{{"strategy", strategy_name(order.strategy)},
                {"permutation", order.permutation},
                {"elapsed_ms", elapsed_ms}};
    if (!order.scores.empty()) result["scores"] = order.scores;
    if (order.root >= 0) result["root"] = order.root;
    std::cout << result.dump(2) << "\n";

    if (!out_dir.empty()) {
        write_text(fs::path(out_dir) / "order.json", result.dump(2));
        json snapshot{{"command", "serialize"},
                      {"source", source.to_json()},
                      {"strategy", strategy},
                      {"order_seed", order_seed},
                      {"csv", csv},
                      {"dump_graph", dump_graph},
                      {"pipeline",
                       json::parse(drift_config_to_json(DriftConfig{{}, pipeline}))
                           .at("pipeline")}};
        write_text(fs::path(out_dir) / "config_snapshot.json", snapshot.dump(2));
        if (csv) {
            std::ostringstream os;
            os << "rank,token_index,x,y,z\n";
            for (int rank = 0; rank < order.count(); ++rank) {
                const int t = order.permutation[rank];
                const Vec3& c = inst.tokens.centers[t];
                char buf[128];
                std::snprintf(buf, sizeof(buf), "%d,%d,%.12g,%.12g,%.12g\n", rank, t, c[0],
                              c[1], c[2]);
                os << buf;
            }
            write_text(fs::path(out_dir) / "path.csv", os.str());
        }
        if (dump_graph) {
            json dump{{"cds_affinity", matrix_json(inst.cds_graph.affinity)},
                      {"gcs_affinity", matrix_json(inst.gcs_graph.affinity)},
                      {"heat_descriptor", matrix_json(inst.descriptor.values)}};
            const Matrix lap =
                laplacian(inst.cds_graph.affinity, LaplacianMode::symmetric_normalized);
            const SpectralBasis basis = sym_eig(lap, LaplacianMode::symmetric_normalized);
            dump["cds_laplacian_sym"] = matrix_json(lap);
            dump["cds_eigenvalues"] = basis.eigenvalues;
            dump["cds_eigenvectors"] = matrix_json(basis.eigenvectors);
            write_text(fs::path(out_dir) / "graph_dump.json", dump.dump(2));
        }
    }
    return 0;
}

// Per-shape NPR study without perturbations.
struct NprCliConfig {
    CorpusConfig corpus;
    PipelineConfig pipeline;
    int neighbors_k = 8;
    int window_h = 8;
    std::vector<std::string> strategies{"sas", "hilbert", "zorder"};
};

json npr_config_json(const NprCliConfig& c) {
    const json drift = json::parse(
        drift_config_to_json(DriftConfig{c.corpus, c.pipeline, 5, c.neighbors_k, c.window_h}));
    return json{{"command", "npr"},
                {"corpus", drift.at("corpus")},
                {"pipeline", drift.at("pipeline")},
                {"neighbors_k", c.neighbors_k},
                {"window_h", c.window_h},
                {"strategies", c.strategies}};
}

NprCliConfig npr_config_from_json(const json& j) {
    const json drift{{"corpus", j.at("corpus")},
                     {"pipeline", j.at("pipeline")},
                     {"rotations", 5},
                     {"neighbors_k", j.at("neighbors_k")},
                     {"window_h", j.at("window_h")},
                     {"strategies", j.at("strategies")}};
    const DriftConfig d = drift_config_from_json(drift.dump());
    return NprCliConfig{d.corpus, d.pipeline, d.neighbors_k, d.window_h, d.strategies};
}

int run_npr(const NprCliConfig& config, const std::string& out_dir) {
    BenchReport report;
    for (size_t ki = 0; ki < config.corpus.kinds.size(); ++ki) {
        for (int s = 0; s < config.corpus.seeds_per_kind; ++s) {
            const std::string id =
                shape_kind_name(config.corpus.kinds[ki]) + "_s" + std::to_string(s);
            const PointCloud cloud = normalize_unit_sphere(gen_shape(
                config.corpus.kinds[ki], config.corpus.n_points,
                mix_seed(config.corpus.base_seed, ki, s)));
            const CloudInstance inst = build_instance(cloud, config.pipeline);
            const auto topo = topo_neighbors(inst.tokens.centers, config.neighbors_k);
            const auto geo = geo_neighbors(inst.tokens.features, config.neighbors_k);
            const SerializationOrder& cds = inst.sas_cds(config.pipeline.spectral_cds);
            for (const auto& strategy : config.strategies) {
                double t, g;
                if (strategy == "sas") {
                    t = npr_window_union({&cds, &inst.gcs}, topo, config.window_h);
                    g = npr_window_union({&cds, &inst.gcs}, geo, config.window_h);
                } else if (strategy == "hilbert") {
                    t = npr_window(inst.hilbert, topo, config.window_h);
                    g = npr_window(inst.hilbert, geo, config.window_h);
                } else if (strategy == "zorder") {
                    t = npr_window(inst.zorder, topo, config.window_h);
                    g = npr_window(inst.zorder, geo, config.window_h);
                } else {
                    throw std::runtime_error("npr: unknown strategy '" + strategy + "'");
                }
                report.rows.push_back({id, strategy, "none", "topo_npr", t});
                report.rows.push_back({id, strategy, "none", "geo_npr", g});
            }
        }
    }
    sort_rows(report.rows);
    report.config_snapshot_json = npr_config_json(config).dump(2);
    report.summary_json = json{{"bench", "npr"}, {"rows", report.rows.size()}}.dump(2);
    write_report(report, out_dir);
    std::cout << rows_to_csv(report.rows);
    return 0;
}

int run_cd(const std::string& a, const std::string& b, const std::string& format) {
    const PointCloud ca = load_cloud(a, format_for(a, format));
    const PointCloud cb = load_cloud(b, format_for(b, format));
    const double value = chamfer_distance(ca.points, cb.points);
    std::cout << json{{"chamfer_distance", value}, {"a", a}, {"b", b}}.dump(2) << "\n";
    return 0;
}

struct AlignCliConfig {
    CloudSource target;
    std::string sources_dir;
    std::string mode = "adaptive";  // adaptive | fixed | simple | off
    double alpha = 0.5;
    double beta = 0.5;
    double eps_low = 0.05;
    PipelineConfig pipeline;
};

json align_config_json(const AlignCliConfig& c) {
    const json drift =
        json::parse(drift_config_to_json(DriftConfig{{}, c.pipeline}));
    return json{{"command", "align"},    {"target", c.target.to_json()},
                {"sources_dir", c.sources_dir}, {"mode", c.mode},
                {"alpha", c.alpha},      {"beta", c.beta},
                {"eps_low", c.eps_low},  {"pipeline", drift.at("pipeline")}};
}

AlignCliConfig align_config_from_json(const json& j) {
    AlignCliConfig c;
    c.target.from_json(j.at("target"));
    c.sources_dir = j.at("sources_dir").get<std::string>();
    c.mode = j.at("mode").get<std::string>();
    c.alpha = j.at("alpha").get<double>();
    c.beta = j.at("beta").get<double>();
    c.eps_low = j.at("eps_low").get<double>();
    const json drift{{"corpus", json::parse(drift_config_to_json(DriftConfig{})).at("corpus")},
                     {"pipeline", j.at("pipeline")},
                     {"rotations", 5},
                     {"neighbors_k", 8},
                     {"window_h", 8},
                     {"strategies", json::array()}};
    c.pipeline = drift_config_from_json(drift.dump()).pipeline;
    return c;
}

int run_align(const AlignCliConfig& config, const std::string& out_dir) {
    const PointCloud target_cloud = config.target.load();
    const CloudInstance target = build_instance(target_cloud, config.pipeline);

    std::vector<fs::path> source_files;
    for (const auto& entry : fs::directory_iterator(config.sources_dir)) {
        const std::string ext = entry.path().extension().string();
        if (ext == ".xyz" || ext == ".ply") source_files.push_back(entry.path());
    }
    std::sort(source_files.begin(), source_files.end());
    if (source_files.empty())
        throw std::runtime_error("align: no .xyz/.ply sources in " + config.sources_dir);

    SourceBank bank;
    for (const auto& path : source_files) {
        const PointCloud cloud =
            normalize_unit_sphere(load_cloud(path.string(), format_for(path.string(), "")));
        const CloudInstance inst = build_instance(cloud, config.pipeline);
        bank.cds.push_back(serialize_features(inst.tokens.features,
                                              inst.sas_cds(config.pipeline.spectral_cds)));
        bank.gcs.push_back(serialize_features(inst.tokens.features, inst.gcs));
    }

    AlignmentConfig acfg;
    if (config.mode == "adaptive") {
        acfg.mode = AlignMode::adaptive_cosine;
    } else if (config.mode == "fixed") {
        acfg.mode = AlignMode::fixed_alpha;
    } else if (config.mode == "simple") {
        acfg.mode = AlignMode::simple_shift;
    } else if (config.mode == "off") {
        acfg.mode = AlignMode::off;
    } else {
        throw std::runtime_error("align: unknown mode '" + config.mode + "'");
    }
    acfg.alpha = config.alpha;
    acfg.beta = config.beta;
    acfg.eps_low = config.eps_low;

    const AlignTarget view{target.tokens.features, target.cds_graph, target.gcs_graph,
                           target.sas_cds(config.pipeline.spectral_cds), target.gcs};
    const AlignResult result = align_pipeline(view, bank, acfg);

    json aligned{{"tokens", result.aligned.rows()},
                 {"dim", result.aligned.cols()},
                 {"features", matrix_json(result.aligned)}};
    std::vector<BenchRow> metric_rows{
        {"target", config.mode, "none", "pre_cosine_cds", result.metrics.pre_cosine_cds},
        {"target", config.mode, "none", "post_cosine_cds", result.metrics.post_cosine_cds},
        {"target", config.mode, "none", "pre_cosine_gcs", result.metrics.pre_cosine_gcs},
        {"target", config.mode, "none", "post_cosine_gcs", result.metrics.post_cosine_gcs},
        {"target", config.mode, "none", "shift_norm", result.metrics.shift_norm},
        {"target", config.mode, "none", "sources",
         static_cast<double>(source_files.size())}};
    sort_rows(metric_rows);

    write_text(fs::path(out_dir) / "aligned_features.json", aligned.dump());
    write_text(fs::path(out_dir) / "report.csv", rows_to_csv(metric_rows));
    write_text(fs::path(out_dir) / "config_snapshot.json", align_config_json(config).dump(2));
    std::cout << rows_to_csv(metric_rows);
    return 0;
}

int run_gradcheck(int instances, uint64_t seed, const std::string& out_dir) {
    const GradCheckReport report = saskit::run_gradcheck(instances, seed);
    std::vector<BenchRow> rows{
        {"gradcheck", "ssm", "none", "max_rel_a", report.max_rel_a},
        {"gradcheck", "ssm", "none", "max_rel_b", report.max_rel_b},
        {"gradcheck", "ssm", "none", "max_rel_bias", report.max_rel_bias},
        {"gradcheck", "ssm", "none", "max_rel_input", report.max_rel_input},
        {"gradcheck", "ssm", "none", "instances", static_cast<double>(report.instances)}};
    sort_rows(rows);
    std::cout << rows_to_csv(rows);
    if (!out_dir.empty()) {
        write_text(fs::path(out_dir) / "report.csv", rows_to_csv(rows));
        write_text(fs::path(out_dir) / "config_snapshot.json",
                   json{{"command", "gradcheck"}, {"instances", instances}, {"seed", seed}}
                       .dump(2));
    }
    std::cerr << "worst relative error: " << report.worst() << "\n";
    return report.worst() <= 1e-4 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sas-kit: structure-aware point cloud serialization toolkit"};
    app.require_subcommand(1);

    // serialize
    auto* serialize_cmd = app.add_subcommand("serialize", "serialize one cloud");
    CloudSource ser_source;
    std::string ser_strategy = "cds_spectral";
    PipelineConfig ser_pipeline;
    uint64_t ser_seed = 1;
    std::string ser_out;
    bool ser_csv = false, ser_dump = false;
    serialize_cmd->add_option("--input", ser_source.input, "cloud file (.xyz/.ply)");
    serialize_cmd->add_option("--format", ser_source.format, "xyz or ply");
    serialize_cmd->add_option("--shape", ser_source.shape, "synthetic shape kind");
    serialize_cmd->add_option("--points", ser_source.points, "synthetic point count");
    serialize_cmd->add_option("--shape-seed", ser_source.seed, "synthetic shape seed");
    serialize_cmd->add_option("--strategy", ser_strategy, "serialization strategy");
    serialize_cmd->add_option("--seed", ser_seed, "seed for the random strategy");
    serialize_cmd->add_option("--out", ser_out, "output directory");
    serialize_cmd->add_flag("--csv", ser_csv, "emit (rank, token, x, y, z) path.csv");
    serialize_cmd->add_flag("--dump-graph", ser_dump, "dump affinity/laplacian/eigen JSON");
    add_pipeline_flags(serialize_cmd, ser_pipeline);
    std::string ser_config;
    serialize_cmd->add_option("--config", ser_config, "config snapshot to rerun");

    // npr
    auto* npr_cmd = app.add_subcommand("npr", "neighborhood preservation study");
    NprCliConfig npr_config;
    std::string npr_out = "saskit_out/npr", npr_config_path;
    uint64_t npr_seed = 0;
    npr_cmd->add_option("--config", npr_config_path, "config snapshot to rerun");
    npr_cmd->add_option("--out", npr_out, "output directory");
    npr_cmd->add_option("--k", npr_config.neighbors_k, "reference neighborhood size");
    npr_cmd->add_option("--window-h", npr_config.window_h, "sequence window half-width");
    auto* npr_seed_opt = npr_cmd->add_option("--seed", npr_seed, "corpus base seed override");
    add_pipeline_flags(npr_cmd, npr_config.pipeline);

    // cd
    auto* cd_cmd = app.add_subcommand("cd", "chamfer distance between two clouds");
    std::string cd_a, cd_b, cd_format;
    cd_cmd->add_option("a", cd_a, "first cloud")->required();
    cd_cmd->add_option("b", cd_b, "second cloud")->required();
    cd_cmd->add_option("--format", cd_format, "xyz or ply");

    // drift-bench
    auto* drift_cmd = app.add_subcommand("drift-bench", "structural drift study");
    DriftConfig drift_config;
    std::string drift_out = "saskit_out/drift", drift_config_path;
    uint64_t drift_seed = 0;
    drift_cmd->add_option("--config", drift_config_path, "config snapshot to rerun");
    drift_cmd->add_option("--out", drift_out, "output directory");
    drift_cmd->add_option("--rotations", drift_config.rotations, "rotations per shape");
    drift_cmd->add_option("--k", drift_config.neighbors_k, "reference neighborhood size");
    drift_cmd->add_option("--window-h", drift_config.window_h, "sequence window half-width");
    auto* drift_seed_opt =
        drift_cmd->add_option("--seed", drift_seed, "corpus base seed override");
    add_pipeline_flags(drift_cmd, drift_config.pipeline);

    // bfs-vs-spectral
    auto* bfs_cmd = app.add_subcommand("bfs-vs-spectral", "BFS vs spectral CDS study");
    BfsSpectralConfig bfs_config;
    std::string bfs_out = "saskit_out/bfs_vs_spectral", bfs_config_path;
    uint64_t bfs_seed = 0;
    bfs_cmd->add_option("--config", bfs_config_path, "config snapshot to rerun");
    bfs_cmd->add_option("--out", bfs_out, "output directory");
    bfs_cmd->add_option("--hops", bfs_config.hops, "NPR hop radius");
    auto* bfs_seed_opt = bfs_cmd->add_option("--seed", bfs_seed, "corpus base seed override");
    add_pipeline_flags(bfs_cmd, bfs_config.pipeline);

    // ablate
    auto* ablate_cmd = app.add_subcommand("ablate", "toy-task ablation study");
    AblationConfig ablate_config;
    std::string ablate_out = "saskit_out/ablate", ablate_config_path;
    std::vector<std::string> ablate_variants;
    uint64_t ablate_seed = 0;
    ablate_cmd->add_option("--config", ablate_config_path, "config snapshot to rerun");
    ablate_cmd->add_option("--out", ablate_out, "output directory");
    ablate_cmd->add_option("--variants", ablate_variants, "variant names");
    ablate_cmd->add_option("--seeds", ablate_config.seeds, "model seeds per variant");
    ablate_cmd->add_option("--epochs", ablate_config.task.epochs, "training epochs");
    ablate_cmd->add_option("--lr", ablate_config.task.lr, "learning rate");
    ablate_cmd->add_option("--alpha", ablate_config.fixed_alpha, "fixed alignment strength");
    auto* ablate_seed_opt =
        ablate_cmd->add_option("--seed", ablate_seed, "corpus base seed override");

    // align
    auto* align_cmd = app.add_subcommand("align", "test-time spectral alignment");
    AlignCliConfig align_config;
    std::string align_out = "saskit_out/align", align_config_path;
    align_cmd->add_option("--config", align_config_path, "config snapshot to rerun");
    align_cmd->add_option("--target", align_config.target.input, "target cloud file");
    align_cmd->add_option("--shape", align_config.target.shape, "synthetic target kind");
    align_cmd->add_option("--points", align_config.target.points, "synthetic point count");
    align_cmd->add_option("--shape-seed", align_config.target.seed, "synthetic target seed");
    align_cmd->add_option("--sources", align_config.sources_dir, "directory of source clouds");
    align_cmd->add_option("--mode", align_config.mode, "adaptive | fixed | simple | off");
    align_cmd->add_option("--alpha", align_config.alpha, "fixed-mode strength");
    align_cmd->add_option("--beta", align_config.beta, "simple-shift strength");
    align_cmd->add_option("--out", align_out, "output directory");
    add_pipeline_flags(align_cmd, align_config.pipeline);

    // gradcheck
    auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient check");
    int grad_instances = 50;
    uint64_t grad_seed = 2024;
    std::string grad_out, grad_config;
    grad_cmd->add_option("--config", grad_config, "config snapshot to rerun");
    grad_cmd->add_option("--instances", grad_instances, "random instances");
    grad_cmd->add_option("--seed", grad_seed, "base seed");
    grad_cmd->add_option("--out", grad_out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (serialize_cmd->parsed()) {
            if (!ser_config.empty()) {
                const json j = json::parse(read_text(ser_config));
                ser_source.from_json(j.at("source"));
                ser_strategy = j.at("strategy").get<std::string>();
                ser_seed = j.at("order_seed").get<uint64_t>();
                ser_csv = ser_csv || j.at("csv").get<bool>();
                ser_dump = ser_dump || j.at("dump_graph").get<bool>();
                const json drift{{"corpus",
                                  json::parse(drift_config_to_json(DriftConfig{})).at("corpus")},
                                 {"pipeline", j.at("pipeline")},
                                 {"rotations", 5},
                                 {"neighbors_k", 8},
                                 {"window_h", 8},
                                 {"strategies", json::array()}};
                ser_pipeline = drift_config_from_json(drift.dump()).pipeline;
            }
            return run_serialize(ser_source, ser_strategy, ser_pipeline, ser_seed, ser_out,
                                 ser_csv, ser_dump);
        }
        if (npr_cmd->parsed()) {
            if (!npr_config_path.empty())
                npr_config = npr_config_from_json(json::parse(read_text(npr_config_path)));
            if (npr_seed_opt->count() > 0) npr_config.corpus.base_seed = npr_seed;
            return run_npr(npr_config, npr_out);
        }
        if (cd_cmd->parsed()) return run_cd(cd_a, cd_b, cd_format);
        if (drift_cmd->parsed()) {
            if (!drift_config_path.empty())
                drift_config = drift_config_from_json(read_text(drift_config_path));
            if (drift_seed_opt->count() > 0) drift_config.corpus.base_seed = drift_seed;
            const BenchReport report = run_drift_bench(drift_config);
            write_report(report, drift_out);
            std::cout << report.summary_json << "\n";
            return 0;
        }
        if (bfs_cmd->parsed()) {
            if (!bfs_config_path.empty())
                bfs_config = bfs_spectral_config_from_json(read_text(bfs_config_path));
            if (bfs_seed_opt->count() > 0) bfs_config.corpus.base_seed = bfs_seed;
            const BenchReport report = run_bfs_vs_spectral(bfs_config);
            write_report(report, bfs_out);
            std::cout << report.summary_json << "\n";
            return 0;
        }
        if (ablate_cmd->parsed()) {
            if (!ablate_config_path.empty())
                ablate_config = ablation_config_from_json(read_text(ablate_config_path));
            if (!ablate_variants.empty()) ablate_config.variants = ablate_variants;
            if (ablate_seed_opt->count() > 0) ablate_config.task.corpus.base_seed = ablate_seed;
            const BenchReport report = run_ablation_suite(ablate_config);
            write_report(report, ablate_out);
            std::cout << report.summary_json << "\n";
            return 0;
        }
        if (align_cmd->parsed()) {
            if (!align_config_path.empty())
                align_config = align_config_from_json(json::parse(read_text(align_config_path)));
            return run_align(align_config, align_out);
        }
        if (grad_cmd->parsed()) {
            if (!grad_config.empty()) {
                const json j = json::parse(read_text(grad_config));
                grad_instances = j.at("instances").get<int>();
                grad_seed = j.at("seed").get<uint64_t>();
            }
            return run_gradcheck(grad_instances, grad_seed, grad_out);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
