#include "saskit/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "saskit/metrics.hpp"
#include "saskit/util.hpp"

namespace saskit {

using nlohmann::json;

std::string shape_kind_name(ShapeKind kind) {
    switch (kind) {
        case ShapeKind::sphere: return "sphere";
        case ShapeKind::torus: return "torus";
        case ShapeKind::folded_sheet: return "folded_sheet";
        case ShapeKind::box_composite: return "box_composite";
        case ShapeKind::spiked_sphere: return "spiked_sphere";
    }
    return "unknown";
}

ShapeKind shape_kind_from_name(const std::string& name) {
    if (name == "sphere") return ShapeKind::sphere;
    if (name == "torus") return ShapeKind::torus;
    if (name == "folded_sheet") return ShapeKind::folded_sheet;
    if (name == "box_composite") return ShapeKind::box_composite;
    if (name == "spiked_sphere") return ShapeKind::spiked_sphere;
    throw std::invalid_argument("unknown shape kind: " + name);
}

namespace {

PointCloud gen_sphere(int n, Rng& rng) {
    PointCloud cloud;
    cloud.points.reserve(n);
    for (int i = 0; i < n; ++i) cloud.points.push_back(rng.unit_vector());
    // pull the sample mean to the origin by alternating centroid subtraction
    // with re-projection onto the sphere (contraction factor ~2/3 per pass),
    // so normalization keeps every point at radius 1 without introducing
    // exact symmetries that would tie downstream orderings
    for (int pass = 0; pass < 200; ++pass) {
        const Vec3 c = centroid(cloud.points);
        if (norm(c) < 1e-13) break;
        for (auto& p : cloud.points) {
            p = sub(p, c);
            const double r = norm(p);
            p = scale(p, 1.0 / r);
        }
    }
    return cloud;
}

PointCloud gen_torus(int n, Rng& rng) {
    constexpr double kMajor = 1.0, kMinor = 0.35;
    PointCloud cloud;
    cloud.points.reserve(n);
    while (static_cast<int>(cloud.points.size()) < n) {
        const double u = 2.0 * M_PI * rng.uniform();
        const double v = 2.0 * M_PI * rng.uniform();
        // area-uniform rejection on the minor angle
        if (rng.uniform() > (kMajor + kMinor * std::cos(v)) / (kMajor + kMinor)) continue;
        const double ring = kMajor + kMinor * std::cos(v);
        cloud.points.push_back({ring * std::cos(u), ring * std::sin(u), kMinor * std::sin(v)});
    }
    return cloud;
}

PointCloud gen_folded_sheet(int n, Rng& rng) {
    // two parallel sheets joined by a half-cylinder cap: points at the open
    // ends are close in space but far along the surface. The plate gap must
    // stay well above the token spacing or KNN graphs shortcut across it.
    constexpr double kGap = 0.25;
    constexpr double kFlat = 1.0;
    constexpr double kHalfWidth = 0.25;
    const double cap = M_PI * kGap;
    const double total = 2.0 * kFlat + cap;
    PointCloud cloud;
    cloud.points.reserve(n);
    for (int i = 0; i < n; ++i) {
        const double t = total * rng.uniform();
        const double y = rng.uniform(-kHalfWidth, kHalfWidth);
        if (t < kFlat) {
            cloud.points.push_back({t, y, 0.0});
        } else if (t < kFlat + cap) {
            const double theta = (t - kFlat) / kGap;  // [0, pi]
            cloud.points.push_back({kFlat + kGap * std::sin(theta), y,
                                    kGap - kGap * std::cos(theta)});
        } else {
            cloud.points.push_back({kFlat - (t - kFlat - cap), y, 2.0 * kGap});
        }
    }
    return cloud;
}

struct Box {
    Vec3 lo, hi;
};

PointCloud gen_box_composite(int n, Rng& rng) {
    // chair-like arrangement: seat, backrest, four legs
    const std::vector<Box> boxes = {
        {{0.0, 0.0, 0.50}, {1.0, 1.0, 0.60}},    // seat
        {{0.0, 0.88, 0.60}, {1.0, 1.0, 1.60}},   // backrest
        {{0.02, 0.02, 0.0}, {0.10, 0.10, 0.50}},  // legs
        {{0.90, 0.02, 0.0}, {0.98, 0.10, 0.50}},
        {{0.02, 0.90, 0.0}, {0.10, 0.98, 0.50}},
        {{0.90, 0.90, 0.0}, {0.98, 0.98, 0.50}},
    };
    // cumulative face areas over (box, axis, side)
    struct Face {
        int box, axis, side;
        double cum;
    };
    std::vector<Face> faces;
    double total = 0.0;
    for (int b = 0; b < static_cast<int>(boxes.size()); ++b) {
        const Vec3 e = sub(boxes[b].hi, boxes[b].lo);
        const double areas[3] = {e[1] * e[2], e[0] * e[2], e[0] * e[1]};
        for (int axis = 0; axis < 3; ++axis)
            for (int side = 0; side < 2; ++side) {
                total += areas[axis];
                faces.push_back({b, axis, side, total});
            }
    }
    PointCloud cloud;
    cloud.points.reserve(n);
    for (int i = 0; i < n; ++i) {
        const double pick = total * rng.uniform();
        const Face* face = &faces.back();
        for (const auto& f : faces)
            if (pick <= f.cum) {
                face = &f;
                break;
            }
        const Box& box = boxes[face->box];
        Vec3 p;
        for (int a = 0; a < 3; ++a) p[a] = rng.uniform(box.lo[a], box.hi[a]);
        p[face->axis] = face->side == 0 ? box.lo[face->axis] : box.hi[face->axis];
        cloud.points.push_back(p);
    }
    return cloud;
}

PointCloud gen_spiked_sphere(int n, Rng& rng) {
    const int spike = std::max(n / 10, 8);
    PointCloud cloud;
    cloud.points.reserve(n);
    for (int i = 0; i < n - spike; ++i) cloud.points.push_back(rng.unit_vector());
    for (int i = 0; i < spike; ++i) {
        const double radius = rng.uniform(1.0, 2.0);
        cloud.points.push_back(
            {0.05 * rng.uniform(-1.0, 1.0), 0.05 * rng.uniform(-1.0, 1.0), radius});
    }
    return cloud;
}

}  // namespace

PointCloud gen_shape(ShapeKind kind, int n_points, uint64_t seed) {
    if (n_points < 64) throw std::invalid_argument("gen_shape: need at least 64 points");
    Rng rng(seed);
    PointCloud cloud;
    switch (kind) {
        case ShapeKind::sphere: cloud = gen_sphere(n_points, rng); break;
        case ShapeKind::torus: cloud = gen_torus(n_points, rng); break;
        case ShapeKind::folded_sheet: cloud = gen_folded_sheet(n_points, rng); break;
        case ShapeKind::box_composite: cloud = gen_box_composite(n_points, rng); break;
        case ShapeKind::spiked_sphere: cloud = gen_spiked_sphere(n_points, rng); break;
        default: throw std::invalid_argument("gen_shape: unknown kind");
    }
    cloud.source_tag = shape_kind_name(kind);
    return cloud;
}

PointCloud perturb(const PointCloud& cloud, const Perturbation& p) {
    switch (p.kind) {
        case Perturbation::Kind::rotate: {
            Matrix r;
            if (p.uniform_random) {
                Rng rng(p.seed);
                r = random_rotation(rng);
            } else {
                r = axis_angle_rotation(p.axis, p.angle);
            }
            const Vec3 c = centroid(cloud.points);
            PointCloud out;
            out.source_tag = cloud.source_tag;
            out.points.reserve(cloud.points.size());
            for (const auto& q : cloud.points) out.points.push_back(add(rotate(r, sub(q, c)), c));
            return out;
        }
        case Perturbation::Kind::gaussian_noise: {
            if (p.noise_std < 0.0) throw std::invalid_argument("perturb: negative noise std");
            Rng rng(p.seed);
            PointCloud out = cloud;
            for (auto& q : out.points)
                for (int a = 0; a < 3; ++a) q[a] += p.noise_std * rng.normal();
            return out;
        }
        case Perturbation::Kind::occlude: {
            if (p.fraction < 0.0 || p.fraction > 0.9)
                throw std::invalid_argument("perturb: occlude fraction must be in [0, 0.9]");
            const int n = cloud.size();
            const int keep = static_cast<int>(std::ceil((1.0 - p.fraction) * n));
            if (keep < p.min_remaining)
                throw std::runtime_error("perturb: occlusion would leave fewer than 4*S points");
            Rng rng(p.seed);
            const Vec3 dir = rng.unit_vector();
            const Vec3 c = centroid(cloud.points);
            std::vector<std::pair<double, int>> proj(n);
            for (int i = 0; i < n; ++i) {
                const Vec3 q = sub(cloud.points[i], c);
                proj[i] = {q[0] * dir[0] + q[1] * dir[1] + q[2] * dir[2], i};
            }
            std::sort(proj.begin(), proj.end());
            std::vector<bool> keep_flag(n, false);
            for (int i = 0; i < keep; ++i) keep_flag[proj[i].second] = true;
            PointCloud out;
            out.source_tag = cloud.source_tag;
            out.points.reserve(keep);
            for (int i = 0; i < n; ++i)
                if (keep_flag[i]) out.points.push_back(cloud.points[i]);
            return out;
        }
    }
    throw std::invalid_argument("perturb: unknown kind");
}

namespace {

std::string format_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

}  // namespace

void sort_rows(std::vector<BenchRow>& rows) {
    std::stable_sort(rows.begin(), rows.end(), [](const BenchRow& a, const BenchRow& b) {
        return std::tie(a.shape_id, a.strategy, a.perturbation, a.metric) <
               std::tie(b.shape_id, b.strategy, b.perturbation, b.metric);
    });
}

std::string rows_to_csv(const std::vector<BenchRow>& rows) {
    std::ostringstream os;
    os << "shape_id,strategy,perturbation,metric,value\n";
    for (const auto& r : rows)
        os << r.shape_id << ',' << r.strategy << ',' << r.perturbation << ',' << r.metric
           << ',' << format_value(r.value) << '\n';
    return os.str();
}

void write_report(const BenchReport& report, const std::string& out_dir) {
    for (const auto& row : report.rows)
        if (!std::isfinite(row.value))
            throw std::runtime_error("write_report: non-finite metric in row " + row.shape_id +
                                     "/" + row.strategy + "/" + row.metric);
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const auto write = [&](const std::string& name, const std::string& content) {
        std::ofstream out(fs::path(out_dir) / name, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + name + " under " + out_dir);
        out << content;
    };
    write("report.csv", rows_to_csv(report.rows));
    if (!report.timing_rows.empty()) write("timings.csv", rows_to_csv(report.timing_rows));
    if (!report.summary_json.empty()) write("summary.json", report.summary_json);
    if (!report.config_snapshot_json.empty())
        write("config_snapshot.json", report.config_snapshot_json);
}

namespace {

json corpus_to_json(const CorpusConfig& c) {
    json kinds = json::array();
    for (auto k : c.kinds) kinds.push_back(shape_kind_name(k));
    return json{{"kinds", kinds},
                {"seeds_per_kind", c.seeds_per_kind},
                {"n_points", c.n_points},
                {"base_seed", c.base_seed}};
}

CorpusConfig corpus_from_json(const json& j) {
    CorpusConfig c;
    c.kinds.clear();
    for (const auto& k : j.at("kinds")) c.kinds.push_back(shape_kind_from_name(k));
    c.seeds_per_kind = j.at("seeds_per_kind").get<int>();
    c.n_points = j.at("n_points").get<int>();
    c.base_seed = j.at("base_seed").get<uint64_t>();
    return c;
}

json pipeline_to_json(const PipelineConfig& p) {
    return json{{"tokens", p.tokens},         {"patch_size", p.patch_size},
                {"feature_dim", p.feature_dim}, {"knn_k", p.knn_k},
                {"curve_bits", p.curve_bits},   {"spectral_cds", p.spectral_cds}};
}

PipelineConfig pipeline_from_json(const json& j) {
    PipelineConfig p;
    p.tokens = j.at("tokens").get<int>();
    p.patch_size = j.at("patch_size").get<int>();
    p.feature_dim = j.at("feature_dim").get<int>();
    p.knn_k = j.at("knn_k").get<int>();
    p.curve_bits = j.at("curve_bits").get<int>();
    p.spectral_cds = j.at("spectral_cds").get<bool>();
    return p;
}

json toy_task_to_json(const ToyTaskConfig& t) {
    return json{{"corpus", corpus_to_json(t.corpus)},
                {"pipeline", pipeline_to_json(t.pipeline)},
                {"enc_layers", t.enc_layers},
                {"dec_layers", t.dec_layers},
                {"epochs", t.epochs},
                {"lr", t.lr},
                {"mask_ratio", t.mask_ratio},
                {"a_norm", t.a_norm},
                {"gate", t.gate},
                {"max_grad_norm", t.max_grad_norm},
                {"rotate_train_queries", t.rotate_train_queries},
                {"occlude_train_fraction", t.occlude_train_fraction},
                {"noise_train_std", t.noise_train_std},
                {"model_seed", t.model_seed}};
}

ToyTaskConfig toy_task_from_json(const json& j) {
    ToyTaskConfig t;
    t.corpus = corpus_from_json(j.at("corpus"));
    t.pipeline = pipeline_from_json(j.at("pipeline"));
    t.enc_layers = j.at("enc_layers").get<int>();
    t.dec_layers = j.at("dec_layers").get<int>();
    t.epochs = j.at("epochs").get<int>();
    t.lr = j.at("lr").get<double>();
    t.mask_ratio = j.at("mask_ratio").get<double>();
    t.a_norm = j.at("a_norm").get<double>();
    t.gate = j.at("gate").get<std::string>();
    t.max_grad_norm = j.at("max_grad_norm").get<double>();
    t.rotate_train_queries = j.at("rotate_train_queries").get<bool>();
    t.occlude_train_fraction = j.at("occlude_train_fraction").get<double>();
    t.noise_train_std = j.at("noise_train_std").get<double>();
    t.model_seed = j.at("model_seed").get<uint64_t>();
    return t;
}

struct NamedShape {
    ShapeKind kind;
    int seed_index;
    std::string id;
    uint64_t seed;
};

std::vector<NamedShape> corpus_shapes(const CorpusConfig& c) {
    std::vector<NamedShape> shapes;
    for (size_t k = 0; k < c.kinds.size(); ++k) {
        for (int s = 0; s < c.seeds_per_kind; ++s) {
            NamedShape shape;
            shape.kind = c.kinds[k];
            shape.seed_index = s;
            shape.id = shape_kind_name(c.kinds[k]) + "_s" + std::to_string(s);
            shape.seed = mix_seed(c.base_seed, k, s);
            shapes.push_back(shape);
        }
    }
    return shapes;
}

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

std::string drift_config_to_json(const DriftConfig& c) {
    return json{{"corpus", corpus_to_json(c.corpus)},
                {"pipeline", pipeline_to_json(c.pipeline)},
                {"rotations", c.rotations},
                {"neighbors_k", c.neighbors_k},
                {"window_h", c.window_h},
                {"strategies", c.strategies}}
        .dump(2);
}

DriftConfig drift_config_from_json(const std::string& text) {
    const json j = json::parse(text);
    DriftConfig c;
    c.corpus = corpus_from_json(j.at("corpus"));
    c.pipeline = pipeline_from_json(j.at("pipeline"));
    c.rotations = j.at("rotations").get<int>();
    c.neighbors_k = j.at("neighbors_k").get<int>();
    c.window_h = j.at("window_h").get<int>();
    c.strategies = j.at("strategies").get<std::vector<std::string>>();
    return c;
}

std::string bfs_spectral_config_to_json(const BfsSpectralConfig& c) {
    return json{{"corpus", corpus_to_json(c.corpus)},
                {"pipeline", pipeline_to_json(c.pipeline)},
                {"hops", c.hops}}
        .dump(2);
}

BfsSpectralConfig bfs_spectral_config_from_json(const std::string& text) {
    const json j = json::parse(text);
    BfsSpectralConfig c;
    c.corpus = corpus_from_json(j.at("corpus"));
    c.pipeline = pipeline_from_json(j.at("pipeline"));
    c.hops = j.at("hops").get<int>();
    return c;
}

std::string ablation_config_to_json(const AblationConfig& c) {
    return json{{"task", toy_task_to_json(c.task)},
                {"variants", c.variants},
                {"seeds", c.seeds},
                {"fixed_alpha", c.fixed_alpha}}
        .dump(2);
}

AblationConfig ablation_config_from_json(const std::string& text) {
    const json j = json::parse(text);
    AblationConfig c;
    c.task = toy_task_from_json(j.at("task"));
    c.variants = j.at("variants").get<std::vector<std::string>>();
    c.seeds = j.at("seeds").get<int>();
    c.fixed_alpha = j.at("fixed_alpha").get<double>();
    return c;
}

BenchReport run_drift_bench(const DriftConfig& config) {
    if (config.rotations < 5)
        throw std::invalid_argument("run_drift_bench: need at least 5 rotations");
    const auto shapes = corpus_shapes(config.corpus);
    if (shapes.empty()) throw std::invalid_argument("run_drift_bench: empty corpus");

    std::vector<CloudInstance> base(shapes.size());
    parallel_for(static_cast<int>(shapes.size()), [&](int i) {
        const PointCloud cloud = normalize_unit_sphere(
            gen_shape(shapes[i].kind, config.corpus.n_points, shapes[i].seed));
        base[i] = build_instance(cloud, config.pipeline);
    });

    const int cells = static_cast<int>(shapes.size()) * config.rotations;
    std::vector<std::vector<BenchRow>> cell_rows(cells);
    parallel_for(cells, [&](int cell) {
        const int si = cell / config.rotations;
        const int rot = cell % config.rotations;
        Perturbation p;
        p.kind = Perturbation::Kind::rotate;
        p.seed = mix_seed(config.corpus.base_seed, si, 7000 + rot);
        const PointCloud rotated = perturb(base[si].cloud, p);
        const CloudInstance inst = build_instance(rotated, config.pipeline);

        // spec invariant: rigid rotations never change the SAS permutations
        if (inst.cds_spectral.permutation != base[si].cds_spectral.permutation ||
            inst.cds_bfs.permutation != base[si].cds_bfs.permutation ||
            inst.gcs.permutation != base[si].gcs.permutation)
            throw std::runtime_error("run_drift_bench: SAS permutation changed under rotation (" +
                                     shapes[si].id + ", rotation " + std::to_string(rot) + ")");

        const auto topo_refs = topo_neighbors(inst.tokens.centers, config.neighbors_k);
        const auto geo_refs = geo_neighbors(inst.tokens.features, config.neighbors_k);

        char label[24];
        std::snprintf(label, sizeof(label), "rotate:%02d", rot);

        const auto eval_order = [&](const SerializationOrder& order) {
            return std::pair<double, double>{npr_window(order, topo_refs, config.window_h),
                                             npr_window(order, geo_refs, config.window_h)};
        };
        const auto [cds_topo, cds_geo] =
            eval_order(inst.sas_cds(config.pipeline.spectral_cds));
        const auto [gcs_topo, gcs_geo] = eval_order(inst.gcs);

        const SerializationOrder& cds_used = inst.sas_cds(config.pipeline.spectral_cds);
        auto& rows = cell_rows[cell];
        for (const auto& strategy : config.strategies) {
            double topo, geo_v;
            if (strategy == "sas") {
                // windows of the four-segment SAS sequence: a token's
                // sequence-local neighborhood is the union over the two
                // distinct forward traversals (reversals preserve ranks)
                topo = npr_window_union({&cds_used, &inst.gcs}, topo_refs, config.window_h);
                geo_v = npr_window_union({&cds_used, &inst.gcs}, geo_refs, config.window_h);

            } else if (strategy == "sas_mean") {
                // the plain component average, kept for comparison
                topo = 0.5 * (cds_topo + gcs_topo);
                geo_v = 0.5 * (cds_geo + gcs_geo);
            } else if (strategy == "hilbert") {
                std::tie(topo, geo_v) = eval_order(inst.hilbert);
            } else if (strategy == "zorder") {
                std::tie(topo, geo_v) = eval_order(inst.zorder);
            } else {
                throw std::invalid_argument("run_drift_bench: unknown strategy " + strategy);
            }
            rows.push_back({shapes[si].id, strategy, label, "topo_npr", topo});
            rows.push_back({shapes[si].id, strategy, label, "geo_npr", geo_v});
        }
        rows.push_back({shapes[si].id, "__sas_cds", label, "topo_npr", cds_topo});
        rows.push_back({shapes[si].id, "__sas_cds", label, "geo_npr", cds_geo});
        rows.push_back({shapes[si].id, "__sas_gcs", label, "topo_npr", gcs_topo});
        rows.push_back({shapes[si].id, "__sas_gcs", label, "geo_npr", gcs_geo});
        rows.push_back(
            {shapes[si].id, "__sas_mean", label, "topo_npr", 0.5 * (cds_topo + gcs_topo)});
        rows.push_back(
            {shapes[si].id, "__sas_mean", label, "geo_npr", 0.5 * (cds_geo + gcs_geo)});
    });

    BenchReport report;
    std::map<std::string, std::map<std::string, std::vector<double>>> grouped;
    for (auto& rows : cell_rows) {
        for (auto& row : rows) {
            grouped[row.strategy][row.metric].push_back(row.value);
            if (row.strategy.rfind("__", 0) != 0) report.rows.push_back(row);
        }
    }
    sort_rows(report.rows);

    json means;
    for (const auto& [strategy, metrics] : grouped) {
        const std::string name =
            strategy.rfind("__", 0) == 0 ? strategy.substr(2) : strategy;
        for (const auto& [metric, values] : metrics) means[name][metric] = mean_of(values);
    }
    report.summary_json = json{{"bench", "drift"}, {"means", means}}.dump(2);
    report.config_snapshot_json = drift_config_to_json(config);
    return report;
}

BenchReport run_bfs_vs_spectral(const BfsSpectralConfig& config) {
    const auto shapes = corpus_shapes(config.corpus);
    if (shapes.empty()) throw std::invalid_argument("run_bfs_vs_spectral: empty corpus");

    struct Cell {
        std::vector<BenchRow> rows, timing;
        double ms_bfs = 0.0, ms_spectral = 0.0, npr = 0.0;
    };
    std::vector<Cell> cells(shapes.size());

    parallel_for(static_cast<int>(shapes.size()), [&](int i) {
        const PointCloud cloud = normalize_unit_sphere(
            gen_shape(shapes[i].kind, config.corpus.n_points, shapes[i].seed));
        const std::vector<int> fps =
            farthest_point_sample(cloud, config.pipeline.tokens, default_fps_seed(cloud));
        const TokenSet tokens =
            knn_group(cloud, fps, config.pipeline.patch_size, config.pipeline.feature_dim);
        const TokenGraph graph = build_cds_graph(tokens.centers);
        const GeodesicGraph geo = build_geodesic_graph(tokens.centers, config.pipeline.knn_k);

        using clock = std::chrono::steady_clock;
        const auto t0 = clock::now();
        const SerializationOrder bfs =
            serialize_cds_bfs(graph, tokens.centers, config.pipeline.knn_k);
        const auto t1 = clock::now();
        const SerializationOrder spectral = serialize_cds_spectral(graph, tokens.centers);
        const auto t2 = clock::now();

        Cell& cell = cells[i];
        cell.ms_bfs = std::chrono::duration<double, std::milli>(t1 - t0).count();
        cell.ms_spectral = std::chrono::duration<double, std::milli>(t2 - t1).count();
        cell.npr = npr_bfs_reference(spectral, bfs, geo, config.hops);

        cell.rows.push_back({shapes[i].id, "cds_bfs", "none", "npr",
                             npr_bfs_reference(bfs, bfs, geo, config.hops)});
        cell.rows.push_back({shapes[i].id, "cds_spectral", "none", "npr", cell.npr});
        cell.timing.push_back({shapes[i].id, "cds_bfs", "none", "elapsed_ms", cell.ms_bfs});
        cell.timing.push_back(
            {shapes[i].id, "cds_spectral", "none", "elapsed_ms", cell.ms_spectral});
    });

    BenchReport report;
    double total_bfs = 0.0, total_spectral = 0.0;
    std::vector<double> nprs;
    for (const auto& cell : cells) {
        report.rows.insert(report.rows.end(), cell.rows.begin(), cell.rows.end());
        report.timing_rows.insert(report.timing_rows.end(), cell.timing.begin(),
                                  cell.timing.end());
        total_bfs += cell.ms_bfs;
        total_spectral += cell.ms_spectral;
        nprs.push_back(cell.npr);
    }
    sort_rows(report.rows);
    sort_rows(report.timing_rows);
    report.summary_json = json{{"bench", "bfs_vs_spectral"},
                               {"mean_spectral_npr", mean_of(nprs)},
                               {"total_ms_bfs", total_bfs},
                               {"total_ms_spectral", total_spectral},
                               {"spectral_faster", total_spectral < total_bfs}}
                              .dump(2);
    report.config_snapshot_json = bfs_spectral_config_to_json(config);
    return report;
}

const std::vector<std::string> kAblationVariants = {
    "full_sas", "no_cds",         "no_gcs", "zorder",  "hilbert",
    "fps_order", "random",        "concat_hdm", "interleave_hdm",
    "sga_on",   "sga_off",        "simple_shift", "fixed_alpha"};

namespace {

struct VariantPlan {
    LayoutKind layout = LayoutKind::full_sas;
    FusionMode fusion = FusionMode::interleave;
    AlignMode rotated_align = AlignMode::off;  // applied on the rotated targets
};

VariantPlan plan_for(const std::string& variant, double fixed_alpha, AlignmentConfig& acfg) {
    VariantPlan plan;
    acfg = AlignmentConfig{};
    acfg.mode = AlignMode::off;
    if (variant == "full_sas" || variant == "interleave_hdm") return plan;
    if (variant == "no_cds") {
        plan.layout = LayoutKind::gcs_only;
    } else if (variant == "no_gcs") {
        plan.layout = LayoutKind::cds_only;
    } else if (variant == "zorder") {
        plan.layout = LayoutKind::zorder;
    } else if (variant == "hilbert") {
        plan.layout = LayoutKind::hilbert;
    } else if (variant == "fps_order") {
        plan.layout = LayoutKind::fps_order;
    } else if (variant == "random") {
        plan.layout = LayoutKind::random_order;
    } else if (variant == "concat_hdm") {
        plan.fusion = FusionMode::concat;
    } else if (variant == "sga_on") {
        plan.rotated_align = AlignMode::adaptive_cosine;
    } else if (variant == "sga_off") {
        plan.rotated_align = AlignMode::off;
    } else if (variant == "simple_shift") {
        plan.rotated_align = AlignMode::simple_shift;
    } else if (variant == "fixed_alpha") {
        plan.rotated_align = AlignMode::fixed_alpha;
        acfg.alpha = fixed_alpha;
    } else {
        throw std::invalid_argument("unknown ablation variant: " + variant);
    }
    acfg.mode = plan.rotated_align;
    return plan;
}

struct ToyCorpus {
    std::vector<CloudInstance> prompts;          // canonical sources
    std::vector<CloudInstance> queries;          // canonical training targets
    std::vector<CloudInstance> rotated_queries;  // unseen-pose eval targets
};

ToyCorpus build_toy_corpus(const ToyTaskConfig& task) {
    const auto shapes = corpus_shapes(task.corpus);
    ToyCorpus corpus;
    corpus.prompts.resize(shapes.size());
    corpus.queries.resize(shapes.size());
    corpus.rotated_queries.resize(shapes.size());
    parallel_for(static_cast<int>(shapes.size()), [&](int i) {
        const int n = task.corpus.n_points;
        // registration-style pairing: the prompt is the canonical instance,
        // the query the same instance under a pose (plus optional noise or
        // occlusion) shift
        const PointCloud query_base = normalize_unit_sphere(
            gen_shape(shapes[i].kind, n, mix_seed(shapes[i].seed, 12)));
        corpus.prompts[i] = build_instance(query_base, task.pipeline);
        PointCloud train_query = query_base;
        if (task.rotate_train_queries) {
            Perturbation rot;
            rot.kind = Perturbation::Kind::rotate;
            rot.seed = mix_seed(shapes[i].seed, 13);
            train_query = perturb(train_query, rot);
        }
        if (task.occlude_train_fraction > 0.0) {
            Perturbation occ;
            occ.kind = Perturbation::Kind::occlude;
            occ.fraction = task.occlude_train_fraction;
            occ.min_remaining = 4 * task.pipeline.patch_size;
            occ.seed = mix_seed(shapes[i].seed, 15);
            train_query = perturb(train_query, occ);
        }
        if (task.noise_train_std > 0.0) {
            Perturbation noise;
            noise.kind = Perturbation::Kind::gaussian_noise;
            noise.noise_std = task.noise_train_std;
            noise.seed = mix_seed(shapes[i].seed, 16);
            train_query = perturb(train_query, noise);
        }
        corpus.queries[i] = build_instance(train_query, task.pipeline);
        Perturbation rot;
        rot.kind = Perturbation::Kind::rotate;
        rot.seed = mix_seed(shapes[i].seed, 14);  // unseen pose at eval time
        corpus.rotated_queries[i] = build_instance(perturb(query_base, rot), task.pipeline);
    });
    return corpus;
}

std::vector<IclInstance> make_corpus_instances(const ToyCorpus& corpus,
                                               const std::vector<CloudInstance>& queries,
                                               LayoutKind layout, const ToyTaskConfig& task) {
    std::vector<IclInstance> out(corpus.prompts.size());
    for (size_t i = 0; i < corpus.prompts.size(); ++i)
        out[i] = make_icl_instance(corpus.prompts[i], queries[i], layout, task.pipeline,
                                   mix_seed(task.corpus.base_seed, i, 21));
    return out;
}

SourceBank make_source_bank(const ToyCorpus& corpus, const ToyTaskConfig& task) {
    SourceBank bank;
    for (const auto& prompt : corpus.prompts) {
        bank.cds.push_back(serialize_features(
            prompt.tokens.features, prompt.sas_cds(task.pipeline.spectral_cds)));
        bank.gcs.push_back(serialize_features(prompt.tokens.features, prompt.gcs));
    }
    return bank;
}

std::vector<IclInstance> make_rotated_eval_instances(const ToyCorpus& corpus,
                                                     const SourceBank& bank,
                                                     const AlignmentConfig& acfg,
                                                     LayoutKind layout,
                                                     const ToyTaskConfig& task) {
    std::vector<IclInstance> out(corpus.prompts.size());
    for (size_t i = 0; i < corpus.prompts.size(); ++i) {
        const CloudInstance& q = corpus.rotated_queries[i];
        CloudInstance target = q;
        if (acfg.mode != AlignMode::off) {
            const AlignTarget view{q.tokens.features, q.cds_graph, q.gcs_graph,
                                   q.sas_cds(task.pipeline.spectral_cds), q.gcs};
            target.tokens.features = align_pipeline(view, bank, acfg).aligned;
        }
        out[i] = make_icl_instance(corpus.prompts[i], target, layout, task.pipeline,
                                   mix_seed(task.corpus.base_seed, i, 21));
    }
    return out;
}

}  // namespace

BenchReport run_ablation_suite(const AblationConfig& config) {
    if (config.seeds < 1) throw std::invalid_argument("run_ablation_suite: seeds must be >= 1");
    for (const auto& v : config.variants) {
        AlignmentConfig scratch;
        plan_for(v, config.fixed_alpha, scratch);  // validates names up front
    }

    const ToyTaskConfig& task = config.task;
    const ToyCorpus corpus = build_toy_corpus(task);

    // training cells shared by variants that differ only at evaluation
    struct TrainKey {
        LayoutKind layout;
        FusionMode fusion;
        bool operator<(const TrainKey& o) const {
            return std::tie(layout, fusion) < std::tie(o.layout, o.fusion);
        }
    };
    std::set<TrainKey> keys;
    for (const auto& v : config.variants) {
        AlignmentConfig scratch;
        const VariantPlan plan = plan_for(v, config.fixed_alpha, scratch);
        keys.insert({plan.layout, plan.fusion});
    }

    struct Trained {
        SsmStack stack;
        std::vector<double> trace;
    };
    const std::vector<TrainKey> key_list(keys.begin(), keys.end());
    std::vector<std::vector<Trained>> trained(config.seeds,
                                              std::vector<Trained>(key_list.size()));

    const int cells = config.seeds * static_cast<int>(key_list.size());
    parallel_for(cells, [&](int cell) {
        const int seed_idx = cell / static_cast<int>(key_list.size());
        const int key_idx = cell % static_cast<int>(key_list.size());
        const TrainKey& key = key_list[key_idx];
        const std::vector<IclInstance> train_set =
            make_corpus_instances(corpus, corpus.queries, key.layout, task);
        StackConfig sc;
        sc.embed_dim = task.pipeline.feature_dim;
        sc.enc_layers = task.enc_layers;
        sc.dec_layers = task.dec_layers;
        sc.patch_size = task.pipeline.patch_size;
        sc.a_norm = task.a_norm;
        sc.gate = task.gate == "identity" ? Gate::identity : Gate::sigmoid_gate;
        SsmStack stack = make_random_stack(sc, mix_seed(task.model_seed, seed_idx));
        Trained t;
        t.trace = train_toy(stack, train_set, task.epochs, task.lr,
                            mix_seed(task.model_seed, seed_idx, 5), key.fusion,
                            task.max_grad_norm);
        t.stack = std::move(stack);
        trained[seed_idx][key_idx] = std::move(t);
    });

    // evaluation sets: fresh masks on the canonical corpus per layout, and
    // rotated targets per variant (alignment applied there)
    std::map<LayoutKind, std::vector<IclInstance>> eval_plain;
    for (const auto& key : key_list)
        if (!eval_plain.count(key.layout))
            eval_plain[key.layout] =
                make_corpus_instances(corpus, corpus.queries, key.layout, task);

    SourceBank bank;
    std::map<std::string, std::vector<IclInstance>> eval_rotated;
    for (const auto& v : config.variants) {
        AlignmentConfig acfg;
        const VariantPlan plan = plan_for(v, config.fixed_alpha, acfg);
        if (eval_rotated.count(v)) continue;
        if (acfg.mode != AlignMode::off && bank.cds.empty())
            bank = make_source_bank(corpus, task);
        eval_rotated[v] =
            make_rotated_eval_instances(corpus, bank, acfg, plan.layout, task);
    }

    BenchReport report;
    std::map<std::string, std::vector<double>> variant_losses, variant_rotated;
    for (const auto& variant : config.variants) {
        AlignmentConfig acfg;
        const VariantPlan plan = plan_for(variant, config.fixed_alpha, acfg);
        const size_t key_idx =
            std::distance(key_list.begin(),
                          std::find_if(key_list.begin(), key_list.end(), [&](const TrainKey& k) {
                              return k.layout == plan.layout && k.fusion == plan.fusion;
                          }));
        for (int s = 0; s < config.seeds; ++s) {
            const Trained& t = trained[s][key_idx];
            const double eval_loss =
                evaluate_corpus(t.stack, eval_plain.at(plan.layout), task.mask_ratio,
                                mix_seed(task.model_seed, 998, s), plan.fusion);
            const double rotated_loss =
                evaluate_corpus(t.stack, eval_rotated.at(variant), task.mask_ratio,
                                mix_seed(task.model_seed, 999, s), plan.fusion);
            const std::string seed_label = "seed:" + std::to_string(s);
            report.rows.push_back({"corpus", variant, seed_label, "eval_loss", eval_loss});
            report.rows.push_back(
                {"corpus", variant, seed_label, "rotated_eval_loss", rotated_loss});
            report.rows.push_back(
                {"corpus", variant, seed_label, "train_loss_first", t.trace.front()});
            report.rows.push_back(
                {"corpus", variant, seed_label, "train_loss_last", t.trace.back()});
            variant_losses[variant].push_back(eval_loss);
            variant_rotated[variant].push_back(rotated_loss);
        }
    }
    sort_rows(report.rows);

    json means, rotated_means;
    for (const auto& [variant, losses] : variant_losses) means[variant] = mean_of(losses);
    for (const auto& [variant, losses] : variant_rotated)
        rotated_means[variant] = mean_of(losses);
    report.summary_json = json{{"bench", "ablation"},
                               {"mean_eval_loss", means},
                               {"mean_rotated_eval_loss", rotated_means},
                               {"seeds", config.seeds}}
                              .dump(2);
    report.config_snapshot_json = ablation_config_to_json(config);
    return report;
}

BenchReport run_ablation(const std::string& variant, const ToyTaskConfig& task, int seeds,
                         double fixed_alpha) {
    AblationConfig config;
    config.task = task;
    config.variants = {variant};
    config.seeds = seeds;
    config.fixed_alpha = fixed_alpha;
    return run_ablation_suite(config);
}

std::vector<IclInstance> build_toy_instances(const ToyTaskConfig& task, LayoutKind layout) {
    const ToyCorpus corpus = build_toy_corpus(task);
    return make_corpus_instances(corpus, corpus.queries, layout, task);
}

}  // namespace saskit
