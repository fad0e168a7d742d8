// Acceptance suite: one pass/fail line per criterion, nonzero exit code on
// any failure. Thresholds are fixed here, not tuned at runtime.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "saskit/bench.hpp"
#include "saskit/gradcheck.hpp"
#include "saskit/metrics.hpp"
#include "saskit/pipeline.hpp"
#include "saskit/spectral_align.hpp"
#include "saskit/util.hpp"

using namespace saskit;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(bool ok, const std::string& label, const std::string& detail) {
    std::printf("[%s] %s — %s\n", ok ? "PASS" : "FAIL", label.c_str(), detail.c_str());
    if (!ok) ++g_failures;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

// ---------------------------------------------------------------- criterion 1

void criterion_1() {
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();

    CorpusConfig corpus;  // 5 kinds x 4 seeds, 1024 points
    PipelineConfig pipeline;  // G=64, S=32, d=256
    const int rotations = 20;

    std::vector<std::string> mismatches;
    const auto shapes_count = corpus.kinds.size() * corpus.seeds_per_kind;
    std::vector<CloudInstance> base(shapes_count);
    parallel_for(static_cast<int>(shapes_count), [&](int i) {
        const auto kind = corpus.kinds[i / corpus.seeds_per_kind];
        const int seed_idx = i % corpus.seeds_per_kind;
        base[i] = build_instance(
            normalize_unit_sphere(gen_shape(kind, corpus.n_points,
                                            mix_seed(corpus.base_seed, i, seed_idx))),
            pipeline);
    });

    std::vector<int> bad(shapes_count * rotations, 0);
    parallel_for(static_cast<int>(shapes_count) * rotations, [&](int cell) {
        const int si = cell / rotations;
        const int rot = cell % rotations;
        Rng rng(mix_seed(corpus.base_seed, si, 9000 + rot));
        const Matrix r = random_rotation(rng);
        const Vec3 shift{rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                         rng.uniform(-0.5, 0.5)};
        PointCloud moved;
        moved.points.reserve(base[si].cloud.points.size());
        for (const auto& p : base[si].cloud.points) moved.points.push_back(add(rotate(r, p), shift));
        const CloudInstance inst = build_instance(moved, pipeline);
        if (inst.cds_bfs.permutation != base[si].cds_bfs.permutation ||
            inst.cds_spectral.permutation != base[si].cds_spectral.permutation ||
            inst.gcs.permutation != base[si].gcs.permutation)
            bad[cell] = 1;
    });
    int mismatch_count = 0;
    for (int b : bad) mismatch_count += b;

    // constructed non-invariance witnesses for the coordinate orders
    Rng rng(17);
    std::vector<Vec3> centers(16);
    for (auto& c : centers) c = {rng.normal(), rng.normal(), rng.normal()};
    std::vector<Vec3> rotated;
    for (const auto& c : centers) rotated.push_back({-c[1], c[0], c[2]});
    const bool zorder_witness =
        serialize_zorder(centers, 10).permutation != serialize_zorder(rotated, 10).permutation;
    std::vector<Vec3> rotated2;
    for (const auto& c : centers) rotated2.push_back({c[0], -c[2], c[1]});
    const bool hilbert_witness =
        serialize_hilbert(centers, 10).permutation !=
        serialize_hilbert(rotated2, 10).permutation;

    const double elapsed = std::chrono::duration<double>(clock::now() - t0).count();
    report(mismatch_count == 0 && zorder_witness && hilbert_witness && elapsed < 60.0,
           "criterion 1: rotation invariance",
           "mismatched runs " + std::to_string(mismatch_count) + "/400, zorder witness " +
               (zorder_witness ? "yes" : "no") + ", hilbert witness " +
               (hilbert_witness ? "yes" : "no") + ", elapsed " + fmt(elapsed) + "s (< 60s)");
}

// ---------------------------------------------------------------- criterion 2

void criterion_2() {
    BfsSpectralConfig config;  // smooth corpus: spheres + tori
    const BenchReport r = run_bfs_vs_spectral(config);
    double mean_npr = 0.0, ms_bfs = 0.0, ms_spectral = 0.0;
    int npr_rows = 0;
    for (const auto& row : r.rows)
        if (row.strategy == "cds_spectral" && row.metric == "npr") {
            mean_npr += row.value;
            ++npr_rows;
        }
    mean_npr /= npr_rows;
    for (const auto& row : r.timing_rows) {
        if (row.strategy == "cds_bfs") ms_bfs += row.value;
        if (row.strategy == "cds_spectral") ms_spectral += row.value;
    }
    report(mean_npr >= 0.85, "criterion 2a: spectral CDS NPR vs BFS reference",
           "mean NPR " + fmt(mean_npr) + " (threshold 0.85, r=2, G=64)");
    report(ms_spectral < ms_bfs, "criterion 2b: spectral faster than naive BFS at G=64",
           "aggregate spectral " + fmt(ms_spectral) + " ms vs BFS " + fmt(ms_bfs) +
               " ms — full Jacobi eigensolve is O(G^3) against an O(G^2 log k) queue "
               "traversal, so the CPU spectral path cannot win at this scale");
}

// ---------------------------------------------------------------- criterion 3

void criterion_3() {
    DriftConfig config;  // defaults: 20 shapes, 20 rotations, k=8, h=8
    const BenchReport r = run_drift_bench(config);
    std::map<std::string, std::map<std::string, std::pair<double, int>>> acc;
    for (const auto& row : r.rows) {
        auto& slot = acc[row.strategy][row.metric];
        slot.first += row.value;
        slot.second += 1;
    }
    const auto mean = [&](const std::string& s, const std::string& m) {
        const auto& slot = acc.at(s).at(m);
        return slot.first / slot.second;
    };
    const double sas_t = mean("sas", "topo_npr"), sas_g = mean("sas", "geo_npr");
    const double hil_t = mean("hilbert", "topo_npr"), hil_g = mean("hilbert", "geo_npr");
    const double z_t = mean("zorder", "topo_npr"), z_g = mean("zorder", "geo_npr");
    report(sas_t > hil_t && sas_t > z_t && sas_g > hil_g && sas_g > z_g,
           "criterion 3: structural-drift trend",
           "topo sas " + fmt(sas_t) + " vs hilbert " + fmt(hil_t) + " / zorder " + fmt(z_t) +
               "; geo sas " + fmt(sas_g) + " vs hilbert " + fmt(hil_g) + " / zorder " +
               fmt(z_g));
}

// ---------------------------------------------------------------- criterion 4

void criterion_4() {
    bool ok = true;
    std::ostringstream detail;

    {
        Rng rng(404);
        Matrix m(64, 64);
        for (int i = 0; i < 64; ++i)
            for (int j = i; j < 64; ++j) m(i, j) = m(j, i) = rng.normal();
        const SpectralBasis basis = sym_eig(m);
        Matrix lambda(64, 64);
        for (int i = 0; i < 64; ++i) lambda(i, i) = basis.eigenvalues[i];
        const Matrix rebuilt =
            matmul(matmul(basis.eigenvectors, lambda), transpose(basis.eigenvectors));
        const double residual = frobenius_diff(rebuilt, m) / frobenius_norm(m);
        ok &= residual <= 1e-8;
        detail << "eig residual " << fmt(residual);
    }
    {
        Rng rng(405);
        std::vector<Vec3> centers(48);
        for (auto& c : centers) c = {rng.normal(), rng.normal(), rng.normal()};
        const Matrix geo = geodesic_distances(centers, 6);
        const Matrix w = kernel_affinity(geo, median_scale(geo));
        const SpectralBasis basis =
            sym_eig(laplacian(w, LaplacianMode::symmetric_normalized),
                    LaplacianMode::symmetric_normalized);
        const auto scales = default_heat_scales(basis);
        const HeatDescriptor h = heat_descriptor(basis, scales);
        double worst = 0.0;
        for (size_t s = 0; s < scales.size(); ++s) {
            double trace_sum = 0.0, spectrum_sum = 0.0;
            for (int i = 0; i < 48; ++i) trace_sum += h.values(i, static_cast<int>(s));
            for (double ev : basis.eigenvalues) spectrum_sum += std::exp(-ev * scales[s]);
            worst = std::max(worst, std::abs(trace_sum - spectrum_sum) / spectrum_sum);
        }
        ok &= worst <= 1e-8;
        detail << ", trace identity " << fmt(worst);
    }
    {
        const int n = 14;
        Matrix w(n, n);
        for (int i = 0; i + 1 < n; ++i) w(i, i + 1) = w(i + 1, i) = 1.0;
        for (int i = 0; i < n; ++i) w(i, i) = 1.0;
        const Matrix l = laplacian(w, LaplacianMode::combinatorial);
        const SpectralBasis basis = sym_eig(l);
        const double tau = 0.5;
        Matrix neg = l;
        for (auto& v : neg.data()) v *= -tau;
        const Matrix k_tau = oracle::expm(neg);
        const HeatDescriptor h = heat_descriptor(basis, {tau});
        double worst = 0.0;
        for (int i = 0; i < n; ++i)
            worst = std::max(worst, std::abs(h.values(i, 0) - k_tau(i, i)));
        ok &= worst <= 1e-8;
        detail << ", heat-vs-expm " << fmt(worst);
    }
    {
        Rng rng(406);
        std::vector<Vec3> centers(64);
        for (auto& c : centers) c = {rng.normal(), rng.normal(), rng.normal()};
        const GeodesicGraph graph = build_geodesic_graph(centers, 6);
        const double worst = max_abs_diff(geodesic_distances(graph), oracle::floyd_warshall(graph));
        ok &= worst <= 1e-10;
        detail << ", geodesic-vs-fw " << fmt(worst);
    }
    {
        Rng rng(407);
        std::vector<Vec3> centers(64);
        for (auto& c : centers) c = {rng.normal(), rng.normal(), rng.normal()};
        const TokenGraph g = build_cds_graph(centers);
        const SpectralBasis basis = sym_eig(laplacian(g.affinity, LaplacianMode::combinatorial));
        Matrix signal(64, 256);
        for (auto& v : signal.data()) v = rng.normal();
        const Matrix spectral = gft(basis, signal);
        const double parseval =
            std::abs(frobenius_norm(spectral) - frobenius_norm(signal)) / frobenius_norm(signal);
        const double round_trip =
            frobenius_diff(igft(basis, spectral), signal) / frobenius_norm(signal);
        ok &= parseval <= 1e-8 && round_trip <= 1e-8;
        detail << ", parseval " << fmt(parseval) << ", gft round-trip " << fmt(round_trip);
    }
    report(ok, "criterion 4: numerical core", detail.str());
}

// ---------------------------------------------------------------- criterion 5

void criterion_5() {
    const GradCheckReport r = run_gradcheck(50, 2024);
    const bool ok = r.worst() <= 1e-4;
    report(ok, "criterion 5: gradient suite",
           "50 instances, max rel err A " + fmt(r.max_rel_a) + ", B " + fmt(r.max_rel_b) +
               ", bias " + fmt(r.max_rel_bias) + ", input " + fmt(r.max_rel_input) +
               " (threshold 1e-4)");
}

// ---------------------------------------------------------------- criterion 6

void criterion_6() {
    const ToyTaskConfig task;  // 20-shape corpus, 30 epochs
    const std::vector<IclInstance> corpus = build_toy_instances(task, LayoutKind::full_sas);

    const auto train_once = [&]() {
        StackConfig sc;
        sc.embed_dim = task.pipeline.feature_dim;
        sc.enc_layers = task.enc_layers;
        sc.dec_layers = task.dec_layers;
        sc.patch_size = task.pipeline.patch_size;
        sc.a_norm = task.a_norm;
        sc.gate = task.gate == "identity" ? Gate::identity : Gate::sigmoid_gate;
        SsmStack stack = make_random_stack(sc, mix_seed(task.model_seed, 0));
        return train_toy(stack, corpus, task.epochs, task.lr, mix_seed(task.model_seed, 0, 5),
                         FusionMode::interleave, task.max_grad_norm);
    };
    const std::vector<double> trace_a = train_once();
    const std::vector<double> trace_b = train_once();

    const double drop = 1.0 - trace_a.back() / trace_a.front();
    report(drop >= 0.30 && trace_a == trace_b, "criterion 6: toy-training sanity",
           "epoch-0 loss " + fmt(trace_a.front()) + " -> " + fmt(trace_a.back()) + " (drop " +
               fmt(100.0 * drop) + "%, threshold 30%), identical seeds bit-identical: " +
               (trace_a == trace_b ? "yes" : "no"));
}

// ---------------------------------------------------------------- criterion 7

void criterion_7() {
    AblationConfig config;  // all variants
    config.seeds = 8;
    const BenchReport r = run_ablation_suite(config);

    std::map<std::string, std::pair<double, int>> eval_mean, rotated_mean;
    for (const auto& row : r.rows) {
        if (row.metric == "eval_loss") {
            eval_mean[row.strategy].first += row.value;
            eval_mean[row.strategy].second += 1;
        }
        if (row.metric == "rotated_eval_loss") {
            rotated_mean[row.strategy].first += row.value;
            rotated_mean[row.strategy].second += 1;
        }
    }
    const auto ev = [&](const std::string& v) {
        return eval_mean.at(v).first / eval_mean.at(v).second;
    };
    const auto rot = [&](const std::string& v) {
        return rotated_mean.at(v).first / rotated_mean.at(v).second;
    };

    const double full = ev("full_sas");
    bool serialization_ok = true;
    std::ostringstream detail;
    detail << "full " << fmt(full);
    for (const std::string v : {"no_cds", "no_gcs", "zorder", "hilbert", "random"}) {
        serialization_ok &= full < ev(v);
        detail << ", " << v << " " << fmt(ev(v));
    }
    report(serialization_ok, "criterion 7a: full SAS beats serialization ablations",
           detail.str() + " (8 seeds)");

    report(ev("interleave_hdm") <= ev("concat_hdm"),
           "criterion 7b: interleave <= concat",
           "interleave " + fmt(ev("interleave_hdm")) + " vs concat " + fmt(ev("concat_hdm")));

    report(rot("sga_on") <= rot("sga_off") && rot("sga_on") <= rot("simple_shift"),
           "criterion 7c: SGA on rotated targets",
           "sga_on " + fmt(rot("sga_on")) + " vs sga_off " + fmt(rot("sga_off")) +
               " vs simple_shift " + fmt(rot("simple_shift")));
}

// ---------------------------------------------------------------- criterion 8

void criterion_8() {
    PipelineConfig pipeline;
    pipeline.tokens = 32;
    pipeline.patch_size = 8;
    pipeline.feature_dim = 64;
    const CloudInstance target = build_instance(
        normalize_unit_sphere(gen_shape(ShapeKind::box_composite, 512, 8)), pipeline);
    const CloudInstance source = build_instance(
        normalize_unit_sphere(gen_shape(ShapeKind::torus, 512, 9)), pipeline);
    SourceBank bank;
    bank.cds = {serialize_features(source.tokens.features, source.cds_spectral)};
    bank.gcs = {serialize_features(source.tokens.features, source.gcs)};

    const SsmStack stack = make_random_stack({64, 2, 1, 8, Gate::sigmoid_gate,
                                              ScanDirection::bidirectional_sum, 0.9},
                                             77);
    const uint64_t before = stack_checksum(stack);
    const AlignTarget view{target.tokens.features, target.cds_graph, target.gcs_graph,
                           target.cds_spectral, target.gcs};
    const AlignResult result = align_pipeline(view, bank, AlignmentConfig{});
    const uint64_t after = stack_checksum(stack);
    report(before == after && result.metrics.shift_norm > 0.0,
           "criterion 8: alignment purity",
           "stack checksum unchanged: " + std::string(before == after ? "yes" : "no") +
               ", shift norm " + fmt(result.metrics.shift_norm));
}

// ---------------------------------------------------------------- criterion 9

std::string file_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("missing " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

bool run_cli(const std::string& args) {
    const std::string cmd = std::string(SASKIT_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    return std::system(cmd.c_str()) == 0;
}

void criterion_9() {
    const fs::path root = fs::temp_directory_path() / "saskit_acceptance";
    fs::remove_all(root);
    fs::create_directories(root);

    // source clouds for the align command
    const fs::path srcs = root / "sources";
    fs::create_directories(srcs);
    for (int i = 0; i < 2; ++i) {
        const PointCloud cloud = gen_shape(ShapeKind::torus, 512, 50 + i);
        std::ostringstream os;
        for (const auto& p : cloud.points) {
            char buf[96];
            std::snprintf(buf, sizeof(buf), "%.12g %.12g %.12g\n", p[0], p[1], p[2]);
            os << buf;
        }
        std::ofstream(srcs / ("src" + std::to_string(i) + ".xyz")) << os.str();
    }

    struct Command {
        std::string name, args, artifact;
    };
    const std::string small = "--tokens 24 --patch-size 8 --dim 32";
    const std::vector<Command> commands = {
        {"serialize",
         "serialize --shape torus --points 512 " + small + " --strategy gcs --csv",
         "path.csv"},
        {"npr", "npr " + small, "report.csv"},
        {"drift-bench", "drift-bench --rotations 5 " + small, "report.csv"},
        {"bfs-vs-spectral", "bfs-vs-spectral " + small, "report.csv"},
        {"ablate", "ablate --variants interleave_hdm concat_hdm --seeds 1 --epochs 3",
         "report.csv"},
        {"align",
         "align --shape box_composite --points 512 --shape-seed 4 " + small +
             " --sources " + srcs.string() + " --mode adaptive",
         "report.csv"},
        {"gradcheck", "gradcheck --instances 5", "report.csv"},
    };

    bool all_ok = true;
    std::ostringstream detail;
    for (const auto& command : commands) {
        const fs::path out1 = root / (command.name + "_1");
        const fs::path out2 = root / (command.name + "_2");
        bool ok = run_cli(command.args + " --out " + out1.string());
        ok = ok && run_cli(command.name + " --config " +
                           (out1 / "config_snapshot.json").string() + " --out " + out2.string());
        ok = ok && file_bytes(out1 / command.artifact) == file_bytes(out2 / command.artifact);
        all_ok &= ok;
        detail << command.name << (ok ? " ok" : " MISMATCH") << "; ";
    }
    report(all_ok, "criterion 9: CLI snapshot reruns byte-identical", detail.str());
}

}  // namespace

int main() {
    setvbuf(stdout, nullptr, _IONBF, 0);
    std::printf("acceptance suite (threads: %d)\n", thread_count());
    const std::vector<std::pair<std::string, void (*)()>> criteria = {
        {"criterion 1", criterion_1}, {"criterion 2", criterion_2},
        {"criterion 3", criterion_3}, {"criterion 4", criterion_4},
        {"criterion 5", criterion_5}, {"criterion 6", criterion_6},
        {"criterion 7", criterion_7}, {"criterion 8", criterion_8},
        {"criterion 9", criterion_9},
    };
    for (const auto& [name, fn] : criteria) {
        try {
            fn();
        } catch (const std::exception& e) {
            report(false, name, std::string("exception: ") + e.what());
        }
    }
    std::printf("%d criterion(s) failed\n", g_failures);
    return g_failures;
}
