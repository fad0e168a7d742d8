#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "saskit/bench.hpp"
#include "saskit/pipeline.hpp"
#include "saskit/rng.hpp"
#include "saskit/spectral_align.hpp"
#include "saskit/ssm.hpp"

using namespace saskit;

namespace {

Matrix random_matrix(int r, int c, uint64_t seed, double scale = 1.0) {
    Rng rng(seed);
    Matrix m(r, c);
    for (auto& v : m.data()) v = scale * rng.normal();
    return m;
}

SpectralBasis laplacian_basis(int n, uint64_t seed) {
    Rng rng(seed);
    std::vector<Vec3> centers(n);
    for (auto& c : centers) c = {rng.normal(), rng.normal(), rng.normal()};
    const TokenGraph g = build_cds_graph(centers);
    return sym_eig(laplacian(g.affinity, LaplacianMode::combinatorial));
}

SpectralBasis identity_basis(int n) {
    SpectralBasis basis;
    basis.eigenvectors = Matrix::identity(n);
    for (int i = 0; i < n; ++i) basis.eigenvalues.push_back(static_cast<double>(i));
    return basis;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0, na = 0, nb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return dot / std::sqrt(na * nb);
}

}  // namespace

TEST_CASE("gft of an eigenvector is a unit coordinate vector") {
    const SpectralBasis basis = laplacian_basis(12, 3);
    const int k = 5;
    Matrix signal(12, 1);
    for (int i = 0; i < 12; ++i) signal(i, 0) = basis.eigenvectors(i, k);
    const Matrix spectral = gft(basis, signal);
    for (int i = 0; i < 12; ++i)
        CHECK(spectral(i, 0) == doctest::Approx(i == k ? 1.0 : 0.0).epsilon(1e-9));
}

TEST_CASE("constant signals load only the zero mode of a combinatorial basis") {
    const SpectralBasis basis = laplacian_basis(10, 4);
    Matrix signal(10, 2, 1.0);
    const Matrix spectral = gft(basis, signal);
    for (int i = 1; i < 10; ++i)
        for (int c = 0; c < 2; ++c) CHECK(std::abs(spectral(i, c)) < 1e-8);
    CHECK(std::abs(spectral(0, 0)) > 1.0);
}

TEST_CASE("gft preserves the frobenius norm") {
    const SpectralBasis basis = laplacian_basis(24, 5);
    const Matrix signal = random_matrix(24, 16, 6);
    CHECK(frobenius_norm(gft(basis, signal)) ==
          doctest::Approx(frobenius_norm(signal)).epsilon(1e-8));
}

TEST_CASE("igft inverts gft on a 64x256 signal") {
    const SpectralBasis basis = laplacian_basis(64, 7);
    const Matrix signal = random_matrix(64, 256, 8);
    const Matrix back = igft(basis, gft(basis, signal));
    CHECK(frobenius_diff(back, signal) / frobenius_norm(signal) <= 1e-8);
}

TEST_CASE("igft maps unit spectra to eigenvectors and zero to zero") {
    const SpectralBasis basis = laplacian_basis(8, 9);
    Matrix unit(8, 1);
    unit(3, 0) = 1.0;
    const Matrix vec = igft(basis, unit);
    for (int i = 0; i < 8; ++i)
        CHECK(vec(i, 0) == doctest::Approx(basis.eigenvectors(i, 3)).epsilon(1e-12));
    CHECK(frobenius_norm(igft(basis, Matrix(8, 1))) == 0.0);
}

TEST_CASE("prototype of a single source under the identity basis is the row mean") {
    const Matrix source = random_matrix(6, 4, 10);
    const SpectralPrototype proto =
        compute_prototype(identity_basis(6), {source}, GraphKind::cds);
    for (int c = 0; c < 4; ++c) {
        double mean = 0.0;
        for (int r = 0; r < 6; ++r) mean += source(r, c);
        mean /= 6.0;
        CHECK(proto.vector[c] == doctest::Approx(mean).epsilon(1e-12));
    }
}

TEST_CASE("prototype of duplicated sources equals the single-source prototype") {
    const SpectralBasis basis = laplacian_basis(8, 11);
    const Matrix source = random_matrix(8, 5, 12);
    const SpectralPrototype one = compute_prototype(basis, {source}, GraphKind::gcs);
    const SpectralPrototype two = compute_prototype(basis, {source, source}, GraphKind::gcs);
    for (size_t i = 0; i < one.vector.size(); ++i)
        CHECK(one.vector[i] == doctest::Approx(two.vector[i]).epsilon(1e-12));
    CHECK(two.source_count == 2);
}

TEST_CASE("prototype matches the naive mean-project-reduce oracle") {
    const SpectralBasis basis = laplacian_basis(10, 13);
    std::vector<Matrix> sources;
    for (uint64_t s = 0; s < 4; ++s) sources.push_back(random_matrix(10, 6, 20 + s));
    const SpectralPrototype proto = compute_prototype(basis, sources, GraphKind::cds);

    Matrix mean(10, 6);
    for (const auto& src : sources)
        for (size_t i = 0; i < mean.data().size(); ++i) mean.data()[i] += src.data()[i] / 4.0;
    const Matrix projected = matmul(transpose(basis.eigenvectors), mean);
    for (int c = 0; c < 6; ++c) {
        double v = 0.0;
        for (int r = 0; r < 10; ++r) v += projected(r, c);
        v /= 10.0;
        CHECK(proto.vector[c] == doctest::Approx(v).epsilon(1e-10));
    }
}

TEST_CASE("compute_prototype rejects an empty source list") {
    CHECK_THROWS_AS(compute_prototype(identity_basis(4), {}, GraphKind::cds),
                    std::invalid_argument);
}

TEST_CASE("spectral_shift with alpha 1 is the identity") {
    SpectralPrototype proto;
    proto.vector = {1.0, -2.0, 0.5};
    AlignmentConfig config;
    config.mode = AlignMode::fixed_alpha;
    config.alpha = 1.0;
    const Matrix tokens = random_matrix(5, 3, 30);
    CHECK(max_abs_diff(spectral_shift(tokens, proto, config), tokens) == 0.0);
}

TEST_CASE("spectral_shift with alpha 0 yields P minus X, literally") {
    SpectralPrototype proto;
    proto.vector = {1.0, 2.0};
    AlignmentConfig config;
    config.mode = AlignMode::fixed_alpha;
    config.alpha = 0.0;
    Matrix tokens(1, 2);
    tokens(0, 0) = 0.25;
    tokens(0, 1) = -0.5;
    const Matrix out = spectral_shift(tokens, proto, config);
    CHECK(out(0, 0) == doctest::Approx(0.75));
    CHECK(out(0, 1) == doctest::Approx(2.5));
}

TEST_CASE("rows parallel to the prototype are untouched in adaptive mode") {
    SpectralPrototype proto;
    proto.vector = {0.6, -0.2, 1.0};
    AlignmentConfig config;  // adaptive by default
    Matrix tokens(2, 3);
    for (int c = 0; c < 3; ++c) tokens(0, c) = 3.0 * proto.vector[c];
    tokens(1, 0) = 0.1;  // unrelated row
    const Matrix out = spectral_shift(tokens, proto, config);
    for (int c = 0; c < 3; ++c)
        CHECK(out(0, c) == doctest::Approx(tokens(0, c)).epsilon(1e-12));
}

TEST_CASE("zero-norm rows are left unchanged in adaptive mode") {
    SpectralPrototype proto;
    proto.vector = {1.0, 1.0};
    AlignmentConfig config;
    Matrix tokens(1, 2);  // zero row
    const Matrix out = spectral_shift(tokens, proto, config);
    CHECK(out(0, 0) == 0.0);
    CHECK(out(0, 1) == 0.0);
}

TEST_CASE("adaptive shift monotonically pulls rows toward the prototype") {
    Rng rng(31);
    std::vector<double> p(8);
    for (auto& v : p) v = rng.normal();
    AlignmentConfig config;
    int checked = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> x(8);
        for (auto& v : x) v = rng.normal();
        const double c = cosine(x, p);
        if (c <= -1.0 + 2.0 * config.eps_low) continue;
        Matrix row(1, 8);
        for (int i = 0; i < 8; ++i) row(0, i) = x[i];
        SpectralPrototype proto;
        proto.vector = p;
        const Matrix out = spectral_shift(row, proto, config);
        std::vector<double> y(8);
        for (int i = 0; i < 8; ++i) y[i] = out(0, i);
        double ny = 0.0;
        for (double v : y) ny += v * v;
        if (ny < 1e-20) continue;
        CHECK(cosine(y, p) >= c - 1e-12);
        ++checked;
    }
    CHECK(checked > 900);
}

TEST_CASE("simple_shift follows the literal formula") {
    std::vector<double> proto{0.5, -1.0};
    Matrix features(1, 2);
    features(0, 0) = 0.5;
    features(0, 1) = -1.0;  // X = P
    const Matrix half = simple_shift(features, proto, 0.5);
    CHECK(half(0, 0) == doctest::Approx(0.25));  // 0.5 P, not a fixed point
    CHECK(half(0, 1) == doctest::Approx(-0.5));
    CHECK(max_abs_diff(simple_shift(features, proto, 1.0), features) == 0.0);

    const Matrix x = random_matrix(4, 2, 33);
    const Matrix out = simple_shift(x, proto, 0.3);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 2; ++c)
            CHECK(out(r, c) ==
                  doctest::Approx(0.3 * x(r, c) + 0.7 * (proto[c] - x(r, c))).epsilon(1e-12));
}

namespace {

struct AlignFixture {
    CloudInstance target;
    CloudInstance other;
    SourceBank self_bank, other_bank;

    AlignFixture() {
        PipelineConfig cfg;
        cfg.tokens = 24;
        cfg.patch_size = 8;
        cfg.feature_dim = 32;
        target = build_instance(
            normalize_unit_sphere(gen_shape(ShapeKind::torus, 512, 5)), cfg);
        other = build_instance(
            normalize_unit_sphere(gen_shape(ShapeKind::box_composite, 512, 6)), cfg);
        self_bank.cds = {serialize_features(target.tokens.features, target.cds_spectral)};
        self_bank.gcs = {serialize_features(target.tokens.features, target.gcs)};
        other_bank.cds = {serialize_features(other.tokens.features, other.cds_spectral)};
        other_bank.gcs = {serialize_features(other.tokens.features, other.gcs)};
    }

    AlignTarget view() const {
        return AlignTarget{target.tokens.features, target.cds_graph, target.gcs_graph,
                           target.cds_spectral, target.gcs};
    }
};

}  // namespace

TEST_CASE("align_pipeline in off mode returns the input") {
    const AlignFixture fix;
    AlignmentConfig config;
    config.mode = AlignMode::off;
    const AlignResult result = align_pipeline(fix.view(), fix.self_bank, config);
    CHECK(max_abs_diff(result.aligned, fix.target.tokens.features) == 0.0);
}

TEST_CASE("self-sourced alignment shifts less than a mismatched source") {
    const AlignFixture fix;
    AlignmentConfig config;  // adaptive
    const AlignResult self_run = align_pipeline(fix.view(), fix.self_bank, config);
    const AlignResult other_run = align_pipeline(fix.view(), fix.other_bank, config);
    CHECK(self_run.metrics.shift_norm < other_run.metrics.shift_norm);
}

TEST_CASE("alignment never touches model parameters") {
    const AlignFixture fix;
    const SsmStack stack = make_random_stack({16, 2, 1, 8, Gate::sigmoid_gate,
                                              ScanDirection::bidirectional_sum, 0.9},
                                             77);
    const uint64_t before = stack_checksum(stack);
    AlignmentConfig config;
    align_pipeline(fix.view(), fix.other_bank, config);
    CHECK(stack_checksum(stack) == before);
}

TEST_CASE("simple_shift mode in the pipeline uses the pooled spatial prototype") {
    const AlignFixture fix;
    AlignmentConfig config;
    config.mode = AlignMode::simple_shift;
    config.beta = 1.0;  // identity
    const AlignResult result = align_pipeline(fix.view(), fix.other_bank, config);
    CHECK(max_abs_diff(result.aligned, fix.target.tokens.features) < 1e-15);
}
