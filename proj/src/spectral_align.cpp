#include "saskit/spectral_align.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace saskit {

Matrix gft(const SpectralBasis& basis, const Matrix& signal) {
    if (basis.size() != signal.rows())
        throw std::invalid_argument("gft: basis size does not match signal rows");
    return matmul(transpose(basis.eigenvectors), signal);
}

Matrix igft(const SpectralBasis& basis, const Matrix& spectral) {
    if (basis.size() != spectral.rows())
        throw std::invalid_argument("igft: basis size does not match spectral rows");
    return matmul(basis.eigenvectors, spectral);
}

SpectralPrototype compute_prototype(const SpectralBasis& target_basis,
                                    const std::vector<Matrix>& source_features,
                                    GraphKind kind) {
    if (source_features.empty())
        throw std::invalid_argument("compute_prototype: empty source list");
    const int g = source_features[0].rows();
    const int d = source_features[0].cols();
    Matrix mean(g, d);
    for (const auto& src : source_features) {
        if (src.rows() != g || src.cols() != d)
            throw std::invalid_argument("compute_prototype: source shape mismatch");
        for (size_t i = 0; i < mean.data().size(); ++i) mean.data()[i] += src.data()[i];
    }
    const double inv = 1.0 / static_cast<double>(source_features.size());
    for (auto& v : mean.data()) v *= inv;

    const Matrix projected = gft(target_basis, mean);
    SpectralPrototype proto;
    proto.basis_kind = kind;
    proto.source_count = static_cast<int>(source_features.size());
    proto.vector.assign(d, 0.0);
    for (int i = 0; i < projected.rows(); ++i)
        for (int j = 0; j < d; ++j) proto.vector[j] += projected(i, j);
    for (auto& v : proto.vector) v /= static_cast<double>(g);
    return proto;
}

namespace {

double row_cosine(const double* row, const std::vector<double>& p) {
    double dot = 0.0, nr = 0.0, np = 0.0;
    for (size_t j = 0; j < p.size(); ++j) {
        dot += row[j] * p[j];
        nr += row[j] * row[j];
        np += p[j] * p[j];
    }
    if (nr <= 0.0 || np <= 0.0) return 2.0;  // sentinel: undefined cosine
    return dot / std::sqrt(nr * np);
}

}  // namespace

Matrix spectral_shift(const Matrix& spectral_tokens, const SpectralPrototype& prototype,
                      const AlignmentConfig& config) {
    if (spectral_tokens.cols() != static_cast<int>(prototype.vector.size()))
        throw std::invalid_argument("spectral_shift: dimension mismatch");
    if (config.mode == AlignMode::off) return spectral_tokens;
    if (config.mode == AlignMode::simple_shift)
        throw std::invalid_argument("spectral_shift: simple_shift operates in the spatial domain");

    Matrix out = spectral_tokens;
    const int d = out.cols();
    for (int i = 0; i < out.rows(); ++i) {
        double alpha;
        if (config.mode == AlignMode::fixed_alpha) {
            if (config.alpha < 0.0 || config.alpha > 1.0)
                throw std::invalid_argument("spectral_shift: alpha must be in [0, 1]");
            alpha = config.alpha;
        } else {
            const double c = row_cosine(out.row(i), prototype.vector);
            if (c > 1.5) {
                alpha = 1.0;  // zero-norm row: no shift
            } else {
                if (config.eps_low <= 0.0 || config.eps_low > 0.5)
                    throw std::invalid_argument("spectral_shift: eps_low must be in (0, 0.5]");
                alpha = std::clamp(0.5 * (1.0 + c), config.eps_low, 1.0);
            }
        }
        double* row = out.row(i);
        for (int j = 0; j < d; ++j)
            row[j] = alpha * row[j] + (1.0 - alpha) * (prototype.vector[j] - row[j]);
    }
    return out;
}

Matrix simple_shift(const Matrix& features, const std::vector<double>& prototype_spatial,
                    double beta) {
    if (features.cols() != static_cast<int>(prototype_spatial.size()))
        throw std::invalid_argument("simple_shift: dimension mismatch");
    if (beta < 0.0 || beta > 1.0) throw std::invalid_argument("simple_shift: beta in [0, 1]");
    Matrix out = features;
    for (int i = 0; i < out.rows(); ++i) {
        double* row = out.row(i);
        for (int j = 0; j < out.cols(); ++j)
            row[j] = beta * row[j] + (1.0 - beta) * (prototype_spatial[j] - row[j]);
    }
    return out;
}

namespace {

Matrix permute_rows(const Matrix& m, const std::vector<int>& perm) {
    Matrix out(m.rows(), m.cols());
    for (size_t r = 0; r < perm.size(); ++r)
        std::copy(m.row(perm[r]), m.row(perm[r]) + m.cols(), out.row(static_cast<int>(r)));
    return out;
}

Matrix unpermute_rows(const Matrix& m, const std::vector<int>& perm) {
    Matrix out(m.rows(), m.cols());
    for (size_t r = 0; r < perm.size(); ++r)
        std::copy(m.row(static_cast<int>(r)), m.row(static_cast<int>(r)) + m.cols(),
                  out.row(perm[r]));
    return out;
}

Matrix permute_affinity(const Matrix& w, const std::vector<int>& perm) {
    const int n = w.rows();
    Matrix out(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) out(i, j) = w(perm[i], perm[j]);
    return out;
}

double mean_row_cosine(const Matrix& m, const std::vector<double>& p) {
    double total = 0.0;
    int counted = 0;
    for (int i = 0; i < m.rows(); ++i) {
        const double c = row_cosine(m.row(i), p);
        if (c <= 1.5) {
            total += c;
            ++counted;
        }
    }
    return counted > 0 ? total / counted : 0.0;
}

}  // namespace

AlignResult align_pipeline(const AlignTarget& target, const SourceBank& bank,
                           const AlignmentConfig& config) {
    AlignResult result;
    if (config.mode == AlignMode::off) {
        result.aligned = target.features;
        return result;
    }

    const int g = target.features.rows();
    const int d = target.features.cols();

    if (config.mode == AlignMode::simple_shift) {
        // Spatial prototype: the rank-mean of rank-serialized features equals
        // the token mean, so one prototype serves both spectra.
        std::vector<double> proto(d, 0.0);
        int rows = 0;
        for (const auto* side : {&bank.cds, &bank.gcs}) {
            for (const auto& src : *side) {
                for (int i = 0; i < src.rows(); ++i)
                    for (int j = 0; j < d; ++j) proto[j] += src(i, j);
                rows += src.rows();
            }
        }
        if (rows == 0) throw std::invalid_argument("align_pipeline: empty source bank");
        for (auto& v : proto) v /= static_cast<double>(rows);
        result.aligned = simple_shift(target.features, proto, config.beta);
        Matrix diff = result.aligned;
        for (size_t i = 0; i < diff.data().size(); ++i) diff.data()[i] -= target.features.data()[i];
        result.metrics.shift_norm = frobenius_norm(diff);
        return result;
    }

    auto align_one = [&](const TokenGraph& graph, const SerializationOrder& order,
                         const std::vector<Matrix>& sources, GraphKind kind, double& pre_cos,
                         double& post_cos) {
        if (sources.empty()) throw std::invalid_argument("align_pipeline: empty source bank");
        const Matrix w_rank = permute_affinity(graph.affinity, order.permutation);
        const Matrix lap = laplacian(w_rank, LaplacianMode::combinatorial);
        const SpectralBasis basis = sym_eig(lap, LaplacianMode::combinatorial);
        const Matrix x_rank = permute_rows(target.features, order.permutation);
        const Matrix x_hat = gft(basis, x_rank);
        const SpectralPrototype proto = compute_prototype(basis, sources, kind);
        pre_cos = mean_row_cosine(x_hat, proto.vector);
        const Matrix shifted = spectral_shift(x_hat, proto, config);
        post_cos = mean_row_cosine(shifted, proto.vector);
        return unpermute_rows(igft(basis, shifted), order.permutation);
    };

    const Matrix out_cds =
        align_one(target.cds_graph, target.cds_order, bank.cds, GraphKind::cds,
                  result.metrics.pre_cosine_cds, result.metrics.post_cosine_cds);
    const Matrix out_gcs =
        align_one(target.gcs_graph, target.gcs_order, bank.gcs, GraphKind::gcs,
                  result.metrics.pre_cosine_gcs, result.metrics.post_cosine_gcs);

    result.aligned = Matrix(g, d);
    for (size_t i = 0; i < result.aligned.data().size(); ++i)
        result.aligned.data()[i] = 0.5 * (out_cds.data()[i] + out_gcs.data()[i]);

    Matrix diff = result.aligned;
    for (size_t i = 0; i < diff.data().size(); ++i) diff.data()[i] -= target.features.data()[i];
    result.metrics.shift_norm = frobenius_norm(diff);
    return result;
}

}  // namespace saskit
