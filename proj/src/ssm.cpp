#include "saskit/ssm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "saskit/rng.hpp"

namespace saskit {

SsmBlock make_identity_block(int dim) {
    SsmBlock block;
    block.a = Matrix(dim, dim);
    block.b = Matrix::identity(dim);
    block.bias.assign(dim, 0.0);
    block.gate = Gate::identity;
    block.direction = ScanDirection::forward;
    return block;
}

SsmBlock make_random_block(int dim, uint64_t seed, Gate gate, ScanDirection direction,
                           double a_norm) {
    Rng rng(seed);
    Matrix a(dim, dim);
    for (auto& v : a.data()) v = rng.normal();
    // Gram-Schmidt on columns, then rescale to the requested Frobenius norm.
    for (int c = 0; c < dim; ++c) {
        for (int prev = 0; prev < c; ++prev) {
            double dot = 0.0;
            for (int r = 0; r < dim; ++r) dot += a(r, c) * a(r, prev);
            for (int r = 0; r < dim; ++r) a(r, c) -= dot * a(r, prev);
        }
        double nrm = 0.0;
        for (int r = 0; r < dim; ++r) nrm += a(r, c) * a(r, c);
        nrm = std::sqrt(nrm);
        if (nrm < 1e-12) {
            a(c, c) = 1.0;
            nrm = 1.0;
        }
        for (int r = 0; r < dim; ++r) a(r, c) /= nrm;
    }
    const double f = frobenius_norm(a);
    for (auto& v : a.data()) v *= a_norm / f;

    SsmBlock block;
    block.a = std::move(a);
    block.b = Matrix::identity(dim);
    block.bias.assign(dim, 0.0);
    block.gate = gate;
    block.direction = direction;
    return block;
}

namespace {

void scan_pass(const SsmBlock& block, const Matrix& x, bool reverse, Matrix& out) {
    const int len = x.rows();
    const int d = x.cols();
    out = Matrix(len, d);
    std::vector<double> state(d, 0.0);
    std::vector<double> pre(d);
    for (int step = 0; step < len; ++step) {
        const int t = reverse ? len - 1 - step : step;
        const double* xr = x.row(t);
        for (int i = 0; i < d; ++i) {
            const double* ar = block.a.row(i);
            const double* br = block.b.row(i);
            double acc = block.bias[i];
            for (int j = 0; j < d; ++j) acc += ar[j] * state[j] + br[j] * xr[j];
            pre[i] = acc;
        }
        double* orow = out.row(t);
        if (block.gate == Gate::identity) {
            std::copy(pre.begin(), pre.end(), orow);
        } else {
            for (int i = 0; i < d; ++i) orow[i] = 1.0 / (1.0 + std::exp(-pre[i]));
        }
        for (int i = 0; i < d; ++i) {
            if (!std::isfinite(orow[i]))
                throw std::runtime_error("ssm_forward: non-finite state at step " +
                                         std::to_string(t));
            state[i] = orow[i];
        }
    }
}

// Reverse-mode pass matching one scan direction. `reverse` mirrors the
// forward scan_pass flag; states are the cached outputs themselves.
void backward_pass(const SsmBlock& block, const Matrix& x, const Matrix& out,
                   const Matrix& upstream, bool reverse, BlockGrads& grads, Matrix& gx) {
    const int len = x.rows();
    const int d = x.cols();
    std::vector<double> carry(d, 0.0);
    std::vector<double> delta(d);
    for (int step = 0; step < len; ++step) {
        const int t = reverse ? step : len - 1 - step;  // opposite of scan order
        const double* orow = out.row(t);
        const double* urow = upstream.row(t);
        for (int i = 0; i < d; ++i) {
            const double total = urow[i] + carry[i];
            delta[i] = block.gate == Gate::identity
                           ? total
                           : total * orow[i] * (1.0 - orow[i]);
        }

        const double* prev = nullptr;  // state the step read: z_{t-1} or h_{t+1}
        if (!reverse && t > 0) prev = out.row(t - 1);
        if (reverse && t + 1 < len) prev = out.row(t + 1);

        const double* xr = x.row(t);
        for (int i = 0; i < d; ++i) {
            const double di = delta[i];
            if (di == 0.0) continue;
            if (prev) {
                double* gar = grads.a.row(i);
                for (int j = 0; j < d; ++j) gar[j] += di * prev[j];
            }
            double* gbr = grads.b.row(i);
            for (int j = 0; j < d; ++j) gbr[j] += di * xr[j];
            grads.bias[i] += di;
        }

        double* gxr = gx.row(t);
        for (int i = 0; i < d; ++i) {
            const double di = delta[i];
            if (di == 0.0) continue;
            const double* br = block.b.row(i);
            for (int j = 0; j < d; ++j) gxr[j] += di * br[j];
        }
        std::fill(carry.begin(), carry.end(), 0.0);
        for (int i = 0; i < d; ++i) {
            const double di = delta[i];
            if (di == 0.0) continue;
            const double* ar = block.a.row(i);
            for (int j = 0; j < d; ++j) carry[j] += di * ar[j];
        }
    }
}

}  // namespace

Matrix ssm_forward(const SsmBlock& block, const Matrix& sequence, BlockCache& cache) {
    if (sequence.cols() != block.dim())
        throw std::invalid_argument("ssm_forward: dimension mismatch");
    if (!all_finite(sequence)) throw std::invalid_argument("ssm_forward: non-finite input");
    cache.input = sequence;
    cache.out_fwd = Matrix();
    cache.out_bwd = Matrix();
    Matrix out;
    switch (block.direction) {
        case ScanDirection::forward:
            scan_pass(block, sequence, false, cache.out_fwd);
            out = cache.out_fwd;
            break;
        case ScanDirection::backward:
            scan_pass(block, sequence, true, cache.out_bwd);
            out = cache.out_bwd;
            break;
        case ScanDirection::bidirectional_sum:
            scan_pass(block, sequence, false, cache.out_fwd);
            scan_pass(block, sequence, true, cache.out_bwd);
            out = cache.out_fwd;
            for (size_t i = 0; i < out.data().size(); ++i)
                out.data()[i] += cache.out_bwd.data()[i];
            break;
    }
    cache.valid = true;
    return out;
}

Matrix ssm_forward(const SsmBlock& block, const Matrix& sequence) {
    BlockCache cache;
    return ssm_forward(block, sequence, cache);
}

BlockGrads zero_grads_like(const SsmBlock& block) {
    BlockGrads g;
    g.a = Matrix(block.dim(), block.dim());
    g.b = Matrix(block.dim(), block.dim());
    g.bias.assign(block.dim(), 0.0);
    return g;
}

Matrix ssm_backward(const SsmBlock& block, const BlockCache& cache, const Matrix& upstream,
                    BlockGrads& grads) {
    if (!cache.valid) throw std::invalid_argument("ssm_backward: missing forward cache");
    if (upstream.rows() != cache.input.rows() || upstream.cols() != cache.input.cols())
        throw std::invalid_argument("ssm_backward: upstream shape mismatch");
    Matrix gx(cache.input.rows(), cache.input.cols());
    switch (block.direction) {
        case ScanDirection::forward:
            backward_pass(block, cache.input, cache.out_fwd, upstream, false, grads, gx);
            break;
        case ScanDirection::backward:
            backward_pass(block, cache.input, cache.out_bwd, upstream, true, grads, gx);
            break;
        case ScanDirection::bidirectional_sum:
            backward_pass(block, cache.input, cache.out_fwd, upstream, false, grads, gx);
            backward_pass(block, cache.input, cache.out_bwd, upstream, true, grads, gx);
            break;
    }
    return gx;
}

SsmStack make_random_stack(const StackConfig& config, uint64_t seed) {
    SsmStack stack;
    stack.config = config;
    const int d = config.embed_dim;
    for (int l = 0; l < config.enc_layers; ++l) {
        stack.branch_p.push_back(make_random_block(d, mix_seed(seed, 1, l), config.gate,
                                                   config.direction, config.a_norm));
        stack.branch_q.push_back(make_random_block(d, mix_seed(seed, 2, l), config.gate,
                                                   config.direction, config.a_norm));
    }
    for (int l = 0; l < config.dec_layers; ++l)
        stack.fusion.push_back(make_random_block(d, mix_seed(seed, 3, l), config.gate,
                                                 config.direction, config.a_norm));
    Rng rng(mix_seed(seed, 4));
    stack.mask_token.resize(d);
    for (auto& v : stack.mask_token) v = 0.01 * rng.normal();
    // zero-initialized regression head: epoch-0 loss measures the untrained
    // predictor rather than head-init noise
    stack.head_w = Matrix(3 * config.patch_size, d);
    stack.head_b.assign(3 * config.patch_size, 0.0);
    return stack;
}

SsmStack make_identity_stack(int embed_dim, int enc_layers, int dec_layers, int patch_size) {
    SsmStack stack;
    stack.config = StackConfig{embed_dim, enc_layers, dec_layers, patch_size,
                               Gate::identity, ScanDirection::forward, 0.0};
    for (int l = 0; l < enc_layers; ++l) {
        stack.branch_p.push_back(make_identity_block(embed_dim));
        stack.branch_q.push_back(make_identity_block(embed_dim));
    }
    for (int l = 0; l < dec_layers; ++l) stack.fusion.push_back(make_identity_block(embed_dim));
    stack.mask_token.assign(embed_dim, 0.0);
    stack.head_w = Matrix(3 * patch_size, embed_dim);
    stack.head_b.assign(3 * patch_size, 0.0);
    return stack;
}

namespace {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}};
}

Matrix matrix_from_json(const json& j) {
    Matrix m(j.at("rows").get<int>(), j.at("cols").get<int>());
    const auto data = j.at("data").get<std::vector<double>>();
    if (data.size() != m.data().size()) throw std::runtime_error("matrix shape/data mismatch");
    m.data() = data;
    if (!all_finite(m)) throw std::runtime_error("matrix has non-finite entries");
    return m;
}

json block_to_json(const SsmBlock& block) {
    return json{{"a", matrix_to_json(block.a)},
                {"b", matrix_to_json(block.b)},
                {"bias", block.bias},
                {"gate", block.gate == Gate::identity ? "identity" : "sigmoid_gate"},
                {"direction", block.direction == ScanDirection::forward     ? "forward"
                              : block.direction == ScanDirection::backward ? "backward"
                                                                           : "bidirectional_sum"}};
}

SsmBlock block_from_json(const json& j) {
    SsmBlock block;
    block.a = matrix_from_json(j.at("a"));
    block.b = matrix_from_json(j.at("b"));
    block.bias = j.at("bias").get<std::vector<double>>();
    const std::string gate = j.at("gate").get<std::string>();
    block.gate = gate == "identity" ? Gate::identity : Gate::sigmoid_gate;
    const std::string dir = j.at("direction").get<std::string>();
    block.direction = dir == "forward"    ? ScanDirection::forward
                      : dir == "backward" ? ScanDirection::backward
                                          : ScanDirection::bidirectional_sum;
    return block;
}

}  // namespace

std::string stack_to_json(const SsmStack& stack) {
    json j;
    j["version"] = 1;
    j["config"] = {{"embed_dim", stack.config.embed_dim},
                   {"enc_layers", stack.config.enc_layers},
                   {"dec_layers", stack.config.dec_layers},
                   {"patch_size", stack.config.patch_size},
                   {"gate", stack.config.gate == Gate::identity ? "identity" : "sigmoid_gate"},
                   {"direction",
                    stack.config.direction == ScanDirection::forward     ? "forward"
                    : stack.config.direction == ScanDirection::backward ? "backward"
                                                                        : "bidirectional_sum"},
                   {"a_norm", stack.config.a_norm}};
    for (const auto& b : stack.branch_p) j["branch_p"].push_back(block_to_json(b));
    for (const auto& b : stack.branch_q) j["branch_q"].push_back(block_to_json(b));
    for (const auto& b : stack.fusion) j["fusion"].push_back(block_to_json(b));
    j["mask_token"] = stack.mask_token;
    j["head_w"] = matrix_to_json(stack.head_w);
    j["head_b"] = stack.head_b;
    return j.dump();
}

SsmStack stack_from_json(const std::string& text) {
    const json j = json::parse(text);
    if (j.at("version").get<int>() != 1)
        throw std::runtime_error("stack_from_json: unsupported version");
    SsmStack stack;
    const auto& c = j.at("config");
    stack.config.embed_dim = c.at("embed_dim").get<int>();
    stack.config.enc_layers = c.at("enc_layers").get<int>();
    stack.config.dec_layers = c.at("dec_layers").get<int>();
    stack.config.patch_size = c.at("patch_size").get<int>();
    stack.config.gate =
        c.at("gate").get<std::string>() == "identity" ? Gate::identity : Gate::sigmoid_gate;
    const std::string dir = c.at("direction").get<std::string>();
    stack.config.direction = dir == "forward"    ? ScanDirection::forward
                             : dir == "backward" ? ScanDirection::backward
                                                 : ScanDirection::bidirectional_sum;
    stack.config.a_norm = c.at("a_norm").get<double>();
    if (j.contains("branch_p"))
        for (const auto& b : j.at("branch_p")) stack.branch_p.push_back(block_from_json(b));
    if (j.contains("branch_q"))
        for (const auto& b : j.at("branch_q")) stack.branch_q.push_back(block_from_json(b));
    if (j.contains("fusion"))
        for (const auto& b : j.at("fusion")) stack.fusion.push_back(block_from_json(b));
    stack.mask_token = j.at("mask_token").get<std::vector<double>>();
    stack.head_w = matrix_from_json(j.at("head_w"));
    stack.head_b = j.at("head_b").get<std::vector<double>>();
    return stack;
}

namespace {

void hash_doubles(uint64_t& h, const double* values, size_t count) {
    for (size_t i = 0; i < count; ++i) {
        uint64_t bits;
        std::memcpy(&bits, &values[i], sizeof(bits));
        h ^= bits;
        h *= 0x100000001b3ULL;  // FNV-1a step
    }
}

}  // namespace

uint64_t stack_checksum(const SsmStack& stack) {
    uint64_t h = 0xcbf29ce484222325ULL;
    auto hash_block = [&](const SsmBlock& b) {
        hash_doubles(h, b.a.data().data(), b.a.data().size());
        hash_doubles(h, b.b.data().data(), b.b.data().size());
        hash_doubles(h, b.bias.data(), b.bias.size());
    };
    for (const auto& b : stack.branch_p) hash_block(b);
    for (const auto& b : stack.branch_q) hash_block(b);
    for (const auto& b : stack.fusion) hash_block(b);
    hash_doubles(h, stack.mask_token.data(), stack.mask_token.size());
    hash_doubles(h, stack.head_w.data().data(), stack.head_w.data().size());
    hash_doubles(h, stack.head_b.data(), stack.head_b.size());
    return h;
}

InterleavedSequence interleave(const Matrix& zp, const Matrix& zq) {
    if (zp.rows() != zq.rows() || zp.cols() != zq.cols())
        throw std::invalid_argument("interleave: shape mismatch");
    InterleavedSequence seq;
    seq.tokens = Matrix(2 * zp.rows(), zp.cols());
    seq.origin.resize(2 * zp.rows());
    for (int t = 0; t < zp.rows(); ++t) {
        std::copy(zp.row(t), zp.row(t) + zp.cols(), seq.tokens.row(2 * t));
        std::copy(zq.row(t), zq.row(t) + zq.cols(), seq.tokens.row(2 * t + 1));
        seq.origin[2 * t] = {false, t};
        seq.origin[2 * t + 1] = {true, t};
    }
    return seq;
}

std::pair<Matrix, Matrix> deinterleave(const InterleavedSequence& seq) {
    const int half = seq.tokens.rows() / 2;
    Matrix zp(half, seq.tokens.cols());
    Matrix zq(half, seq.tokens.cols());
    for (int t = 0; t < half; ++t) {
        std::copy(seq.tokens.row(2 * t), seq.tokens.row(2 * t) + seq.tokens.cols(), zp.row(t));
        std::copy(seq.tokens.row(2 * t + 1), seq.tokens.row(2 * t + 1) + seq.tokens.cols(),
                  zq.row(t));
    }
    return {std::move(zp), std::move(zq)};
}

namespace {

Matrix run_blocks(const std::vector<SsmBlock>& blocks, Matrix x,
                  std::vector<BlockCache>* caches) {
    if (caches) caches->resize(blocks.size());
    for (size_t l = 0; l < blocks.size(); ++l) {
        if (caches) {
            x = ssm_forward(blocks[l], x, (*caches)[l]);
        } else {
            x = ssm_forward(blocks[l], x);
        }
    }
    return x;
}

Matrix backprop_blocks(const std::vector<SsmBlock>& blocks,
                       const std::vector<BlockCache>& caches, Matrix upstream,
                       std::vector<BlockGrads>& grads) {
    for (int l = static_cast<int>(blocks.size()) - 1; l >= 0; --l)
        upstream = ssm_backward(blocks[l], caches[l], upstream, grads[l]);
    return upstream;
}

struct HdmCache {
    std::vector<BlockCache> p_caches, q_caches, f_caches;
    int branch_len = 0;
};

HdmResult hdm_run(const SsmStack& stack, const SasSequence& prompt_seq,
                  const SasSequence& query_seq, FusionMode mode, HdmCache* cache) {
    if (prompt_seq.length() != query_seq.length())
        throw std::invalid_argument("hdm_forward: sequence length mismatch");
    if (prompt_seq.features.cols() != stack.config.embed_dim ||
        query_seq.features.cols() != stack.config.embed_dim)
        throw std::invalid_argument("hdm_forward: feature dimension mismatch");

    const Matrix zp = run_blocks(stack.branch_p, prompt_seq.features,
                                 cache ? &cache->p_caches : nullptr);
    const Matrix zq = run_blocks(stack.branch_q, query_seq.features,
                                 cache ? &cache->q_caches : nullptr);
    const int len = zp.rows();
    if (cache) cache->branch_len = len;

    HdmResult result;
    Matrix fusion_in;
    if (mode == FusionMode::interleave) {
        InterleavedSequence inter = interleave(zp, zq);
        result.origin = std::move(inter.origin);
        fusion_in = std::move(inter.tokens);
    } else {
        fusion_in = Matrix(2 * len, zp.cols());
        result.origin.resize(2 * len);
        for (int t = 0; t < len; ++t) {
            std::copy(zp.row(t), zp.row(t) + zp.cols(), fusion_in.row(t));
            std::copy(zq.row(t), zq.row(t) + zq.cols(), fusion_in.row(len + t));
            result.origin[t] = {false, t};
            result.origin[len + t] = {true, t};
        }
    }

    result.fused = run_blocks(stack.fusion, fusion_in, cache ? &cache->f_caches : nullptr);
    result.query_features = Matrix(len, result.fused.cols());
    for (int t = 0; t < len; ++t) {
        const int slot = mode == FusionMode::interleave ? 2 * t + 1 : len + t;
        std::copy(result.fused.row(slot), result.fused.row(slot) + result.fused.cols(),
                  result.query_features.row(t));
    }
    return result;
}

}  // namespace

HdmResult hdm_forward(const SsmStack& stack, const SasSequence& prompt_seq,
                      const SasSequence& query_seq) {
    return hdm_run(stack, prompt_seq, query_seq, FusionMode::interleave, nullptr);
}

HdmResult hdm_concat_baseline(const SsmStack& stack, const SasSequence& prompt_seq,
                              const SasSequence& query_seq) {
    return hdm_run(stack, prompt_seq, query_seq, FusionMode::concat, nullptr);
}

StackGrads zero_grads_like(const SsmStack& stack) {
    StackGrads g;
    for (const auto& b : stack.branch_p) g.branch_p.push_back(zero_grads_like(b));
    for (const auto& b : stack.branch_q) g.branch_q.push_back(zero_grads_like(b));
    for (const auto& b : stack.fusion) g.fusion.push_back(zero_grads_like(b));
    g.head_w = Matrix(stack.head_w.rows(), stack.head_w.cols());
    g.head_b.assign(stack.head_b.size(), 0.0);
    g.mask_token.assign(stack.mask_token.size(), 0.0);
    return g;
}

namespace {

// Symmetric Chamfer between predicted and true patch points; fills the
// gradient with respect to the predictions (nearest neighbors treated as
// locally constant).
double chamfer_with_grad(const Matrix& pred, const Matrix& truth, Matrix& grad) {
    const int np = pred.rows(), nt = truth.rows();
    grad = Matrix(np, 3);
    double term_pred = 0.0;
    for (int i = 0; i < np; ++i) {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (int j = 0; j < nt; ++j) {
            double d = 0.0;
            for (int c = 0; c < 3; ++c) {
                const double diff = pred(i, c) - truth(j, c);
                d += diff * diff;
            }
            if (d < best_d) {
                best_d = d;
                best = j;
            }
        }
        term_pred += best_d;
        for (int c = 0; c < 3; ++c)
            grad(i, c) += 2.0 * (pred(i, c) - truth(best, c)) / np;
    }
    double term_truth = 0.0;
    for (int j = 0; j < nt; ++j) {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (int i = 0; i < np; ++i) {
            double d = 0.0;
            for (int c = 0; c < 3; ++c) {
                const double diff = pred(i, c) - truth(j, c);
                d += diff * diff;
            }
            if (d < best_d) {
                best_d = d;
                best = i;
            }
        }
        term_truth += best_d;
        for (int c = 0; c < 3; ++c)
            grad(best, c) += 2.0 * (pred(best, c) - truth(j, c)) / nt;
    }
    return term_pred / np + term_truth / nt;
}

std::vector<int> pick_masked_tokens(int count, double mask_ratio, uint64_t seed) {
    if (mask_ratio <= 0.0 || mask_ratio >= 1.0)
        throw std::invalid_argument("masked_reconstruct: mask_ratio must be in (0, 1)");
    const int m = static_cast<int>(std::ceil(mask_ratio * count));
    if (m <= 0 || m >= count)
        throw std::invalid_argument("masked_reconstruct: mask count would be 0 or G");
    std::vector<int> ids(count);
    std::iota(ids.begin(), ids.end(), 0);
    Rng rng(seed);
    rng.shuffle(ids);
    ids.resize(m);
    std::sort(ids.begin(), ids.end());
    return ids;
}

ReconstructionResult reconstruct_impl(const SsmStack& stack, const IclInstance& instance,
                                      double mask_ratio, uint64_t seed, FusionMode mode,
                                      StackGrads* grads) {
    const int g = instance.query_features.rows();
    const int d = stack.config.embed_dim;
    const int s3 = stack.head_w.rows();
    if (instance.query_features.cols() != d)
        throw std::invalid_argument("masked_reconstruct: feature dim mismatch");
    if (static_cast<int>(instance.query_patches.size()) != g)
        throw std::invalid_argument("masked_reconstruct: missing query patches");

    ReconstructionResult result;
    result.masked_tokens = pick_masked_tokens(g, mask_ratio, seed);
    std::vector<bool> masked(g, false);
    for (int t : result.masked_tokens) masked[t] = true;

    Matrix masked_features = instance.query_features;
    for (int t : result.masked_tokens)
        std::copy(stack.mask_token.begin(), stack.mask_token.end(), masked_features.row(t));

    const SasSequence query_seq = assemble_sequence(masked_features, instance.query_layout);

    HdmCache cache;
    const HdmResult hdm = hdm_run(stack, instance.prompt_layout, query_seq, mode,
                                  grads ? &cache : nullptr);

    const int segments = query_seq.segments();
    const int per_segment = query_seq.tokens_per_segment;
    const int branch_len = query_seq.length();

    // sequence positions of each token, one per segment
    std::vector<std::vector<int>> token_positions(g);
    for (int seg = 0; seg < segments; ++seg)
        for (int r = 0; r < per_segment; ++r)
            token_positions[query_seq.segment_perms[seg][r]].push_back(seg * per_segment + r);

    auto query_slot = [&](int pos) {
        return mode == FusionMode::interleave ? 2 * pos + 1 : branch_len + pos;
    };

    const int m = static_cast<int>(result.masked_tokens.size());
    Matrix fused_grad;
    if (grads) fused_grad = Matrix(hdm.fused.rows(), hdm.fused.cols());

    double total_loss = 0.0;
    std::vector<double> slot_feature(d);
    for (int t : result.masked_tokens) {
        std::fill(slot_feature.begin(), slot_feature.end(), 0.0);
        for (int pos : token_positions[t]) {
            const double* row = hdm.fused.row(query_slot(pos));
            for (int i = 0; i < d; ++i) slot_feature[i] += row[i];
        }
        const double inv_seg = 1.0 / static_cast<double>(segments);
        for (double& v : slot_feature) v *= inv_seg;

        std::vector<double> flat = matvec(stack.head_w, slot_feature);
        for (int i = 0; i < s3; ++i) flat[i] += stack.head_b[i];
        Matrix pred(s3 / 3, 3);
        for (int i = 0; i < s3; ++i) pred(i / 3, i % 3) = flat[i];

        Matrix pred_grad;
        const double loss = chamfer_with_grad(pred, instance.query_patches[t], pred_grad);
        total_loss += loss;
        result.predictions.push_back(std::move(pred));

        if (grads) {
            std::vector<double> flat_grad(s3);
            for (int i = 0; i < s3; ++i) flat_grad[i] = pred_grad(i / 3, i % 3) / m;
            for (int i = 0; i < s3; ++i) {
                grads->head_b[i] += flat_grad[i];
                double* row = grads->head_w.row(i);
                const double fg = flat_grad[i];
                for (int j = 0; j < d; ++j) row[j] += fg * slot_feature[j];
            }
            std::vector<double> feature_grad = matvec_transposed(stack.head_w, flat_grad);
            for (int pos : token_positions[t]) {
                double* row = fused_grad.row(query_slot(pos));
                for (int i = 0; i < d; ++i) row[i] += feature_grad[i] * inv_seg;
            }
        }
    }
    result.loss = total_loss / m;

    if (grads) {
        const Matrix fusion_in_grad =
            backprop_blocks(stack.fusion, cache.f_caches, fused_grad, grads->fusion);
        Matrix zp_grad(branch_len, d), zq_grad(branch_len, d);
        for (int t = 0; t < branch_len; ++t) {
            const int p_slot = mode == FusionMode::interleave ? 2 * t : t;
            const int q_slot = query_slot(t);
            std::copy(fusion_in_grad.row(p_slot), fusion_in_grad.row(p_slot) + d, zp_grad.row(t));
            std::copy(fusion_in_grad.row(q_slot), fusion_in_grad.row(q_slot) + d, zq_grad.row(t));
        }
        backprop_blocks(stack.branch_p, cache.p_caches, zp_grad, grads->branch_p);
        const Matrix xq_grad =
            backprop_blocks(stack.branch_q, cache.q_caches, zq_grad, grads->branch_q);
        // masked rows of the query features are the mask token
        for (int seg = 0; seg < segments; ++seg) {
            for (int r = 0; r < per_segment; ++r) {
                const int token = query_seq.segment_perms[seg][r];
                if (!masked[token]) continue;
                const double* row = xq_grad.row(seg * per_segment + r);
                for (int i = 0; i < d; ++i) grads->mask_token[i] += row[i];
            }
        }
    }
    return result;
}

}  // namespace

ReconstructionResult masked_reconstruct(const SsmStack& stack, const IclInstance& instance,
                                        double mask_ratio, uint64_t seed, FusionMode mode) {
    return reconstruct_impl(stack, instance, mask_ratio, seed, mode, nullptr);
}

ReconstructionResult masked_reconstruct_grad(const SsmStack& stack, const IclInstance& instance,
                                             double mask_ratio, uint64_t seed, FusionMode mode,
                                             StackGrads& grads) {
    return reconstruct_impl(stack, instance, mask_ratio, seed, mode, &grads);
}

namespace {

void apply_block(SsmBlock& block, const BlockGrads& g, double step) {
    for (size_t i = 0; i < block.a.data().size(); ++i) block.a.data()[i] -= step * g.a.data()[i];
    for (size_t i = 0; i < block.b.data().size(); ++i) block.b.data()[i] -= step * g.b.data()[i];
    for (size_t i = 0; i < block.bias.size(); ++i) block.bias[i] -= step * g.bias[i];
}

}  // namespace

void apply_gradients(SsmStack& stack, const StackGrads& grads, double step) {
    for (size_t i = 0; i < stack.branch_p.size(); ++i)
        apply_block(stack.branch_p[i], grads.branch_p[i], step);
    for (size_t i = 0; i < stack.branch_q.size(); ++i)
        apply_block(stack.branch_q[i], grads.branch_q[i], step);
    for (size_t i = 0; i < stack.fusion.size(); ++i)
        apply_block(stack.fusion[i], grads.fusion[i], step);
    for (size_t i = 0; i < stack.head_w.data().size(); ++i)
        stack.head_w.data()[i] -= step * grads.head_w.data()[i];
    for (size_t i = 0; i < stack.head_b.size(); ++i) stack.head_b[i] -= step * grads.head_b[i];
    for (size_t i = 0; i < stack.mask_token.size(); ++i)
        stack.mask_token[i] -= step * grads.mask_token[i];
}

constexpr double kMaskRatio = 0.7;

double grad_global_norm(const StackGrads& grads) {
    double sum = 0.0;
    const auto add_block = [&](const BlockGrads& g) {
        for (double v : g.a.data()) sum += v * v;
        for (double v : g.b.data()) sum += v * v;
        for (double v : g.bias) sum += v * v;
    };
    for (const auto& g : grads.branch_p) add_block(g);
    for (const auto& g : grads.branch_q) add_block(g);
    for (const auto& g : grads.fusion) add_block(g);
    for (double v : grads.head_w.data()) sum += v * v;
    for (double v : grads.head_b) sum += v * v;
    for (double v : grads.mask_token) sum += v * v;
    return std::sqrt(sum);
}

std::vector<double> train_toy(SsmStack& stack, const std::vector<IclInstance>& corpus,
                              int epochs, double lr, uint64_t seed, FusionMode mode,
                              double max_grad_norm) {
    if (corpus.empty()) throw std::invalid_argument("train_toy: empty corpus");
    if (epochs < 1) throw std::invalid_argument("train_toy: epochs must be >= 1");
    std::vector<double> trace;
    trace.reserve(epochs);
    for (int epoch = 0; epoch < epochs; ++epoch) {
        const double lr_epoch = 0.5 * lr * (1.0 + std::cos(M_PI * epoch / epochs));
        double epoch_loss = 0.0;
        for (size_t i = 0; i < corpus.size(); ++i) {
            StackGrads grads = zero_grads_like(stack);
            const ReconstructionResult res = masked_reconstruct_grad(
                stack, corpus[i], kMaskRatio, mix_seed(seed, i), mode, grads);
            if (!std::isfinite(res.loss))
                throw std::runtime_error("train_toy: diverged at epoch " +
                                         std::to_string(epoch));
            epoch_loss += res.loss;
            double step = lr_epoch;
            if (max_grad_norm > 0.0) {
                const double norm = grad_global_norm(grads);
                if (norm > max_grad_norm) step *= max_grad_norm / norm;
            }
            apply_gradients(stack, grads, step);
        }
        trace.push_back(epoch_loss / corpus.size());
    }
    return trace;
}

double evaluate_corpus(const SsmStack& stack, const std::vector<IclInstance>& corpus,
                       double mask_ratio, uint64_t seed, FusionMode mode) {
    if (corpus.empty()) throw std::invalid_argument("evaluate_corpus: empty corpus");
    double total = 0.0;
    for (size_t i = 0; i < corpus.size(); ++i)
        total += masked_reconstruct(stack, corpus[i], mask_ratio, mix_seed(seed, i), mode).loss;
    return total / corpus.size();
}

}  // namespace saskit
