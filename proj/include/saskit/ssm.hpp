#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "saskit/matrix.hpp"
#include "saskit/serialization.hpp"

namespace saskit {

enum class Gate { identity, sigmoid_gate };
enum class ScanDirection { forward, backward, bidirectional_sum };

/// One recurrence block: z_t = g(A z_{t-1} + B x_t + b).
struct SsmBlock {
    Matrix a;                  // d x d transition
    Matrix b;                  // d x d input
    std::vector<double> bias;  // d
    Gate gate = Gate::identity;
    ScanDirection direction = ScanDirection::forward;

    int dim() const { return a.rows(); }
};

/// A = 0, B = I, b = 0, identity gate, forward scan: the block is a no-op.
SsmBlock make_identity_block(int dim);

/// Seeded random block: A is an orthogonalized Gaussian rescaled to
/// Frobenius norm a_norm (stability at L <= a few hundred), B = I, b = 0.
SsmBlock make_random_block(int dim, uint64_t seed, Gate gate, ScanDirection direction,
                           double a_norm = 0.9);

/// Per-direction activations cached by the forward pass; the backward pass
/// requires them.
struct BlockCache {
    Matrix input;
    Matrix out_fwd;  // populated for forward / bidirectional scans
    Matrix out_bwd;  // populated for backward / bidirectional scans
    bool valid = false;
};

Matrix ssm_forward(const SsmBlock& block, const Matrix& sequence);
Matrix ssm_forward(const SsmBlock& block, const Matrix& sequence, BlockCache& cache);

struct BlockGrads {
    Matrix a;
    Matrix b;
    std::vector<double> bias;
};

BlockGrads zero_grads_like(const SsmBlock& block);

/// Exact reverse-mode gradients of the recurrence. Returns the input
/// gradient and accumulates parameter gradients into `grads`.
/// Throws if `cache` was not produced by a matching forward pass.
Matrix ssm_backward(const SsmBlock& block, const BlockCache& cache, const Matrix& upstream,
                    BlockGrads& grads);

/// Branch + fusion parameters of the toy hierarchical model, plus the mask
/// token and the patch prediction head.
struct StackConfig {
    int embed_dim = 256;
    int enc_layers = 4;
    int dec_layers = 2;
    int patch_size = 32;
    Gate gate = Gate::sigmoid_gate;
    ScanDirection direction = ScanDirection::bidirectional_sum;
    double a_norm = 0.9;
};

struct SsmStack {
    StackConfig config;
    std::vector<SsmBlock> branch_p;  // prompt branch
    std::vector<SsmBlock> branch_q;  // query branch
    std::vector<SsmBlock> fusion;    // shared fusion stack
    std::vector<double> mask_token;  // d
    Matrix head_w;                   // (3 * patch_size) x d
    std::vector<double> head_b;      // 3 * patch_size
};

SsmStack make_random_stack(const StackConfig& config, uint64_t seed);

/// Every block a no-op; mask token and head zero. The whole pipeline is then
/// the identity map on query features.
SsmStack make_identity_stack(int embed_dim, int enc_layers, int dec_layers, int patch_size);

/// Versioned JSON round-trip (shape-tagged flat arrays).
std::string stack_to_json(const SsmStack& stack);
SsmStack stack_from_json(const std::string& text);

/// Full-precision parameter digest; equal digests mean equal parameters.
uint64_t stack_checksum(const SsmStack& stack);

enum class FusionMode { interleave, concat };

struct SlotOrigin {
    bool is_query = false;
    int rank = 0;  // position within the originating sequence
};

/// Alternating prompt/query slots: slot 2t is prompt rank t, slot 2t+1 is
/// query rank t. De-interleaving recovers both inputs exactly.
struct InterleavedSequence {
    Matrix tokens;
    std::vector<SlotOrigin> origin;
};

InterleavedSequence interleave(const Matrix& zp, const Matrix& zq);
std::pair<Matrix, Matrix> deinterleave(const InterleavedSequence& seq);

struct HdmResult {
    Matrix fused;           // (2 * 4G) x d
    Matrix query_features;  // 4G x d, de-interleaved query slots
    std::vector<SlotOrigin> origin;
};

/// ISM branches applied independently, then interleaved fusion.
HdmResult hdm_forward(const SsmStack& stack, const SasSequence& prompt_seq,
                      const SasSequence& query_seq);

/// Ablation variant: fusion input is [Z_p; Z_q] instead of the interleaving.
HdmResult hdm_concat_baseline(const SsmStack& stack, const SasSequence& prompt_seq,
                              const SasSequence& query_seq);

/// One in-context pair: prompt features plus layout, query features plus
/// layout, and ground-truth center-relative patch points of the query.
struct IclInstance {
    Matrix prompt_features;     // G x d
    SasSequence prompt_layout;  // segment permutations over prompt tokens
    Matrix query_features;      // G x d
    SasSequence query_layout;
    std::vector<Matrix> query_patches;  // G matrices of S x 3
};

struct ReconstructionResult {
    double loss = 0.0;
    std::vector<int> masked_tokens;
    std::vector<Matrix> predictions;  // per masked token, S x 3
};

/// Masks ceil(mask_ratio * G) query tokens (features replaced by the mask
/// token, selection seeded), runs HDM, and decodes each masked token's
/// averaged slot feature into S x 3 center-relative points. Loss is the mean
/// symmetric Chamfer Distance over masked tokens.
ReconstructionResult masked_reconstruct(const SsmStack& stack, const IclInstance& instance,
                                        double mask_ratio, uint64_t seed,
                                        FusionMode mode = FusionMode::interleave);

struct StackGrads {
    std::vector<BlockGrads> branch_p, branch_q, fusion;
    Matrix head_w;
    std::vector<double> head_b;
    std::vector<double> mask_token;
};

StackGrads zero_grads_like(const SsmStack& stack);

ReconstructionResult masked_reconstruct_grad(const SsmStack& stack, const IclInstance& instance,
                                             double mask_ratio, uint64_t seed, FusionMode mode,
                                             StackGrads& grads);

void apply_gradients(SsmStack& stack, const StackGrads& grads, double step);

double grad_global_norm(const StackGrads& grads);

/// Plain gradient descent with cosine-decayed learning rate over a static
/// corpus of (prompt, query) instances. Masks are fixed per instance (derived
/// from `seed`), so an lr of 0 yields a flat trace. A positive max_grad_norm
/// rescales each step's gradient to that global norm (BPTT stabilizer).
/// Returns per-epoch mean loss; throws (with the epoch index) if the loss
/// turns non-finite.
std::vector<double> train_toy(SsmStack& stack, const std::vector<IclInstance>& corpus,
                              int epochs, double lr = 1e-4, uint64_t seed = 0,
                              FusionMode mode = FusionMode::interleave,
                              double max_grad_norm = 0.0);

/// Mean reconstruction loss over a corpus at fixed parameters.
double evaluate_corpus(const SsmStack& stack, const std::vector<IclInstance>& corpus,
                       double mask_ratio, uint64_t seed,
                       FusionMode mode = FusionMode::interleave);

}  // namespace saskit
