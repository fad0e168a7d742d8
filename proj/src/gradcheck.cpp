#include "saskit/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "saskit/rng.hpp"

namespace saskit {

double GradCheckReport::worst() const {
    return std::max({max_rel_a, max_rel_b, max_rel_bias, max_rel_input});
}

namespace {

constexpr double kFdStep = 1e-5;

double scalar_loss(const SsmBlock& block, const Matrix& x, const Matrix& upstream) {
    const Matrix out = ssm_forward(block, x);
    double loss = 0.0;
    for (size_t i = 0; i < out.data().size(); ++i) loss += out.data()[i] * upstream.data()[i];
    return loss;
}

double rel_error(double analytic, double fd) {
    return std::abs(analytic - fd) /
           std::max({std::abs(analytic), std::abs(fd), 1e-5});
}

// Central difference through one mutable coordinate.
double fd_at(double& coord, const SsmBlock& block, const Matrix& x, const Matrix& upstream) {
    const double saved = coord;
    coord = saved + kFdStep;
    const double up = scalar_loss(block, x, upstream);
    coord = saved - kFdStep;
    const double down = scalar_loss(block, x, upstream);
    coord = saved;
    return (up - down) / (2.0 * kFdStep);
}

}  // namespace

GradCheckReport run_gradcheck(int instances, uint64_t seed, int max_len, int max_dim) {
    GradCheckReport report;
    report.instances = instances;
    for (int inst = 0; inst < instances; ++inst) {
        Rng rng(mix_seed(seed, inst));
        const int d = 2 + rng.uniform_int(std::max(1, max_dim - 1));
        const int len = 2 + rng.uniform_int(std::max(1, max_len - 1));
        const Gate gate = inst % 2 == 0 ? Gate::sigmoid_gate : Gate::identity;
        const ScanDirection dir = inst % 3 == 0   ? ScanDirection::forward
                                  : inst % 3 == 1 ? ScanDirection::backward
                                                  : ScanDirection::bidirectional_sum;

        SsmBlock block = make_random_block(d, mix_seed(seed, inst, 1), gate, dir);
        for (auto& v : block.b.data()) v += 0.3 * rng.normal();
        for (auto& v : block.bias) v = 0.1 * rng.normal();

        Matrix x(len, d), upstream(len, d);
        for (auto& v : x.data()) v = 0.5 * rng.normal();
        for (auto& v : upstream.data()) v = 0.3 * rng.normal();

        BlockCache cache;
        ssm_forward(block, x, cache);
        BlockGrads grads = zero_grads_like(block);
        const Matrix gx = ssm_backward(block, cache, upstream, grads);

        SsmBlock probe = block;
        for (size_t i = 0; i < probe.a.data().size(); ++i)
            report.max_rel_a = std::max(
                report.max_rel_a,
                rel_error(grads.a.data()[i], fd_at(probe.a.data()[i], probe, x, upstream)));
        for (size_t i = 0; i < probe.b.data().size(); ++i)
            report.max_rel_b = std::max(
                report.max_rel_b,
                rel_error(grads.b.data()[i], fd_at(probe.b.data()[i], probe, x, upstream)));
        for (size_t i = 0; i < probe.bias.size(); ++i)
            report.max_rel_bias = std::max(
                report.max_rel_bias,
                rel_error(grads.bias[i], fd_at(probe.bias[i], probe, x, upstream)));
        Matrix x_probe = x;
        for (size_t i = 0; i < x_probe.data().size(); ++i)
            report.max_rel_input = std::max(
                report.max_rel_input,
                rel_error(gx.data()[i], fd_at(x_probe.data()[i], block, x_probe, upstream)));
    }
    return report;
}

}  // namespace saskit
