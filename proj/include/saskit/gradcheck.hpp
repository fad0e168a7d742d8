#pragma once

#include <cstdint>

#include "saskit/ssm.hpp"

namespace saskit {

/// Central finite-difference verification of ssm_backward over random block
/// instances (mixed gates and scan directions). Relative error uses
/// |analytic - fd| / max(|analytic|, |fd|, 1e-5).
struct GradCheckReport {
    int instances = 0;
    double max_rel_a = 0.0;
    double max_rel_b = 0.0;
    double max_rel_bias = 0.0;
    double max_rel_input = 0.0;

    double worst() const;
};

GradCheckReport run_gradcheck(int instances, uint64_t seed, int max_len = 16, int max_dim = 8);

}  // namespace saskit
