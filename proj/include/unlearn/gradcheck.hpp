#pragma once

#include <cstdint>

#include "unlearn/cognac.hpp"

namespace unlearn {

// Max-norm deviation between two gradient sets, relative to the larger
// gradient scale: ||a - b||_inf / max(||a||_inf, ||b||_inf, 1e-12).
double gradient_rel_error(const Gradients& a, const Gradients& b);

struct GradCheckReport {
    double ce_rel_error = 0.0;
    double contrastive_rel_error = 0.0;
    double max_rel_error = 0.0;
    double threshold = 1e-4;
    bool pass = false;
};

// Checks the analytic backward passes of the masked cross-entropy and the
// contrastive pair loss against central finite differences (step 1e-4, eval
// mode) on a seeded two-block graph of 30 nodes.
GradCheckReport run_gradcheck(std::uint64_t seed);

}  // namespace unlearn
