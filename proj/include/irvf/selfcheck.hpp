#pragma once

// Built-in verification suite. Each check prints one pass/fail line; the
// `selftest` CLI subcommand and the acceptance runner both drive these.

#include <string>
#include <vector>

namespace irvf::selfcheck {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

// Finite-difference verification of every layer type and all training losses,
// repeated over `seeds` random seeds. Passes when the worst relative error
// stays below 1e-4 and the whole sweep finishes within the time budget.
CheckResult gradient_correctness(int seeds = 20, double time_budget_s = 60.0);

// conv2d / softmax / pooling / resize / dark_channel / guided_filter against
// naive-loop oracles, `instances` random cases up to 8x32x32, tolerance 1e-9.
CheckResult tensor_op_oracles(int instances = 50);

// Haze-synthesis and transmission closed forms.
CheckResult haze_physics_identities();

// Pearson correlation between estimated and ground-truth haze on `scenes`
// synthetic scenes at 3x128x128; each must reach 0.8 within 1 s.
CheckResult hde_fidelity(int scenes = 20);

// Pre-transformer blend identities at H = 0, 1, 0.5, exact to the ulp.
CheckResult blend_identities();

// Metric fixed points: q_abf perfect/lost edges, q_sf on constants, q_scd on
// orthogonal compositions, q_mi against a histogram-entropy oracle.
CheckResult metric_sanity();

// Criteria 1-5 and 7, in order.
std::vector<CheckResult> run_selftest();

// Prints "[PASS] ..." / "[FAIL] ..." and returns true when everything passed.
bool report(const std::vector<CheckResult>& results);

}  // namespace irvf::selfcheck
