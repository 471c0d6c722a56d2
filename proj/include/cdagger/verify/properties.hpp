#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cdagger/conformal/tracker.hpp"

namespace cdagger::verify {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string summary;              // one line for the pass/fail table
    std::vector<std::string> details;  // per-run lines, e.g. bound vs gap
};

struct VerifyOptions {
    std::uint64_t seed = 0;
    conformal::UpdateRule rule = conformal::UpdateRule::Standard;  // SignFlipped for mutation runs
    std::size_t grad_points = 20;
    std::size_t grad_sample = 200;  // parameters checked per point
};

/// q trace of intermittent tracking at p = 1 equals plain quantile tracking
/// bit for bit, on an AR(1) score stream of length 2000.
CheckResult check_reduction(const VerifyOptions& opt);

/// Coverage gap vs the finite-sample bound on 50 random streams of length
/// 5000 with p_t drawn from {0.1, 0.5, 0.9}.
CheckResult check_coverage_bound(const VerifyOptions& opt);

/// q_t stays within [-alpha N, B + (1 - alpha) N] over 1000 random runs.
CheckResult check_quantile_range(const VerifyOptions& opt);

/// alpha_t of intermittent ACI stays within [-gamma/M, 1 + gamma/M] over 1000
/// random runs.
CheckResult check_aci_range(const VerifyOptions& opt);

/// gamma_t = p_t: the update is q + (err - alpha) obs, and the bound is
/// (B + 1)/T ||Delta||_1.
CheckResult check_gamma_equals_p(const VerifyOptions& opt);

/// IQT-pd and IQT-pi coincide when p_t = 1.
CheckResult check_variants_at_p1(const VerifyOptions& opt);

/// Backprop against central differences on the policy and classifier shapes.
CheckResult check_gradients(const VerifyOptions& opt);

std::vector<CheckResult> run_all(const VerifyOptions& opt);

}  // namespace cdagger::verify
