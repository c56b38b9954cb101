#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace implreg {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct VerifyOptions {
    std::uint64_t seed = 20240601;
    long loss_samples = 10000;
};

/// Property suite behind `implreg verify`: loss assumptions, the last-iterate
/// identity, the inexact-descent inequalities, the excess-risk decomposition
/// (with a sign-flip mutation that must be caught), Rademacher enumeration
/// cross-checks and determinism of the experiment drivers.
std::vector<CheckResult> run_verify_suite(const VerifyOptions& options = {});

std::string format_table(const std::vector<CheckResult>& results);

}  // namespace implreg
