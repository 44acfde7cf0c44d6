#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace retmil {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct CheckOptions {
    std::uint64_t seed = 0;
    std::size_t retention_cases = 1000;
    std::size_t padding_max_tokens = 2048;
    std::size_t conservation_bags = 100;
};

// Oracle suites behind the `check` command. All run in 64-bit except the
// 32-bit leg of the retention comparison.
CheckResult check_retention_equivalence(std::size_t cases, std::uint64_t seed);
CheckResult check_decay_matrix();
CheckResult check_causality(std::uint64_t seed);
CheckResult check_padding(std::size_t max_tokens);
CheckResult check_gradients(std::uint64_t seed);
CheckResult check_probability_conservation(std::size_t bags, std::uint64_t seed);

std::vector<CheckResult> run_checks(const CheckOptions& options);

}  // namespace retmil
