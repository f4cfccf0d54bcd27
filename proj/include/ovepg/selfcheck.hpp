#pragma once

#include <string>
#include <vector>

namespace ovepg {

struct SelfCheckContext {
    std::string iris_csv;
    std::string work_dir;  // scratch space for determinism checks
    std::uint64_t seed = 20240901;
};

struct CriterionResult {
    int id = 0;
    std::string name;
    bool passed = false;
    std::string detail;  // deterministic given a fixed seed (no wall times)
};

/// Runs the numbered acceptance criteria; `subset` empty means all.
std::vector<CriterionResult> run_acceptance_criteria(const SelfCheckContext& ctx,
                                                     const std::vector<int>& subset = {});

}  // namespace ovepg
