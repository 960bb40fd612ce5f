#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sit/gradcheck.hpp"

namespace sit {

struct SuiteRow {
    std::string name;
    double max_rel_err;
    bool pass;
};

struct SuiteReport {
    std::vector<SuiteRow> rows;
    bool pass = true;
};

// Per-layer-type checks (all coordinates, default step 1e-5) plus the
// end-to-end model at reduced width (seeded coordinate sample, step 1e-7:
// composite graphs with ReLU/max-pool kinks need the tighter secant; the
// per-op checks pin the analytic gradients exactly).
// `corrupt` names a row whose layer backward is doubled — a negative-control
// hook; empty means no corruption.
SuiteReport run_gradcheck_suite(std::uint64_t seed, std::size_t c_b, double tol = 1e-4,
                                const std::string& corrupt = "");

} // namespace sit
