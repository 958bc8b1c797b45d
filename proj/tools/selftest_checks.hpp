#pragma once

#include <string>
#include <vector>

namespace increcon::selftest {

struct CheckResult {
    std::string name;
    bool passed = false;
    double value = 0;      // measured quantity
    double threshold = 0;  // pass bound
    std::string detail;
};

// Gradient checks, sparse-conv dense-oracle equivalence and the
// marching-cubes sphere test, on seeded instances.
std::vector<CheckResult> run_selftest();

}  // namespace increcon::selftest
