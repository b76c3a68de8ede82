#pragma once

#include <string>
#include <utility>
#include <vector>

#include "nlpot/common.hpp"

namespace nlpot {

struct NamedValue {
    std::string name;
    double value = 0.0;
};

/// Outcome of one numerical check of an inequality `computed <= bound`.
struct VerificationReport {
    std::string lemmaName;
    std::string inputs;
    std::vector<NamedValue> computed;
    std::string boundName;
    double bound = 0.0;
    double tolerance = 0.0;
    bool passed = false;
    /// bound·(1 + tolerance) minus the checked quantity; negative when failing.
    double margin = 0.0;
    std::vector<std::string> notes;

    void add(std::string name, double value) { computed.push_back({std::move(name), value}); }

    double get(const std::string& name) const {
        for (const auto& v : computed)
            if (v.name == name) return v.value;
        throw InvalidArgument("report has no value named '" + name + "'");
    }

    /// Records `value <= bound·(1 + tol)` as the verdict.
    void decide(double value, double boundValue, double tol) {
        bound = boundValue;
        tolerance = tol;
        margin = boundValue * (1.0 + tol) - value;
        passed = !std::isnan(value) && value <= boundValue * (1.0 + tol);
    }
};

}  // namespace nlpot
