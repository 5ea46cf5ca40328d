#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "qrelex/prompts.hpp"

namespace qrelex {

struct ConfusionMatrix2x2 {
    std::uint64_t tp = 0;
    std::uint64_t fn = 0;
    std::uint64_t fp = 0;
    std::uint64_t tn = 0;

    std::uint64_t n() const { return tp + fn + fp + tn; }
};

// Pairs are (human label, judge label); human is the reference annotator.
ConfusionMatrix2x2 confusion(const std::vector<std::pair<int, int>>& pairs);

struct AgreementReport {
    ConfusionMatrix2x2 matrix;
    std::uint64_t n = 0;
    double p_o = 0.0;
    double p_e = 0.0;
    double kappa = 0.0;
    bool degenerate = false;
    std::uint64_t percent_match_centi = 0;
};

AgreementReport cohen_kappa(const ConfusionMatrix2x2& m);

std::string format_report(const AgreementReport& report);

// Rows sorted by kappa descending, ties by variant id; degenerate kappa shown as a dash.
std::string variant_table(const std::map<PromptVariant, AgreementReport>& reports);

}  // namespace qrelex
