#include "qrelex/agreement.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

#include "qrelex/util.hpp"

namespace qrelex {

ConfusionMatrix2x2 confusion(const std::vector<std::pair<int, int>>& pairs) {
    if (pairs.empty()) throw std::runtime_error("cannot build a confusion matrix from zero pairs");
    ConfusionMatrix2x2 m;
    for (const auto& [human, judge] : pairs) {
        if ((human != 0 && human != 1) || (judge != 0 && judge != 1))
            throw std::runtime_error("labels must be binary");
        if (human == 1)
            ++(judge == 1 ? m.tp : m.fn);
        else
            ++(judge == 1 ? m.fp : m.tn);
    }
    return m;
}

AgreementReport cohen_kappa(const ConfusionMatrix2x2& m) {
    std::uint64_t n = m.n();
    if (n == 0) throw std::runtime_error("confusion matrix is empty");

    AgreementReport r;
    r.matrix = m;
    r.n = n;

    std::uint64_t agree = m.tp + m.tn;
    unsigned __int128 pe_num = (unsigned __int128)(m.tp + m.fn) * (m.tp + m.fp) +
                               (unsigned __int128)(m.tn + m.fp) * (m.tn + m.fn);
    unsigned __int128 n2 = (unsigned __int128)n * n;

    r.p_o = static_cast<double>(agree) / static_cast<double>(n);
    r.p_e = static_cast<double>(pe_num) / static_cast<double>(n2);
    r.percent_match_centi = percent_centi(agree, n);

    if (pe_num == n2) {
        r.degenerate = true;
        r.kappa = 0.0;
        return r;
    }
    __int128 kappa_num = (__int128)agree * n - (__int128)pe_num;
    __int128 kappa_den = (__int128)n2 - (__int128)pe_num;
    r.kappa = static_cast<double>(kappa_num) / static_cast<double>(kappa_den);
    return r;
}

namespace {

std::string fixed4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

std::string variant_display(PromptVariant v) {
    switch (v) {
        case PromptVariant::zero_shot_no_system: return "Zero-shot / No system";
        case PromptVariant::zero_shot_with_system: return "Zero-shot / With system";
        case PromptVariant::few_shot_single: return "Few-shot / Single prompt";
        case PromptVariant::few_shot_separate: return "Few-shot / Separate prompts";
    }
    throw std::logic_error("bad prompt variant");
}

}  // namespace

std::string format_report(const AgreementReport& r) {
    std::string out;
    out += "agreement computed over judgment pairs (n = " + format_count(r.n) + ")\n";
    out += "            judge=1  judge=0\n";
    out += "human=1     " + format_count(r.matrix.tp) + "  " + format_count(r.matrix.fn) + "\n";
    out += "human=0     " + format_count(r.matrix.fp) + "  " + format_count(r.matrix.tn) + "\n";
    out += "p_o = " + fixed4(r.p_o) + " (" + format_percent_centi(r.percent_match_centi) +
           " matching)\n";
    out += "p_e = " + fixed4(r.p_e) + "\n";
    out += "kappa = " + (r.degenerate ? std::string("— (degenerate)") : fixed4(r.kappa)) +
           "\n";
    return out;
}

std::string variant_table(const std::map<PromptVariant, AgreementReport>& reports) {
    if (reports.empty()) throw std::runtime_error("no agreement reports to tabulate");
    std::vector<std::pair<PromptVariant, AgreementReport>> rows(reports.begin(), reports.end());
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        bool a_deg = a.second.degenerate;
        bool b_deg = b.second.degenerate;
        if (a_deg != b_deg) return b_deg;
        if (!a_deg && a.second.kappa != b.second.kappa) return a.second.kappa > b.second.kappa;
        return to_string(a.first) < to_string(b.first);
    });

    std::string out = "Prompt Variant                 Kappa\n";
    for (const auto& [variant, report] : rows) {
        std::string name = variant_display(variant);
        name.resize(std::max<std::size_t>(name.size(), 31), ' ');
        out += name + (report.degenerate ? std::string("—") : fixed4(report.kappa)) + "\n";
    }
    return out;
}

}  // namespace qrelex
