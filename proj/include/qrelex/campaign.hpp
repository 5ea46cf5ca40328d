#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "qrelex/agreement.hpp"
#include "qrelex/dataset.hpp"
#include "qrelex/judge.hpp"
#include "qrelex/pooling.hpp"
#include "qrelex/prompts.hpp"
#include "qrelex/qrels.hpp"
#include "qrelex/stats.hpp"

namespace qrelex {

struct CampaignConfig {
    std::filesystem::path corpus_path;
    std::filesystem::path topics_path;
    std::filesystem::path human_qrels_path;
    BinaryMode binary_mode = BinaryMode::strict;
    GradeEncoding qrels_encoding = GradeEncoding::ternary;

    std::vector<std::filesystem::path> run_paths;
    int pool_depth = 1000;

    PromptVariant variant = PromptVariant::few_shot_separate;
    std::uint64_t example_seed = 1;
    int subset_cap = 3;
    std::uint64_t subset_seed = 1;
    std::filesystem::path template_dir = "templates";
    std::size_t fulltext_max_chars = 0;

    int workers = 4;
    std::filesystem::path output_dir = "out";
    std::filesystem::path checkpoint_path;  // defaults under output_dir
    bool skip_exampleless = false;
    std::uint64_t max_new_verdicts = 0;  // 0 means unlimited

    std::string backend_kind = "mock";  // "mock" or "http"
    BackendConfig backend;
    std::filesystem::path mock_fixture_path;
    double mock_threshold = 0.2;

    std::filesystem::path image_dir;
    std::size_t image_max_bytes = 0;
    OversizePolicy image_policy = OversizePolicy::downscale;

    void validate() const;
};

struct CampaignCounters {
    std::uint64_t parsed = 0;
    std::uint64_t blocked_fallback = 0;
    std::uint64_t retried = 0;
    std::uint64_t failed = 0;

    std::uint64_t attempted() const { return parsed + blocked_fallback + failed; }
};

class Checkpoint {
public:
    struct Row {
        std::string variant;
        std::string topic_id;
        std::string doc_id;
        int label = 0;
        std::string status;
        int attempts = 1;
        std::string raw_response;
        std::string timestamp;
    };

    // Opens or creates the log; an existing file must carry the same fingerprint.
    static Checkpoint open(const std::filesystem::path& path, const std::string& fingerprint);

    void append(const Row& row);
    const std::vector<Row>& rows() const { return rows_; }
    bool completed(const std::string& variant, const std::string& topic_id,
                   const std::string& doc_id) const;
    const Row* latest(const std::string& variant, const std::string& topic_id,
                      const std::string& doc_id) const;
    CampaignCounters counters() const;

private:
    Checkpoint() = default;

    std::filesystem::path path_;
    std::vector<Row> rows_;
    std::map<std::tuple<std::string, std::string, std::string>, std::size_t> latest_;
};

std::string campaign_fingerprint(const CampaignConfig& config, const PromptTemplates& templates,
                                 const std::string& kind);

std::unique_ptr<JudgeBackend> make_backend(const CampaignConfig& config,
                                           const Collection* collection);

struct ValidateResult {
    std::map<PromptVariant, AgreementReport> reports;
    std::string table;
    EvalSubset subset;
    int overlap_topics = 0;
    CampaignCounters counters;
};

ValidateResult validate_judge(const CampaignConfig& config,
                              const std::vector<PromptVariant>& variants, JudgeBackend& backend);

struct ExpandResult {
    QrelsSet merged;
    ExpansionStats stats;
    CampaignCounters counters;
    std::size_t new_verdicts = 0;
    bool finished = true;
    std::vector<std::string> downgraded_topics;
    std::filesystem::path merged_path;
    std::filesystem::path manifest_path;
};

ExpandResult expand(const CampaignConfig& config, JudgeBackend& backend);

}  // namespace qrelex
