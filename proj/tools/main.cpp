#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qrelex/campaign.hpp"
#include "qrelex/util.hpp"

namespace {

using namespace qrelex;

const std::map<std::string, BinaryMode> kBinaryModeNames{
    {"strict", BinaryMode::strict},
    {"lenient", BinaryMode::lenient},
};

const std::map<std::string, GradeEncoding> kEncodingNames{
    {"ternary", GradeEncoding::ternary},
    {"binary", GradeEncoding::binary},
};

const std::map<std::string, ParseMode> kParseModeNames{
    {"strict", ParseMode::strict},
    {"lenient", ParseMode::lenient},
};

const std::map<std::string, ParseFailurePolicy> kParsePolicyNames{
    {"error", ParseFailurePolicy::error},
    {"fallback-zero", ParseFailurePolicy::fallback_zero},
};

const std::map<std::string, OversizePolicy> kImagePolicyNames{
    {"downscale", OversizePolicy::downscale},
    {"reject", OversizePolicy::reject},
};

std::map<std::string, PromptVariant> variant_names() {
    std::map<std::string, PromptVariant> out;
    for (PromptVariant v : kAllVariants) out.emplace(to_string(v), v);
    return out;
}

struct QrelsFlags {
    BinaryMode mode = BinaryMode::strict;
    GradeEncoding encoding = GradeEncoding::ternary;
};

void add_qrels_flags(CLI::App& cmd, QrelsFlags& flags) {
    cmd.add_option("--binary-mode", flags.mode,
                   "how grade 1 maps to a binary label: strict (0) or lenient (1)")
        ->transform(CLI::CheckedTransformer(kBinaryModeNames, CLI::ignore_case));
    cmd.add_option("--encoding", flags.encoding,
                   "grade column encoding of input qrels: ternary {0,1,2} or binary {0,1}")
        ->transform(CLI::CheckedTransformer(kEncodingNames, CLI::ignore_case));
}

void add_campaign_options(CLI::App& cmd, CampaignConfig& config) {
    cmd.add_option("--corpus", config.corpus_path, "corpus file, one JSON article per line")
        ->required();
    cmd.add_option("--topics", config.topics_path, "topics file, one JSON case per line")
        ->required();
    cmd.add_option("--human", config.human_qrels_path, "human qrels file")->required();
    cmd.add_option("--binary-mode", config.binary_mode,
                   "how grade 1 maps to a binary label: strict (0) or lenient (1)")
        ->transform(CLI::CheckedTransformer(kBinaryModeNames, CLI::ignore_case));
    cmd.add_option("--encoding", config.qrels_encoding,
                   "grade column encoding of the human qrels: ternary or binary")
        ->transform(CLI::CheckedTransformer(kEncodingNames, CLI::ignore_case));

    cmd.add_option("--example-seed", config.example_seed, "seed for per-topic example selection");
    cmd.add_option("--subset-cap", config.subset_cap,
                   "per-class cap when sampling the validation subset");
    cmd.add_option("--subset-seed", config.subset_seed, "seed for validation subset sampling");
    cmd.add_option("--templates", config.template_dir, "directory holding the prompt templates");
    cmd.add_option("--fulltext-max-chars", config.fulltext_max_chars,
                   "truncate article fulltext to this many bytes (0 keeps everything)");

    cmd.add_option("--workers", config.workers, "number of judging workers");
    cmd.add_option("--out", config.output_dir, "output directory");
    cmd.add_option("--checkpoint", config.checkpoint_path,
                   "checkpoint log path (defaults under the output directory)");

    cmd.add_option("--backend", config.backend_kind, "judge backend: mock or http")
        ->check(CLI::IsMember({"mock", "http"}));
    cmd.add_option("--endpoint", config.backend.endpoint,
                   "chat completions URL for the http backend");
    cmd.add_option("--credential-env", config.backend.credential_env,
                   "name of the environment variable holding the API credential");
    cmd.add_option("--model", config.backend.model, "model name sent with each request");
    cmd.add_option("--timeout-ms", config.backend.timeout_ms, "per-request timeout");
    cmd.add_option("--max-retries", config.backend.max_retries,
                   "retries after a transient failure");
    cmd.add_option("--max-in-flight", config.backend.max_in_flight,
                   "cap on concurrent requests to the endpoint");
    cmd.add_option("--temperature", config.backend.temperature, "sampling temperature");
    cmd.add_option("--max-output-tokens", config.backend.max_output_tokens,
                   "completion token budget");
    cmd.add_option("--requests-per-second", config.backend.requests_per_second,
                   "rate limit toward the endpoint (0 disables)");
    cmd.add_option("--parse-mode", config.backend.parse_mode,
                   "verdict parsing: strict or lenient")
        ->transform(CLI::CheckedTransformer(kParseModeNames, CLI::ignore_case));
    cmd.add_option("--parse-policy", config.backend.parse_policy,
                   "on an unparseable verdict after retries: error or fallback-zero")
        ->transform(CLI::CheckedTransformer(kParsePolicyNames, CLI::ignore_case));
    cmd.add_option("--mock-fixture", config.mock_fixture_path,
                   "JSONL verdict fixture for the mock backend");
    cmd.add_option("--mock-threshold", config.mock_threshold,
                   "overlap threshold for the mock backend heuristic");

    cmd.add_option("--image-dir", config.image_dir, "base directory for relative image URIs");
    cmd.add_option("--image-max-bytes", config.image_max_bytes,
                   "per-image byte budget (0 disables)");
    cmd.add_option("--image-policy", config.image_policy,
                   "over-budget images: downscale or reject")
        ->transform(CLI::CheckedTransformer(kImagePolicyNames, CLI::ignore_case));
}

std::string counters_line(const CampaignCounters& c) {
    return "verdicts: parsed " + format_count(c.parsed) + ", blocked " +
           format_count(c.blocked_fallback) + ", retried " + format_count(c.retried) +
           ", failed " + format_count(c.failed);
}

void run_ingest(const std::filesystem::path& corpus, const std::filesystem::path& topics) {
    Collection collection = load_collection(corpus, topics);
    const CollectionStats& s = collection.stats;
    std::cout << "documents: " << format_count(s.documents) << "\n"
              << "document images: " << format_count(s.document_images) << "\n"
              << "topics: " << format_count(s.topics) << "\n"
              << "topic images: " << format_count(s.topic_images) << "\n";
}

struct PoolArgs {
    std::vector<std::filesystem::path> run_paths;
    int depth = 1000;
    std::filesystem::path human_path;
    bool keep_judged = false;
    QrelsFlags qrels;
    std::filesystem::path out_path;
};

void run_pool(const PoolArgs& args) {
    std::vector<Run> runs;
    runs.reserve(args.run_paths.size());
    for (const auto& p : args.run_paths) runs.push_back(parse_run(p));

    QrelsSet judged;
    if (!args.human_path.empty())
        judged = parse_qrels(args.human_path, Source::human, args.qrels.mode, args.qrels.encoding);

    Pool pool = build_pool(runs, args.depth, judged, !args.keep_judged);
    for (const std::string& w : pool.warnings) std::cerr << "warning: " << w << "\n";

    std::cout << "pool depth: " << pool.depth << "\n"
              << "topics: " << format_count(pool.docs_by_topic.size()) << "\n"
              << "candidates: " << format_count(pool.total()) << "\n"
              << "excluded as already judged: " << format_count(pool.excluded) << "\n";

    if (!args.out_path.empty()) {
        std::ofstream out(args.out_path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + args.out_path.string());
        for (const auto& [topic, docs] : pool.docs_by_topic)
            for (const std::string& doc : docs) out << topic << " " << doc << "\n";
        std::cout << "pool written to " << args.out_path.string() << "\n";
    }
}

struct SubsetArgs {
    std::filesystem::path human_path;
    int cap = 3;
    std::uint64_t seed = 1;
    QrelsFlags qrels;
    std::filesystem::path out_path;
};

void run_subset(const SubsetArgs& args) {
    QrelsSet human =
        parse_qrels(args.human_path, Source::human, args.qrels.mode, args.qrels.encoding);
    EvalSubset subset = sample_eval_subset(human, args.cap, args.seed);

    std::cout << "topics: " << format_count(subset.by_topic.size()) << "\n"
              << "total: " << format_count(subset.total()) << "\n"
              << "relevant: " << format_count(subset.count_label(1)) << "\n"
              << "not relevant: " << format_count(subset.count_label(0)) << "\n";

    if (!args.out_path.empty()) {
        std::ofstream out(args.out_path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + args.out_path.string());
        for (const auto& [topic, items] : subset.by_topic)
            for (const EvalSubset::Item& item : items)
                out << topic << " " << item.doc_id << " " << item.label << "\n";
        std::cout << "subset written to " << args.out_path.string() << "\n";
    }
}

void run_validate(const CampaignConfig& config, std::vector<PromptVariant> variants) {
    if (variants.empty())
        variants.assign(std::begin(kAllVariants), std::end(kAllVariants));
    Collection collection = load_collection(config.corpus_path, config.topics_path);
    auto backend = make_backend(config, &collection);
    ValidateResult result = validate_judge(config, variants, *backend);

    std::cout << "subset: " << format_count(result.subset.total()) << " judgments over "
              << format_count(result.subset.by_topic.size()) << " topics ("
              << format_count(result.subset.count_label(1)) << " relevant, "
              << format_count(result.subset.count_label(0)) << " not relevant)\n";
    if (result.overlap_topics > 0)
        std::cout << "note: the few-shot example also sits in the eval subset for "
                  << result.overlap_topics << " topic(s)\n";
    std::cout << "\n" << result.table << "\n" << counters_line(result.counters) << "\n"
              << "reports written under " << config.output_dir.string() << "\n";
}

void run_expand(const CampaignConfig& config) {
    Collection collection = load_collection(config.corpus_path, config.topics_path);
    auto backend = make_backend(config, &collection);
    ExpandResult result = expand(config, *backend);

    std::cout << format_expansion(result.stats) << "\n"
              << counters_line(result.counters) << "\n"
              << "new verdicts this run: " << format_count(result.new_verdicts) << "\n";
    if (!result.downgraded_topics.empty()) {
        std::cout << "downgraded to zero-shot (no relevant example):";
        for (const std::string& t : result.downgraded_topics) std::cout << " " << t;
        std::cout << "\n";
    }
    if (!result.finished)
        std::cout << "stopped at the verdict budget; rerun with the same checkpoint to finish\n";
    std::cout << "merged qrels: " << result.merged_path.string() << "\n"
              << "manifest: " << result.manifest_path.string() << "\n";
}

struct StatsArgs {
    std::filesystem::path original_path;
    std::filesystem::path merged_path;
    QrelsFlags qrels;
    std::uint64_t collection_size = 0;
    std::uint64_t topic_count = 0;
};

// Picks up the provenance sidecar written next to campaign output, so
// judge-sourced rows keep their binary labels on a reparse.
QrelsSet parse_with_sidecar(const std::filesystem::path& path, Source source,
                            const QrelsFlags& flags) {
    QrelsSet qrels = parse_qrels(path, source, flags.mode, flags.encoding);
    std::filesystem::path sidecar = path;
    sidecar += ".prov.jsonl";
    if (std::filesystem::exists(sidecar)) {
        apply_provenance_sidecar(qrels, sidecar);
        std::cout << "applied provenance sidecar " << sidecar.string() << "\n";
    }
    return qrels;
}

void run_stats(const StatsArgs& args) {
    QrelsSet original =
        parse_qrels(args.original_path, Source::human, args.qrels.mode, args.qrels.encoding);
    if (args.merged_path.empty()) {
        std::cout << format_distribution(distribution(original));
        return;
    }
    QrelsSet merged = parse_with_sidecar(args.merged_path, Source::judge, args.qrels);
    std::uint64_t topics = args.topic_count;
    if (topics == 0) topics = per_topic_counts(merged).size();

    std::cout << "original\n"
              << format_distribution(distribution(original)) << "\nmerged\n"
              << format_distribution(distribution(merged)) << "\n"
              << format_expansion(expansion_stats(original, merged, args.collection_size, topics));
}

struct FiguresArgs {
    std::filesystem::path original_path;
    std::filesystem::path merged_path;
    QrelsFlags qrels;
    std::filesystem::path out_dir = "figures";
};

void run_figures(const FiguresArgs& args) {
    QrelsSet original =
        parse_qrels(args.original_path, Source::human, args.qrels.mode, args.qrels.encoding);
    QrelsSet merged = parse_with_sidecar(args.merged_path, Source::judge, args.qrels);
    ExpansionStats stats = expansion_stats(original, merged, 0, 0);
    export_figures(stats, args.out_dir);
    std::cout << "wrote " << (args.out_dir / "fig1_total_judgments.csv").string() << "\n"
              << "wrote " << (args.out_dir / "fig2_relevant_diff.csv").string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"expand sparse relevance judgments for case-based retrieval with a remote judge"};
    app.require_subcommand(1);
    app.set_config("--config", "", "read options from a key=value file (section per subcommand)");

    std::filesystem::path ingest_corpus;
    std::filesystem::path ingest_topics;
    CLI::App* ingest = app.add_subcommand("ingest", "load the collection and print its census");
    ingest->add_option("--corpus", ingest_corpus, "corpus file, one JSON article per line")
        ->required();
    ingest->add_option("--topics", ingest_topics, "topics file, one JSON case per line")
        ->required();
    ingest->callback([&] { run_ingest(ingest_corpus, ingest_topics); });

    PoolArgs pool_args;
    CLI::App* pool = app.add_subcommand("pool", "build the judging pool from run files");
    pool->add_option("--run", pool_args.run_paths, "run file in six-column format (repeatable)")
        ->required();
    pool->add_option("--depth", pool_args.depth, "pool depth per run and topic");
    pool->add_option("--human", pool_args.human_path, "human qrels to exclude from the pool");
    pool->add_flag("--keep-judged", pool_args.keep_judged,
                   "keep already-judged pairs in the pool");
    add_qrels_flags(*pool, pool_args.qrels);
    pool->add_option("--out", pool_args.out_path, "write the pool as topic/doc lines");
    pool->callback([&] { run_pool(pool_args); });

    SubsetArgs subset_args;
    CLI::App* subset =
        app.add_subcommand("subset", "sample the stratified validation subset from human qrels");
    subset->add_option("--human", subset_args.human_path, "human qrels file")->required();
    subset->add_option("--cap", subset_args.cap, "per-class cap per topic");
    subset->add_option("--seed", subset_args.seed, "sampling seed");
    add_qrels_flags(*subset, subset_args.qrels);
    subset->add_option("--out", subset_args.out_path, "write the subset as topic/doc/label lines");
    subset->callback([&] { run_subset(subset_args); });

    CampaignConfig validate_config;
    std::vector<PromptVariant> validate_variants;
    CLI::App* validate =
        app.add_subcommand("validate", "judge the validation subset and report agreement");
    add_campaign_options(*validate, validate_config);
    validate
        ->add_option("--variant", validate_variants,
                     "prompt variant to evaluate (repeatable; default: all four)")
        ->transform(CLI::CheckedTransformer(variant_names(), CLI::ignore_case));
    validate->callback([&] { run_validate(validate_config, validate_variants); });

    CampaignConfig expand_config;
    CLI::App* expand_cmd =
        app.add_subcommand("expand", "judge the unjudged pool and merge with human qrels");
    add_campaign_options(*expand_cmd, expand_config);
    expand_cmd->add_option("--run", expand_config.run_paths,
                           "run file feeding the pool (repeatable)")
        ->required();
    expand_cmd->add_option("--depth", expand_config.pool_depth, "pool depth per run and topic");
    expand_cmd
        ->add_option("--variant", expand_config.variant, "prompt variant for the whole campaign")
        ->transform(CLI::CheckedTransformer(variant_names(), CLI::ignore_case));
    expand_cmd->add_flag("--skip-exampleless", expand_config.skip_exampleless,
                         "downgrade topics without a relevant example to zero-shot");
    expand_cmd->add_option("--max-new-verdicts", expand_config.max_new_verdicts,
                           "stop after roughly this many new verdicts (0 = no budget)");
    expand_cmd->callback([&] { run_expand(expand_config); });

    StatsArgs stats_args;
    CLI::App* stats =
        app.add_subcommand("stats", "label distribution and expansion statistics of qrels");
    stats->add_option("--original", stats_args.original_path, "original qrels file")->required();
    stats->add_option("--merged", stats_args.merged_path, "merged qrels file");
    add_qrels_flags(*stats, stats_args.qrels);
    stats->add_option("--collection-size", stats_args.collection_size,
                      "corpus size for coverage percentages");
    stats->add_option("--topic-count", stats_args.topic_count,
                      "topic count for per-topic averages (default: topics in the merged set)");
    stats->callback([&] { run_stats(stats_args); });

    FiguresArgs figures_args;
    CLI::App* figures =
        app.add_subcommand("export-figures", "write per-topic expansion CSVs for plotting");
    figures->add_option("--original", figures_args.original_path, "original qrels file")
        ->required();
    figures->add_option("--merged", figures_args.merged_path, "merged qrels file")->required();
    add_qrels_flags(*figures, figures_args.qrels);
    figures->add_option("--out", figures_args.out_dir, "output directory");
    figures->callback([&] { run_figures(figures_args); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
