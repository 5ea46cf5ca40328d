#include "qrelex/campaign.hpp"

#include <atomic>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "qrelex/util.hpp"

namespace qrelex {

void CampaignConfig::validate() const {
    if (workers < 1) throw std::runtime_error("worker count must be >= 1");
    if (subset_cap < 1) throw std::runtime_error("subset cap must be >= 1");
    if (pool_depth < 1) throw std::runtime_error("pool depth must be >= 1");
    if (backend_kind != "mock" && backend_kind != "http")
        throw std::runtime_error("backend must be 'mock' or 'http'");
    backend.validate();
}

namespace {

nlohmann::ordered_json row_to_json(const Checkpoint::Row& row) {
    nlohmann::ordered_json rec;
    if (!row.variant.empty()) rec["variant"] = row.variant;
    rec["topic_id"] = row.topic_id;
    rec["doc_id"] = row.doc_id;
    rec["label"] = row.label;
    rec["status"] = row.status;
    rec["attempts"] = row.attempts;
    rec["raw_response"] = row.raw_response;
    rec["timestamp"] = row.timestamp;
    return rec;
}

}  // namespace

Checkpoint Checkpoint::open(const std::filesystem::path& path, const std::string& fingerprint) {
    Checkpoint cp;
    cp.path_ = path;
    if (std::filesystem::exists(path)) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
        std::vector<std::string> lines;
        std::string line;
        while (std::getline(in, line)) lines.push_back(line);
        if (lines.empty()) throw std::runtime_error("checkpoint is empty: " + path.string());
        nlohmann::json header;
        try {
            header = nlohmann::json::parse(lines[0]);
        } catch (const std::exception& e) {
            throw std::runtime_error(path.string() + ": bad checkpoint header: " + e.what());
        }
        std::string found = header.value("fingerprint", "");
        if (found != fingerprint)
            throw std::runtime_error("checkpoint fingerprint mismatch (" + found + " vs " +
                                     fingerprint + "); refusing to resume from " + path.string());
        bool torn = false;
        for (std::size_t i = 1; i < lines.size(); ++i) {
            if (trim(lines[i]).empty()) continue;
            nlohmann::json rec;
            try {
                rec = nlohmann::json::parse(lines[i]);
            } catch (const std::exception& e) {
                if (i + 1 == lines.size()) {  // torn tail from an interrupted write
                    torn = true;
                    break;
                }
                throw std::runtime_error(path.string() + ":" + std::to_string(i + 1) + ": " +
                                         e.what());
            }
            Row row;
            row.variant = rec.value("variant", "");
            row.topic_id = rec.at("topic_id").get<std::string>();
            row.doc_id = rec.at("doc_id").get<std::string>();
            row.label = rec.at("label").get<int>();
            row.status = rec.at("status").get<std::string>();
            row.attempts = rec.value("attempts", 1);
            row.raw_response = rec.value("raw_response", "");
            row.timestamp = rec.value("timestamp", "");
            cp.latest_[{row.variant, row.topic_id, row.doc_id}] = cp.rows_.size();
            cp.rows_.push_back(std::move(row));
        }
        if (torn) {
            // Drop the partial line from disk so later appends start on a
            // fresh line.
            in.close();
            std::ofstream out(path, std::ios::binary | std::ios::trunc);
            if (!out) throw std::runtime_error("cannot rewrite checkpoint: " + path.string());
            out << header.dump() << "\n";
            for (const Row& row : cp.rows_) out << row_to_json(row).dump() << "\n";
            if (!out) throw std::runtime_error("write failed: " + path.string());
        }
    } else {
        if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot create checkpoint: " + path.string());
        nlohmann::ordered_json header;
        header["fingerprint"] = fingerprint;
        out << header.dump() << "\n";
        if (!out) throw std::runtime_error("write failed: " + path.string());
    }
    return cp;
}

void Checkpoint::append(const Row& row) {
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (!out) throw std::runtime_error("cannot append to checkpoint: " + path_.string());
    out << row_to_json(row).dump() << "\n";
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + path_.string());
    latest_[{row.variant, row.topic_id, row.doc_id}] = rows_.size();
    rows_.push_back(row);
}

bool Checkpoint::completed(const std::string& variant, const std::string& topic_id,
                           const std::string& doc_id) const {
    const Row* row = latest(variant, topic_id, doc_id);
    return row && row->status != "failed";
}

const Checkpoint::Row* Checkpoint::latest(const std::string& variant, const std::string& topic_id,
                                          const std::string& doc_id) const {
    auto it = latest_.find({variant, topic_id, doc_id});
    return it == latest_.end() ? nullptr : &rows_[it->second];
}

CampaignCounters Checkpoint::counters() const {
    CampaignCounters c;
    for (const auto& [key, idx] : latest_) {
        const Row& row = rows_[idx];
        if (row.status == "failed")
            ++c.failed;
        else if (row.status == "blocked_fallback")
            ++c.blocked_fallback;
        else
            ++c.parsed;
        if (row.status != "failed" && row.attempts > 1) ++c.retried;
    }
    return c;
}

std::string campaign_fingerprint(const CampaignConfig& config, const PromptTemplates& templates,
                                 const std::string& kind) {
    std::ostringstream canon;
    canon << "kind=" << kind;
    canon << ";variant=" << to_string(config.variant);
    canon << ";example_seed=" << config.example_seed;
    canon << ";subset_cap=" << config.subset_cap;
    canon << ";subset_seed=" << config.subset_seed;
    canon << ";pool_depth=" << config.pool_depth;
    canon << ";binary_mode=" << (config.binary_mode == BinaryMode::strict ? "strict" : "lenient");
    canon << ";encoding="
          << (config.qrels_encoding == GradeEncoding::ternary ? "ternary" : "binary");
    canon << ";parse_mode="
          << (config.backend.parse_mode == ParseMode::strict ? "strict" : "lenient");
    canon << ";parse_policy="
          << (config.backend.parse_policy == ParseFailurePolicy::error ? "error" : "fallback_zero");
    canon << ";skip_exampleless=" << (config.skip_exampleless ? 1 : 0);
    canon << ";fulltext_max_chars=" << config.fulltext_max_chars;
    canon << ";corpus=" << config.corpus_path.string();
    canon << ";topics=" << config.topics_path.string();
    canon << ";human=" << config.human_qrels_path.string();
    canon << ";runs=";
    for (const auto& p : config.run_paths) canon << p.string() << ",";
    canon << ";templates=" << to_hex(templates.content_hash());
    return to_hex(fnv1a64(canon.str()));
}

std::unique_ptr<JudgeBackend> make_backend(const CampaignConfig& config,
                                           const Collection* collection) {
    if (config.backend_kind == "http") {
        ImageLoader loader;
        ImageLoadOptions opts;
        opts.base_dir = config.image_dir;
        opts.max_bytes = config.image_max_bytes;
        opts.policy = config.image_policy;
        loader = [opts](const ImageRef& ref) { return load_image(ref, opts); };
        return std::make_unique<HttpJudgeBackend>(config.backend, loader);
    }
    auto mock = std::make_unique<MockJudgeBackend>();
    if (!config.mock_fixture_path.empty()) {
        std::ifstream in(config.mock_fixture_path);
        if (!in)
            throw std::runtime_error("cannot open mock fixture: " +
                                     config.mock_fixture_path.string());
        std::map<std::pair<std::string, std::string>, int> fixture;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (trim(line).empty()) continue;
            nlohmann::json rec;
            try {
                rec = nlohmann::json::parse(line);
            } catch (const std::exception& e) {
                throw std::runtime_error(config.mock_fixture_path.string() + ":" +
                                         std::to_string(lineno) + ": " + e.what());
            }
            fixture[{rec.at("topic_id").get<std::string>(), rec.at("doc_id").get<std::string>()}] =
                rec.at("label").get<int>();
        }
        mock->set_fixture(std::move(fixture));
    }
    if (collection) mock->set_heuristic(collection, config.mock_threshold);
    return mock;
}

namespace {

struct WorkItem {
    const Topic* topic = nullptr;
    const Document* doc = nullptr;
    const Document* example = nullptr;
    PromptVariant variant = PromptVariant::few_shot_separate;
};

struct WorkerMessage {
    enum class Kind { verdict, error, done };
    Kind kind = Kind::done;
    std::size_t index = 0;
    JudgeVerdict verdict;
    std::string error;
};

class Channel {
public:
    void push(WorkerMessage msg) {
        {
            std::lock_guard lock(mutex_);
            queue_.push_back(std::move(msg));
        }
        cv_.notify_one();
    }
    WorkerMessage pop() {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return !queue_.empty(); });
        WorkerMessage msg = std::move(queue_.front());
        queue_.pop_front();
        return msg;
    }

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<WorkerMessage> queue_;
};

// Runs the coordinator/worker loop over `items`; the coordinator is the only
// writer of the checkpoint. Returns the number of verdicts appended.
std::size_t run_judging(const std::vector<WorkItem>& items, const PromptEngine& engine,
                        JudgeBackend& backend, Checkpoint& checkpoint, int workers,
                        std::uint64_t max_new_verdicts) {
    // Resume state is frozen before the workers start; only the coordinator
    // thread touches the checkpoint afterwards.
    std::vector<const WorkItem*> pending;
    for (const WorkItem& item : items)
        if (!checkpoint.completed(to_string(item.variant), item.topic->topic_id,
                                  item.doc->doc_id))
            pending.push_back(&item);

    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    Channel channel;

    auto worker = [&] {
        for (;;) {
            if (stop.load()) break;
            std::size_t i = next.fetch_add(1);
            if (i >= pending.size()) break;
            const WorkItem& item = *pending[i];
            WorkerMessage msg;
            msg.index = i;
            try {
                PromptBundle bundle =
                    engine.assemble(item.variant, *item.topic, item.example, *item.doc);
                msg.verdict = backend.judge(bundle);
                msg.kind = WorkerMessage::Kind::verdict;
            } catch (const std::exception& e) {
                msg.kind = WorkerMessage::Kind::error;
                msg.error = e.what();
            }
            bool failed = msg.kind == WorkerMessage::Kind::error;
            channel.push(std::move(msg));
            if (failed) break;
        }
        WorkerMessage done;
        done.kind = WorkerMessage::Kind::done;
        channel.push(std::move(done));
    };

    std::vector<std::jthread> pool;
    int n_workers = std::max(1, std::min<int>(workers, pending.empty() ? 1 : (int)pending.size()));
    pool.reserve(n_workers);
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);

    std::size_t appended = 0;
    int live = n_workers;
    std::string first_error;
    while (live > 0) {
        WorkerMessage msg = channel.pop();
        if (msg.kind == WorkerMessage::Kind::done) {
            --live;
            continue;
        }
        const WorkItem& item = *pending[msg.index];
        Checkpoint::Row row;
        row.variant = to_string(item.variant);
        row.topic_id = item.topic->topic_id;
        row.doc_id = item.doc->doc_id;
        row.timestamp = iso8601_now();
        if (msg.kind == WorkerMessage::Kind::error) {
            row.label = 0;
            row.status = "failed";
            row.raw_response = msg.error;
            checkpoint.append(row);
            if (first_error.empty()) first_error = msg.error;
            stop.store(true);
            continue;
        }
        row.label = msg.verdict.label;
        row.status = to_string(msg.verdict.status);
        row.attempts = msg.verdict.attempts;
        row.raw_response = msg.verdict.raw_response;
        checkpoint.append(row);
        ++appended;
        if (max_new_verdicts > 0 && appended >= max_new_verdicts) stop.store(true);
    }
    if (!first_error.empty())
        throw std::runtime_error("campaign aborted, checkpoint preserved: " + first_error);
    return appended;
}

Collection load_campaign_collection(const CampaignConfig& config) {
    return load_collection(config.corpus_path, config.topics_path);
}

QrelsSet load_human_qrels(const CampaignConfig& config) {
    return parse_qrels(config.human_qrels_path, Source::human, config.binary_mode,
                       config.qrels_encoding);
}

}  // namespace

ValidateResult validate_judge(const CampaignConfig& config,
                              const std::vector<PromptVariant>& variants, JudgeBackend& backend) {
    config.validate();
    if (variants.empty()) throw std::runtime_error("no prompt variants requested");
    Collection collection = load_campaign_collection(config);
    QrelsSet human = load_human_qrels(config);
    PromptTemplates templates = PromptTemplates::load(config.template_dir);
    PromptOptions prompt_opts;
    prompt_opts.fulltext_max_chars = config.fulltext_max_chars;
    PromptEngine engine(templates, prompt_opts);

    EvalSubset subset = sample_eval_subset(human, config.subset_cap, config.subset_seed);

    std::filesystem::create_directories(config.output_dir);
    std::filesystem::path checkpoint_path = config.checkpoint_path.empty()
                                                ? config.output_dir / "validate.checkpoint.jsonl"
                                                : config.checkpoint_path;
    std::ostringstream kind;
    kind << "validate";
    for (PromptVariant v : variants) kind << ":" << to_string(v);
    std::string fingerprint = campaign_fingerprint(config, templates, kind.str());
    Checkpoint checkpoint = Checkpoint::open(checkpoint_path, fingerprint);

    ValidateResult result;
    result.subset = subset;

    // One example per topic, reused across variants; overlap counted per topic.
    std::map<std::string, const Document*> examples;
    bool any_few_shot = false;
    for (PromptVariant v : variants) any_few_shot = any_few_shot || is_few_shot(v);
    if (any_few_shot) {
        for (const auto& [topic_id, items] : subset.by_topic) {
            ExampleChoice choice = pick_example(human, topic_id, config.example_seed, &subset);
            auto doc = collection.documents.find(choice.doc_id);
            if (doc == collection.documents.end())
                throw std::runtime_error("example document '" + choice.doc_id +
                                         "' is not in the collection");
            examples[topic_id] = &doc->second;
            if (choice.overlaps_eval) ++result.overlap_topics;
        }
    }

    std::vector<WorkItem> items;
    for (PromptVariant v : variants) {
        for (const auto& [topic_id, subset_items] : subset.by_topic) {
            auto topic = collection.topics.find(topic_id);
            if (topic == collection.topics.end())
                throw std::runtime_error("topic '" + topic_id + "' is not in the collection");
            for (const auto& si : subset_items) {
                auto doc = collection.documents.find(si.doc_id);
                if (doc == collection.documents.end())
                    throw std::runtime_error("document '" + si.doc_id +
                                             "' is not in the collection");
                WorkItem item;
                item.topic = &topic->second;
                item.doc = &doc->second;
                item.variant = v;
                item.example = is_few_shot(v) ? examples.at(topic_id) : nullptr;
                items.push_back(item);
            }
        }
    }

    run_judging(items, engine, backend, checkpoint, config.workers, 0);
    result.counters = checkpoint.counters();

    for (PromptVariant v : variants) {
        std::vector<std::pair<int, int>> pairs;
        for (const auto& [topic_id, subset_items] : subset.by_topic) {
            for (const auto& si : subset_items) {
                const Checkpoint::Row* row = checkpoint.latest(to_string(v), topic_id, si.doc_id);
                if (!row || row->status == "failed")
                    throw std::runtime_error("missing verdict for (" + topic_id + ", " +
                                             si.doc_id + ") under " + to_string(v));
                pairs.emplace_back(si.label, row->label);
            }
        }
        result.reports[v] = cohen_kappa(confusion(pairs));
    }
    result.table = variant_table(result.reports);

    std::ofstream table_out(config.output_dir / "variant_table.txt", std::ios::binary);
    table_out << result.table;
    for (const auto& [v, report] : result.reports) {
        std::ofstream report_out(config.output_dir / ("agreement_" + to_string(v) + ".txt"),
                                 std::ios::binary);
        report_out << format_report(report);
    }
    return result;
}

ExpandResult expand(const CampaignConfig& config, JudgeBackend& backend) {
    config.validate();
    Collection collection = load_campaign_collection(config);
    QrelsSet human = load_human_qrels(config);
    PromptTemplates templates = PromptTemplates::load(config.template_dir);
    PromptOptions prompt_opts;
    prompt_opts.fulltext_max_chars = config.fulltext_max_chars;
    PromptEngine engine(templates, prompt_opts);

    std::vector<Run> runs;
    runs.reserve(config.run_paths.size());
    for (const auto& path : config.run_paths) runs.push_back(parse_run(path));
    if (runs.empty()) throw std::runtime_error("expand requires at least one run file");

    std::set<std::string> known_topics;
    for (const auto& [topic_id, topic] : collection.topics) known_topics.insert(topic_id);
    Pool pool = build_pool(runs, config.pool_depth, human, true, known_topics);
    for (const auto& warning : pool.warnings) std::cerr << "warning: " << warning << "\n";

    std::filesystem::create_directories(config.output_dir);
    std::filesystem::path checkpoint_path = config.checkpoint_path.empty()
                                                ? config.output_dir / "expand.checkpoint.jsonl"
                                                : config.checkpoint_path;
    std::string fingerprint = campaign_fingerprint(config, templates, "expand");
    Checkpoint checkpoint = Checkpoint::open(checkpoint_path, fingerprint);

    ExpandResult result;

    std::map<std::string, const Document*> examples;
    std::map<std::string, PromptVariant> topic_variant;
    for (const auto& [topic_id, docs] : pool.docs_by_topic) {
        if (!collection.topics.count(topic_id)) {
            std::cerr << "warning: skipping pooled topic '" << topic_id
                      << "' absent from the collection\n";
            continue;
        }
        topic_variant[topic_id] = config.variant;
        if (!is_few_shot(config.variant)) continue;
        try {
            ExampleChoice choice = pick_example(human, topic_id, config.example_seed);
            auto doc = collection.documents.find(choice.doc_id);
            if (doc == collection.documents.end())
                throw std::runtime_error("example document '" + choice.doc_id +
                                         "' is not in the collection");
            examples[topic_id] = &doc->second;
        } catch (const std::exception& e) {
            if (!config.skip_exampleless) throw;
            topic_variant[topic_id] = PromptVariant::zero_shot_with_system;
            result.downgraded_topics.push_back(topic_id);
        }
    }

    std::vector<WorkItem> items;
    for (const auto& [topic_id, variant] : topic_variant) {
        const Topic* topic = &collection.topics.at(topic_id);
        for (const std::string& doc_id : pool.docs_by_topic.at(topic_id)) {
            if (human.contains(topic_id, doc_id)) continue;
            auto doc = collection.documents.find(doc_id);
            if (doc == collection.documents.end()) {
                std::cerr << "warning: skipping pooled document '" << doc_id
                          << "' absent from the collection\n";
                continue;
            }
            WorkItem item;
            item.topic = topic;
            item.doc = &doc->second;
            item.variant = variant;
            item.example = is_few_shot(variant) ? examples.at(topic_id) : nullptr;
            items.push_back(item);
        }
    }

    result.new_verdicts =
        run_judging(items, engine, backend, checkpoint, config.workers, config.max_new_verdicts);
    result.counters = checkpoint.counters();

    std::size_t incomplete = 0;
    for (const WorkItem& item : items)
        if (!checkpoint.completed(to_string(item.variant), item.topic->topic_id,
                                  item.doc->doc_id))
            ++incomplete;
    result.finished = incomplete == 0;

    QrelsSet generated;
    for (const Checkpoint::Row& row : checkpoint.rows()) {
        if (row.status == "failed") continue;
        Judgment j;
        j.topic_id = row.topic_id;
        j.doc_id = row.doc_id;
        j.label = row.label;
        j.source = row.status == "blocked_fallback" ? Source::blocked_fallback : Source::judge;
        j.variant = row.variant;
        j.status = row.status;
        j.timestamp = row.timestamp;
        generated.entries[{j.topic_id, j.doc_id}] = std::move(j);
    }

    result.merged = merge(human, generated);
    result.merged_path = config.output_dir / "merged.qrels";
    write_qrels(result.merged, result.merged_path);

    result.stats = expansion_stats(human, result.merged, collection.documents.size(),
                                   collection.topics.size());
    export_figures(result.stats, config.output_dir);
    {
        std::ofstream out(config.output_dir / "distribution_original.txt", std::ios::binary);
        out << format_distribution(distribution(human));
    }
    {
        std::ofstream out(config.output_dir / "distribution_merged.txt", std::ios::binary);
        out << format_distribution(distribution(result.merged));
    }
    {
        std::ofstream out(config.output_dir / "expansion.txt", std::ios::binary);
        out << format_expansion(result.stats);
    }

    nlohmann::ordered_json manifest;
    manifest["fingerprint"] = fingerprint;
    manifest["templates_hash"] = to_hex(templates.content_hash());
    manifest["variant"] = to_string(config.variant);
    manifest["example_seed"] = config.example_seed;
    manifest["pool_depth"] = config.pool_depth;
    manifest["pool_size"] = pool.total();
    manifest["pool_excluded"] = pool.excluded;
    manifest["human_judgments"] = human.size();
    manifest["merged_judgments"] = result.merged.size();
    manifest["counters"] = {{"parsed", result.counters.parsed},
                            {"blocked_fallback", result.counters.blocked_fallback},
                            {"retried", result.counters.retried},
                            {"failed", result.counters.failed}};
    manifest["downgraded_topics"] = result.downgraded_topics;
    manifest["finished"] = result.finished;
    result.manifest_path = config.output_dir / "manifest.json";
    {
        std::ofstream out(result.manifest_path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write manifest.json");
        out << manifest.dump(2) << "\n";
    }
    return result;
}

}  // namespace qrelex
