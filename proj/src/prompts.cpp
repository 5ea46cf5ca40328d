#include "qrelex/prompts.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "qrelex/util.hpp"

namespace qrelex {

std::string to_string(Role role) { return role == Role::system ? "system" : "user"; }

MessagePart MessagePart::make_text(std::string t) {
    MessagePart p;
    p.kind = Kind::text;
    p.text = std::move(t);
    return p;
}

MessagePart MessagePart::make_image(ImageRef ref) {
    MessagePart p;
    p.kind = Kind::image;
    p.image = std::move(ref);
    return p;
}

std::string flatten(const Message& message) {
    std::string out;
    for (std::size_t i = 0; i < message.parts.size(); ++i) {
        if (i > 0) out += "\n";
        const MessagePart& p = message.parts[i];
        if (p.kind == MessagePart::Kind::text)
            out += p.text;
        else
            out += "[image: " + p.image.uri + "]";
    }
    return out;
}

std::string to_string(PromptVariant variant) {
    switch (variant) {
        case PromptVariant::zero_shot_no_system: return "zero_shot_no_system";
        case PromptVariant::zero_shot_with_system: return "zero_shot_with_system";
        case PromptVariant::few_shot_single: return "few_shot_single";
        case PromptVariant::few_shot_separate: return "few_shot_separate";
    }
    throw std::logic_error("bad prompt variant");
}

PromptVariant variant_from_string(const std::string& name) {
    for (PromptVariant v : kAllVariants)
        if (to_string(v) == name) return v;
    throw std::runtime_error("unknown prompt variant '" + name + "'");
}

bool is_few_shot(PromptVariant variant) {
    return variant == PromptVariant::few_shot_single ||
           variant == PromptVariant::few_shot_separate;
}

namespace {

const std::set<std::string> kSystemPlaceholders;
const std::set<std::string> kCasePlaceholders = {"case_description", "case_images"};
const std::set<std::string> kArticlePlaceholders = {"article_title", "article_authors",
                                                    "article_abstract", "article_fulltext",
                                                    "article_images", "article_captions"};

std::string load_template(const std::filesystem::path& path,
                          const std::set<std::string>& allowed) {
    std::string text = read_file(path);
    if (!text.empty() && text.back() == '\n') text.pop_back();
    std::size_t pos = 0;
    while ((pos = text.find('{', pos)) != std::string::npos) {
        std::size_t end = text.find('}', pos);
        if (end == std::string::npos)
            throw std::runtime_error(path.string() + ": unterminated placeholder");
        std::string name = text.substr(pos + 1, end - pos - 1);
        if (!allowed.count(name))
            throw std::runtime_error(path.string() + ": unknown placeholder {" + name + "}");
        pos = end + 1;
    }
    return text;
}

struct Segment {
    bool placeholder = false;
    std::string value;  // literal text, or placeholder name
};

std::vector<Segment> segment(const std::string& tmpl) {
    std::vector<Segment> segs;
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
        std::size_t open = tmpl.find('{', pos);
        if (open == std::string::npos) {
            segs.push_back({false, tmpl.substr(pos)});
            break;
        }
        if (open > pos) segs.push_back({false, tmpl.substr(pos, open - pos)});
        std::size_t close = tmpl.find('}', open);
        segs.push_back({true, tmpl.substr(open + 1, close - open - 1)});
        pos = close + 1;
    }
    return segs;
}

std::string join_authors(const std::vector<std::string>& authors) {
    std::string out;
    for (std::size_t i = 0; i < authors.size(); ++i) {
        if (i > 0) out += ", ";
        out += authors[i];
    }
    return out;
}

std::string join_captions(const std::vector<ImageRef>& images) {
    if (images.empty()) return "(no images)";
    std::string out;
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (i > 0) out += "\n";
        out += images[i].caption.empty() ? "(no caption)" : images[i].caption;
    }
    return out;
}

class MessageBuilder {
public:
    explicit MessageBuilder(Role role) { message_.role = role; }

    void text(const std::string& t) { buffer_ += t; }

    void images(const std::vector<ImageRef>& refs) {
        if (refs.empty()) {
            buffer_ += "(no images)";
            return;
        }
        flush();
        for (const ImageRef& ref : refs) {
            message_.parts.push_back(MessagePart::make_image(ref));
            if (!ref.caption.empty())
                message_.parts.push_back(MessagePart::make_text(ref.caption));
        }
    }

    Message finish() {
        if (!buffer_.empty() || message_.parts.empty()) flush(true);
        return std::move(message_);
    }

private:
    void flush(bool force = false) {
        if (buffer_.empty() && !force) return;
        message_.parts.push_back(MessagePart::make_text(std::move(buffer_)));
        buffer_.clear();
    }

    Message message_;
    std::string buffer_;
};

}  // namespace

PromptTemplates PromptTemplates::load(const std::filesystem::path& dir) {
    PromptTemplates t;
    t.system = load_template(dir / "system.txt", kSystemPlaceholders);
    t.system_zero_shot = load_template(dir / "system_zero_shot.txt", kSystemPlaceholders);
    t.case_presentation = load_template(dir / "case.txt", kCasePlaceholders);
    t.case_presentation_zero_shot = load_template(dir / "case_zero_shot.txt", kCasePlaceholders);
    t.example_article = load_template(dir / "example_article.txt", kArticlePlaceholders);
    t.eval_article = load_template(dir / "eval_article.txt", kArticlePlaceholders);
    return t;
}

std::uint64_t PromptTemplates::content_hash() const {
    std::uint64_t h = fnv1a64(system);
    h = fnv1a64(system_zero_shot, h);
    h = fnv1a64(case_presentation, h);
    h = fnv1a64(case_presentation_zero_shot, h);
    h = fnv1a64(example_article, h);
    h = fnv1a64(eval_article, h);
    return h;
}

PromptEngine::PromptEngine(PromptTemplates templates, PromptOptions options)
    : templates_(std::move(templates)), options_(options) {}

std::string PromptEngine::render_system(bool zero_shot) const {
    return zero_shot ? templates_.system_zero_shot : templates_.system;
}

Message PromptEngine::render_case(const Topic& topic, bool zero_shot) const {
    if (topic.description.empty())
        throw std::runtime_error("topic '" + topic.topic_id + "' has an empty description");
    const std::string& tmpl =
        zero_shot ? templates_.case_presentation_zero_shot : templates_.case_presentation;
    MessageBuilder b(Role::user);
    for (const Segment& s : segment(tmpl)) {
        if (!s.placeholder)
            b.text(s.value);
        else if (s.value == "case_description")
            b.text(topic.description);
        else if (s.value == "case_images")
            b.images(topic.images);
    }
    return b.finish();
}

namespace {

Message render_article(const std::string& tmpl, const Document& article,
                       const PromptOptions& options) {
    std::string fulltext = article.fulltext;
    if (options.fulltext_max_chars > 0 && fulltext.size() > options.fulltext_max_chars)
        fulltext = std::string(utf8_prefix(fulltext, options.fulltext_max_chars)) + " [truncated]";
    MessageBuilder b(Role::user);
    for (const Segment& s : segment(tmpl)) {
        if (!s.placeholder)
            b.text(s.value);
        else if (s.value == "article_title")
            b.text(article.title);
        else if (s.value == "article_authors")
            b.text(join_authors(article.authors));
        else if (s.value == "article_abstract")
            b.text(article.abstract);
        else if (s.value == "article_fulltext")
            b.text(fulltext);
        else if (s.value == "article_images")
            b.images(article.images);
        else if (s.value == "article_captions")
            b.text(join_captions(article.images));
    }
    return b.finish();
}

Message merge_messages(const Message& first, const Message& second) {
    Message out;
    out.role = first.role;
    out.parts = first.parts;
    out.parts.push_back(MessagePart::make_text(""));
    out.parts.insert(out.parts.end(), second.parts.begin(), second.parts.end());
    return out;
}

}  // namespace

Message PromptEngine::render_example(const Document& article) const {
    return render_article(templates_.example_article, article, options_);
}

Message PromptEngine::render_eval(const Document& article) const {
    return render_article(templates_.eval_article, article, options_);
}

PromptBundle PromptEngine::assemble(PromptVariant variant, const Topic& topic,
                                    const Document* example, const Document& article) const {
    if (is_few_shot(variant) && !example)
        throw std::runtime_error("variant " + to_string(variant) +
                                 " requires an example article");
    if (!is_few_shot(variant) && example)
        throw std::runtime_error("variant " + to_string(variant) +
                                 " does not take an example article");

    PromptBundle bundle;
    bundle.variant = variant;
    bundle.topic_id = topic.topic_id;
    bundle.doc_id = article.doc_id;

    Message eval_msg = render_eval(article);
    switch (variant) {
        case PromptVariant::few_shot_separate: {
            Message sys{Role::system, {MessagePart::make_text(render_system(false))}};
            bundle.messages = {std::move(sys), render_case(topic, false),
                               render_example(*example), std::move(eval_msg)};
            break;
        }
        case PromptVariant::few_shot_single: {
            Message sys{Role::system, {MessagePart::make_text(render_system(false))}};
            bundle.messages = {std::move(sys),
                               merge_messages(render_case(topic, false), render_example(*example)),
                               std::move(eval_msg)};
            break;
        }
        case PromptVariant::zero_shot_with_system: {
            Message sys{Role::system, {MessagePart::make_text(render_system(true))}};
            bundle.messages = {std::move(sys), render_case(topic, true), std::move(eval_msg)};
            break;
        }
        case PromptVariant::zero_shot_no_system: {
            Message instructions{Role::user, {MessagePart::make_text(render_system(true))}};
            bundle.messages = {merge_messages(instructions, render_case(topic, true)),
                               std::move(eval_msg)};
            break;
        }
    }
    if (flatten(bundle.messages.back()).find("Only answer 0 or 1.") == std::string::npos)
        throw std::logic_error("assembled bundle lost the answer constraint");
    return bundle;
}

ExampleChoice pick_example(const QrelsSet& human, const std::string& topic_id, std::uint64_t seed,
                           const EvalSubset* subset) {
    std::vector<std::string> relevant;
    for (const auto& [key, j] : human.entries)
        if (key.first == topic_id && j.label == 1) relevant.push_back(key.second);
    if (relevant.empty())
        throw std::runtime_error("topic '" + topic_id + "' has no human-relevant documents");

    SplitMix64 rng(fnv1a64("example:" + topic_id, seed));
    ExampleChoice choice;
    choice.doc_id = relevant[rng.bounded(relevant.size())];
    if (subset) {
        auto it = subset->by_topic.find(topic_id);
        if (it != subset->by_topic.end())
            choice.overlaps_eval = std::any_of(
                it->second.begin(), it->second.end(),
                [&](const EvalSubset::Item& item) { return item.doc_id == choice.doc_id; });
    }
    return choice;
}

}  // namespace qrelex
