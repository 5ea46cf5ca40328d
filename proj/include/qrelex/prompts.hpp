#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "qrelex/dataset.hpp"
#include "qrelex/pooling.hpp"
#include "qrelex/qrels.hpp"

namespace qrelex {

enum class Role { system, user };

std::string to_string(Role role);

struct MessagePart {
    enum class Kind { text, image };
    Kind kind = Kind::text;
    std::string text;
    ImageRef image;

    static MessagePart make_text(std::string t);
    static MessagePart make_image(ImageRef ref);
};

struct Message {
    Role role = Role::user;
    std::vector<MessagePart> parts;
};

// Text parts verbatim, image parts as "[image: <uri>]", joined by newlines.
std::string flatten(const Message& message);

enum class PromptVariant {
    zero_shot_no_system,
    zero_shot_with_system,
    few_shot_single,
    few_shot_separate,
};

constexpr PromptVariant kAllVariants[] = {
    PromptVariant::zero_shot_no_system,
    PromptVariant::zero_shot_with_system,
    PromptVariant::few_shot_single,
    PromptVariant::few_shot_separate,
};

std::string to_string(PromptVariant variant);
PromptVariant variant_from_string(const std::string& name);
bool is_few_shot(PromptVariant variant);

struct PromptBundle {
    PromptVariant variant = PromptVariant::few_shot_separate;
    std::vector<Message> messages;
    std::string topic_id;
    std::string doc_id;
};

struct PromptTemplates {
    std::string system;
    std::string system_zero_shot;
    std::string case_presentation;
    std::string case_presentation_zero_shot;
    std::string example_article;
    std::string eval_article;

    static PromptTemplates load(const std::filesystem::path& dir);
    // FNV-1a over all six template texts, in a fixed order.
    std::uint64_t content_hash() const;
};

struct PromptOptions {
    std::size_t fulltext_max_chars = 0;  // 0 disables truncation
};

class PromptEngine {
public:
    explicit PromptEngine(PromptTemplates templates, PromptOptions options = {});

    const PromptTemplates& templates() const { return templates_; }

    std::string render_system(bool zero_shot = false) const;
    Message render_case(const Topic& topic, bool zero_shot = false) const;
    Message render_example(const Document& article) const;
    Message render_eval(const Document& article) const;

    PromptBundle assemble(PromptVariant variant, const Topic& topic, const Document* example,
                          const Document& article) const;

private:
    PromptTemplates templates_;
    PromptOptions options_;
};

struct ExampleChoice {
    std::string doc_id;
    bool overlaps_eval = false;
};

ExampleChoice pick_example(const QrelsSet& human, const std::string& topic_id, std::uint64_t seed,
                           const EvalSubset* subset = nullptr);

}  // namespace qrelex
