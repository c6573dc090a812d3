#include "philautia/prompts.hpp"

#include "philautia/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <string_view>

namespace philautia {

namespace {

const char kGenerationPrompt[] = "Provide a one-sentence caption for the provided image.";

const char kRefBasedTemplate[] =
    R"(You will be given one sentence of visual caption generated from one image.

Your task is to rate the generated caption on one metric.

Please make sure you read and understand these reference captions carefully. Please keep these references open while reviewing, and refer to them as needed.

Evaluation Criteria:

Score is from 0 to 100 - selection of important content from the references and the image. The generated caption should accurately describe the important aspects of the image while including the essential information from the references. Annotators were instructed to penalize captions which contained redundancies and excess information.

Evaluation Steps:

1. Carefully observe the provided image to understand its main content.
2. Read the reference captions carefully to identify the important information they highlight.
3. Compare the generated caption to both the reference captions and the visual content of the image.
4. Assess how well the generated caption covers the main points of the visual content and the reference captions, and how much irrelevant or redundant information it contains.
5. Assign an integer score from 0 to 100, considering both the alignment with the image and the inclusion of key points from the references. Please remember the score.

Reference captions:
{{Reference}}

Image is attached

Generated captions:
{{Caption}}

Response Format:

You should first give a detailed reason for your score, ending with a sentence like this:
The final score is $\{\{score\}\}$.

Note that the score should be an integer from 0 to 100, and should be wrapped in dollar signs ($).)";

const char kRefFreeTemplate[] =
    R"(You will be given one sentence of visual caption generated from one image.

Your task is to rate the generated caption on one metric.

Evaluation Criteria:

Score is from 0 to 100 - selection of important content from the image. The generated caption should accurately describe the important aspects of the image. Annotators were instructed to penalize captions which contained redundancies and excess information.

Evaluation Steps:

1. Carefully observe the image provided.
2. Identify the main points of the visual content in the image.
3. Assess how well the generated caption covers the main points of the visual content, and how much irrelevant or redundant information it contains.
4. Assign an integer score from 0 to 100, please remember it.

Generated captions:
{{Caption}}

Response Format:

You should first give detailed reason for your score, and ending with sentence like this:
The final score is $\{\{score\}\}$.

Note that the score should be an integer from 0 to 100, and should be wrapped in the dollar signs ($).)";

bool is_escape(const std::string& text, std::size_t i) {
    return text[i] == '\\' && i + 1 < text.size() &&
           (text[i + 1] == '{' || text[i + 1] == '}');
}

// Position of the first unescaped "{{", or npos.
std::size_t find_open(const std::string& text, std::size_t from = 0) {
    for (std::size_t i = from; i < text.size(); ++i) {
        if (is_escape(text, i)) {
            ++i;
            continue;
        }
        if (text[i] == '{' && i + 1 < text.size() && text[i + 1] == '{') return i;
    }
    return std::string::npos;
}

// Literal braces in substituted values are re-escaped so user text can never
// masquerade as a placeholder.
std::string escape_braces(const std::string& value) {
    std::string out;
    out.reserve(value.size());
    for (char c : value) {
        if (c == '{' || c == '}') out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

std::string unescape_braces(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (is_escape(text, i)) {
            out.push_back(text[i + 1]);
            ++i;
        } else {
            out.push_back(text[i]);
        }
    }
    return out;
}

std::string substitute(std::string text, const std::string& name, const std::string& value) {
    const std::string needle = "{{" + name + "}}";
    const std::string safe = escape_braces(value);
    std::size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
        text.replace(pos, needle.size(), safe);
        pos += safe.size();
    }
    return text;
}

// Placeholder multisets must match; order within the template is free.
void expect_placeholders(const std::string& text, std::vector<std::string> expected,
                         const std::string& which) {
    std::vector<std::string> got = template_placeholders(text);
    std::sort(got.begin(), got.end());
    std::sort(expected.begin(), expected.end());
    if (got != expected)
        throw ValidationError("the " + which + " template must use exactly the placeholders it documents");
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\n' || s.front() == '\r'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\n' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

bool is_integer_token(std::string_view s) {
    if (!s.empty() && (s.front() == '+' || s.front() == '-')) s.remove_prefix(1);
    if (s.empty()) return false;
    for (char c : s)
        if (c < '0' || c > '9') return false;
    return true;
}

} // namespace

PromptBundle default_prompt_bundle() {
    return PromptBundle{kGenerationPrompt, kRefBasedTemplate, kRefFreeTemplate};
}

std::vector<std::string> template_placeholders(const std::string& text) {
    std::vector<std::string> names;
    std::size_t pos = 0;
    while ((pos = find_open(text, pos)) != std::string::npos) {
        const std::size_t close = text.find("}}", pos + 2);
        if (close == std::string::npos) break;
        names.push_back(text.substr(pos + 2, close - pos - 2));
        pos = close + 2;
    }
    return names;
}

void check_bundle(const PromptBundle& bundle) {
    if (bundle.generation_prompt.empty())
        throw ValidationError("generation prompt is empty");
    expect_placeholders(bundle.generation_prompt, {}, "generation");
    expect_placeholders(bundle.eval_prompt_ref_based, {"Reference", "Caption"}, "ref-based");
    expect_placeholders(bundle.eval_prompt_ref_free, {"Caption"}, "ref-free");
}

std::string render_prompt(const PromptBundle& bundle, Setting setting,
                          const std::string& caption,
                          const std::optional<std::vector<std::string>>& references) {
    if (setting == Setting::ReferenceBased && !references.has_value())
        throw ValidationError("reference-based prompt needs reference captions");
    if (setting == Setting::ReferenceFree && references.has_value())
        throw ValidationError("reference-free prompt takes no reference captions");

    std::string text = setting == Setting::ReferenceBased ? bundle.eval_prompt_ref_based
                                                          : bundle.eval_prompt_ref_free;
    if (references.has_value()) {
        if (references->empty())
            throw ValidationError("reference caption list is empty");
        std::string joined;
        for (std::size_t i = 0; i < references->size(); ++i) {
            if (i) joined.push_back('\n');
            joined += (*references)[i];
        }
        text = substitute(std::move(text), "Reference", joined);
    }
    text = substitute(std::move(text), "Caption", caption);

    const std::size_t leftover = find_open(text);
    if (leftover != std::string::npos) {
        const std::size_t close = text.find("}}", leftover + 2);
        const std::string name = close == std::string::npos
                                     ? text.substr(leftover, std::min<std::size_t>(16, text.size() - leftover))
                                     : text.substr(leftover + 2, close - leftover - 2);
        throw ValidationError("unresolved placeholder in prompt template: " + name);
    }
    return unescape_braces(text);
}

int parse_score(const std::string& response) {
    std::vector<std::size_t> dollars;
    for (std::size_t i = 0; i < response.size(); ++i)
        if (response[i] == '$') dollars.push_back(i);

    std::string_view last;
    bool found = false;
    for (std::size_t t = 0; t + 1 < dollars.size(); ++t) {
        std::string_view inner(response.data() + dollars[t] + 1, dollars[t + 1] - dollars[t] - 1);
        inner = trim(inner);
        if (is_integer_token(inner)) {
            last = inner;
            found = true;
        }
    }
    if (!found)
        throw ParseError("no dollar-wrapped integer score in reply");

    std::string_view digits = last;
    if (digits.front() == '+') digits.remove_prefix(1);
    long long value = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
    if (ec != std::errc{} || ptr != digits.data() + digits.size() || value < 0 || value > 100)
        throw ParseError("dollar-wrapped score " + std::string(last) + " outside 0..100");
    return static_cast<int>(value);
}

} // namespace philautia
