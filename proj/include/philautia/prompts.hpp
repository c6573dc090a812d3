#pragma once

#include "philautia/records.hpp"

#include <optional>
#include <string>
#include <vector>

namespace philautia {

// Prompt templates. Placeholders are written {{Name}}; literal braces are
// escaped as \{ and \} and only materialize after placeholder validation,
// so instructions about the reply format can show {{score}} verbatim.
struct PromptBundle {
    std::string generation_prompt;
    std::string eval_prompt_ref_based;
    std::string eval_prompt_ref_free;
};

// Canonical captioning prompt plus the two judging templates.
PromptBundle default_prompt_bundle();

// Unescaped {{Name}} occurrences in template order.
std::vector<std::string> template_placeholders(const std::string& text);

// Throws ValidationError unless each template carries exactly the expected
// placeholders: {{Reference}} then {{Caption}} in the ref-based template,
// {{Caption}} alone in the ref-free one, none in the generation prompt.
void check_bundle(const PromptBundle& bundle);

// Substitutes the caption (and the references, one per line) into the
// template for the setting, then unescapes literal braces. References are
// required in the ref-based setting and rejected in the ref-free one.
// Throws ValidationError if an unknown placeholder survives substitution.
std::string render_prompt(const PromptBundle& bundle, Setting setting,
                          const std::string& caption,
                          const std::optional<std::vector<std::string>>& references);

// Extracts the reply's verdict: the last dollar-wrapped group whose trimmed
// content is an integer. Throws ParseError when no such group exists or the
// chosen integer falls outside 0..100; out-of-range replies are retried by
// the caller rather than clamped, since clamping would bias the matrix.
int parse_score(const std::string& response);

}
