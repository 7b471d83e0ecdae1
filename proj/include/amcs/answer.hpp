#pragma once

/**
 * Final-answer extraction and comparison.
 *
 * Extraction order:
 *   1. the last \boxed{...} group (brace matched)
 *   2. text after the last "answer is" / "answer:" marker, up to end of line
 *   3. the last number in the text
 *
 * Canonical form: `$`, whitespace, thousands commas and a trailing period are
 * removed. Integers, decimals, a/b and \frac{a}{b} become an exact reduced
 * rational printed as "p" or "p/q". Anything else compares as lowercase text.
 */

#include <optional>
#include <string>
#include <string_view>

namespace amcs::answer {

std::optional<std::string> extract_final_answer(std::string_view text);

/// True when the text carries an explicit final answer (boxed or marker).
bool has_final_answer(std::string_view text);

std::string canonicalize(std::string_view answer);

/// Unparseable input compares false.
bool check_answer(std::string_view final_step, std::string_view gold);

}  // namespace amcs::answer
