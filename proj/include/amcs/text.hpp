#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace amcs::text {

/// Whitespace-delimited token count. This is the single token rule used for
/// plain text everywhere in the project (statements, steps, simulated rollouts).
int count_tokens(std::string_view text);

std::string_view trim(std::string_view text);

/// Splits on `delimiter`, trims each piece and drops empty pieces.
/// An empty delimiter yields the trimmed text as one piece.
std::vector<std::string> split_steps(std::string_view text, std::string_view delimiter);

std::string join(const std::vector<std::string>& parts, std::string_view separator);

}  // namespace amcs::text
