#include "amcs/text.hpp"

#include <cctype>

namespace amcs::text {

namespace {
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
}  // namespace

int count_tokens(std::string_view text) {
  int count = 0;
  bool in_token = false;
  for (char c : text) {
    if (is_space(c)) {
      in_token = false;
    } else if (!in_token) {
      in_token = true;
      ++count;
    }
  }
  return count;
}

std::string_view trim(std::string_view text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && is_space(text[begin])) ++begin;
  while (end > begin && is_space(text[end - 1])) --end;
  return text.substr(begin, end - begin);
}

std::vector<std::string> split_steps(std::string_view text, std::string_view delimiter) {
  std::vector<std::string> steps;
  auto push = [&steps](std::string_view piece) {
    auto trimmed = trim(piece);
    if (!trimmed.empty()) steps.emplace_back(trimmed);
  };
  if (delimiter.empty()) {
    push(text);
    return steps;
  }
  std::size_t start = 0;
  while (true) {
    auto pos = text.find(delimiter, start);
    if (pos == std::string_view::npos) {
      push(text.substr(start));
      break;
    }
    push(text.substr(start, pos - start));
    start = pos + delimiter.size();
  }
  return steps;
}

std::string join(const std::vector<std::string>& parts, std::string_view separator) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += separator;
    out += parts[i];
  }
  return out;
}

}  // namespace amcs::text
