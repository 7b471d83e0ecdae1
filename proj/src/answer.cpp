#include "amcs/answer.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <regex>

#include <boost/rational.hpp>

#include "amcs/text.hpp"

namespace amcs::answer {

namespace {

using Rational = boost::rational<std::int64_t>;

constexpr std::array<std::string_view, 3> kMarkers = {"answer is", "answer:", "answer ="};

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::optional<std::string> last_boxed(std::string_view text) {
  constexpr std::string_view kBoxed = "\\boxed{";
  auto pos = text.rfind(kBoxed);
  if (pos == std::string_view::npos) return std::nullopt;
  std::size_t i = pos + kBoxed.size();
  int depth = 1;
  std::size_t start = i;
  for (; i < text.size(); ++i) {
    if (text[i] == '{') ++depth;
    if (text[i] == '}' && --depth == 0) break;
  }
  if (depth != 0) return std::nullopt;
  return std::string(text.substr(start, i - start));
}

std::optional<std::string> after_marker(std::string_view text) {
  const std::string low = lower(text);
  std::size_t best = std::string::npos;
  std::size_t best_len = 0;
  for (auto marker : kMarkers) {
    auto pos = low.rfind(marker);
    if (pos != std::string::npos && (best == std::string::npos || pos > best)) {
      best = pos;
      best_len = marker.size();
    }
  }
  if (best == std::string::npos) return std::nullopt;
  std::string_view rest = text.substr(best + best_len);
  auto eol = rest.find('\n');
  if (eol != std::string_view::npos) rest = rest.substr(0, eol);
  rest = text::trim(rest);
  while (!rest.empty() && (rest.front() == ':' || rest.front() == '=')) {
    rest = text::trim(rest.substr(1));
  }
  if (rest.empty()) return std::nullopt;
  if (auto boxed = last_boxed(rest)) return boxed;
  return std::string(rest);
}

std::optional<std::string> last_number(std::string_view text) {
  static const std::regex kNumber(R"(-?\d[\d,]*(?:\.\d+)?(?:/\d+)?)");
  std::optional<std::string> found;
  const std::string s(text);
  for (auto it = std::sregex_iterator(s.begin(), s.end(), kNumber); it != std::sregex_iterator();
       ++it) {
    found = it->str();
  }
  return found;
}

std::optional<std::int64_t> parse_int(std::string_view s) {
  if (s.empty() || s.size() > 18) return std::nullopt;
  std::int64_t v = 0;
  for (char c : s) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
    v = v * 10 + (c - '0');
  }
  return v;
}

std::optional<Rational> parse_decimal(std::string_view s) {
  bool negative = false;
  if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  auto dot = s.find('.');
  std::string_view whole = dot == std::string_view::npos ? s : s.substr(0, dot);
  std::string_view frac = dot == std::string_view::npos ? std::string_view{} : s.substr(dot + 1);
  if (whole.empty() && frac.empty()) return std::nullopt;
  if (dot != std::string_view::npos && frac.empty()) return std::nullopt;
  if (whole.size() + frac.size() > 18) return std::nullopt;
  std::int64_t num = 0;
  if (!whole.empty()) {
    auto w = parse_int(whole);
    if (!w) return std::nullopt;
    num = *w;
  }
  std::int64_t den = 1;
  for (char c : frac) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
    num = num * 10 + (c - '0');
    den *= 10;
  }
  Rational r(num, den);
  return negative ? -r : r;
}

std::optional<Rational> parse_rational(std::string_view s) {
  // \frac{a}{b}, \dfrac{a}{b}
  for (std::string_view head : {std::string_view("\\frac{"), std::string_view("\\dfrac{")}) {
    if (s.substr(0, head.size()) == head) {
      auto mid = s.find("}{", head.size());
      if (mid == std::string_view::npos || s.back() != '}') return std::nullopt;
      auto a = parse_decimal(s.substr(head.size(), mid - head.size()));
      auto b = parse_decimal(s.substr(mid + 2, s.size() - mid - 3));
      if (!a || !b || b->numerator() == 0) return std::nullopt;
      return *a / *b;
    }
  }
  bool negative = false;
  if (!s.empty() && s.front() == '-' && s.find('/') != std::string_view::npos) {
    negative = true;
    s.remove_prefix(1);
  }
  auto slash = s.find('/');
  if (slash != std::string_view::npos) {
    auto a = parse_decimal(s.substr(0, slash));
    auto b = parse_decimal(s.substr(slash + 1));
    if (!a || !b || b->numerator() == 0) return std::nullopt;
    Rational r = *a / *b;
    return negative ? -r : r;
  }
  return parse_decimal(s);
}

std::string format_rational(const Rational& r) {
  if (r.denominator() == 1) return std::to_string(r.numerator());
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

}  // namespace

std::optional<std::string> extract_final_answer(std::string_view text) {
  if (auto boxed = last_boxed(text)) return boxed;
  if (auto marked = after_marker(text)) return marked;
  return last_number(text);
}

bool has_final_answer(std::string_view text) {
  return last_boxed(text).has_value() || after_marker(text).has_value();
}

std::string canonicalize(std::string_view answer) {
  std::string compact;
  for (char c : answer) {
    if (std::isspace(static_cast<unsigned char>(c)) || c == '$' || c == ',') continue;
    compact += c;
  }
  while (!compact.empty() && compact.back() == '.') compact.pop_back();
  // "x=5" style answers compare on the right-hand side.
  if (auto eq = compact.rfind('='); eq != std::string::npos && eq + 1 < compact.size()) {
    auto rhs = compact.substr(eq + 1);
    if (parse_rational(rhs)) compact = rhs;
  }
  if (auto r = parse_rational(compact)) return format_rational(*r);
  return lower(compact);
}

bool check_answer(std::string_view final_step, std::string_view gold) {
  auto extracted = extract_final_answer(final_step);
  if (!extracted) return false;
  const auto want = canonicalize(gold);
  if (want.empty()) return false;
  return canonicalize(*extracted) == want;
}

}  // namespace amcs::answer
