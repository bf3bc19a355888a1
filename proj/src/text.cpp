#include "utlsa/text.hpp"

#include <cctype>

namespace utlsa {

std::string normalize_text(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (const char raw : s) {
    const auto c = static_cast<unsigned char>(raw);
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    const char lower = static_cast<char>(std::tolower(c));
    const bool keep = (lower >= 'a' && lower <= 'z') || (lower >= '0' && lower <= '9');
    if (!keep) continue;
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(lower);
  }
  return out;
}

bool match_target(std::string_view decoded, std::string_view target,
                  const std::set<std::string>& aliases) {
  const std::string d = normalize_text(decoded);
  return d == normalize_text(target) || aliases.contains(d);
}

}  // namespace utlsa
