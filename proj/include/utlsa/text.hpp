#pragma once

#include <set>
#include <string>
#include <string_view>

namespace utlsa {

// Lowercase ASCII, keep only [a-z0-9 ], collapse whitespace, trim.
std::string normalize_text(std::string_view s);

// True iff normalize(decoded) equals normalize(target) or one of `aliases`
// (aliases are expected to be normalized already).
bool match_target(std::string_view decoded, std::string_view target,
                  const std::set<std::string>& aliases);

}  // namespace utlsa
