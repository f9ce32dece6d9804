#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace finemotion::stepmark {

enum class Verdict { Valid, SorryLike, NonConforming };

struct ResponseVerdict {
  Verdict verdict = Verdict::Valid;
  std::string detail;
};

const char* to_string(Verdict v);
Verdict verdict_from_string(std::string_view s);

// Case-insensitive prefixes that mark an apology/refusal.
const std::vector<std::string>& apology_prefixes();

// Total: never throws. SorryLike on an apology prefix, NonConforming when the
// description part (see split_response) does not parse as step marks.
ResponseVerdict classify_response(std::string_view raw) noexcept;

}  // namespace finemotion::stepmark
