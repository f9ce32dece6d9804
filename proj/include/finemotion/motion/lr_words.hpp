#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace finemotion::motion {

// The lateral word families exchanged by swap_lr_words (lowercase forms).
const std::vector<std::pair<std::string, std::string>>& lr_word_pairs();

// Simultaneous whole-word left<->right swap over the families above. Case is
// preserved for lowercase, Capitalized and UPPERCASE words; other casings
// are left untouched so the swap stays an involution.
std::string swap_lr_words(std::string_view text);

}  // namespace finemotion::motion
