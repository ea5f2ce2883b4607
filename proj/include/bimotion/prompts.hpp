#pragma once

#include <string>
#include <utility>
#include <vector>

namespace bimotion {

// Prompt templates of the three-stage translation pipeline. Fixed wording;
// the target language and the per-request payload are the only interpolation
// slots.

std::string system_prompt(const std::string& target_language);

std::string translate_prompt(const std::vector<std::string>& descriptions,
                             const std::string& target_language);

// items are (original, translation) pairs
std::string refine_prompt(const std::vector<std::pair<std::string, std::string>>& items,
                          const std::string& target_language);

std::string evaluate_prompt(const std::vector<std::pair<std::string, std::string>>& pairs,
                            const std::string& target_language);

}  // namespace bimotion
