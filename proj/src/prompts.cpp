#include "bimotion/prompts.hpp"

#include "json.hpp"

namespace bimotion {

namespace {

const char* kSystemTemplate =
    R"(You are an expert translator specializing in converting English motion descriptions into {LANG}. Your translations must adhere to the principles of fidelity, fluency, and elegance—faithfully conveying the original meaning, ensuring the translation is clear and understandable, and achieving a culturally refined and aesthetically pleasing result.

Keep in mind the following guidelines:

(1). Avoid stiff, literal translations that do not fit the context.
(2). Ensure that the translations reflect {LANG} language habits and idiomatic expressions.
(3). Pay special attention to technical terms and maintain consistency if multiple motion descriptions are provided.

Response your translations in JSON format exactly as shown below:

```
[
  {
    "original": "<English motion description 1>",
    "translation": "<{LANG} motion description 1>"
  },
  {
    "original": "<English motion description 2>",
    "translation": "<{LANG} motion description 2>"
  }
]
```)";

const char* kTranslateTemplate =
    R"(Translate the following English motion descriptions into {LANG}, ensuring the use of professional and accurate terminology. All these descriptions refer to the same motion, so please compare them with each other to ensure consistency and natural fluency in your translations. Your response should be in JSON format, containing two fields: "original" and "translation".

###

English Motion Descriptions:

{DESCRIPTIONS}

###

Requirements:

1. Ensure that the translations align with the professional context of the motion descriptions.
2. Your response must be in JSON format. For example:

```
[
  {
    "original": "<English motion description 1>",
    "translation": "<{LANG} motion description 1>"
  },
  {
    "original": "<English motion description 2>",
    "translation": "<{LANG} motion description 2>"
  }
]
```)";

const char* kRefineTemplate =
    R"(Please refine the following {LANG} translations by applying these guidelines:

(1). Remove explicit gender references (avoid specifying male or female);
(2). Avoid stiff or overly literal expressions; ensure the phrasing is natural and idiomatic;
(3). Ensure that all translations consistently convey the same intended meaning.

Use the JSON format shown below, adding a "refined" field to each entry. Here are two examples for reference:

Example 1:

Original: "A person sits down and crosses legs."
Initial translation: "一个人坐下来并交叉双腿。"
Refined translation: "某人坐下后翘起二郎腿。"

Example 2:

Original: "A person bends down to tie shoes."
Initial translation: "一个人弯下来系鞋子。"
Refined translation: "一个人弯下腰来系鞋带。"

Now, refine the following initial translations:

```
{ITEMS}
```)";

const char* kEvaluateTemplate =
    R"(I have multiple English motion descriptions, all depicting the same motion, along with their corresponding {LANG} translations. Please carefully review each translation pair by following these steps:

(1). Understand, Compare, Evaluation

- Compare each translation pair with the others to ensure consistency in terminology and style
- Evaluate whether the {LANG} translation accurately and naturally conveys the meaning of the English descriptions.

(2). For each pair, Assign a "flag" of either "accept," "uncertain," or "incorrect."

- "Accept": the translation is accurate, natural, and consistent with the other pairs, No further explanation is required.
- "Uncertain": the translation may have potential issues, but you are unsure. Provide a brief reason of your concerns.
- "Incorrect": the translation is inaccurate, unnatural, or inconsistent. Explain what's wrong and give a corrected translation.

Response your translations in JSON format exactly as shown below:

```
[
  {
    "original": "<English motion description 1>",
    "translation": "<{LANG} translation 1>",
    "flag": "<accept | uncertain | incorrect>",
    "reason": "<explanation if status is uncertain or incorrect>",
    "correctedTranslation": "<corrected translation if status is incorrect>"
  },
  {
    "original": "<English motion description 2>",
    "translation": "<{LANG} translation 2>",
    "flag": "<accept | uncertain | incorrect>",
    "reason": "<explanation if status is uncertain or incorrect>",
    "correctedTranslation": "<corrected translation if status is incorrect>"
  }
]
```

Here are the translation pairs:

```
{PAIRS}
```)";

std::string replace_all(std::string text, const std::string& slot, const std::string& value) {
  size_t pos = 0;
  while ((pos = text.find(slot, pos)) != std::string::npos) {
    text.replace(pos, slot.size(), value);
    pos += value.size();
  }
  return text;
}

std::string items_json(const std::vector<std::pair<std::string, std::string>>& items) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [orig, trans] : items)
    arr.push_back({{"original", orig}, {"translation", trans}});
  return arr.dump(2);
}

}  // namespace

std::string system_prompt(const std::string& target_language) {
  return replace_all(kSystemTemplate, "{LANG}", target_language);
}

std::string translate_prompt(const std::vector<std::string>& descriptions,
                             const std::string& target_language) {
  std::string list;
  for (size_t i = 0; i < descriptions.size(); ++i) {
    if (i) list += "\n";
    list += std::to_string(i + 1) + ". " + descriptions[i];
  }
  std::string out = replace_all(kTranslateTemplate, "{DESCRIPTIONS}", list);
  return replace_all(out, "{LANG}", target_language);
}

std::string refine_prompt(const std::vector<std::pair<std::string, std::string>>& items,
                          const std::string& target_language) {
  std::string out = replace_all(kRefineTemplate, "{ITEMS}", items_json(items));
  return replace_all(out, "{LANG}", target_language);
}

std::string evaluate_prompt(const std::vector<std::pair<std::string, std::string>>& pairs,
                            const std::string& target_language) {
  std::string out = replace_all(kEvaluateTemplate, "{PAIRS}", items_json(pairs));
  return replace_all(out, "{LANG}", target_language);
}

}  // namespace bimotion
