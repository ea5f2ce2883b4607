#include "bimotion/llm_backend.hpp"

#include <algorithm>
#include <cstdlib>
#include <sstream>

#include "bimotion/error.hpp"
#include "json.hpp"

#include "httplib.h"

namespace bimotion {

namespace {

using nlohmann::json;

// payload slice between the last pair of ``` fences
std::string last_fenced_block(const std::string& text) {
  size_t close = text.rfind("```");
  if (close == std::string::npos) return "";
  size_t open = text.rfind("```", close - 1);
  if (open == std::string::npos) return "";
  return text.substr(open + 3, close - open - 3);
}

std::vector<std::string> parse_numbered_list(const std::string& text) {
  std::vector<std::string> out;
  size_t lo = text.find("English Motion Descriptions:");
  size_t hi = text.find("###", lo);
  if (lo == std::string::npos || hi == std::string::npos) return out;
  std::istringstream ss(text.substr(lo, hi - lo));
  std::string line;
  while (std::getline(ss, line)) {
    size_t dot = line.find(". ");
    if (dot == std::string::npos || dot == 0) continue;
    bool numbered = true;
    for (size_t i = 0; i < dot; ++i)
      if (!std::isdigit(static_cast<unsigned char>(line[i]))) numbered = false;
    if (numbered) out.push_back(line.substr(dot + 2));
  }
  return out;
}

}  // namespace

std::string MockLlmBackend::mock_translate(const std::string& original) {
  std::istringstream ss(original);
  std::string word, out;
  while (ss >> word) {
    if (!out.empty()) out += ' ';
    bool token_word = word.size() >= 2 && word[0] == 'a';
    for (size_t i = 1; i < word.size() && token_word; ++i)
      if (!std::isdigit(static_cast<unsigned char>(word[i]))) token_word = false;
    if (token_word) {
      out += 'b' + word.substr(1);
    } else {
      std::string rev(word.rbegin(), word.rend());
      out += rev;
    }
  }
  return out;
}

std::string MockLlmBackend::mock_refine(const std::string& translation) {
  return translation + " ~";
}

std::string MockLlmBackend::complete(const std::string& /*system_prompt*/,
                                     const std::string& user_prompt) {
  for (const auto& bad : behavior_.malformed_if_contains)
    if (user_prompt.find(bad) != std::string::npos) return "not json";

  auto apply_flag = [this](json& obj, const std::string& original) {
    obj["flag"] = "accept";
    for (const auto& rule : behavior_.flag_rules) {
      if (original.find(rule.original_contains) == std::string::npos) continue;
      obj["flag"] = rule.flag;
      obj["reason"] = rule.reason.empty() ? "mock: flagged " + rule.flag : rule.reason;
      if (rule.flag == "incorrect")
        obj["correctedTranslation"] =
            rule.corrected.empty() ? mock_translate(original) + " !" : rule.corrected;
    }
  };

  json arr = json::array();
  if (user_prompt.rfind("Translate the following", 0) == 0) {
    for (const auto& desc : parse_numbered_list(user_prompt))
      arr.push_back({{"original", desc}, {"translation", mock_translate(desc)}});
  } else if (user_prompt.rfind("Please refine", 0) == 0) {
    json in = json::parse(last_fenced_block(user_prompt));
    for (const auto& item : in) {
      json obj = item;
      obj["refined"] = mock_refine(item.at("translation").get<std::string>());
      arr.push_back(std::move(obj));
    }
  } else if (user_prompt.rfind("I have multiple", 0) == 0) {
    json in = json::parse(last_fenced_block(user_prompt));
    for (const auto& item : in) {
      json obj = item;
      apply_flag(obj, item.at("original").get<std::string>());
      arr.push_back(std::move(obj));
    }
  } else {
    throw error(errc::runtime, "mock backend: unrecognized prompt");
  }

  if (behavior_.shuffle_response_order && arr.size() > 1)
    std::rotate(arr.begin(), arr.begin() + 1, arr.end());
  return "```\n" + arr.dump(2) + "\n```";
}

HttpLlmBackend::HttpLlmBackend(HttpBackendConfig cfg) : cfg_(std::move(cfg)) {}

std::string HttpLlmBackend::complete(const std::string& system_prompt,
                                     const std::string& user_prompt) {
  size_t scheme = cfg_.url.find("://");
  require(scheme != std::string::npos, errc::validation, "http backend: bad url " + cfg_.url);
  size_t path_pos = cfg_.url.find('/', scheme + 3);
  std::string host = cfg_.url.substr(0, path_pos);
  std::string path = path_pos == std::string::npos ? "/" : cfg_.url.substr(path_pos);

  httplib::Client client(host);
  client.set_read_timeout(cfg_.timeout_seconds, 0);
  httplib::Headers headers;
  if (const char* key = std::getenv(cfg_.api_key_env.c_str()))
    headers.emplace("Authorization", std::string("Bearer ") + key);

  json body = {{"model", cfg_.model},
               {"messages", json::array({{{"role", "system"}, {"content", system_prompt}},
                                         {{"role", "user"}, {"content", user_prompt}}})}};
  auto res = client.Post(path, headers, body.dump(), "application/json");
  if (!res)
    throw error(errc::runtime, "http backend: request to " + cfg_.url + " failed");
  if (res->status != 200)
    throw error(errc::runtime,
                "http backend: status " + std::to_string(res->status) + " from " + cfg_.url);
  json parsed = json::parse(res->body);
  return parsed.at("choices").at(0).at("message").at("content").get<std::string>();
}

}  // namespace bimotion
