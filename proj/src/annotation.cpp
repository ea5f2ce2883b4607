#include "bimotion/annotation.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include "bimotion/corpus.hpp"
#include "bimotion/parallel.hpp"
#include "bimotion/prompts.hpp"
#include "json.hpp"

namespace bimotion {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string strip_fences(const std::string& text) {
  size_t open = text.find("```");
  if (open == std::string::npos) return text;
  size_t start = text.find('\n', open);
  if (start == std::string::npos) return text;
  size_t close = text.find("```", start);
  if (close == std::string::npos) return text;
  return text.substr(start + 1, close - start - 1);
}

// parse the backend response with retries on invalid JSON; schema problems
// are not retried
json request_array(MotionGroup& group, LlmBackend& backend, const PipelineConfig& cfg,
                   const std::string& sys, const std::string& user) {
  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    if (attempt > 0 && cfg.retry_base_ms > 0)
      std::this_thread::sleep_for(
          std::chrono::milliseconds(cfg.retry_base_ms * (1LL << (attempt - 1))));
    std::string raw;
    try {
      raw = backend.run(sys, user);
    } catch (const std::exception& ex) {
      if (attempt + 1 == cfg.max_attempts)
        throw error(errc::runtime, "backend error for group " + group.motion_id + ": " + ex.what());
      continue;
    }
    json parsed = json::parse(strip_fences(raw), nullptr, false);
    if (parsed.is_discarded() || !parsed.is_array()) {
      if (attempt + 1 == cfg.max_attempts)
        throw error(errc::runtime,
                    "invalid JSON from backend for group " + group.motion_id + " after " +
                        std::to_string(cfg.max_attempts) + " attempts");
      continue;
    }
    return parsed;
  }
  throw error(errc::runtime, "unreachable retry exit for group " + group.motion_id);
}

// match response objects to items by their original text; every original must
// appear exactly once and nothing else may be present
std::vector<const json*> match_by_original(const MotionGroup& group, const json& arr) {
  if (arr.size() != group.items.size())
    throw error(errc::runtime, "schema error: expected " + std::to_string(group.items.size()) +
                                   " items, got " + std::to_string(arr.size()));
  std::vector<const json*> matched(group.items.size(), nullptr);
  for (const auto& obj : arr) {
    if (!obj.is_object() || !obj.contains("original"))
      throw error(errc::runtime, "schema error: response item without original");
    std::string orig = obj.at("original").get<std::string>();
    bool found = false;
    for (size_t i = 0; i < group.items.size(); ++i) {
      if (group.items[i].original != orig) continue;
      if (matched[i] != nullptr) continue;
      matched[i] = &obj;
      found = true;
      break;
    }
    if (!found)
      throw error(errc::runtime, "schema error: unmatched response original: " + orig);
  }
  for (size_t i = 0; i < matched.size(); ++i)
    if (matched[i] == nullptr)
      throw error(errc::runtime,
                  "schema error: missing response for: " + group.items[i].original);
  return matched;
}

std::string require_string(const json& obj, const char* key) {
  if (!obj.contains(key) || !obj.at(key).is_string())
    throw error(errc::runtime, std::string("schema error: missing field ") + key);
  return obj.at(key).get<std::string>();
}

}  // namespace

void TranslationItem::validate_flags() const {
  if (!flag) return;
  if (*flag == "accept") return;
  if (*flag == "uncertain") {
    if (!reason || reason->empty())
      throw error(errc::runtime, "schema error: uncertain flag without reason");
    return;
  }
  if (*flag == "incorrect") {
    if (!reason || reason->empty())
      throw error(errc::runtime, "schema error: incorrect flag without reason");
    if (!corrected_translation || corrected_translation->empty())
      throw error(errc::runtime, "schema error: incorrect flag without correctedTranslation");
    return;
  }
  throw error(errc::runtime, "schema error: unknown flag " + *flag);
}

void stage_translate(MotionGroup& group, LlmBackend& backend, const PipelineConfig& cfg) {
  std::vector<std::string> descriptions;
  for (const auto& item : group.items) descriptions.push_back(item.original);
  json arr = request_array(group, backend, cfg, system_prompt(cfg.target_language),
                           translate_prompt(descriptions, cfg.target_language));
  auto matched = match_by_original(group, arr);
  for (size_t i = 0; i < group.items.size(); ++i)
    group.items[i].translation = require_string(*matched[i], "translation");
}

void stage_refine(MotionGroup& group, LlmBackend& backend, const PipelineConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> items;
  for (const auto& item : group.items) {
    require(item.translation.has_value(), errc::runtime, "stage_refine: missing translation");
    items.emplace_back(item.original, *item.translation);
  }
  json arr = request_array(group, backend, cfg, system_prompt(cfg.target_language),
                           refine_prompt(items, cfg.target_language));
  auto matched = match_by_original(group, arr);
  for (size_t i = 0; i < group.items.size(); ++i)
    group.items[i].refined = require_string(*matched[i], "refined");
}

void stage_evaluate(MotionGroup& group, LlmBackend& backend, const PipelineConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& item : group.items) {
    require(item.refined.has_value(), errc::runtime, "stage_evaluate: missing refined text");
    pairs.emplace_back(item.original, *item.refined);
  }
  json arr = request_array(group, backend, cfg, system_prompt(cfg.target_language),
                           evaluate_prompt(pairs, cfg.target_language));
  auto matched = match_by_original(group, arr);
  for (size_t i = 0; i < group.items.size(); ++i) {
    TranslationItem& item = group.items[i];
    const json& obj = *matched[i];
    std::string flag = require_string(obj, "flag");
    for (auto& c : flag) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    item.flag = flag;
    if (obj.contains("reason") && obj.at("reason").is_string())
      item.reason = obj.at("reason").get<std::string>();
    if (obj.contains("correctedTranslation") && obj.at("correctedTranslation").is_string())
      item.corrected_translation = obj.at("correctedTranslation").get<std::string>();
    item.validate_flags();
  }
}

std::string group_to_json_line(const MotionGroup& g) {
  json j;
  j["motion_id"] = g.motion_id;
  json items = json::array();
  for (const auto& item : g.items) {
    json o;
    o["original"] = item.original;
    if (item.translation) o["translation"] = *item.translation;
    if (item.refined) o["refined"] = *item.refined;
    if (item.flag) o["flag"] = *item.flag;
    if (item.reason) o["reason"] = *item.reason;
    if (item.corrected_translation) o["correctedTranslation"] = *item.corrected_translation;
    items.push_back(std::move(o));
  }
  j["items"] = std::move(items);
  if (g.failure) j["error"] = *g.failure;
  return j.dump();
}

MotionGroup group_from_json_line(const std::string& line) {
  json j = json::parse(line);
  MotionGroup g;
  g.motion_id = j.at("motion_id").get<std::string>();
  for (const auto& o : j.at("items")) {
    TranslationItem item;
    item.original = o.at("original").get<std::string>();
    if (o.contains("translation")) item.translation = o.at("translation").get<std::string>();
    if (o.contains("refined")) item.refined = o.at("refined").get<std::string>();
    if (o.contains("flag")) item.flag = o.at("flag").get<std::string>();
    if (o.contains("reason")) item.reason = o.at("reason").get<std::string>();
    if (o.contains("correctedTranslation"))
      item.corrected_translation = o.at("correctedTranslation").get<std::string>();
    g.items.push_back(std::move(item));
  }
  if (j.contains("error")) g.failure = j.at("error").get<std::string>();
  return g;
}

namespace {

std::vector<MotionGroup> load_pipeline_input(const std::string& path,
                                             const PipelineConfig& cfg) {
  std::ifstream f(path);
  require(f.good(), errc::runtime, "pipeline: cannot open input " + path);
  std::vector<MotionGroup> groups;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const std::exception& ex) {
      throw error(errc::validation, "pipeline: parse error at " + path + ":" +
                                        std::to_string(lineno) + ": " + ex.what());
    }
    MotionGroup g;
    g.motion_id = j.at("motion_id").get<std::string>();
    if (j.contains("frames")) {
      // corpus form: captions are token arrays, language A only
      int frames = static_cast<int>(j.at("frames").size());
      if (cfg.length_filter && (frames < cfg.min_frames || frames > cfg.max_frames)) continue;
      for (const auto& cap : j.at("captions")) {
        if (cap.at("lang").get<std::string>() != "a") continue;
        TranslationItem item;
        item.original = caption_text(cap.at("tokens").get<std::vector<int>>(), 1 << 30);
        g.items.push_back(std::move(item));
      }
    } else {
      for (const auto& cap : j.at("captions")) {
        TranslationItem item;
        item.original = cap.get<std::string>();
        g.items.push_back(std::move(item));
      }
    }
    if (!g.items.empty()) groups.push_back(std::move(g));
  }
  return groups;
}

std::set<std::string> accepted_ids(const fs::path& accepted_path) {
  std::set<std::string> ids;
  std::ifstream f(accepted_path);
  if (!f.good()) return ids;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    ids.insert(group_from_json_line(line).motion_id);
  }
  return ids;
}

void atomic_write_lines(const fs::path& path, const std::vector<std::string>& lines) {
  fs::path tmp = path;
  tmp += ".partial";
  {
    std::ofstream f(tmp);
    require(f.good(), errc::runtime, "pipeline: cannot write " + tmp.string());
    for (const auto& l : lines) f << l << "\n";
  }
  fs::rename(tmp, path);
}

}  // namespace

PipelineSummary run_pipeline(const std::string& input_path, LlmBackend& backend,
                             const std::string& out_dir, const PipelineConfig& cfg) {
  fs::create_directories(out_dir);
  fs::path accepted_path = fs::path(out_dir) / "accepted.jsonl";
  fs::path review_path = fs::path(out_dir) / "review_queue.jsonl";
  fs::path failed_path = fs::path(out_dir) / "failed.jsonl";

  std::vector<MotionGroup> groups = load_pipeline_input(input_path, cfg);
  std::set<std::string> done = accepted_ids(accepted_path);

  PipelineSummary summary;
  summary.groups_total = static_cast<int>(groups.size());
  int64_t calls_before = backend.call_count();

  std::vector<int> todo;
  for (size_t i = 0; i < groups.size(); ++i) {
    if (done.count(groups[i].motion_id)) {
      ++summary.groups_skipped;
      continue;
    }
    summary.items_total += static_cast<int>(groups[i].items.size());
    todo.push_back(static_cast<int>(i));
  }

  parallel_for(static_cast<int>(todo.size()), cfg.parallel_width, [&](int lo, int hi) {
    for (int k = lo; k < hi; ++k) {
      MotionGroup& g = groups[todo[k]];
      try {
        stage_translate(g, backend, cfg);
        stage_refine(g, backend, cfg);
        stage_evaluate(g, backend, cfg);
      } catch (const std::exception& ex) {
        g.failure = ex.what();
      }
    }
  });

  std::vector<std::string> accepted_lines, review_lines, failed_lines;
  {
    std::ifstream f(accepted_path);
    std::string line;
    while (f.good() && std::getline(f, line))
      if (!line.empty()) accepted_lines.push_back(line);
  }
  for (int idx : todo) {
    MotionGroup& g = groups[idx];
    if (g.failure) {
      ++summary.groups_failed;
      summary.failed_items += static_cast<int>(g.items.size());
      failed_lines.push_back(group_to_json_line(g));
      continue;
    }
    MotionGroup acc{g.motion_id, {}, std::nullopt};
    MotionGroup rev{g.motion_id, {}, std::nullopt};
    for (const auto& item : g.items) {
      if (item.flag && *item.flag == "accept")
        acc.items.push_back(item);
      else
        rev.items.push_back(item);
    }
    summary.accepted_items += static_cast<int>(acc.items.size());
    summary.review_items += static_cast<int>(rev.items.size());
    if (!acc.items.empty()) accepted_lines.push_back(group_to_json_line(acc));
    if (!rev.items.empty()) review_lines.push_back(group_to_json_line(rev));
  }
  atomic_write_lines(accepted_path, accepted_lines);
  atomic_write_lines(review_path, review_lines);
  atomic_write_lines(failed_path, failed_lines);

  summary.llm_calls = backend.call_count() - calls_before;
  json s = {{"groups_total", summary.groups_total},
            {"groups_skipped", summary.groups_skipped},
            {"groups_failed", summary.groups_failed},
            {"items_total", summary.items_total},
            {"accepted_items", summary.accepted_items},
            {"review_items", summary.review_items},
            {"failed_items", summary.failed_items},
            {"llm_calls", summary.llm_calls}};
  atomic_write_lines(fs::path(out_dir) / "summary.json", {s.dump(2)});
  return summary;
}

ReviewApplyResult review_apply(const std::string& out_dir, const std::string& review_path) {
  fs::path accepted_path = fs::path(out_dir) / "accepted.jsonl";
  std::ifstream f(review_path);
  require(f.good(), errc::runtime, "review_apply: cannot open " + review_path);

  std::vector<std::string> accepted_lines;
  {
    std::ifstream acc(accepted_path);
    std::string line;
    while (acc.good() && std::getline(acc, line))
      if (!line.empty()) accepted_lines.push_back(line);
  }

  ReviewApplyResult res;
  std::vector<std::string> remaining_lines;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    MotionGroup g = group_from_json_line(line);
    MotionGroup acc{g.motion_id, {}, std::nullopt};
    MotionGroup rem{g.motion_id, {}, std::nullopt};
    for (auto& item : g.items) {
      if (item.flag && *item.flag == "accept") {
        acc.items.push_back(item);
        ++res.moved_to_accepted;
      } else {
        rem.items.push_back(item);
        ++res.remaining;
      }
    }
    if (!acc.items.empty()) accepted_lines.push_back(group_to_json_line(acc));
    if (!rem.items.empty()) remaining_lines.push_back(group_to_json_line(rem));
  }
  atomic_write_lines(accepted_path, accepted_lines);
  atomic_write_lines(fs::path(out_dir) / "review_queue.jsonl", remaining_lines);
  return res;
}

}  // namespace bimotion
