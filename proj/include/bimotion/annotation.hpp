#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bimotion/llm_backend.hpp"

namespace bimotion {

// One caption moving through translate -> refine -> evaluate.
// flag "uncertain" requires a reason; "incorrect" additionally requires a
// corrected translation.
struct TranslationItem {
  std::string original;
  std::optional<std::string> translation;
  std::optional<std::string> refined;
  std::optional<std::string> flag;
  std::optional<std::string> reason;
  std::optional<std::string> corrected_translation;

  void validate_flags() const;
};

// All captions of one motion; processed together in single requests so the
// model can cross-check consistency.
struct MotionGroup {
  std::string motion_id;
  std::vector<TranslationItem> items;
  std::optional<std::string> failure;
};

struct PipelineConfig {
  std::string target_language = "Chinese";
  int max_attempts = 3;
  int retry_base_ms = 1000;
  int parallel_width = 4;
  bool length_filter = true;
  int min_frames = 40;
  int max_frames = 200;
};

void stage_translate(MotionGroup& group, LlmBackend& backend, const PipelineConfig& cfg);
void stage_refine(MotionGroup& group, LlmBackend& backend, const PipelineConfig& cfg);
void stage_evaluate(MotionGroup& group, LlmBackend& backend, const PipelineConfig& cfg);

struct PipelineSummary {
  int groups_total = 0;
  int groups_skipped = 0;
  int groups_failed = 0;
  int items_total = 0;
  int accepted_items = 0;
  int review_items = 0;
  int failed_items = 0;
  int64_t llm_calls = 0;
};

// Input: line-delimited JSON, either the corpus format (frames present, the
// length filter applies) or raw {"motion_id", "captions": [str, ...]}.
// Outputs accepted.jsonl / review_queue.jsonl / failed.jsonl under out_dir;
// groups already in accepted.jsonl are skipped without backend calls.
PipelineSummary run_pipeline(const std::string& input_path, LlmBackend& backend,
                             const std::string& out_dir, const PipelineConfig& cfg);

struct ReviewApplyResult {
  int moved_to_accepted = 0;
  int remaining = 0;
};

// merges a human-edited review file: items re-flagged "accept" move to
// accepted.jsonl, the rest stay queued
ReviewApplyResult review_apply(const std::string& out_dir, const std::string& review_path);

// (de)serialization shared with the CLI and tests
std::string group_to_json_line(const MotionGroup& g);
MotionGroup group_from_json_line(const std::string& line);

}  // namespace bimotion
