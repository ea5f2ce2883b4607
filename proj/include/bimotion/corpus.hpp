#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bimotion/motion.hpp"
#include "bimotion/schedule.hpp"

namespace bimotion {

// One bilingual caption pair for a motion. Token ids are global: language A
// occupies [0, vocab_per_lang), language B [vocab_per_lang, 2*vocab_per_lang).
struct CaptionRecord {
  std::vector<int> tokens_lang_a;
  std::vector<int> tokens_lang_b;
};

struct CorpusEntry {
  std::string motion_id;
  MotionSequence motion;
  std::vector<CaptionRecord> captions;
  int class_label = 0;
};

struct CorpusParams {
  int num_classes = 8;
  int per_class = 64;
  int num_frames = 32;
  int feature_dim = 6;
  int vocab_per_lang = 64;
  int caption_min_tokens = 4;
  int caption_max_tokens = 8;
  int captions_per_entry = 2;
  double jitter = 0.05;
  uint64_t seed = 1;
};

// Deterministic trajectory template of a class; depends on the class index
// only, so corpora generated from different seeds share the same classes.
Mat class_template(int class_label, int num_frames, int feature_dim);

std::vector<CorpusEntry> generate_corpus(const CorpusParams& p);

std::vector<CorpusEntry> filter_by_length(const std::vector<CorpusEntry>& entries,
                                          int min_frames, int max_frames);

// one JSON object per line; unknown fields ignored on load
void save_corpus(const std::vector<CorpusEntry>& entries, const std::string& path);
std::vector<CorpusEntry> load_corpus(const std::string& path);

// caption rendered as text for the annotation pipeline ("a17 a3 ...")
std::string caption_text(const std::vector<int>& tokens, int vocab_per_lang);

// Token-embedding table with the semantics a pretrained teacher would carry:
// synonyms of one class share a direction, instance words get their own
// directions, filler words stay small. Rows cover one language's vocabulary.
Mat semantic_token_table(int vocab_per_lang, int d_model, uint64_t seed);

}  // namespace bimotion
