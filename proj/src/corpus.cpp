#include "bimotion/corpus.hpp"

#include <cmath>
#include <fstream>

#include "bimotion/rng.hpp"
#include "json.hpp"

namespace bimotion {

namespace {

using nlohmann::json;

// vocabulary regions inside one language: class synonyms in the first half,
// instance words in the next quarter, filler words in the last quarter
struct VocabLayout {
  int v;
  int class_lo = 0, class_n;
  int inst_lo, inst_n;
  int fill_lo, fill_n;

  explicit VocabLayout(int vocab_per_lang) : v(vocab_per_lang) {
    class_n = v / 2;
    inst_lo = class_n;
    inst_n = v / 4;
    fill_lo = class_n + inst_n;
    fill_n = v - fill_lo;
  }

  int class_token(int cls, int synonym) const { return (cls * 2 + synonym) % class_n; }
  int instance_token(uint64_t h, int slot) const {
    return inst_lo + static_cast<int>((h >> (8 * slot)) % static_cast<uint64_t>(inst_n));
  }
  int filler_token(Rng& rng) const {
    return fill_lo + static_cast<int>(rng.uniform_int(0, fill_n - 1));
  }
};

std::vector<int> render_caption(int cls, uint64_t instance_hash, const VocabLayout& vl,
                                int min_len, int max_len, int lang_offset, Rng& rng) {
  int len = static_cast<int>(rng.uniform_int(min_len, max_len));
  std::vector<int> toks;
  toks.reserve(len);
  // class words carry most of the caption so the class survives mean pooling;
  // instance words distinguish motions of one class, the rest is filler noise
  int class_words = std::max(2, len - 3);
  for (int c = 0; c < class_words; ++c)
    toks.push_back(vl.class_token(cls, static_cast<int>(rng.uniform_int(0, 1))));
  if (static_cast<int>(toks.size()) < len) toks.push_back(vl.instance_token(instance_hash, 0));
  if (static_cast<int>(toks.size()) < len) toks.push_back(vl.instance_token(instance_hash, 1));
  while (static_cast<int>(toks.size()) < len) toks.push_back(vl.filler_token(rng));
  rng.shuffle(toks);
  for (auto& t : toks) t += lang_offset;
  return toks;
}

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

Mat class_template(int class_label, int num_frames, int feature_dim) {
  // shared base trajectory plus a class-specific deviation; motions of all
  // classes share gross structure the way real clips do, while the deviation
  // keeps the families well separated
  Mat tpl(num_frames, feature_dim);
  for (int j = 0; j < feature_dim; ++j) {
    Rng base_rng(Rng::mix(0xBA5EULL, static_cast<uint64_t>(j)));
    double base_amp = 0.7 + 0.5 * base_rng.uniform();
    double base_freq = 1.0 + 1.5 * base_rng.uniform();
    double base_phase = 6.283185307179586 * base_rng.uniform();

    Rng rng(Rng::mix(0xC1A55ULL + class_label, static_cast<uint64_t>(j)));
    double amp = 0.4 + 0.6 * rng.uniform();
    double freq = 1.0 + 3.0 * rng.uniform();
    double phase = 6.283185307179586 * rng.uniform();
    double drift = -0.8 + 1.6 * rng.uniform();
    for (int i = 0; i < num_frames; ++i) {
      double u = static_cast<double>(i) / num_frames;
      tpl.at(i, j) = base_amp * std::sin(6.283185307179586 * base_freq * u + base_phase) +
                     amp * std::sin(6.283185307179586 * freq * u + phase) +
                     drift * (u - 0.5);
    }
  }
  return tpl;
}

std::vector<CorpusEntry> generate_corpus(const CorpusParams& p) {
  require(p.num_classes >= 1 && p.per_class >= 1 && p.num_frames >= 1 && p.feature_dim >= 1,
          errc::validation, "generate_corpus: counts must be >= 1");
  require(p.vocab_per_lang >= 8, errc::validation, "generate_corpus: vocabulary too small");
  require(p.caption_min_tokens >= 2 && p.caption_min_tokens <= p.caption_max_tokens,
          errc::validation, "generate_corpus: bad caption length bounds");
  require(p.captions_per_entry >= 1, errc::validation,
          "generate_corpus: captions_per_entry must be >= 1");

  VocabLayout vl(p.vocab_per_lang);
  std::vector<CorpusEntry> out;
  out.reserve(static_cast<size_t>(p.num_classes) * p.per_class);
  Rng root(p.seed);
  for (int cls = 0; cls < p.num_classes; ++cls) {
    Mat tpl = class_template(cls, p.num_frames, p.feature_dim);
    for (int inst = 0; inst < p.per_class; ++inst) {
      Rng rng = root.substream(Rng::mix(cls, inst));
      CorpusEntry e;
      char idbuf[32];
      std::snprintf(idbuf, sizeof(idbuf), "c%02d_m%04d", cls, inst);
      e.motion_id = idbuf;
      e.class_label = cls;
      e.motion = MotionSequence(p.num_frames, p.feature_dim);
      for (size_t i = 0; i < tpl.size(); ++i)
        e.motion.frames.d[i] = tpl.d[i] + p.jitter * rng.normal();
      uint64_t ih = fnv1a(e.motion_id);
      for (int c = 0; c < p.captions_per_entry; ++c) {
        CaptionRecord rec;
        rec.tokens_lang_a = render_caption(cls, ih, vl, p.caption_min_tokens,
                                           p.caption_max_tokens, 0, rng);
        rec.tokens_lang_b = render_caption(cls, ih, vl, p.caption_min_tokens,
                                           p.caption_max_tokens, p.vocab_per_lang, rng);
        e.captions.push_back(std::move(rec));
      }
      out.push_back(std::move(e));
    }
  }
  return out;
}

std::vector<CorpusEntry> filter_by_length(const std::vector<CorpusEntry>& entries,
                                          int min_frames, int max_frames) {
  require(min_frames <= max_frames, errc::validation, "filter_by_length: min > max");
  std::vector<CorpusEntry> out;
  for (const auto& e : entries)
    if (e.motion.num_frames() >= min_frames && e.motion.num_frames() <= max_frames)
      out.push_back(e);
  return out;
}

void save_corpus(const std::vector<CorpusEntry>& entries, const std::string& path) {
  std::ofstream f(path);
  require(f.good(), errc::runtime, "save_corpus: cannot open " + path);
  for (const auto& e : entries) {
    json j;
    j["motion_id"] = e.motion_id;
    json frames = json::array();
    for (int i = 0; i < e.motion.num_frames(); ++i) {
      json row = json::array();
      for (int c = 0; c < e.motion.feature_dim(); ++c) row.push_back(e.motion.frames.at(i, c));
      frames.push_back(std::move(row));
    }
    j["frames"] = std::move(frames);
    json caps = json::array();
    for (const auto& rec : e.captions) {
      caps.push_back({{"lang", "a"}, {"tokens", rec.tokens_lang_a}});
      caps.push_back({{"lang", "b"}, {"tokens", rec.tokens_lang_b}});
    }
    j["captions"] = std::move(caps);
    j["class"] = e.class_label;
    f << j.dump() << "\n";
  }
  require(f.good(), errc::runtime, "save_corpus: write failure on " + path);
}

std::vector<CorpusEntry> load_corpus(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), errc::runtime, "load_corpus: cannot open " + path);
  std::vector<CorpusEntry> out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const std::exception& ex) {
      throw error(errc::validation, "load_corpus: parse error at " + path + ":" +
                                        std::to_string(lineno) + ": " + ex.what());
    }
    try {
      CorpusEntry e;
      e.motion_id = j.at("motion_id").get<std::string>();
      const auto& frames = j.at("frames");
      int n = static_cast<int>(frames.size());
      require(n >= 1, errc::validation, "empty frames");
      int d = static_cast<int>(frames.at(0).size());
      e.motion = MotionSequence(n, d);
      for (int i = 0; i < n; ++i) {
        const auto& row = frames.at(i);
        require(static_cast<int>(row.size()) == d, errc::validation, "ragged frame rows");
        for (int c = 0; c < d; ++c) e.motion.frames.at(i, c) = row.at(c).get<double>();
      }
      e.class_label = j.value("class", 0);
      std::vector<std::vector<int>> langs_a, langs_b;
      for (const auto& cap : j.at("captions")) {
        std::string lang = cap.at("lang").get<std::string>();
        auto toks = cap.at("tokens").get<std::vector<int>>();
        require(!toks.empty(), errc::validation, "empty caption tokens");
        if (lang == "a")
          langs_a.push_back(std::move(toks));
        else if (lang == "b")
          langs_b.push_back(std::move(toks));
        else
          throw error(errc::validation, "unknown caption lang: " + lang);
      }
      require(!langs_a.empty() && langs_a.size() == langs_b.size(), errc::validation,
              "captions must pair language a with language b");
      for (size_t i = 0; i < langs_a.size(); ++i) {
        CaptionRecord rec;
        rec.tokens_lang_a = std::move(langs_a[i]);
        rec.tokens_lang_b = std::move(langs_b[i]);
        e.captions.push_back(std::move(rec));
      }
      e.motion.validate();
      out.push_back(std::move(e));
    } catch (const std::exception& ex) {
      throw error(errc::validation, "load_corpus: bad record at " + path + ":" +
                                        std::to_string(lineno) + ": " + ex.what());
    }
  }
  return out;
}

Mat semantic_token_table(int vocab_per_lang, int d_model, uint64_t seed) {
  VocabLayout vl(vocab_per_lang);
  Mat table(vocab_per_lang, d_model);
  Rng rng(seed);
  double unit = 0.1 * std::sqrt(static_cast<double>(d_model));  // matches random-init scale

  // class region: pairs of synonyms share one direction plus a small offset
  int num_dirs = (vl.class_n + 1) / 2;
  std::vector<Mat> dirs;
  for (int k = 0; k < num_dirs; ++k) {
    Mat d = Mat::randn(1, d_model, rng);
    double n = d.frob_norm();
    for (auto& v : d.d) v *= unit / n;
    dirs.push_back(std::move(d));
  }
  for (int t = 0; t < vl.class_n; ++t) {
    const Mat& d = dirs[t / 2];
    for (int j = 0; j < d_model; ++j)
      table.at(t, j) = d.d[j] + 0.15 * unit / std::sqrt(static_cast<double>(d_model)) *
                                    rng.normal();
  }
  // instance words: independent directions at reduced scale
  for (int t = vl.inst_lo; t < vl.inst_lo + vl.inst_n; ++t) {
    Mat d = Mat::randn(1, d_model, rng);
    double n = d.frob_norm();
    for (int j = 0; j < d_model; ++j) table.at(t, j) = 0.6 * unit * d.d[j] / n;
  }
  // filler words: small noise
  for (int t = vl.fill_lo; t < vocab_per_lang; ++t)
    for (int j = 0; j < d_model; ++j)
      table.at(t, j) = 0.25 * unit / std::sqrt(static_cast<double>(d_model)) * rng.normal();
  return table;
}

std::string caption_text(const std::vector<int>& tokens, int vocab_per_lang) {
  std::string s;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) s += ' ';
    int t = tokens[i];
    if (t < vocab_per_lang)
      s += "a" + std::to_string(t);
    else
      s += "b" + std::to_string(t - vocab_per_lang);
  }
  return s;
}

}  // namespace bimotion
