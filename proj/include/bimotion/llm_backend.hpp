#pragma once

#include <atomic>
#include <cstdint>
#include <string>
#include <vector>

namespace bimotion {

// Synchronous completion backend. Retries and backoff are the caller's
// responsibility; call_count() counts every attempt actually issued.
class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  virtual std::string name() const = 0;

  std::string run(const std::string& system_prompt, const std::string& user_prompt) {
    ++calls_;
    return complete(system_prompt, user_prompt);
  }

  int64_t call_count() const { return calls_.load(); }

 protected:
  virtual std::string complete(const std::string& system_prompt,
                               const std::string& user_prompt) = 0;

 private:
  std::atomic<int64_t> calls_{0};
};

// Table-driven deterministic stand-in for the hosted models. Recognizes the
// three pipeline prompts, translates token-words "aNN" to "bNN" and reverses
// anything else, and applies the configured per-item behaviors.
class MockLlmBackend : public LlmBackend {
 public:
  struct FlagRule {
    std::string original_contains;
    std::string flag;  // "uncertain" | "incorrect"
    std::string reason;
    std::string corrected;
  };

  struct Behavior {
    // any request whose payload contains one of these returns garbage
    std::vector<std::string> malformed_if_contains;
    std::vector<FlagRule> flag_rules;
    bool shuffle_response_order = false;
  };

  MockLlmBackend() = default;
  explicit MockLlmBackend(Behavior b) : behavior_(std::move(b)) {}

  std::string name() const override { return "mock"; }

  static std::string mock_translate(const std::string& original);
  static std::string mock_refine(const std::string& translation);

 protected:
  std::string complete(const std::string& system_prompt,
                       const std::string& user_prompt) override;

 private:
  Behavior behavior_;
};

struct HttpBackendConfig {
  std::string url = "http://127.0.0.1:8080/v1/chat/completions";
  std::string model = "generic";
  std::string api_key_env = "BIMOTION_LLM_API_KEY";
  int timeout_seconds = 60;
};

// Minimal chat-completions client over the pluggable interface.
class HttpLlmBackend : public LlmBackend {
 public:
  explicit HttpLlmBackend(HttpBackendConfig cfg);
  std::string name() const override { return "http"; }

 protected:
  std::string complete(const std::string& system_prompt,
                       const std::string& user_prompt) override;

 private:
  HttpBackendConfig cfg_;
};

}  // namespace bimotion
