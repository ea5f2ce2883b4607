#pragma once

#include <stdexcept>
#include <string>

namespace bimotion {

// Error classes map onto process exit codes: 1 validation, 2 runtime,
// 3 oracle-check failure.
enum class errc { validation = 1, runtime = 2, oracle = 3 };

class error : public std::runtime_error {
 public:
  error(errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  errc code() const { return code_; }

 private:
  errc code_;
};

inline void require(bool ok, errc code, const std::string& what) {
  if (!ok) throw error(code, what);
}

}  // namespace bimotion
