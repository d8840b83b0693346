#pragma once

#include <stdexcept>
#include <string>

namespace ivy {

// Error categories map 1:1 onto CLI exit codes and C API status codes.
enum class Errc : int {
  kFail = 1,          // unexpected failure
  kConfig = 2,        // bad config / bad argument
  kMissingInput = 3,  // absent or unreadable input artifact
  kNumeric = 4,       // numerical failure (non-finite loss etc.)
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail_config(const std::string& what) {
  throw Error(Errc::kConfig, what);
}
[[noreturn]] inline void fail_input(const std::string& what) {
  throw Error(Errc::kMissingInput, what);
}
[[noreturn]] inline void fail_numeric(const std::string& what) {
  throw Error(Errc::kNumeric, what);
}

}  // namespace ivy
