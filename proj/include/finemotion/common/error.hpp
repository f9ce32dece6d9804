#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace finemotion {

// Exception carrying a module-specific error code. Every module defines an
// `enum class` of its failure modes and throws `Error<ThatEnum>`.
class ErrorBase : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename Code>
class Error : public ErrorBase {
 public:
  Error(Code code, const std::string& what) : ErrorBase(what), code_(code) {}
  Code code() const noexcept { return code_; }

 private:
  Code code_;
};

}  // namespace finemotion
