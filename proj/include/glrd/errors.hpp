#pragma once

#include <stdexcept>
#include <string>

namespace glrd {

/// Malformed or incomplete input (files, flags, knowledge). CLI exit code 1.
class InputError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A class the knowledge provider knows nothing about.
class MissingKnowledge : public InputError {
  public:
    explicit MissingKnowledge(const std::string& className)
        : InputError("no size prior for class '" + className + "'"), className_(className) {}
    const std::string& className() const { return className_; }

  private:
    std::string className_;
};

/// Remote knowledge service failed after retries. CLI exit code 2.
class ProviderError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace glrd
