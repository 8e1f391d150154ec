#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace lidarsim {

// Error carries a stable machine-readable kind ("MissingKey", "ShapeMismatch", ...)
// next to the human-readable message. The CLI maps kinds to exit codes and
// emits them as JSON on stderr.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

[[noreturn]] inline void raise(const std::string& kind, const std::string& message) {
    throw Error(kind, message);
}

}  // namespace lidarsim
