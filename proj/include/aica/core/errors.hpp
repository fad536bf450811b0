#pragma once

#include <stdexcept>
#include <string>

namespace aica {

/// Malformed input document.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Document parsed but violates a type invariant. `where` names the offending field or id.
class ValidationError : public std::runtime_error {
public:
    ValidationError(std::string where, const std::string& what)
        : std::runtime_error(what), where_(std::move(where))
    {
    }
    const std::string& where() const noexcept { return where_; }

private:
    std::string where_;
};

} // namespace aica
