#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>

namespace freetraj::detail {

/// Line number (1-based) of every value in a JSON document, keyed by JSON
/// pointer. The text must already be valid JSON.
class JsonLineIndex {
public:
    JsonLineIndex() = default;
    explicit JsonLineIndex(std::string_view text);

    /// Line of `pointer`, or of its nearest recorded ancestor.
    [[nodiscard]] std::size_t line(const std::string& pointer) const;

private:
    std::map<std::string, std::size_t> lines_;
};

}  // namespace freetraj::detail
