#pragma once

#include <string>
#include <string_view>

namespace lexcurate::unicode {

/// True when `bytes` is well-formed UTF-8 (no overlongs, surrogates or truncated sequences).
bool is_valid_utf8(std::string_view bytes);

bool is_ascii(std::string_view bytes) noexcept;

/// NFKC normalization. Input must be valid UTF-8.
std::string nfkc(std::string_view text);

bool is_nfkc(std::string_view text);

}  // namespace lexcurate::unicode
