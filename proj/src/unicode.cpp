#include "lexcurate/unicode.hpp"

#include <unicode/normalizer2.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include <cstdint>

#include "lexcurate/error.hpp"

namespace lexcurate::unicode {

namespace {

const icu::Normalizer2& nfkc_instance() {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* n = icu::Normalizer2::getNFKCInstance(status);
    if (U_FAILURE(status) || n == nullptr) {
        throw Error(std::string("ICU NFKC normalizer unavailable: ") + u_errorName(status));
    }
    return *n;
}

}  // namespace

bool is_valid_utf8(std::string_view bytes) {
    const auto* s = reinterpret_cast<const std::uint8_t*>(bytes.data());
    const auto length = static_cast<std::int32_t>(bytes.size());
    std::int32_t i = 0;
    while (i < length) {
        UChar32 c;
        U8_NEXT(s, i, length, c);
        if (c < 0) return false;
    }
    return true;
}

bool is_ascii(std::string_view bytes) noexcept {
    for (unsigned char c : bytes) {
        if (c >= 0x80) return false;
    }
    return true;
}

std::string nfkc(std::string_view text) {
    // ASCII is closed under NFKC.
    if (is_ascii(text)) return std::string(text);

    const icu::Normalizer2& norm = nfkc_instance();
    icu::UnicodeString source = icu::UnicodeString::fromUTF8(
        icu::StringPiece(text.data(), static_cast<std::int32_t>(text.size())));
    UErrorCode status = U_ZERO_ERROR;
    if (norm.isNormalized(source, status) && U_SUCCESS(status)) return std::string(text);
    status = U_ZERO_ERROR;
    icu::UnicodeString normalized = norm.normalize(source, status);
    if (U_FAILURE(status)) {
        throw Error(std::string("NFKC normalization failed: ") + u_errorName(status));
    }
    std::string out;
    normalized.toUTF8String(out);
    return out;
}

bool is_nfkc(std::string_view text) {
    if (is_ascii(text)) return true;
    UErrorCode status = U_ZERO_ERROR;
    icu::UnicodeString source = icu::UnicodeString::fromUTF8(
        icu::StringPiece(text.data(), static_cast<std::int32_t>(text.size())));
    const bool ok = nfkc_instance().isNormalized(source, status);
    return U_SUCCESS(status) && ok;
}

}  // namespace lexcurate::unicode
