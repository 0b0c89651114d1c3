// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace chexpo {

/// Canonical comparison form for answers and terms: Unicode NFC,
/// full case fold, trimmed, internal whitespace runs collapsed to one
/// ASCII space. Invalid UTF-8 sequences are replaced with U+FFFD.
std::string normalize_text(std::string_view text);

/// Splits on runs of whitespace; empty pieces are dropped.
std::vector<std::string> split_whitespace(std::string_view text);

/// Splits on an exact separator; pieces are returned verbatim.
std::vector<std::string> split_on(std::string_view text, std::string_view sep);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Short answer followed by its explanation, e.g. "Yes. The image shows ...".
/// A sentence stop is inserted unless the answer already ends with one.
std::string compose_response(std::string_view answer, std::string_view explanation);

/// Finds `needle` in `haystack` only where both ends fall on word
/// boundaries (start/end of string or a non-alphanumeric ASCII byte).
/// Returns std::string_view::npos when absent.
std::size_t find_word(std::string_view haystack, std::string_view needle);

}  // namespace chexpo
