#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace lvqa {

/// Lowercased, Unicode-aware alphanumeric word split. "Día-4" -> {"día", "4"}.
std::vector<std::string> tokenize(std::string_view text);

bool is_stopword(std::string_view token);

/// Tokens minus stopwords.
std::vector<std::string> content_tokens(std::string_view text);

/// Tokens joined by single spaces; used as a dedup key.
std::string normalize_text(std::string_view text);

/// True when `needle` occurs as a contiguous token run inside `haystack`.
bool contains_token_run(const std::vector<std::string>& haystack,
                        const std::vector<std::string>& needle);

/// All contiguous n-token runs of `tokens`.
std::vector<std::vector<std::string>> token_ngrams(const std::vector<std::string>& tokens,
                                                   std::size_t n);

/// 64-bit FNV-1a; stable across platforms.
std::uint64_t fnv1a64(std::string_view data);

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

std::string base64_encode(std::string_view data);

}  // namespace lvqa
