#include "lvqa/text.hpp"

#include <cstdio>
#include <locale>

#include <boost/locale/encoding_utf.hpp>
#include <openssl/evp.h>

namespace lvqa {
namespace {

const std::locale& utf8_locale() {
    static const std::locale loc = [] {
        try {
            return std::locale("C.UTF-8");
        } catch (const std::runtime_error&) {
            return std::locale::classic();
        }
    }();
    return loc;
}

constexpr std::string_view kStopwords[] = {
    "a",     "about", "an",    "and",   "are",  "as",    "at",   "be",   "been", "by",
    "did",   "do",    "does",  "during","for",  "from",  "had",  "has",  "have", "he",
    "her",   "his",   "how",   "i",     "in",   "into",  "is",   "it",   "its",  "many",
    "of",    "on",    "or",    "she",   "that", "the",   "their","them", "then", "there",
    "they",  "this",  "to",    "was",   "were", "what",  "when", "where","which","while",
    "who",   "whom",  "why",   "will",  "with", "you",   "s",    "day"};

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    if (text.empty()) return out;
    const auto& ct = std::use_facet<std::ctype<wchar_t>>(utf8_locale());
    std::wstring wide = boost::locale::conv::utf_to_utf<wchar_t>(text.data(), text.data() + text.size());
    std::wstring cur;
    auto flush = [&] {
        if (!cur.empty()) {
            out.push_back(boost::locale::conv::utf_to_utf<char>(cur));
            cur.clear();
        }
    };
    for (wchar_t c : wide) {
        if (ct.is(std::ctype_base::alnum, c)) {
            cur.push_back(ct.tolower(c));
        } else {
            flush();
        }
    }
    flush();
    return out;
}

bool is_stopword(std::string_view token) {
    for (auto s : kStopwords) {
        if (s == token) return true;
    }
    return false;
}

std::vector<std::string> content_tokens(std::string_view text) {
    std::vector<std::string> out;
    for (auto& t : tokenize(text)) {
        if (!is_stopword(t)) out.push_back(std::move(t));
    }
    return out;
}

std::string normalize_text(std::string_view text) {
    std::string out;
    for (const auto& t : tokenize(text)) {
        if (!out.empty()) out.push_back(' ');
        out += t;
    }
    return out;
}

bool contains_token_run(const std::vector<std::string>& haystack,
                        const std::vector<std::string>& needle) {
    if (needle.empty()) return true;
    if (needle.size() > haystack.size()) return false;
    for (std::size_t i = 0; i + needle.size() <= haystack.size(); ++i) {
        bool match = true;
        for (std::size_t j = 0; j < needle.size() && match; ++j) {
            match = haystack[i + j] == needle[j];
        }
        if (match) return true;
    }
    return false;
}

std::vector<std::vector<std::string>> token_ngrams(const std::vector<std::string>& tokens,
                                                   std::size_t n) {
    std::vector<std::vector<std::string>> out;
    if (n == 0 || tokens.size() < n) return out;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        out.emplace_back(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                         tokens.begin() + static_cast<std::ptrdiff_t>(i + n));
    }
    return out;
}

std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
    std::string hex;
    hex.reserve(len * 2);
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", digest[i]);
        hex += buf;
    }
    return hex;
}

std::string base64_encode(std::string_view data) {
    std::string out(4 * ((data.size() + 2) / 3), '\0');
    int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                            reinterpret_cast<const unsigned char*>(data.data()),
                            static_cast<int>(data.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

}  // namespace lvqa
