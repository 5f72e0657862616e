#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace reactcmg {

/// Ordered list of lowercase tokens. One tokenizer feeds the corpus filters,
/// BM25, the local embedder and all three metrics, so every downstream number
/// is reproducible from this definition alone.
using TokenSequence = std::vector<std::string>;

namespace detail {

// Token characters are ASCII alphanumerics, underscore, and any byte >= 0x80
// (UTF-8 continuation/lead bytes stay inside tokens so multi-byte words are
// not split). Everything else -- punctuation, diff markers '+ - @', blanks --
// separates tokens and is discarded.
inline bool is_token_byte(unsigned char c) {
    if (c >= 0x80) return true;
    if (c >= '0' && c <= '9') return true;
    if (c >= 'a' && c <= 'z') return true;
    if (c >= 'A' && c <= 'Z') return true;
    return c == '_';
}

inline char lower_ascii(unsigned char c) {
    if (c >= 'A' && c <= 'Z') return static_cast<char>(c - 'A' + 'a');
    return static_cast<char>(c);
}

} // namespace detail

/// Split text into lowercase tokens: maximal runs of token bytes, separators
/// dropped. Pure and byte-deterministic across platforms.
inline TokenSequence tokenize(std::string_view text) {
    TokenSequence tokens;
    std::string current;
    for (unsigned char c : text) {
        if (detail::is_token_byte(c)) {
            current.push_back(detail::lower_ascii(c));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

inline std::size_t count_tokens(std::string_view text) {
    std::size_t n = 0;
    bool in_token = false;
    for (unsigned char c : text) {
        if (detail::is_token_byte(c)) {
            if (!in_token) { ++n; in_token = true; }
        } else {
            in_token = false;
        }
    }
    return n;
}

/// Longest prefix of `text` containing at most `max_tokens` tokens, cut at the
/// end of the last kept token.
inline std::string truncate_to_tokens(std::string_view text, std::size_t max_tokens) {
    if (max_tokens == 0) return {};
    std::size_t n = 0;
    bool in_token = false;
    std::size_t cut = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (detail::is_token_byte(static_cast<unsigned char>(text[i]))) {
            if (!in_token) {
                ++n;
                if (n > max_tokens) return std::string(text.substr(0, cut));
                in_token = true;
            }
            cut = i + 1;
        } else {
            in_token = false;
        }
    }
    return std::string(text);
}

namespace detail {

// Classic Porter stemmer (the original published algorithm, steps 1a-5b,
// without the later LOGI/BLI revisions). Operates on lowercase ASCII words;
// tokens containing anything outside [a-z] pass through unchanged.
class PorterStemmer {
public:
    static std::string stem(std::string word) {
        if (word.size() <= 2) return word;
        for (char c : word) {
            if (c < 'a' || c > 'z') return word;
        }
        PorterStemmer p(std::move(word));
        p.step1a();
        p.step1b();
        p.step1c();
        p.step2();
        p.step3();
        p.step4();
        p.step5a();
        p.step5b();
        p.w.resize(p.k);
        return std::move(p.w);
    }

private:
    explicit PorterStemmer(std::string word) : w(std::move(word)), k(w.size()) {}

    std::string w;
    std::size_t k; // length of the word currently in use
    std::size_t j = 0; // stem length left by the last successful ends()

    bool is_consonant(std::size_t i) const {
        char c = w[i];
        if (c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u') return false;
        if (c == 'y') return i == 0 ? true : !is_consonant(i - 1);
        return true;
    }

    // m(): number of VC sequences in w[0..len).
    std::size_t measure(std::size_t len) const {
        std::size_t m = 0;
        std::size_t i = 0;
        while (i < len && is_consonant(i)) ++i;
        while (i < len) {
            while (i < len && !is_consonant(i)) ++i;
            if (i == len) break;
            ++m;
            while (i < len && is_consonant(i)) ++i;
        }
        return m;
    }

    bool has_vowel(std::size_t len) const {
        for (std::size_t i = 0; i < len; ++i) {
            if (!is_consonant(i)) return true;
        }
        return false;
    }

    // *d: w[0..len) ends with a double consonant.
    bool ends_double_consonant(std::size_t len) const {
        if (len < 2) return false;
        return w[len - 1] == w[len - 2] && is_consonant(len - 1);
    }

    // *o: w[0..len) ends consonant-vowel-consonant where the final consonant
    // is not w, x or y.
    bool ends_cvc(std::size_t len) const {
        if (len < 3) return false;
        if (!is_consonant(len - 3) || is_consonant(len - 2) || !is_consonant(len - 1)) return false;
        char c = w[len - 1];
        return c != 'w' && c != 'x' && c != 'y';
    }

    bool ends(std::string_view suffix) {
        if (suffix.size() > k) return false;
        if (std::string_view(w).substr(k - suffix.size(), suffix.size()) != suffix) return false;
        j = k - suffix.size();
        return true;
    }

    void set_to(std::string_view s) {
        w.resize(j);
        w.append(s);
        k = w.size();
    }

    // Replace the matched suffix when the stem has m > 0 (steps 2 and 3).
    void replace_if_stem(std::string_view s) {
        if (measure(j) > 0) set_to(s);
    }

    void step1a() {
        if (w[k - 1] != 's') return;
        if (ends("sses")) {
            k -= 2;
        } else if (ends("ies")) {
            set_to("i");
        } else if (w[k - 2] != 's') {
            --k;
        }
    }

    void step1b() {
        if (ends("eed")) {
            if (measure(j) > 0) --k;
            return;
        }
        bool removed = false;
        if (ends("ed") && has_vowel(j)) {
            k = j;
            removed = true;
        } else if (ends("ing") && has_vowel(j)) {
            k = j;
            removed = true;
        }
        if (!removed) return;
        if (ends("at")) {
            set_to("ate");
        } else if (ends("bl")) {
            set_to("ble");
        } else if (ends("iz")) {
            set_to("ize");
        } else if (ends_double_consonant(k)) {
            char c = w[k - 1];
            if (c != 'l' && c != 's' && c != 'z') --k;
        } else if (measure(k) == 1 && ends_cvc(k)) {
            j = k;
            set_to("e");
        }
    }

    void step1c() {
        if (ends("y") && has_vowel(j)) w[k - 1] = 'i';
    }

    void step2() {
        if (k < 2) return;
        switch (w[k - 2]) {
            case 'a':
                if (ends("ational")) { replace_if_stem("ate"); break; }
                if (ends("tional")) { replace_if_stem("tion"); break; }
                break;
            case 'c':
                if (ends("enci")) { replace_if_stem("ence"); break; }
                if (ends("anci")) { replace_if_stem("ance"); break; }
                break;
            case 'e':
                if (ends("izer")) { replace_if_stem("ize"); break; }
                break;
            case 'l':
                if (ends("abli")) { replace_if_stem("able"); break; }
                if (ends("alli")) { replace_if_stem("al"); break; }
                if (ends("entli")) { replace_if_stem("ent"); break; }
                if (ends("eli")) { replace_if_stem("e"); break; }
                if (ends("ousli")) { replace_if_stem("ous"); break; }
                break;
            case 'o':
                if (ends("ization")) { replace_if_stem("ize"); break; }
                if (ends("ation")) { replace_if_stem("ate"); break; }
                if (ends("ator")) { replace_if_stem("ate"); break; }
                break;
            case 's':
                if (ends("alism")) { replace_if_stem("al"); break; }
                if (ends("iveness")) { replace_if_stem("ive"); break; }
                if (ends("fulness")) { replace_if_stem("ful"); break; }
                if (ends("ousness")) { replace_if_stem("ous"); break; }
                break;
            case 't':
                if (ends("aliti")) { replace_if_stem("al"); break; }
                if (ends("iviti")) { replace_if_stem("ive"); break; }
                if (ends("biliti")) { replace_if_stem("ble"); break; }
                break;
            default:
                break;
        }
    }

    void step3() {
        switch (w[k - 1]) {
            case 'e':
                if (ends("icate")) { replace_if_stem("ic"); break; }
                if (ends("ative")) { replace_if_stem(""); break; }
                if (ends("alize")) { replace_if_stem("al"); break; }
                break;
            case 'i':
                if (ends("iciti")) { replace_if_stem("ic"); break; }
                break;
            case 'l':
                if (ends("ical")) { replace_if_stem("ic"); break; }
                if (ends("ful")) { replace_if_stem(""); break; }
                break;
            case 's':
                if (ends("ness")) { replace_if_stem(""); break; }
                break;
            default:
                break;
        }
    }

    void step4() {
        if (k < 2) return;
        bool matched = false;
        switch (w[k - 2]) {
            case 'a': matched = ends("al"); break;
            case 'c': matched = ends("ance") || ends("ence"); break;
            case 'e': matched = ends("er"); break;
            case 'i': matched = ends("ic"); break;
            case 'l': matched = ends("able") || ends("ible"); break;
            case 'n': matched = ends("ant") || ends("ement") || ends("ment") || ends("ent"); break;
            case 'o':
                matched = (ends("ion") && j > 0 && (w[j - 1] == 's' || w[j - 1] == 't')) || ends("ou");
                break;
            case 's': matched = ends("ism"); break;
            case 't': matched = ends("ate") || ends("iti"); break;
            case 'u': matched = ends("ous"); break;
            case 'v': matched = ends("ive"); break;
            case 'z': matched = ends("ize"); break;
            default: break;
        }
        if (matched && measure(j) > 1) k = j;
    }

    void step5a() {
        if (w[k - 1] != 'e') return;
        std::size_t m = measure(k - 1);
        if (m > 1 || (m == 1 && !ends_cvc(k - 1))) --k;
    }

    void step5b() {
        if (w[k - 1] == 'l' && ends_double_consonant(k) && measure(k) > 1) --k;
    }
};

} // namespace detail

/// Classic Porter stem of a lowercase token. Words of length <= 2 and tokens
/// containing non-letters are returned unchanged.
inline std::string porter_stem(std::string token) {
    return detail::PorterStemmer::stem(std::move(token));
}

} // namespace reactcmg
