#include "mum/corpus.hpp"

#include <fstream>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "mum/errors.hpp"
#include "mum/io_util.hpp"

namespace mum::corpus {

namespace {

using json = nlohmann::json;

// --- minimal UTF-8 layer ------------------------------------------------

// Decodes one codepoint; malformed bytes are promoted as Latin-1 so that
// dirty input never aborts a batch run.
char32_t decode_utf8(std::string_view s, std::size_t& i) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    auto cont = [&](std::size_t k) {
        return i + k < s.size() && (static_cast<unsigned char>(s[i + k]) & 0xC0) == 0x80;
    };
    auto tail = [&](std::size_t k) {
        return static_cast<char32_t>(static_cast<unsigned char>(s[i + k]) & 0x3F);
    };
    if ((b0 & 0xE0) == 0xC0 && cont(1)) {
        const char32_t cp = (char32_t(b0 & 0x1F) << 6) | tail(1);
        i += 2;
        return cp;
    }
    if ((b0 & 0xF0) == 0xE0 && cont(1) && cont(2)) {
        const char32_t cp = (char32_t(b0 & 0x0F) << 12) | (tail(1) << 6) | tail(2);
        i += 3;
        return cp;
    }
    if ((b0 & 0xF8) == 0xF0 && cont(1) && cont(2) && cont(3)) {
        const char32_t cp =
            (char32_t(b0 & 0x07) << 18) | (tail(1) << 12) | (tail(2) << 6) | tail(3);
        i += 4;
        return cp;
    }
    ++i;
    return b0;  // Latin-1 fallback
}

void append_utf8(std::u32string_view cps, std::string& out) {
    for (char32_t cp : cps) {
        if (cp < 0x80) {
            out.push_back(static_cast<char>(cp));
        } else if (cp < 0x800) {
            out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else if (cp < 0x10000) {
            out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else {
            out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        }
    }
}

// Composition table for the combining marks that occur in Latin-script
// text: grave, acute, circumflex, tilde, diaeresis, cedilla.
char32_t compose(char32_t base, char32_t mark) {
    struct Entry {
        char32_t base, mark, composed;
    };
    static const Entry table[] = {
        {U'a', 0x300, U'à'}, {U'a', 0x301, U'á'}, {U'a', 0x302, U'â'}, {U'a', 0x303, U'ã'},
        {U'a', 0x308, U'ä'}, {U'e', 0x300, U'è'}, {U'e', 0x301, U'é'}, {U'e', 0x302, U'ê'},
        {U'e', 0x308, U'ë'}, {U'i', 0x300, U'ì'}, {U'i', 0x301, U'í'}, {U'i', 0x302, U'î'},
        {U'i', 0x308, U'ï'}, {U'o', 0x300, U'ò'}, {U'o', 0x301, U'ó'}, {U'o', 0x302, U'ô'},
        {U'o', 0x303, U'õ'}, {U'o', 0x308, U'ö'}, {U'u', 0x300, U'ù'}, {U'u', 0x301, U'ú'},
        {U'u', 0x302, U'û'}, {U'u', 0x308, U'ü'}, {U'n', 0x303, U'ñ'}, {U'c', 0x327, U'ç'},
        {U'y', 0x301, U'ý'}, {U'y', 0x308, U'ÿ'},
        {U'A', 0x300, U'À'}, {U'A', 0x301, U'Á'}, {U'A', 0x302, U'Â'}, {U'A', 0x303, U'Ã'},
        {U'A', 0x308, U'Ä'}, {U'E', 0x300, U'È'}, {U'E', 0x301, U'É'}, {U'E', 0x302, U'Ê'},
        {U'E', 0x308, U'Ë'}, {U'I', 0x300, U'Ì'}, {U'I', 0x301, U'Í'}, {U'I', 0x302, U'Î'},
        {U'I', 0x308, U'Ï'}, {U'O', 0x300, U'Ò'}, {U'O', 0x301, U'Ó'}, {U'O', 0x302, U'Ô'},
        {U'O', 0x303, U'Õ'}, {U'O', 0x308, U'Ö'}, {U'U', 0x300, U'Ù'}, {U'U', 0x301, U'Ú'},
        {U'U', 0x302, U'Û'}, {U'U', 0x308, U'Ü'}, {U'N', 0x303, U'Ñ'}, {U'C', 0x327, U'Ç'},
    };
    for (const auto& e : table) {
        if (e.base == base && e.mark == mark) return e.composed;
    }
    return 0;
}

char32_t to_lower(char32_t cp) {
    if (cp >= U'A' && cp <= U'Z') return cp + 0x20;
    // Latin-1 supplement; 0xD7 is the multiplication sign
    if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;
    if (cp == 0x178) return 0xFF;  // Ÿ
    return cp;
}

bool is_space(char32_t cp) {
    return cp == U' ' || cp == U'\t' || cp == U'\n' || cp == U'\r' || cp == U'\f' ||
           cp == U'\v' || cp == 0xA0 || (cp >= 0x2000 && cp <= 0x200B) || cp == 0x3000;
}

bool is_ascii_punct(char32_t cp) {
    return (cp >= U'!' && cp <= U'/') || (cp >= U':' && cp <= U'@') ||
           (cp >= U'[' && cp <= U'`') || (cp >= U'{' && cp <= U'~');
}

bool is_edge_punct(char32_t cp) {
    if (is_ascii_punct(cp)) return true;
    switch (cp) {
        case 0xA1:    // ¡
        case 0xBF:    // ¿
        case 0xAB:    // «
        case 0xBB:    // »
        case 0xB7:    // ·
        case 0xB4:    // ´
        case 0x2013:  // –
        case 0x2014:  // —
        case 0x2018:  // '
        case 0x2019:  // '
        case 0x201C:  // "
        case 0x201D:  // "
        case 0x2026:  // …
            return true;
        default:
            return false;
    }
}

bool is_ascii_alpha(char32_t cp) {
    return (cp >= U'a' && cp <= U'z') || (cp >= U'A' && cp <= U'Z');
}

// token (already lowercased) looks like scheme://rest
bool is_url(const std::u32string& t) {
    const auto pos = t.find(U"://");
    if (pos == std::u32string::npos || pos == 0) return false;
    if (!is_ascii_alpha(t[0])) return false;
    for (std::size_t i = 1; i < pos; ++i) {
        const char32_t c = t[i];
        const bool ok = is_ascii_alpha(c) || (c >= U'0' && c <= U'9') || c == U'+' ||
                        c == U'.' || c == U'-';
        if (!ok) return false;
    }
    return true;
}

std::u32string decode_normalized(std::string_view text) {
    std::u32string cps;
    cps.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) cps.push_back(decode_utf8(text, i));
    // NFC pass for the supported base+mark pairs
    std::u32string composed;
    composed.reserve(cps.size());
    for (char32_t cp : cps) {
        if (!composed.empty()) {
            if (const char32_t c = compose(composed.back(), cp); c != 0) {
                composed.back() = c;
                continue;
            }
        }
        composed.push_back(cp);
    }
    for (char32_t& cp : composed) cp = to_lower(cp);
    return composed;
}

} // namespace

std::string normalize_text(std::string_view text) {
    std::string out;
    append_utf8(decode_normalized(text), out);
    return out;
}

std::vector<std::string> tokenize(std::string_view text) {
    const std::u32string cps = decode_normalized(text);

    std::vector<std::u32string> raw;
    std::u32string cur;
    for (char32_t cp : cps) {
        if (is_space(cp)) {
            if (!cur.empty()) raw.push_back(std::exchange(cur, {}));
        } else {
            cur.push_back(cp);
        }
    }
    if (!cur.empty()) raw.push_back(std::move(cur));

    std::vector<std::string> out;
    out.reserve(raw.size());
    for (auto& t : raw) {
        if (is_url(t)) continue;
        std::size_t b = 0, e = t.size();
        while (e > b && is_edge_punct(t[e - 1])) --e;
        while (b < e && t[b] != U'#' && t[b] != U'@' && is_edge_punct(t[b])) ++b;
        if (b == e) continue;
        std::u32string stripped = t.substr(b, e - b);
        if (is_url(stripped)) continue;
        if (stripped[0] == U'@') continue;  // mention
        if (stripped[0] == U'#' && stripped.size() == 1) continue;
        std::string token;
        append_utf8(stripped, token);
        out.push_back(std::move(token));
    }
    // Retweet marker; removal exposes the next token at position 0, so the
    // whole leading run goes (required for idempotence).
    while (!out.empty() && out.front() == "rt") out.erase(out.begin());
    return out;
}

TokenizedTweet tokenize_tweet(const RawTweet& raw) {
    TokenizedTweet t;
    t.id = raw.id;
    t.user_id = raw.user_id;
    t.tokens = tokenize(raw.text);
    if (raw.hashtags.has_value()) {
        for (const auto& h : *raw.hashtags) {
            std::string norm = normalize_text(h);
            if (norm.empty()) continue;
            t.hashtags.push_back(norm.front() == '#' ? norm : "#" + norm);
        }
    } else {
        for (const auto& tok : t.tokens) {
            if (!tok.empty() && tok.front() == '#') t.hashtags.push_back(tok);
        }
    }
    return t;
}

std::vector<std::string> extract_hashtags(const TokenizedTweet& tweet) {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (const auto& h : tweet.hashtags) {
        std::string bare = normalize_text(h);
        std::size_t i = 0;
        while (i < bare.size() && bare[i] == '#') ++i;
        bare.erase(0, i);
        if (bare.empty()) continue;
        if (seen.insert(bare).second) out.push_back(std::move(bare));
    }
    return out;
}

std::pair<std::vector<LabeledTweet>, LabelReport> label_by_hashtag(
    const std::vector<TokenizedTweet>& tweets, const TopicLabelMap& map) {
    if (map.hashtag_to_topic.empty()) throw DataError("empty hashtag->topic map");
    std::vector<LabeledTweet> labeled;
    LabelReport report;
    for (const auto& tweet : tweets) {
        std::set<std::size_t> topics;
        for (const auto& tag : extract_hashtags(tweet)) {
            const auto it = map.hashtag_to_topic.find(tag);
            if (it != map.hashtag_to_topic.end()) topics.insert(it->second);
        }
        if (topics.empty()) {
            ++report.unmatched;
        } else if (topics.size() > 1) {
            ++report.ambiguous;
        } else {
            labeled.push_back({tweet.id, *topics.begin()});
            ++report.labeled;
        }
    }
    return {std::move(labeled), report};
}

std::map<std::string, std::vector<std::string>> group_by_user(
    const std::vector<TokenizedTweet>& tweets) {
    std::map<std::string, std::vector<std::string>> groups;
    for (const auto& t : tweets) groups[t.user_id].push_back(t.id);
    return groups;
}

TopicLabelMap TopicLabelMap::from_json_file(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw DataError("bad topic label map " + path.string() + ": " + e.what());
    }
    TopicLabelMap map;
    if (!j.contains("topics") || !j["topics"].is_array()) {
        throw DataError("topic label map needs a \"topics\" array: " + path.string());
    }
    std::unordered_map<std::string, std::size_t> topic_index;
    for (const auto& t : j["topics"]) {
        std::string name = t.get<std::string>();
        if (topic_index.contains(name)) {
            throw DataError("duplicate topic name: " + name);
        }
        topic_index[name] = map.topics.size();
        map.topics.push_back(std::move(name));
    }
    if (!j.contains("hashtag_map") || !j["hashtag_map"].is_object()) {
        throw DataError("topic label map needs a \"hashtag_map\" object: " + path.string());
    }
    for (const auto& [hashtag, topic] : j["hashtag_map"].items()) {
        const auto it = topic_index.find(topic.get<std::string>());
        if (it == topic_index.end()) {
            throw DataError("hashtag_map references unknown topic: " + topic.get<std::string>());
        }
        map.hashtag_to_topic[normalize_text(hashtag)] = it->second;
    }
    return map;
}

std::vector<RawTweet> read_corpus_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open corpus: " + path.string());
    std::vector<RawTweet> tweets;
    std::unordered_set<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw DataError("bad corpus line " + std::to_string(line_no) + ": " + e.what());
        }
        RawTweet t;
        t.id = j.at("id").get<std::string>();
        t.user_id = j.at("user_id").get<std::string>();
        t.text = j.at("text").get<std::string>();
        if (j.contains("hashtags")) {
            t.hashtags = j["hashtags"].get<std::vector<std::string>>();
        }
        if (t.id.empty()) {
            throw DataError("empty tweet id at corpus line " + std::to_string(line_no));
        }
        if (!ids.insert(t.id).second) {
            throw DataError("duplicate tweet id: " + t.id);
        }
        tweets.push_back(std::move(t));
    }
    return tweets;
}

void write_tokens_jsonl(const std::filesystem::path& path,
                        const std::vector<TokenizedTweet>& tweets) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open file for writing: " + path.string());
    for (const auto& t : tweets) {
        json j;
        j["id"] = t.id;
        j["user_id"] = t.user_id;
        j["tokens"] = t.tokens;
        j["hashtags"] = t.hashtags;
        out << j.dump() << '\n';
    }
    if (!out) throw DataError("write failed: " + path.string());
}

std::vector<TokenizedTweet> read_tokens_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open tokens file: " + path.string());
    std::vector<TokenizedTweet> tweets;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw DataError("bad tokens line " + std::to_string(line_no) + ": " + e.what());
        }
        TokenizedTweet t;
        t.id = j.at("id").get<std::string>();
        t.user_id = j.at("user_id").get<std::string>();
        t.tokens = j.at("tokens").get<std::vector<std::string>>();
        t.hashtags = j.at("hashtags").get<std::vector<std::string>>();
        tweets.push_back(std::move(t));
    }
    return tweets;
}

void write_labels_csv(const std::filesystem::path& path,
                      const std::vector<LabeledTweet>& labels) {
    std::string out = "tweet_id,topic_index\n";
    for (const auto& l : labels) {
        out += csv_safe(l.tweet_id);
        out += ',';
        out += std::to_string(l.topic_index);
        out += '\n';
    }
    write_text_file(path, out);
}

std::vector<LabeledTweet> read_labels_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open labels file: " + path.string());
    std::vector<LabeledTweet> labels;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (first) {
            first = false;
            continue;
        }
        if (line.empty()) continue;
        const auto fields = split(line, ',');
        if (fields.size() != 2) throw DataError("bad labels row: " + line);
        labels.push_back({fields[0], static_cast<std::size_t>(parse_int(fields[1]))});
    }
    return labels;
}

} // namespace mum::corpus
