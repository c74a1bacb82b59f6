#include "fofe/text.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "fofe/error.hpp"

namespace fofe {

namespace {

bool is_space_codepoint(std::uint32_t cp) {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

// Decodes one UTF-8 code point at position i; advances i.  Malformed
// bytes are passed through as-is (latin-1 fallback) so tokenization
// never throws on odd input.
std::uint32_t next_codepoint(std::string_view s, std::size_t& i, std::size_t& len) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  std::size_t n = 1;
  std::uint32_t cp = b0;
  if (b0 >= 0xF0) { n = 4; cp = b0 & 0x07u; }
  else if (b0 >= 0xE0) { n = 3; cp = b0 & 0x0Fu; }
  else if (b0 >= 0xC0) { n = 2; cp = b0 & 0x1Fu; }
  if (n > 1) {
    if (i + n > s.size()) { len = 1; return b0; }
    for (std::size_t k = 1; k < n; ++k) {
      const auto bk = static_cast<unsigned char>(s[i + k]);
      if ((bk & 0xC0u) != 0x80u) { len = 1; return b0; }
      cp = (cp << 6) | (bk & 0x3Fu);
    }
  }
  len = n;
  return cp;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  std::size_t start = 0;
  bool in_token = false;
  while (i < line.size()) {
    std::size_t len = 1;
    const std::uint32_t cp = next_codepoint(line, i, len);
    if (is_space_codepoint(cp)) {
      if (in_token) {
        out.emplace_back(line.substr(start, i - start));
        in_token = false;
      }
    } else if (!in_token) {
      start = i;
      in_token = true;
    }
    i += len;
  }
  if (in_token) out.emplace_back(line.substr(start));
  return out;
}

Vocab::Vocab(const std::vector<std::string>& words) {
  words_.reserve(words.size() + 3);
  words_.push_back("<unk>");
  words_.push_back("<s>");
  words_.push_back("</s>");
  for (const auto& w : words) words_.push_back(w);
  for (std::size_t i = 0; i < words_.size(); ++i) {
    auto [it, inserted] = id_of_.emplace(words_[i], static_cast<WordId>(i));
    if (!inserted) fail(ErrorCode::InvalidArgument, "duplicate vocab word '" + words_[i] + "'");
  }
}

WordId Vocab::id_of(std::string_view word) const {
  auto it = id_of_.find(std::string(word));
  return it == id_of_.end() ? kUnk : it->second;
}

const std::string& Vocab::word_of(WordId id) const {
  if (id < 0 || id >= size()) fail(ErrorCode::InvalidArgument, "word id out of range");
  return words_[static_cast<std::size_t>(id)];
}

bool Vocab::contains(std::string_view word) const {
  return id_of_.find(std::string(word)) != id_of_.end();
}

std::uint64_t Vocab::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& w : words_) {
    h = fnv1a64(w, h);
    h = fnv1a64(std::string_view("\n", 1), h);
  }
  return h;
}

void Vocab::save(const std::string& path) const {
  std::ostringstream os;
  for (const auto& w : words_) os << w << '\n';
  write_file(path, os.str());
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open vocab file '" + path + "'");
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) words.push_back(line);
  }
  if (words.size() < 3 || words[0] != "<unk>" || words[1] != "<s>" || words[2] != "</s>") {
    fail(ErrorCode::InvalidConfig, "vocab file '" + path + "' missing reserved token header");
  }
  return Vocab(std::vector<std::string>(words.begin() + 3, words.end()));
}

Vocab build_vocab(const std::vector<std::string>& corpus_paths, std::int64_t top_k) {
  if (top_k < 1) fail(ErrorCode::InvalidArgument, "top_k must be >= 1");
  std::unordered_map<std::string, std::int64_t> counts;
  for (const auto& path : corpus_paths) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::Io, "cannot open corpus file '" + path + "'");
    std::string line;
    while (std::getline(in, line)) {
      for (auto& tok : tokenize(line)) ++counts[tok];
    }
  }
  counts.erase("<unk>");
  counts.erase("<s>");
  counts.erase("</s>");
  if (counts.empty()) fail(ErrorCode::EmptyInput, "no tokens");

  std::vector<std::pair<std::string, std::int64_t>> by_freq(counts.begin(), counts.end());
  std::sort(by_freq.begin(), by_freq.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (static_cast<std::int64_t>(by_freq.size()) > top_k) by_freq.resize(top_k);

  std::vector<std::string> words;
  words.reserve(by_freq.size());
  for (auto& [w, c] : by_freq) words.push_back(std::move(w));
  return Vocab(words);
}

namespace {

// Strips an optional application tag prefix ("VA\t" / "STT\t").
std::string_view strip_tag(std::string_view line, ApplicationId* app) {
  if (line.rfind("VA\t", 0) == 0) {
    if (app) *app = ApplicationId::VA;
    return line.substr(3);
  }
  if (line.rfind("STT\t", 0) == 0) {
    if (app) *app = ApplicationId::STT;
    return line.substr(4);
  }
  return line;
}

}  // namespace

std::vector<Query> load_queries(const std::string& path, const Vocab& vocab,
                                ApplicationId default_app, CorpusStats* stats) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open corpus file '" + path + "'");
  std::vector<Query> queries;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ApplicationId app = default_app;
    const auto body = strip_tag(line, &app);
    auto tokens = tokenize(body);
    if (tokens.empty()) continue;
    Query q;
    q.app = app;
    q.ids.reserve(tokens.size());
    for (const auto& tok : tokens) {
      const WordId id = vocab.id_of(tok);
      if (stats) {
        ++stats->tokens;
        if (id == Vocab::kUnk && tok != "<unk>") ++stats->oov_tokens;
      }
      q.ids.push_back(id);
    }
    queries.push_back(std::move(q));
  }
  return queries;
}

std::vector<std::string> load_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open file '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto body = strip_tag(line, nullptr);
    if (!body.empty()) lines.emplace_back(body);
  }
  return lines;
}

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (const char c : data) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open file '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot write file '" + path + "'");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) fail(ErrorCode::Io, "short write to '" + path + "'");
}

}  // namespace fofe
