#include "fofe/synthetic.hpp"

#include <array>
#include <filesystem>
#include <sstream>

#include "fofe/error.hpp"
#include "fofe/rng.hpp"
#include "fofe/text.hpp"

namespace fofe {

namespace {

using List = std::vector<const char*>;

const List kContacts = {
    "mom", "dad", "alex", "sarah", "mike", "emma", "james", "olivia", "liam", "sophia",
    "noah", "ava", "lucas", "mia", "ethan", "amelia", "oscar", "chloe", "daniel", "grace",
    "henry", "ruby", "leo", "ella", "max", "iris", "sam", "nora", "ben", "lily"};

const List kArtists = {
    "lady gaga", "the beatles", "taylor swift", "elton john", "queen", "drake", "adele",
    "coldplay", "rihanna", "eminem", "beyonce", "metallica", "abba", "nirvana", "madonna",
    "prince", "blur", "oasis", "kraftwerk", "bjork"};

const List kGenres = {"jazz", "rock", "classical", "country", "reggae", "blues",
                      "techno", "disco", "folk", "opera", "soul", "funk"};

const List kCities = {
    "paris", "london", "tokyo", "berlin", "madrid", "rome", "vienna", "oslo", "dublin",
    "lisbon", "prague", "athens", "cairo", "sydney", "toronto", "chicago", "boston",
    "seattle", "denver", "austin", "miami", "phoenix", "dallas", "atlanta", "portland"};

const List kNumbers = {"one", "two", "three", "four", "five", "six", "seven", "eight",
                       "nine", "ten", "fifteen", "twenty", "thirty", "forty", "fifty"};

const List kRooms = {"kitchen", "bedroom", "garage", "office", "bathroom", "hallway",
                     "basement", "porch"};

const List kWeekdays = {"monday", "tuesday", "wednesday", "thursday", "friday",
                        "saturday", "sunday"};

const List kApps = {"camera", "calendar", "maps", "mail", "notes", "photos", "clock",
                    "music", "podcasts", "settings"};

const List kThings = {"groceries", "tickets", "laundry", "keys", "charger", "umbrella",
                      "passport", "leftovers", "invoices", "slides"};

// VA query skeletons.  {X} expands from the matching list; queries stay
// short and command-like.
const List kVaTemplates = {
    "<wakeword_1> <wakeword_2>",
    "call {contact}",
    "<wakeword_1> <wakeword_2> call {contact}",
    "text {contact}",
    "play {artist}",
    "play some {genre} music",
    "what time is it",
    "what is the weather in {city}",
    "set a timer for {number} minutes",
    "turn on the {room} lights",
    "turn off the {room} lights",
    "how old is {artist}",
    "open {app}",
    "next song",
    "volume up",
    "navigate to {city}",
    "is it going to rain on {weekday}",
    "remind me about the {thing}",
    "what is {number} plus {number}",
    "call {contact} on speaker",
};

// STT clause skeletons; dictated punctuation marks are separate words.
const List kSttClauses = {
    "i will be home around {number} ,",
    "can you pick up dinner on your way back ?",
    "i just landed and i am waiting for the luggage .",
    "the meeting this morning went really well .",
    "i think we should move our call to {weekday} afternoon .",
    "please do not forget to bring the {thing} tomorrow .",
    "i miss you .",
    "thanks again for everything you did last {weekday} .",
    "let me know when you are free to talk .",
    "i am running about {number} minutes late because of traffic .",
    "we are thinking about visiting {city} in the spring .",
    "could you send me the notes from the {weekday} meeting ?",
    "the kids want {genre} music for the party .",
    "i left the {thing} in the {room} ,",
    "it was so good to see {contact} and the family yesterday .",
    "sorry i missed your call earlier ,",
    "i was in a meeting that ran long .",
    "do you want to grab lunch near the office on {weekday} ?",
    "the doctor said everything looks fine .",
    "my flight to {city} got delayed by {number} hours .",
};

// Low indices are drawn more often, giving the corpus a head-heavy
// unigram profile.
std::size_t skewed_index(Rng& rng, std::size_t n) {
  const double u = rng.next_double();
  return static_cast<std::size_t>(u * u * static_cast<double>(n));
}

const List& list_for(const std::string& slot) {
  if (slot == "contact") return kContacts;
  if (slot == "artist") return kArtists;
  if (slot == "genre") return kGenres;
  if (slot == "city") return kCities;
  if (slot == "number") return kNumbers;
  if (slot == "room") return kRooms;
  if (slot == "weekday") return kWeekdays;
  if (slot == "app") return kApps;
  if (slot == "thing") return kThings;
  fail(ErrorCode::InvalidArgument, "unknown template slot '" + slot + "'");
}

std::string expand(const char* tmpl, Rng& rng) {
  std::string out;
  const std::string s(tmpl);
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] == '{') {
      const auto close = s.find('}', i);
      const std::string slot = s.substr(i + 1, close - i - 1);
      const List& lst = list_for(slot);
      out += lst[skewed_index(rng, lst.size())];
      i = close + 1;
    } else {
      out += s[i++];
    }
  }
  return out;
}

std::string make_va_line(Rng& rng) {
  return expand(kVaTemplates[skewed_index(rng, kVaTemplates.size())], rng);
}

std::string make_stt_line(Rng& rng) {
  // 1..3 clauses joined into one dictated message.
  const std::size_t clauses = 1 + rng.next_index(3);
  std::string out;
  for (std::size_t c = 0; c < clauses; ++c) {
    if (c > 0) out += ' ';
    out += expand(kSttClauses[skewed_index(rng, kSttClauses.size())], rng);
  }
  return out;
}

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  SyntheticCorpus out;
  out.va_lines.reserve(static_cast<std::size_t>(spec.va_queries));
  for (std::int64_t i = 0; i < spec.va_queries; ++i) out.va_lines.push_back(make_va_line(rng));
  out.stt_lines.reserve(static_cast<std::size_t>(spec.stt_queries));
  for (std::int64_t i = 0; i < spec.stt_queries; ++i) out.stt_lines.push_back(make_stt_line(rng));
  return out;
}

std::vector<SourceSpec> write_synthetic(const SyntheticSpec& spec, std::uint64_t seed,
                                        const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const SyntheticCorpus corpus = generate_synthetic(spec, seed);

  auto join = [](const std::vector<std::string>& lines) {
    std::ostringstream os;
    for (const auto& l : lines) os << l << '\n';
    return os.str();
  };
  const std::string va_path = out_dir + "/va.txt";
  const std::string stt_path = out_dir + "/stt.txt";
  write_file(va_path, join(corpus.va_lines));
  write_file(stt_path, join(corpus.stt_lines));

  std::vector<SourceSpec> sources = {
      {"va_user", va_path, ApplicationId::VA, spec.alpha_va},
      {"stt_user", stt_path, ApplicationId::STT, 1.0 - spec.alpha_va},
  };
  save_manifest(sources, out_dir + "/manifest.txt");
  return sources;
}

}  // namespace fofe
