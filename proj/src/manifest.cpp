#include "fofe/manifest.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "fofe/error.hpp"
#include "fofe/text.hpp"

namespace fofe {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool file_non_empty(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  return in && in.tellg() > 0;
}

}  // namespace

void validate_manifest(const std::vector<SourceSpec>& sources, bool check_paths) {
  if (sources.empty()) fail(ErrorCode::InvalidConfig, "manifest has no sources");
  std::set<std::string> ids;
  double sum = 0.0;
  for (const auto& s : sources) {
    if (s.id.empty()) fail(ErrorCode::InvalidConfig, "manifest source with empty id");
    if (!ids.insert(s.id).second) {
      fail(ErrorCode::InvalidConfig, "duplicate source id '" + s.id + "'");
    }
    if (s.alpha < 0.0 || s.alpha > 1.0) {
      fail(ErrorCode::InvalidConfig, "source '" + s.id + "' alpha " + std::to_string(s.alpha) +
                                         " outside [0,1]");
    }
    if (check_paths && !file_non_empty(s.path)) {
      fail(ErrorCode::InvalidConfig, "source '" + s.id + "' path '" + s.path +
                                         "' missing or empty");
    }
    sum += s.alpha;
  }
  if (std::abs(sum - 1.0) > kAlphaSumTolerance) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", sum);
    fail(ErrorCode::InvalidConfig,
         std::string("manifest alphas sum to ") + buf + ", must sum to 1 within 1e-9");
  }
}

std::vector<SourceSpec> load_manifest(const std::string& path, bool check_paths) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open manifest '" + path + "'");

  std::vector<SourceSpec> sources;
  SourceSpec current;
  bool have_section = false;
  auto flush = [&] {
    if (have_section) sources.push_back(current);
  };

  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[' && t.back() == ']') {
      flush();
      current = SourceSpec{};
      current.id = trim(t.substr(1, t.size() - 2));
      have_section = true;
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos || !have_section) {
      fail(ErrorCode::InvalidConfig, "manifest '" + path + "' line " + std::to_string(lineno) +
                                         ": expected [section] or key = value");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key == "path") {
      current.path = value;
    } else if (key == "application") {
      current.application = app_from_name(value);
    } else if (key == "alpha") {
      try {
        std::size_t pos = 0;
        current.alpha = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
      } catch (const std::exception&) {
        fail(ErrorCode::InvalidConfig, "manifest '" + path + "' line " + std::to_string(lineno) +
                                           ": bad alpha '" + value + "'");
      }
    } else {
      fail(ErrorCode::InvalidConfig, "manifest '" + path + "' line " + std::to_string(lineno) +
                                         ": unknown key '" + key + "'");
    }
  }
  flush();
  validate_manifest(sources, check_paths);
  return sources;
}

void save_manifest(const std::vector<SourceSpec>& sources, const std::string& path) {
  std::ostringstream os;
  os << "# fofelm source manifest\n";
  for (const auto& s : sources) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", s.alpha);
    os << "[" << s.id << "]\n"
       << "path = " << s.path << "\n"
       << "application = " << app_name(s.application) << "\n"
       << "alpha = " << buf << "\n\n";
  }
  write_file(path, os.str());
}

}  // namespace fofe
