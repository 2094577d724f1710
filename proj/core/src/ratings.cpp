#include "footgan/ratings.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "footgan/checkpoint.hpp"
#include "footgan/conditions.hpp"
#include "footgan/error.hpp"

namespace footgan {
namespace fs = std::filesystem;
using nlohmann::json;

bool is_known_condition(const std::string& name) {
  return std::find(kConditions.begin(), kConditions.end(), name) != kConditions.end();
}

std::vector<RatingRecord> RatingPage::records() const {
  std::vector<RatingRecord> out;
  for (const auto& [condition, value] : marks) out.push_back({participant_id, series_id, condition, value, page_id});
  return out;
}

namespace {

struct DuplicateKey {
  int page;
  std::string key;
};

// nlohmann keeps the last of repeated keys, so repeats are caught during the parse.
json parse_tracking_duplicates(const std::string& text, std::vector<DuplicateKey>& dups) {
  struct Frame {
    bool array = false;
    int64_t count = 0;
    std::string key;
    std::set<std::string> keys;
  };
  std::vector<Frame> stack;
  json::parser_callback_t cb = [&](int, json::parse_event_t ev, json& parsed) {
    switch (ev) {
      case json::parse_event_t::object_start:
      case json::parse_event_t::array_start:
        if (!stack.empty() && stack.back().array) ++stack.back().count;
        stack.push_back({ev == json::parse_event_t::array_start, 0, {}, {}});
        break;
      case json::parse_event_t::key: {
        auto& f = stack.back();
        f.key = parsed.get<std::string>();
        if (!f.keys.insert(f.key).second) {
          const bool in_marks = stack.size() == 4 && stack[0].key == "pages" && stack[1].array && stack[2].key == "marks";
          dups.push_back({in_marks ? static_cast<int>(stack[1].count - 1) : -1, f.key});
        }
        break;
      }
      case json::parse_event_t::value:
        if (!stack.empty() && stack.back().array) ++stack.back().count;
        break;
      case json::parse_event_t::object_end:
      case json::parse_event_t::array_end:
        stack.pop_back();
        break;
    }
    return true;
  };
  return json::parse(text, cb);
}

bool is_real_number(const json& v) { return v.is_number() && std::isfinite(v.get<double>()); }

void check_participant(const json& root, const std::string& src, std::vector<SchemaIssue>& issues) {
  auto issue = [&](const std::string& r) { issues.push_back({src, -1, r}); };
  if (!root.contains("participant") || !root["participant"].is_object()) return issue("missing participant object");
  const auto& p = root["participant"];
  if (!p.contains("id") || !p["id"].is_string() || p["id"].get<std::string>().empty()) {
    issue("participant.id must be a non-empty string");
  }
  if (p.contains("headphones") && !p["headphones"].is_string()) issue("participant.headphones must be a string");
  if (!p.contains("experience")) return;
  const auto& e = p["experience"];
  if (!e.is_object()) return issue("participant.experience must be an object");
  if (e.contains("critical_listening") && !e["critical_listening"].is_boolean() && !e["critical_listening"].is_null()) {
    issue("experience.critical_listening must be a boolean");
  }
  for (const char* k : {"years_music", "years_engineering", "years_sound_design"}) {
    if (!e.contains(k) || e[k].is_null()) continue;
    if (!is_real_number(e[k]) || e[k].get<double>() < 0.0) issue(std::string("experience.") + k + " must be a number >= 0");
  }
}

void check_page(const json& page, int index, const std::string& src, std::set<std::string>& seen_series,
                std::vector<SchemaIssue>& issues) {
  auto issue = [&](const std::string& r) { issues.push_back({src, index, r}); };
  if (!page.is_object()) return issue("page is not an object");
  if (!page.contains("series_id") || !page["series_id"].is_string() || page["series_id"].get<std::string>().empty()) {
    issue("series_id must be a non-empty string");
  } else if (!seen_series.insert(page["series_id"].get<std::string>()).second) {
    issue("series '" + page["series_id"].get<std::string>() + "' rated twice");
  }
  if (!page.contains("marks") || !page["marks"].is_object()) return issue("marks must be an object");
  const auto& marks = page["marks"];
  for (const auto& [cond, v] : marks.items()) {
    if (!is_known_condition(cond)) issue("unknown condition '" + cond + "'");
    if (!is_real_number(v)) {
      issue("mark for " + cond + " is not a number");
    } else if (v.get<double>() < 0.0 || v.get<double>() > 1.0) {
      issue("mark for " + cond + " is outside [0, 1]: " + v.dump());
    }
  }
  for (const auto& c : kConditions) {
    if (!marks.contains(c)) issue("missing mark for " + c);
  }
}

std::vector<SchemaIssue> validate_parsed(const json& root, const std::vector<DuplicateKey>& dups,
                                         const std::string& src) {
  std::vector<SchemaIssue> issues;
  if (!root.is_object()) return {{src, -1, "document is not an object"}};
  check_participant(root, src, issues);
  for (const auto& d : dups) {
    issues.push_back({src, d.page, d.page >= 0 ? "duplicate condition '" + d.key + "'" : "duplicate key '" + d.key + "'"});
  }
  if (!root.contains("pages") || !root["pages"].is_array()) {
    issues.push_back({src, -1, "pages must be an array"});
    return issues;
  }
  std::set<std::string> seen;
  for (size_t i = 0; i < root["pages"].size(); ++i) check_page(root["pages"][i], static_cast<int>(i), src, seen, issues);
  return issues;
}

std::string format_issues(const std::vector<SchemaIssue>& issues) {
  std::string msg;
  for (const auto& i : issues) {
    if (!msg.empty()) msg += "; ";
    if (!i.source.empty()) msg += i.source + ": ";
    if (i.page >= 0) msg += "page " + std::to_string(i.page) + ": ";
    msg += i.reason;
  }
  return msg;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::UnreadableFile, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Participant participant_from(const json& root) {
  Participant p;
  const auto& pj = root.at("participant");
  p.id = pj.at("id").get<std::string>();
  p.headphones = pj.value("headphones", std::string());
  if (pj.contains("experience")) {
    const auto& e = pj["experience"];
    if (e.contains("critical_listening") && e["critical_listening"].is_boolean()) {
      p.experience.critical_listening = e["critical_listening"].get<bool>();
    }
    auto years = [&](const char* k) { return e.contains(k) && e[k].is_number() ? e[k].get<double>() : 0.0; };
    p.experience.years_music = years("years_music");
    p.experience.years_engineering = years("years_engineering");
    p.experience.years_sound_design = years("years_sound_design");
  }
  return p;
}

RatingPage page_from(const json& page, const Participant& p, int index) {
  RatingPage r;
  r.participant_id = p.id;
  r.series_id = page.at("series_id").get<std::string>();
  r.page_id = p.id + "/" + r.series_id + "#" + std::to_string(index);
  r.critical_listening = p.experience.critical_listening;
  for (const auto& [cond, v] : page.at("marks").items()) r.marks[cond] = v.get<double>();
  return r;
}

struct Parsed {
  json root;
  std::vector<SchemaIssue> issues;
  bool parsed = false;
};

Parsed parse_and_validate(const std::string& text, const std::string& source) {
  Parsed out;
  std::vector<DuplicateKey> dups;
  try {
    out.root = parse_tracking_duplicates(text, dups);
    out.parsed = true;
  } catch (const json::exception& e) {
    out.issues.push_back({source, -1, std::string("invalid JSON: ") + e.what()});
    return out;
  }
  out.issues = validate_parsed(out.root, dups, source);
  return out;
}

}  // namespace

std::vector<SchemaIssue> validate_ratings_text(const std::string& text, const std::string& source) {
  return parse_and_validate(text, source).issues;
}

RatingsDocument parse_ratings(const std::string& text, const std::string& source) {
  const Parsed p = parse_and_validate(text, source);
  if (!p.issues.empty()) throw Error(Errc::SchemaViolation, format_issues(p.issues));
  RatingsDocument doc;
  doc.participant = participant_from(p.root);
  for (size_t i = 0; i < p.root["pages"].size(); ++i) {
    doc.pages.push_back(page_from(p.root["pages"][i], doc.participant, static_cast<int>(i)));
  }
  return doc;
}

json ratings_to_json(const RatingsDocument& doc) {
  json exp = {{"years_music", doc.participant.experience.years_music},
              {"years_engineering", doc.participant.experience.years_engineering},
              {"years_sound_design", doc.participant.experience.years_sound_design}};
  exp["critical_listening"] = doc.participant.experience.critical_listening
                                  ? json(*doc.participant.experience.critical_listening)
                                  : json(nullptr);
  json pages = json::array();
  for (const auto& p : doc.pages) pages.push_back({{"series_id", p.series_id}, {"marks", p.marks}});
  return {{"participant",
           {{"id", doc.participant.id}, {"experience", exp}, {"headphones", doc.participant.headphones}}},
          {"pages", pages}};
}

LoadedRatings load_ratings(const std::vector<fs::path>& inputs, bool strict) {
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(in)) {
        if (e.is_regular_file() && e.path().extension() == ".json") found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.push_back(in);
    }
  }
  LoadedRatings out;
  for (const auto& f : files) {
    const Parsed p = parse_and_validate(read_text(f), f.string());
    if (strict && !p.issues.empty()) throw Error(Errc::SchemaViolation, format_issues(p.issues));
    out.issues.insert(out.issues.end(), p.issues.begin(), p.issues.end());
    const bool doc_broken = !p.parsed || std::any_of(p.issues.begin(), p.issues.end(),
                                                     [](const SchemaIssue& i) { return i.page < 0; });
    if (doc_broken) {
      if (p.parsed && p.root.is_object() && p.root.contains("pages") && p.root["pages"].is_array()) {
        out.rejected_pages += static_cast<int>(p.root["pages"].size());
      }
      continue;
    }
    const Participant participant = participant_from(p.root);
    out.participants.push_back(participant);
    std::set<int> bad;
    for (const auto& i : p.issues) bad.insert(i.page);
    for (size_t i = 0; i < p.root["pages"].size(); ++i) {
      if (bad.count(static_cast<int>(i)) != 0) {
        ++out.rejected_pages;
        continue;
      }
      out.pages.push_back(page_from(p.root["pages"][i], participant, static_cast<int>(i)));
    }
  }
  return out;
}

ExclusionResult apply_exclusions(const std::vector<RatingPage>& pages, const ExclusionRules& rules) {
  ExclusionResult r;
  for (const auto& page : pages) {
    ExclusionEntry entry{page.page_id, {}};
    auto mark = [&](const std::string& c) -> std::optional<double> {
      auto it = page.marks.find(c);
      return it == page.marks.end() ? std::nullopt : std::optional<double>(it->second);
    };
    if (auto a = mark(rules.anchor); a && *a > rules.anchor_max) entry.rules.push_back("anchor");
    if (auto ref = mark(rules.reference); ref && *ref < rules.reference_min) entry.rules.push_back("reference");
    if (rules.require_experience && page.critical_listening != true) entry.rules.push_back("experience");
    if (entry.rules.empty()) {
      r.retained.push_back(page);
    } else {
      r.excluded.push_back(page);
      r.log.push_back(std::move(entry));
    }
  }
  return r;
}

double quantile_inclusive(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw Error(Errc::NoDataRetained, "quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<size_t>(std::floor(h));
  const size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

const ConditionStats& RatingsSummary::at(const std::string& condition) const {
  for (const auto& c : conditions) {
    if (c.condition == condition) return c;
  }
  throw Error(Errc::NoDataRetained, "no ratings for condition " + condition);
}

RatingsSummary summarize(const std::vector<RatingPage>& pages) {
  if (pages.empty()) throw Error(Errc::NoDataRetained, "no pages retained after exclusions");
  std::map<std::string, std::vector<double>> values;
  for (const auto& p : pages) {
    for (const auto& [c, v] : p.marks) values[c].push_back(v);
  }
  RatingsSummary s;
  s.pages = static_cast<int>(pages.size());
  auto add = [&](const std::string& name, std::vector<double> v) {
    std::sort(v.begin(), v.end());
    ConditionStats st;
    st.condition = name;
    st.n = static_cast<int>(v.size());
    double sum = 0.0;
    for (double x : v) sum += x;  // sorted order keeps the sum independent of page order
    st.mean = sum / static_cast<double>(v.size());
    st.median = quantile_inclusive(v, 0.5);
    st.q1 = quantile_inclusive(v, 0.25);
    st.q3 = quantile_inclusive(v, 0.75);
    st.iqr = st.q3 - st.q1;
    const double lo_fence = st.q1 - 1.5 * st.iqr;
    const double hi_fence = st.q3 + 1.5 * st.iqr;
    st.whisker_low = st.q1;
    st.whisker_high = st.q3;
    for (double x : v) {
      if (x < lo_fence || x > hi_fence) {
        st.outliers.push_back(x);
      } else {
        st.whisker_low = std::min(st.whisker_low, x);
        st.whisker_high = std::max(st.whisker_high, x);
      }
    }
    s.conditions.push_back(std::move(st));
  };
  for (const auto& c : kConditions) {
    if (auto it = values.find(c); it != values.end()) add(c, it->second);
  }
  for (const auto& [c, v] : values) {
    if (!is_known_condition(c)) add(c, v);
  }
  return s;
}

json RatingsSummary::to_json() const {
  json conds = json::object();
  for (const auto& c : conditions) {
    conds[c.condition] = {{"n", c.n},           {"mean", c.mean},
                          {"median", c.median}, {"q1", c.q1},
                          {"q3", c.q3},         {"iqr", c.iqr},
                          {"whisker_low", c.whisker_low}, {"whisker_high", c.whisker_high},
                          {"outliers", c.outliers}};
  }
  return {{"pages", pages},
          {"quartile_method", "linear interpolation between order statistics, h = (n - 1) q (inclusive)"},
          {"whisker_rule", "most extreme values within 1.5 IQR of the quartiles"},
          {"order", [&] {
             json o = json::array();
             for (const auto& c : conditions) o.push_back(c.condition);
             return o;
           }()},
          {"conditions", conds}};
}

std::string RatingsSummary::to_csv() const {
  std::string out = "condition,n,mean,median,q1,q3,iqr,whisker_low,whisker_high,outliers\n";
  char buf[256];
  for (const auto& c : conditions) {
    std::string outl;
    for (double x : c.outliers) {
      std::snprintf(buf, sizeof(buf), "%s%.6g", outl.empty() ? "" : " ", x);
      outl += buf;
    }
    std::snprintf(buf, sizeof(buf), "%s,%d,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,", c.condition.c_str(), c.n, c.mean,
                  c.median, c.q1, c.q3, c.iqr, c.whisker_low, c.whisker_high);
    out += buf + outl + "\n";
  }
  return out;
}

ResultsCollector::ResultsCollector(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

ResultsCollector::Outcome ResultsCollector::submit(const std::string& body) {
  Outcome o;
  const Parsed p = parse_and_validate(body, "submission");
  if (!p.parsed) {
    o.status = 400;
    o.body = {{"status", "rejected"}, {"error", p.issues.front().reason}};
    return o;
  }
  if (!p.issues.empty()) {
    json list = json::array();
    for (const auto& i : p.issues) list.push_back({{"page", i.page}, {"reason", i.reason}});
    o.status = 422;
    o.body = {{"status", "rejected"}, {"issues", list}};
    return o;
  }
  std::string id = p.root["participant"]["id"].get<std::string>();
  for (char& ch : id) {
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '_') ch = '_';
  }
  std::lock_guard<std::mutex> lock(mutex_);
  char name[64];
  fs::path file;
  do {
    std::snprintf(name, sizeof(name), "results_%06lld_", static_cast<long long>(next_++));
    file = dir_ / (name + id + ".json");
  } while (fs::exists(file));
  write_json_file(file, p.root);
  o.status = 201;
  o.body = {{"status", "stored"}, {"file", file.filename().string()}, {"pages", p.root["pages"].size()}};
  o.file = file;
  return o;
}

}  // namespace footgan
