#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace footgan {

// Ratings document shared with the listening-test UI:
// {participant: {id, experience: {critical_listening, years_music,
//   years_engineering, years_sound_design}, headphones},
//  pages: [{series_id, marks: {condition: value in [0, 1]}}]}

struct Experience {
  std::optional<bool> critical_listening;
  double years_music = 0.0;
  double years_engineering = 0.0;
  double years_sound_design = 0.0;
};

struct Participant {
  std::string id;
  Experience experience;
  std::string headphones;
};

struct RatingRecord {
  std::string participant_id;
  std::string series_id;
  std::string condition;
  double value = 0.0;
  std::string page_id;
};

struct RatingPage {
  std::string page_id;  // "<participant>/<series>#<index in file>"
  std::string participant_id;
  std::string series_id;
  std::optional<bool> critical_listening;
  std::map<std::string, double> marks;

  std::vector<RatingRecord> records() const;
};

struct RatingsDocument {
  Participant participant;
  std::vector<RatingPage> pages;
};

struct SchemaIssue {
  std::string source;
  int page = -1;  // index into pages, -1 for document-level issues
  std::string reason;
};

/// All schema problems in a document. Duplicate keys are found on the raw
/// text, so prefer this overload when the text is at hand.
std::vector<SchemaIssue> validate_ratings_text(const std::string& text, const std::string& source = "");

/// Throws SchemaViolation listing every problem.
RatingsDocument parse_ratings(const std::string& text, const std::string& source = "");

nlohmann::json ratings_to_json(const RatingsDocument& doc);

struct LoadedRatings {
  std::vector<RatingPage> pages;
  std::vector<Participant> participants;
  std::vector<SchemaIssue> issues;
  int rejected_pages = 0;
};

/// Reads files, or every *.json in given directories (sorted). In strict mode
/// any issue throws SchemaViolation; otherwise malformed pages are dropped
/// and reported in `issues`, and documents with broken participant data are
/// dropped whole.
LoadedRatings load_ratings(const std::vector<std::filesystem::path>& inputs, bool strict = true);

struct ExclusionRules {
  std::string anchor = "PM1";
  double anchor_max = 0.1;
  std::string reference = "REAL";
  double reference_min = 0.5;
  bool require_experience = false;
};

struct ExclusionEntry {
  std::string page_id;
  std::vector<std::string> rules;  // "anchor", "reference", "experience"
};

struct ExclusionResult {
  std::vector<RatingPage> retained;
  std::vector<RatingPage> excluded;
  std::vector<ExclusionEntry> log;  // one entry per excluded page
};

/// Whole pages are kept or dropped.
ExclusionResult apply_exclusions(const std::vector<RatingPage>& pages, const ExclusionRules& rules = {});

/// Linear interpolation between order statistics at h = (n - 1) q.
double quantile_inclusive(const std::vector<double>& sorted, double q);

struct ConditionStats {
  std::string condition;
  int n = 0;
  double mean = 0.0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double iqr = 0.0;
  double whisker_low = 0.0;   // smallest value >= q1 - 1.5 iqr
  double whisker_high = 0.0;  // largest value <= q3 + 1.5 iqr
  std::vector<double> outliers;
};

struct RatingsSummary {
  int pages = 0;
  std::vector<ConditionStats> conditions;

  const ConditionStats& at(const std::string& condition) const;
  nlohmann::json to_json() const;
  std::string to_csv() const;
};

/// NoDataRetained for an empty page list.
RatingsSummary summarize(const std::vector<RatingPage>& pages);

/// Backs POST /results: validates a submission and stores it as its own
/// file in `dir`.
class ResultsCollector {
 public:
  explicit ResultsCollector(std::filesystem::path dir);

  struct Outcome {
    int status = 200;
    nlohmann::json body;
    std::optional<std::filesystem::path> file;
  };
  Outcome submit(const std::string& body);
  const std::filesystem::path& directory() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::mutex mutex_;
  int64_t next_ = 0;
};

/// Minimal HTTP front for a ResultsCollector: POST /results (with CORS
/// preflight) and an optional static mount for stimuli and UI files.
class ResultsServer {
 public:
  explicit ResultsServer(ResultsCollector& collector, std::optional<std::filesystem::path> static_dir = {});
  ~ResultsServer();
  ResultsServer(const ResultsServer&) = delete;
  ResultsServer& operator=(const ResultsServer&) = delete;

  /// Returns the bound port (port 0 picks a free one), or -1.
  int bind(const std::string& host, int port);
  void listen();  // blocks until stop()
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace footgan
