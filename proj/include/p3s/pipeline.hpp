#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "p3s/interactions.hpp"
#include "p3s/latent_model.hpp"

namespace p3s {

struct SplitConfig {
  // Share of each user's chronologically ordered purchases kept for
  // training; the count is rounded up.
  double purchase_fraction = 0.5;
};

struct SplitResult {
  Dataset dataset;
  InteractionLog test_log;  // test purchases with their timestamps
  std::size_t discarded_clicks = 0;  // clicks after the cutoff
};

// Per user: purchases sorted by (timestamp, input order), the first
// ceil(fraction * count) go to training and the rest to test. Training
// keeps clicks up to the last training purchase; later clicks are dropped.
// Ids are carried over from `log` unchanged.
SplitResult chronological_split(const InteractionLog& log,
                                const SplitConfig& cfg = {});

struct SynthConfig {
  std::size_t n = 200;
  std::size_t m = 300;
  std::size_t true_k = 8;
  std::size_t clicks_per_user = 30;
  std::size_t purchases_per_user = 6;
  double noise = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthResult {
  InteractionLog log;   // users "u<j>", items "i<j>", indices in that order
  ModelParams planted;  // item bias is zero
};

// Planted N(0,1) factors; each user clicks clicks_per_user distinct items
// drawn without replacement with probability proportional to
// exp(score / noise), then purchases purchases_per_user of the clicked items
// by the same rule. A purchase directly follows its click in time.
SynthResult generate_synthetic(const SynthConfig& cfg);

// RecSys Challenge 2015 files (comma separated): clicks are
// session,timestamp,item,category and buys are
// session,timestamp,item,price,quantity. Sessions become users.
std::vector<RawEvent> read_recsys2015(std::istream& clicks, std::istream& buys);
// ISO-8601 "YYYY-MM-DDThh:mm:ss[.fff]Z" to Unix milliseconds.
std::int64_t parse_iso8601_ms(const std::string& text);

// Writes `contents` to a sibling temporary file and renames it over `path`.
void atomic_write(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

std::vector<RawEvent> read_event_file(const std::filesystem::path& path);

// A dataset directory holds train.tsv (training events) and test.tsv (test
// purchases), both in the event format.
inline constexpr const char* kTrainFile = "train.tsv";
inline constexpr const char* kTestFile = "test.tsv";
inline constexpr const char* kEventsFile = "events.tsv";

void save_dataset(const std::filesystem::path& dir, const InteractionLog& train,
                  const InteractionLog& test);
// Ids are assigned in first-appearance order over train.tsv then test.tsv,
// so loading the same directory twice yields the same indices.
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace p3s
