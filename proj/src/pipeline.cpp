#include "p3s/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <fmt/core.h>

#include "p3s/error.hpp"

namespace p3s {

SplitResult chronological_split(const InteractionLog& log,
                                const SplitConfig& cfg) {
  if (!(cfg.purchase_fraction > 0.0 && cfg.purchase_fraction < 1.0)) {
    throw Error(ErrorCode::kConfig, "purchase fraction must be in (0, 1)");
  }
  const auto events = log.events();
  std::vector<std::vector<std::size_t>> purchases(log.num_users());
  for (std::size_t pos = 0; pos < events.size(); ++pos) {
    if (events[pos].kind == EventKind::kPurchase) {
      purchases[events[pos].user].push_back(pos);
    }
  }

  std::vector<bool> in_train(events.size(), false);
  std::vector<std::int64_t> cutoff(log.num_users(),
                                   std::numeric_limits<std::int64_t>::min());
  std::vector<std::vector<ItemIndex>> test(log.num_users());
  std::vector<Event> test_events;
  for (std::size_t u = 0; u < log.num_users(); ++u) {
    auto& order = purchases[u];
    if (order.size() < 2) {
      throw Error(ErrorCode::kSplit,
                  fmt::format("user {} has {} purchase(s); need at least 2",
                              log.users().lookup(static_cast<UserIndex>(u)),
                              order.size()));
    }
    // Positions are already in input order, so a stable sort by time keeps
    // that order among equal timestamps.
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return events[a].timestamp < events[b].timestamp;
    });
    const double share = cfg.purchase_fraction * static_cast<double>(order.size());
    const auto n_train = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::ceil(share - 1e-9)), 1, order.size());
    for (std::size_t r = 0; r < order.size(); ++r) {
      const Event& e = events[order[r]];
      if (r < n_train) {
        in_train[order[r]] = true;
        cutoff[u] = std::max(cutoff[u], e.timestamp);
      } else {
        test[u].push_back(e.item);
        test_events.push_back(e);
      }
    }
  }

  std::vector<Event> train;
  std::size_t discarded = 0;
  for (std::size_t pos = 0; pos < events.size(); ++pos) {
    const Event& e = events[pos];
    if (e.kind == EventKind::kPurchase) {
      if (in_train[pos]) train.push_back(e);
    } else if (e.timestamp <= cutoff[e.user]) {
      train.push_back(e);
    } else {
      ++discarded;
    }
  }
  std::stable_sort(test_events.begin(), test_events.end(),
                   [](const Event& a, const Event& b) { return a.user < b.user; });

  SplitResult result;
  result.dataset =
      Dataset(InteractionLog(std::move(train), log.users(), log.items()),
              std::move(test));
  result.test_log =
      InteractionLog(std::move(test_events), log.users(), log.items());
  result.discarded_clicks = discarded;
  return result;
}

void SynthConfig::validate() const {
  if (n < 1 || m < 1) throw Error(ErrorCode::kConfig, "need n, m >= 1");
  if (true_k < 1) throw Error(ErrorCode::kConfig, "true_k must be >= 1");
  if (purchases_per_user > clicks_per_user || clicks_per_user > m) {
    throw Error(ErrorCode::kConfig,
                fmt::format("need purchases ({}) <= clicks ({}) <= items ({})",
                            purchases_per_user, clicks_per_user, m));
  }
  if (!(noise > 0.0) || !std::isfinite(noise)) {
    throw Error(ErrorCode::kConfig, "noise must be > 0");
  }
}

namespace {

// Sequential sampling without replacement with probability proportional to
// exp(logit) is equivalent to sorting logit + Gumbel noise in descending
// order. Returns positions into `logits` in sampling order.
std::vector<std::size_t> gumbel_top(std::span<const double> logits,
                                    std::size_t count, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(
      std::numeric_limits<double>::min(), 1.0);
  std::vector<double> keys(logits.size());
  for (std::size_t j = 0; j < logits.size(); ++j) {
    keys[j] = logits[j] - std::log(-std::log(unit(rng)));
  }
  std::vector<std::size_t> order(logits.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count),
                    order.end(), [&](std::size_t a, std::size_t b) {
                      if (keys[a] != keys[b]) return keys[a] > keys[b];
                      return a < b;
                    });
  order.resize(count);
  return order;
}

}  // namespace

SynthResult generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  ModelParams planted(cfg.n, cfg.m, cfg.true_k);
  for (double& v : planted.user_factors()) v = normal(rng);
  for (double& v : planted.item_factors()) v = normal(rng);

  IdMap users;
  IdMap items;
  for (std::size_t u = 0; u < cfg.n; ++u) users.add(fmt::format("u{}", u));
  for (std::size_t i = 0; i < cfg.m; ++i) items.add(fmt::format("i{}", i));

  std::vector<Event> events;
  events.reserve(cfg.n * (cfg.clicks_per_user + cfg.purchases_per_user));
  std::int64_t clock = 0;
  std::vector<double> logits(cfg.m);
  for (std::size_t u = 0; u < cfg.n; ++u) {
    const auto uid = static_cast<UserIndex>(u);
    for (std::size_t i = 0; i < cfg.m; ++i) {
      logits[i] = score(planted, uid, static_cast<ItemIndex>(i)) / cfg.noise;
    }
    const auto clicked = gumbel_top(logits, cfg.clicks_per_user, rng);
    std::vector<double> clicked_logits;
    clicked_logits.reserve(clicked.size());
    for (std::size_t i : clicked) clicked_logits.push_back(logits[i]);
    const auto bought = gumbel_top(clicked_logits, cfg.purchases_per_user, rng);
    std::vector<bool> is_bought(clicked.size(), false);
    for (std::size_t j : bought) is_bought[j] = true;

    for (std::size_t j = 0; j < clicked.size(); ++j) {
      const auto item = static_cast<ItemIndex>(clicked[j]);
      events.push_back({uid, item, ++clock, EventKind::kClick});
      if (is_bought[j]) {
        events.push_back({uid, item, ++clock, EventKind::kPurchase});
      }
    }
  }
  return {InteractionLog(std::move(events), std::move(users), std::move(items)),
          std::move(planted)};
}

std::int64_t parse_iso8601_ms(const std::string& text) {
  int y = 0;
  unsigned mo = 0, d = 0, h = 0, mi = 0, s = 0;
  char tail[16] = {0};
  const int got = std::sscanf(text.c_str(), "%4d-%2u-%2uT%2u:%2u:%2u%15s", &y, &mo,
                              &d, &h, &mi, &s, tail);
  if (got < 6) {
    throw Error(ErrorCode::kParse, fmt::format("bad timestamp '{}'", text));
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y},
                                        std::chrono::month{mo},
                                        std::chrono::day{d}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 60) {
    throw Error(ErrorCode::kParse, fmt::format("bad timestamp '{}'", text));
  }
  std::int64_t millis = 0;
  std::string_view rest(tail);
  if (!rest.empty() && rest.front() == '.') {
    rest.remove_prefix(1);
    int digits = 0;
    while (!rest.empty() && rest.front() >= '0' && rest.front() <= '9') {
      if (digits < 3) millis = millis * 10 + (rest.front() - '0');
      ++digits;
      rest.remove_prefix(1);
    }
    if (digits == 0) {
      throw Error(ErrorCode::kParse, fmt::format("bad timestamp '{}'", text));
    }
    for (int p = digits; p < 3; ++p) millis *= 10;
  }
  if (!(rest.empty() || rest == "Z")) {
    throw Error(ErrorCode::kParse, fmt::format("bad timestamp '{}'", text));
  }
  const auto days = std::chrono::sys_days(ymd).time_since_epoch().count();
  const std::int64_t secs =
      static_cast<std::int64_t>(days) * 86400 + h * 3600 + mi * 60 + s;
  return secs * 1000 + millis;
}

namespace {

void read_recsys_file(std::istream& in, EventKind kind, std::size_t min_fields,
                      std::string_view label, std::vector<RawEvent>& out) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() < min_fields || fields[0].empty() || fields[2].empty()) {
      throw Error(ErrorCode::kParse,
                  fmt::format("{} line {}: expected at least {} fields", label,
                              line_no, min_fields));
    }
    try {
      out.push_back({fields[0], fields[2], parse_iso8601_ms(fields[1]), kind});
    } catch (const Error& e) {
      throw Error(ErrorCode::kParse,
                  fmt::format("{} line {}: {}", label, line_no, e.what()));
    }
  }
}

}  // namespace

std::vector<RawEvent> read_recsys2015(std::istream& clicks, std::istream& buys) {
  std::vector<RawEvent> events;
  read_recsys_file(clicks, EventKind::kClick, 3, "clicks", events);
  read_recsys_file(buys, EventKind::kPurchase, 3, "buys", events);
  return events;
}

void atomic_write(const std::filesystem::path& path, const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error(ErrorCode::kIo, fmt::format("cannot write {}", tmp.string()));
    }
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.close();
    if (!out) {
      throw Error(ErrorCode::kIo, fmt::format("write to {} failed", tmp.string()));
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorCode::kIo, fmt::format("cannot replace {}", path.string()));
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kIo, fmt::format("cannot read {}", path.string()));
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<RawEvent> read_event_file(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  try {
    return read_events(in);
  } catch (const Error& e) {
    throw Error(e.code(), fmt::format("{}: {}", path.string(), e.what()));
  }
}

void save_dataset(const std::filesystem::path& dir, const InteractionLog& train,
                  const InteractionLog& test) {
  std::filesystem::create_directories(dir);
  std::ostringstream train_out;
  write_events(train_out, train);
  std::ostringstream test_out;
  write_events(test_out, test);
  atomic_write(dir / kTrainFile, train_out.str());
  atomic_write(dir / kTestFile, test_out.str());
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto train_raw = read_event_file(dir / kTrainFile);
  const auto test_raw = read_event_file(dir / kTestFile);
  IdMap users;
  IdMap items;
  for (const auto* raw : {&train_raw, &test_raw}) {
    for (const RawEvent& e : *raw) {
      users.add(e.user);
      items.add(e.item);
    }
  }
  InteractionLog train = build_log(train_raw, users, items);
  std::vector<std::vector<ItemIndex>> test(users.size());
  for (const RawEvent& e : test_raw) {
    if (e.kind != EventKind::kPurchase) {
      throw Error(ErrorCode::kFormat,
                  fmt::format("{} may only contain purchases",
                              (dir / kTestFile).string()));
    }
    test[*users.find(e.user)].push_back(*items.find(e.item));
  }
  return Dataset(std::move(train), std::move(test));
}

}  // namespace p3s
