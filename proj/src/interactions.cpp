#include "p3s/interactions.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <unordered_set>

#include <fmt/core.h>

#include "p3s/error.hpp"

namespace p3s {

namespace {

std::uint64_t pair_key(std::uint32_t a, std::uint32_t b) {
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

void sort_unique(std::vector<ItemIndex>& items) {
  std::sort(items.begin(), items.end());
  items.erase(std::unique(items.begin(), items.end()), items.end());
}

bool contains(std::span<const ItemIndex> sorted, ItemIndex item) {
  return std::binary_search(sorted.begin(), sorted.end(), item);
}

}  // namespace

std::string_view to_string(EventKind kind) {
  return kind == EventKind::kPurchase ? "purchase" : "click";
}

std::optional<EventKind> parse_event_kind(std::string_view text) {
  if (text == "click") return EventKind::kClick;
  if (text == "purchase") return EventKind::kPurchase;
  return std::nullopt;
}

std::uint32_t IdMap::add(const std::string& id) {
  auto [it, inserted] =
      index_.try_emplace(id, static_cast<std::uint32_t>(ids_.size()));
  if (inserted) ids_.push_back(id);
  return it->second;
}

std::optional<std::uint32_t> IdMap::find(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::string& IdMap::lookup(std::uint32_t index) const {
  if (index >= ids_.size()) {
    throw Error(ErrorCode::kIndex, fmt::format("id index {} out of range", index));
  }
  return ids_[index];
}

InteractionLog::InteractionLog(std::vector<Event> events, IdMap users,
                               IdMap items)
    : events_(std::move(events)),
      users_(std::move(users)),
      items_(std::move(items)) {
  std::unordered_set<std::uint64_t> seen[2];
  for (const Event& e : events_) {
    if (e.user >= users_.size() || e.item >= items_.size()) {
      throw Error(ErrorCode::kContract,
                  fmt::format("event ({}, {}) outside {}x{} index space",
                              e.user, e.item, users_.size(), items_.size()));
    }
    if (e.timestamp < 0) {
      throw Error(ErrorCode::kContract, "negative event timestamp");
    }
    if (!seen[static_cast<int>(e.kind)].insert(pair_key(e.user, e.item)).second) {
      throw Error(ErrorCode::kContract,
                  fmt::format("duplicate {} event for user {} item {}",
                              to_string(e.kind), e.user, e.item));
    }
  }
}

std::size_t InteractionLog::count(EventKind kind) const {
  return static_cast<std::size_t>(std::count_if(
      events_.begin(), events_.end(),
      [kind](const Event& e) { return e.kind == kind; }));
}

std::vector<RawEvent> InteractionLog::to_raw() const {
  std::vector<RawEvent> raw;
  raw.reserve(events_.size());
  for (const Event& e : events_) {
    raw.push_back({users_.lookup(e.user), items_.lookup(e.item), e.timestamp,
                   e.kind});
  }
  return raw;
}

TriPartition::TriPartition(std::vector<ItemIndex> purchased,
                           std::vector<ItemIndex> clicked,
                           std::size_t universe_size)
    : purchased_(std::move(purchased)), universe_size_(universe_size) {
  sort_unique(purchased_);
  sort_unique(clicked);
  std::set_difference(clicked.begin(), clicked.end(), purchased_.begin(),
                      purchased_.end(), std::back_inserter(clicked_only_));
  if ((!purchased_.empty() && purchased_.back() >= universe_size_) ||
      (!clicked_only_.empty() && clicked_only_.back() >= universe_size_)) {
    throw Error(ErrorCode::kIndex, "partition item outside the universe");
  }
}

bool TriPartition::is_purchased(ItemIndex item) const {
  return contains(purchased_, item);
}

bool TriPartition::is_clicked_only(ItemIndex item) const {
  return contains(clicked_only_, item);
}

bool TriPartition::is_non_clicked(ItemIndex item) const {
  return item < universe_size_ && !is_purchased(item) && !is_clicked_only(item);
}

Dataset::Dataset(InteractionLog train, std::vector<std::vector<ItemIndex>> test)
    : train_(enforce_click_closure(train)), test_(std::move(test)) {
  if (test_.size() > train_.num_users()) {
    throw Error(ErrorCode::kContract, "test purchases reference unknown users");
  }
  test_.resize(train_.num_users());
  partitions_ = make_partitions(train_);
  for (std::size_t u = 0; u < test_.size(); ++u) {
    sort_unique(test_[u]);
    for (ItemIndex item : test_[u]) {
      if (item >= train_.num_items()) {
        throw Error(ErrorCode::kContract, "test purchase references unknown item");
      }
      if (partitions_[u].is_purchased(item)) {
        throw Error(ErrorCode::kContract,
                    fmt::format("user {} has item {} in both train and test "
                                "purchases",
                                train_.users().lookup(static_cast<UserIndex>(u)),
                                train_.items().lookup(item)));
      }
    }
  }
}

std::span<const ItemIndex> Dataset::test_purchases(UserIndex u) const {
  if (u >= test_.size()) {
    throw Error(ErrorCode::kIndex, fmt::format("user {} out of range", u));
  }
  return test_[u];
}

const TriPartition& Dataset::partition(UserIndex u) const {
  if (u >= partitions_.size()) {
    throw Error(ErrorCode::kIndex, fmt::format("user {} out of range", u));
  }
  return partitions_[u];
}

std::vector<RawEvent> read_events(std::istream& in) {
  std::vector<RawEvent> events;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;

    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (;;) {
      auto tab = rest.find('\t');
      fields.push_back(rest.substr(0, tab));
      if (tab == std::string_view::npos) break;
      rest.remove_prefix(tab + 1);
    }
    if (fields.size() != 4) {
      throw Error(ErrorCode::kParse,
                  fmt::format("line {}: expected 4 tab-separated fields, got {}",
                              line_no, fields.size()));
    }
    if (fields[0].empty() || fields[1].empty()) {
      throw Error(ErrorCode::kParse, fmt::format("line {}: empty id", line_no));
    }
    RawEvent e;
    e.user = std::string(fields[0]);
    e.item = std::string(fields[1]);
    auto ts = fields[2];
    auto [ptr, ec] = std::from_chars(ts.data(), ts.data() + ts.size(), e.timestamp);
    if (ec != std::errc() || ptr != ts.data() + ts.size() || e.timestamp < 0) {
      throw Error(ErrorCode::kParse,
                  fmt::format("line {}: bad timestamp '{}'", line_no, ts));
    }
    auto kind = parse_event_kind(fields[3]);
    if (!kind) {
      throw Error(ErrorCode::kParse,
                  fmt::format("line {}: bad event kind '{}'", line_no, fields[3]));
    }
    e.kind = *kind;
    events.push_back(std::move(e));
  }
  return events;
}

void write_events(std::ostream& out, const InteractionLog& log) {
  for (const Event& e : log.events()) {
    out << log.users().lookup(e.user) << '\t' << log.items().lookup(e.item)
        << '\t' << e.timestamp << '\t' << to_string(e.kind) << '\n';
  }
}

InteractionLog build_log(std::span<const RawEvent> raw_events) {
  return build_log(raw_events, IdMap{}, IdMap{});
}

InteractionLog build_log(std::span<const RawEvent> raw_events, IdMap users,
                         IdMap items) {
  if (raw_events.empty()) {
    throw Error(ErrorCode::kEmptyLog, "event log is empty");
  }
  std::vector<Event> events;
  std::unordered_map<std::uint64_t, std::size_t> position[2];
  for (const RawEvent& raw : raw_events) {
    if (raw.timestamp < 0) {
      throw Error(ErrorCode::kParse, "negative event timestamp");
    }
    Event e{users.add(raw.user), items.add(raw.item), raw.timestamp, raw.kind};
    auto [it, inserted] = position[static_cast<int>(e.kind)].try_emplace(
        pair_key(e.user, e.item), events.size());
    if (inserted) {
      events.push_back(e);
    } else {
      auto& kept = events[it->second].timestamp;
      kept = std::min(kept, e.timestamp);
    }
  }
  return InteractionLog(std::move(events), std::move(users), std::move(items));
}

InteractionLog enforce_click_closure(const InteractionLog& log) {
  std::unordered_set<std::uint64_t> clicked;
  for (const Event& e : log.events()) {
    if (e.kind == EventKind::kClick) clicked.insert(pair_key(e.user, e.item));
  }
  std::vector<Event> events;
  events.reserve(log.events().size());
  for (const Event& e : log.events()) {
    events.push_back(e);
    if (e.kind == EventKind::kPurchase &&
        !clicked.contains(pair_key(e.user, e.item))) {
      events.push_back({e.user, e.item, e.timestamp, EventKind::kClick});
    }
  }
  return InteractionLog(std::move(events), log.users(), log.items());
}

InteractionLog filter_users(const InteractionLog& log,
                            std::size_t min_purchases,
                            std::size_t min_clicks) {
  std::vector<std::size_t> purchases(log.num_users(), 0);
  std::vector<std::size_t> clicks(log.num_users(), 0);
  for (const Event& e : log.events()) {
    ++(e.kind == EventKind::kPurchase ? purchases : clicks)[e.user];
  }
  IdMap users;
  IdMap items;
  std::vector<Event> events;
  for (const Event& e : log.events()) {
    if (purchases[e.user] < min_purchases || clicks[e.user] < min_clicks) {
      continue;
    }
    events.push_back({users.add(log.users().lookup(e.user)),
                      items.add(log.items().lookup(e.item)), e.timestamp,
                      e.kind});
  }
  if (events.empty()) {
    throw Error(ErrorCode::kEmptyResult,
                fmt::format("no user has >= {} purchases and >= {} clicks",
                            min_purchases, min_clicks));
  }
  return InteractionLog(std::move(events), std::move(users), std::move(items));
}

std::vector<TriPartition> make_partitions(const InteractionLog& log) {
  std::vector<std::vector<ItemIndex>> purchased(log.num_users());
  std::vector<std::vector<ItemIndex>> clicked(log.num_users());
  for (const Event& e : log.events()) {
    (e.kind == EventKind::kPurchase ? purchased : clicked)[e.user].push_back(e.item);
  }
  std::vector<TriPartition> parts;
  parts.reserve(log.num_users());
  for (std::size_t u = 0; u < log.num_users(); ++u) {
    parts.emplace_back(std::move(purchased[u]), std::move(clicked[u]),
                       log.num_items());
  }
  return parts;
}

TriPartition partition(const Dataset& dataset, UserIndex u) {
  return dataset.partition(u);
}

}  // namespace p3s
