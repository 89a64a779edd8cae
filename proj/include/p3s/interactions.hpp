#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace p3s {

using UserIndex = std::uint32_t;
using ItemIndex = std::uint32_t;

enum class EventKind : std::uint8_t { kClick, kPurchase };

std::string_view to_string(EventKind kind);
std::optional<EventKind> parse_event_kind(std::string_view text);

// One line of an input log, before ids are densified.
struct RawEvent {
  std::string user;
  std::string item;
  std::int64_t timestamp = 0;
  EventKind kind = EventKind::kClick;
};

struct Event {
  UserIndex user = 0;
  ItemIndex item = 0;
  std::int64_t timestamp = 0;
  EventKind kind = EventKind::kClick;

  friend bool operator==(const Event&, const Event&) = default;
};

// Bijection between external string ids and contiguous indices, assigned in
// insertion order.
class IdMap {
 public:
  std::uint32_t add(const std::string& id);
  std::optional<std::uint32_t> find(const std::string& id) const;
  const std::string& lookup(std::uint32_t index) const;
  std::size_t size() const { return ids_.size(); }
  std::span<const std::string> ids() const { return ids_; }

  friend bool operator==(const IdMap& a, const IdMap& b) {
    return a.ids_ == b.ids_;
  }

 private:
  std::unordered_map<std::string, std::uint32_t> index_;
  std::vector<std::string> ids_;
};

// Deduplicated event stream with dense user/item indices. Events keep the
// order in which they first appeared in the input; that order breaks
// timestamp ties everywhere downstream.
class InteractionLog {
 public:
  InteractionLog() = default;
  // Validates index ranges, timestamps and (user, item, kind) uniqueness.
  InteractionLog(std::vector<Event> events, IdMap users, IdMap items);

  std::span<const Event> events() const { return events_; }
  std::size_t num_users() const { return users_.size(); }
  std::size_t num_items() const { return items_.size(); }
  const IdMap& users() const { return users_; }
  const IdMap& items() const { return items_; }

  std::size_t count(EventKind kind) const;

  // Converts back to external ids, in event order.
  std::vector<RawEvent> to_raw() const;

 private:
  std::vector<Event> events_;
  IdMap users_;
  IdMap items_;
};

// Per-user view of the catalog as three disjoint sets: purchased items,
// clicked-but-not-purchased items, and the (implicit) rest.
class TriPartition {
 public:
  TriPartition() = default;
  // Both lists are sorted and deduplicated here. Items present in both are
  // kept only as purchased.
  TriPartition(std::vector<ItemIndex> purchased,
               std::vector<ItemIndex> clicked, std::size_t universe_size);

  std::span<const ItemIndex> purchased() const { return purchased_; }
  std::span<const ItemIndex> clicked_only() const { return clicked_only_; }
  std::size_t universe_size() const { return universe_size_; }
  std::size_t non_clicked_size() const {
    return universe_size_ - purchased_.size() - clicked_only_.size();
  }

  bool is_purchased(ItemIndex item) const;
  bool is_clicked_only(ItemIndex item) const;
  bool is_non_clicked(ItemIndex item) const;

 private:
  std::vector<ItemIndex> purchased_;
  std::vector<ItemIndex> clicked_only_;
  std::size_t universe_size_ = 0;
};

// Training log plus held-out purchases. Partitions are derived from the
// training log only, after click closure has been applied.
class Dataset {
 public:
  Dataset() = default;
  Dataset(InteractionLog train, std::vector<std::vector<ItemIndex>> test);

  const InteractionLog& train() const { return train_; }
  std::size_t num_users() const { return train_.num_users(); }
  std::size_t num_items() const { return train_.num_items(); }
  std::span<const ItemIndex> test_purchases(UserIndex u) const;
  const TriPartition& partition(UserIndex u) const;
  std::span<const TriPartition> partitions() const { return partitions_; }

 private:
  InteractionLog train_;
  std::vector<std::vector<ItemIndex>> test_;
  std::vector<TriPartition> partitions_;
};

// Reads the tab-separated event format. Blank lines and lines starting
// with '#' are skipped.
std::vector<RawEvent> read_events(std::istream& in);
void write_events(std::ostream& out, const InteractionLog& log);

// Collapses duplicate (user, item, kind) triples to the earliest timestamp
// and assigns dense ids in first-appearance order.
InteractionLog build_log(std::span<const RawEvent> raw_events);
// Same, but continues numbering from already registered ids.
InteractionLog build_log(std::span<const RawEvent> raw_events, IdMap users,
                         IdMap items);

// Adds a click at the purchase timestamp for every purchase without one.
InteractionLog enforce_click_closure(const InteractionLog& log);

// Keeps users with at least `min_purchases` distinct purchased items and at
// least `min_clicks` distinct clicked items, then re-densifies ids.
InteractionLog filter_users(const InteractionLog& log,
                            std::size_t min_purchases,
                            std::size_t min_clicks);

std::vector<TriPartition> make_partitions(const InteractionLog& log);

TriPartition partition(const Dataset& dataset, UserIndex u);

}  // namespace p3s
