#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gclrec {

struct Interaction {
  std::size_t user = 0;
  std::size_t item = 0;

  friend auto operator<=>(const Interaction&, const Interaction&) = default;
};

// Interaction log after token interning. Tokens are assigned dense indices
// in first-seen order; duplicate (user, item) lines are dropped.
struct RawInteractions {
  std::vector<std::string> user_tokens;
  std::vector<std::string> item_tokens;
  std::vector<Interaction> pairs;
  std::size_t duplicates_dropped = 0;

  std::size_t num_users() const { return user_tokens.size(); }
  std::size_t num_items() const { return item_tokens.size(); }
};

// Column delimiter. std::nullopt splits on any run of whitespace.
using Delimiter = std::optional<char>;

RawInteractions parse_interactions(std::istream& in, Delimiter delimiter = std::nullopt,
                                   const std::string& source = "<stream>");
RawInteractions load_interactions(const std::filesystem::path& path,
                                  Delimiter delimiter = std::nullopt);

struct SplitRatio {
  unsigned train = 7;
  unsigned validation = 1;
  unsigned test = 2;
};

// Immutable train/validation/test split over contiguous user and item id
// spaces. Per-user sorted item lists are precomputed for negative sampling
// and ranking exclusions.
class InteractionDataset {
 public:
  InteractionDataset() = default;
  // Validates ranges, per-split uniqueness and pairwise disjointness.
  InteractionDataset(std::size_t num_users, std::size_t num_items,
                     std::vector<Interaction> train, std::vector<Interaction> validation,
                     std::vector<Interaction> test);

  std::size_t num_users() const { return num_users_; }
  std::size_t num_items() const { return num_items_; }
  std::size_t num_nodes() const { return num_users_ + num_items_; }

  const std::vector<Interaction>& train() const { return train_; }
  const std::vector<Interaction>& validation() const { return validation_; }
  const std::vector<Interaction>& test() const { return test_; }

  // Sorted item indices of user u in each split.
  std::span<const std::size_t> train_items(std::size_t u) const;
  std::span<const std::size_t> validation_items(std::size_t u) const;
  std::span<const std::size_t> test_items(std::size_t u) const;
  bool has_train(std::size_t u, std::size_t item) const;

  // Training-interaction counts.
  const std::vector<std::size_t>& item_popularity() const { return item_popularity_; }
  const std::vector<std::size_t>& user_popularity() const { return user_popularity_; }

  // Train ∪ validation as the new train split, empty validation. Used to fit
  // the final model after hyperparameters were chosen on validation.
  InteractionDataset merged_train_validation() const;

  double density() const;

 private:
  struct UserLists {
    std::vector<std::size_t> offsets;
    std::vector<std::size_t> items;
    std::span<const std::size_t> of(std::size_t u) const;
  };
  static UserLists index_by_user(std::size_t num_users, const std::vector<Interaction>& pairs);

  std::size_t num_users_ = 0;
  std::size_t num_items_ = 0;
  std::vector<Interaction> train_;
  std::vector<Interaction> validation_;
  std::vector<Interaction> test_;
  UserLists train_lists_;
  UserLists validation_lists_;
  UserLists test_lists_;
  std::vector<std::size_t> item_popularity_;
  std::vector<std::size_t> user_popularity_;
};

// Per-user split sizes for a user with n interactions. Users with fewer than
// three interactions keep everything in train.
struct UserSplitSizes {
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;
};
UserSplitSizes user_split_sizes(std::size_t n, SplitRatio ratio = {});

// Per-user random split. Each user's interactions are shuffled with a
// generator seeded once from `seed` and consumed in user-index order.
InteractionDataset split_dataset(const RawInteractions& raw, SplitRatio ratio = {},
                                 std::uint64_t seed = 0);

inline constexpr std::size_t kNumPopularityGroups = 10;

// Items bucketed by training popularity so each bucket holds roughly a
// tenth of the test interactions. Group ids run 1..10; 10 is the head.
struct PopularityGroups {
  std::vector<int> group_of_item;
  // Largest training popularity found in each group (0 when the group is
  // empty).
  std::array<std::size_t, kNumPopularityGroups> boundaries{};
  std::array<std::size_t, kNumPopularityGroups> test_interactions{};
};

PopularityGroups build_popularity_groups(const InteractionDataset& dataset);

// Split files: train.tsv, valid.tsv, test.tsv ("user<TAB>item" dense
// indices) plus idmap.tsv ("u|i<TAB>token<TAB>index").
void write_splits(const std::filesystem::path& dir, const InteractionDataset& dataset,
                  const RawInteractions& raw);

struct LoadedSplits {
  InteractionDataset dataset;
  std::vector<std::string> user_tokens;
  std::vector<std::string> item_tokens;
};
LoadedSplits read_splits(const std::filesystem::path& dir);

// 64-bit FNV-1a over the split files' bytes, for run manifests.
std::uint64_t fingerprint_splits(const std::filesystem::path& dir);

}  // namespace gclrec
