#include "gclrec/data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "gclrec/errors.hpp"

namespace gclrec {
namespace {

std::vector<std::string_view> split_columns(std::string_view line, Delimiter delimiter) {
  std::vector<std::string_view> cols;
  if (delimiter) {
    std::size_t start = 0;
    while (true) {
      std::size_t pos = line.find(*delimiter, start);
      cols.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
      if (pos == std::string_view::npos) break;
      start = pos + 1;
    }
    return cols;
  }
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) cols.push_back(line.substr(i, j - i));
    i = j;
  }
  return cols;
}

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(),
                     [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
}

std::string_view trim_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

struct PairHash {
  std::size_t operator()(const Interaction& p) const noexcept {
    return std::hash<std::size_t>{}(p.user * 0x9e3779b97f4a7c15ULL ^ p.item);
  }
};

struct PairEq {
  bool operator()(const Interaction& a, const Interaction& b) const noexcept {
    return a.user == b.user && a.item == b.item;
  }
};

using PairSet = std::unordered_set<Interaction, PairHash, PairEq>;

void check_split(const std::vector<Interaction>& pairs, std::size_t num_users,
                 std::size_t num_items, const char* name, PairSet& seen) {
  for (const auto& p : pairs) {
    if (p.user >= num_users || p.item >= num_items) {
      throw DataError(std::string(name) + " split: interaction (" + std::to_string(p.user) +
                      ", " + std::to_string(p.item) + ") out of range");
    }
    if (!seen.insert(p).second) {
      throw DataError(std::string(name) + " split: duplicate or overlapping pair (" +
                      std::to_string(p.user) + ", " + std::to_string(p.item) + ")");
    }
  }
}

std::vector<Interaction> read_pairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<Interaction> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_blank(line)) continue;
    std::istringstream ss(line);
    long long u = -1;
    long long i = -1;
    if (!(ss >> u >> i) || u < 0 || i < 0) {
      throw ParseError(path.string(), lineno, "expected two non-negative indices");
    }
    pairs.push_back({static_cast<std::size_t>(u), static_cast<std::size_t>(i)});
  }
  return pairs;
}

void write_pairs(const std::filesystem::path& path, const std::vector<Interaction>& pairs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& p : pairs) out << p.user << '\t' << p.item << '\n';
}

}  // namespace

RawInteractions parse_interactions(std::istream& in, Delimiter delimiter,
                                   const std::string& source) {
  RawInteractions raw;
  std::unordered_map<std::string, std::size_t> user_ids;
  std::unordered_map<std::string, std::size_t> item_ids;
  PairSet seen;

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view view = trim_cr(line);
    if (is_blank(view)) continue;
    auto cols = split_columns(view, delimiter);
    if (cols.size() < 2 || cols[0].empty() || cols[1].empty()) {
      throw ParseError(source, lineno, "expected at least user and item columns");
    }
    std::string user(cols[0]);
    std::string item(cols[1]);
    auto [uit, unew] = user_ids.try_emplace(user, raw.user_tokens.size());
    if (unew) raw.user_tokens.push_back(user);
    auto [iit, inew] = item_ids.try_emplace(item, raw.item_tokens.size());
    if (inew) raw.item_tokens.push_back(item);

    Interaction p{uit->second, iit->second};
    if (seen.insert(p).second) {
      raw.pairs.push_back(p);
    } else {
      ++raw.duplicates_dropped;
    }
  }
  if (raw.pairs.empty()) throw DataError(source + ": no interactions found");
  return raw;
}

RawInteractions load_interactions(const std::filesystem::path& path, Delimiter delimiter) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return parse_interactions(in, delimiter, path.string());
}

std::span<const std::size_t> InteractionDataset::UserLists::of(std::size_t u) const {
  if (u + 1 >= offsets.size()) return {};
  return {items.data() + offsets[u], offsets[u + 1] - offsets[u]};
}

InteractionDataset::UserLists InteractionDataset::index_by_user(
    std::size_t num_users, const std::vector<Interaction>& pairs) {
  UserLists lists;
  lists.offsets.assign(num_users + 1, 0);
  for (const auto& p : pairs) ++lists.offsets[p.user + 1];
  for (std::size_t u = 0; u < num_users; ++u) lists.offsets[u + 1] += lists.offsets[u];
  lists.items.resize(pairs.size());
  std::vector<std::size_t> cursor(lists.offsets.begin(), lists.offsets.end() - 1);
  for (const auto& p : pairs) lists.items[cursor[p.user]++] = p.item;
  for (std::size_t u = 0; u < num_users; ++u) {
    std::sort(lists.items.begin() + static_cast<std::ptrdiff_t>(lists.offsets[u]),
              lists.items.begin() + static_cast<std::ptrdiff_t>(lists.offsets[u + 1]));
  }
  return lists;
}

InteractionDataset::InteractionDataset(std::size_t num_users, std::size_t num_items,
                                       std::vector<Interaction> train,
                                       std::vector<Interaction> validation,
                                       std::vector<Interaction> test)
    : num_users_(num_users),
      num_items_(num_items),
      train_(std::move(train)),
      validation_(std::move(validation)),
      test_(std::move(test)) {
  PairSet seen;
  check_split(train_, num_users_, num_items_, "train", seen);
  check_split(validation_, num_users_, num_items_, "validation", seen);
  check_split(test_, num_users_, num_items_, "test", seen);

  train_lists_ = index_by_user(num_users_, train_);
  validation_lists_ = index_by_user(num_users_, validation_);
  test_lists_ = index_by_user(num_users_, test_);

  item_popularity_.assign(num_items_, 0);
  user_popularity_.assign(num_users_, 0);
  for (const auto& p : train_) {
    ++item_popularity_[p.item];
    ++user_popularity_[p.user];
  }
}

std::span<const std::size_t> InteractionDataset::train_items(std::size_t u) const {
  return train_lists_.of(u);
}
std::span<const std::size_t> InteractionDataset::validation_items(std::size_t u) const {
  return validation_lists_.of(u);
}
std::span<const std::size_t> InteractionDataset::test_items(std::size_t u) const {
  return test_lists_.of(u);
}

bool InteractionDataset::has_train(std::size_t u, std::size_t item) const {
  auto items = train_items(u);
  return std::binary_search(items.begin(), items.end(), item);
}

InteractionDataset InteractionDataset::merged_train_validation() const {
  std::vector<Interaction> merged = train_;
  merged.insert(merged.end(), validation_.begin(), validation_.end());
  return InteractionDataset(num_users_, num_items_, std::move(merged), {}, test_);
}

double InteractionDataset::density() const {
  if (num_users_ == 0 || num_items_ == 0) return 0.0;
  const double total =
      static_cast<double>(train_.size() + validation_.size() + test_.size());
  return total / (static_cast<double>(num_users_) * static_cast<double>(num_items_));
}

UserSplitSizes user_split_sizes(std::size_t n, SplitRatio ratio) {
  const std::size_t sum = ratio.train + ratio.validation + ratio.test;
  if (sum == 0) throw ConfigError("split ratio must have a positive sum");
  if (n < 3) return {n, 0, 0};
  // Round half up: floor((2·n·r + sum) / (2·sum)).
  auto share = [&](unsigned r) { return (2 * n * r + sum) / (2 * sum); };
  UserSplitSizes s;
  s.test = share(ratio.test);
  s.validation = share(ratio.validation);
  if (s.test + s.validation > n) s.validation = n - s.test;
  s.train = n - s.test - s.validation;
  return s;
}

InteractionDataset split_dataset(const RawInteractions& raw, SplitRatio ratio,
                                 std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> by_user(raw.num_users());
  for (const auto& p : raw.pairs) by_user[p.user].push_back(p.item);

  std::mt19937_64 rng(seed);
  std::vector<Interaction> train;
  std::vector<Interaction> validation;
  std::vector<Interaction> test;
  train.reserve(raw.pairs.size());

  for (std::size_t u = 0; u < by_user.size(); ++u) {
    auto& items = by_user[u];
    std::sort(items.begin(), items.end());
    std::shuffle(items.begin(), items.end(), rng);
    const UserSplitSizes sizes = user_split_sizes(items.size(), ratio);
    std::size_t k = 0;
    for (; k < sizes.train; ++k) train.push_back({u, items[k]});
    for (std::size_t e = k + sizes.validation; k < e; ++k) validation.push_back({u, items[k]});
    for (; k < items.size(); ++k) test.push_back({u, items[k]});
  }
  return InteractionDataset(raw.num_users(), raw.num_items(), std::move(train),
                            std::move(validation), std::move(test));
}

PopularityGroups build_popularity_groups(const InteractionDataset& dataset) {
  const std::size_t num_items = dataset.num_items();
  std::vector<std::size_t> test_count(num_items, 0);
  for (const auto& p : dataset.test()) ++test_count[p.item];

  const auto distinct = static_cast<std::size_t>(
      std::count_if(test_count.begin(), test_count.end(), [](std::size_t c) { return c > 0; }));
  if (distinct < kNumPopularityGroups) {
    throw DataError("popularity groups need at least 10 distinct test items, found " +
                    std::to_string(distinct));
  }

  const auto& popularity = dataset.item_popularity();
  std::vector<std::size_t> order(num_items);
  for (std::size_t i = 0; i < num_items; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return popularity[a] < popularity[b];
  });

  const std::size_t total = dataset.test().size();
  PopularityGroups groups;
  groups.group_of_item.assign(num_items, 0);
  std::size_t group = 1;
  std::size_t cumulative = 0;
  for (std::size_t item : order) {
    groups.group_of_item[item] = static_cast<int>(group);
    groups.boundaries[group - 1] = std::max(groups.boundaries[group - 1], popularity[item]);
    groups.test_interactions[group - 1] += test_count[item];
    cumulative += test_count[item];
    // Close every bucket whose quota of group·total/10 is now filled.
    while (group < kNumPopularityGroups && cumulative * kNumPopularityGroups >= group * total) {
      ++group;
    }
  }
  return groups;
}

void write_splits(const std::filesystem::path& dir, const InteractionDataset& dataset,
                  const RawInteractions& raw) {
  std::filesystem::create_directories(dir);
  write_pairs(dir / "train.tsv", dataset.train());
  write_pairs(dir / "valid.tsv", dataset.validation());
  write_pairs(dir / "test.tsv", dataset.test());
  std::ofstream out(dir / "idmap.tsv", std::ios::binary);
  if (!out) throw DataError("cannot write " + (dir / "idmap.tsv").string());
  for (std::size_t u = 0; u < raw.user_tokens.size(); ++u) {
    out << "u\t" << raw.user_tokens[u] << '\t' << u << '\n';
  }
  for (std::size_t i = 0; i < raw.item_tokens.size(); ++i) {
    out << "i\t" << raw.item_tokens[i] << '\t' << i << '\n';
  }
}

LoadedSplits read_splits(const std::filesystem::path& dir) {
  const auto idmap_path = dir / "idmap.tsv";
  std::ifstream in(idmap_path);
  if (!in) throw DataError("cannot open " + idmap_path.string());
  LoadedSplits out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_blank(line)) continue;
    auto cols = split_columns(trim_cr(line), '\t');
    if (cols.size() != 3 || (cols[0] != "u" && cols[0] != "i")) {
      throw ParseError(idmap_path.string(), lineno, "expected 'u|i<TAB>token<TAB>index'");
    }
    auto& tokens = cols[0] == "u" ? out.user_tokens : out.item_tokens;
    std::size_t index = 0;
    try {
      index = std::stoull(std::string(cols[2]));
    } catch (const std::exception&) {
      throw ParseError(idmap_path.string(), lineno, "bad index");
    }
    if (index != tokens.size()) {
      throw ParseError(idmap_path.string(), lineno, "indices must be contiguous");
    }
    tokens.emplace_back(cols[1]);
  }
  out.dataset = InteractionDataset(out.user_tokens.size(), out.item_tokens.size(),
                                   read_pairs(dir / "train.tsv"), read_pairs(dir / "valid.tsv"),
                                   read_pairs(dir / "test.tsv"));
  return out;
}

std::uint64_t fingerprint_splits(const std::filesystem::path& dir) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char* name : {"train.tsv", "valid.tsv", "test.tsv", "idmap.tsv"}) {
    std::ifstream in(dir / name, std::ios::binary);
    if (!in) throw DataError("cannot open " + (dir / name).string());
    char c;
    while (in.get(c)) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace gclrec
