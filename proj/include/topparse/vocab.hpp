#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace topparse {

// Insertion-ordered string <-> index map.
class Vocab {
 public:
  Vocab() = default;
  explicit Vocab(const std::vector<std::string>& words) {
    for (const auto& w : words) add(w);
  }

  std::size_t add(const std::string& w) {
    auto it = index_.find(w);
    if (it != index_.end()) return it->second;
    index_.emplace(w, words_.size());
    words_.push_back(w);
    return words_.size() - 1;
  }

  bool contains(const std::string& w) const { return index_.count(w) != 0; }

  std::optional<std::size_t> find(const std::string& w) const {
    auto it = index_.find(w);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t at(const std::string& w) const {
    auto it = index_.find(w);
    if (it == index_.end()) throw std::out_of_range("not in vocabulary: " + w);
    return it->second;
  }

  const std::string& word(std::size_t i) const { return words_.at(i); }
  const std::vector<std::string>& words() const { return words_; }
  std::size_t size() const { return words_.size(); }
  bool empty() const { return words_.empty(); }

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.words_ == b.words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace topparse
