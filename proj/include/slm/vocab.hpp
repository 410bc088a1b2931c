#ifndef SLM_VOCAB_HPP_
#define SLM_VOCAB_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

namespace slm {

// Closed symbol table with reserved sentence markers and an unknown id.
// Lookups of unregistered symbols return kUnk.
class Vocabulary {
 public:
  static constexpr uint32_t kBos = 0;  // sentence-begin marker
  static constexpr uint32_t kEos = 1;  // sentence-end marker
  static constexpr uint32_t kUnk = 2;  // unknown-symbol marker

  static const char *bos_symbol() { return "<s>"; }
  static const char *eos_symbol() { return "</s>"; }
  static const char *unk_symbol() { return "<unk>"; }

  Vocabulary();

  // Registers a symbol (no-op on duplicates; count added either way).
  uint32_t add(const std::string &symbol, uint64_t count = 0);

  uint32_t id(const std::string &symbol) const;  // kUnk when absent
  bool contains(const std::string &symbol) const;
  const std::string &symbol(uint32_t id) const;
  uint64_t count(uint32_t id) const { return counts_[id]; }

  size_t size() const { return symbols_.size(); }

  // "symbol TAB id TAB count" lines, sorted by id.
  void write(std::ostream &os) const;
  // Reads lines until EOF, an empty line, or n_lines lines.
  static Vocabulary read(std::istream &is, size_t n_lines = (size_t)-1);

 private:
  std::vector<std::string> symbols_;
  std::vector<uint64_t> counts_;
  std::unordered_map<std::string, uint32_t> ids_;
};

}  // namespace slm

#endif  // SLM_VOCAB_HPP_
