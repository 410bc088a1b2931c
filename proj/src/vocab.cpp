#include "slm/vocab.hpp"

#include <istream>
#include <ostream>
#include <sstream>

#include "slm/errors.hpp"

namespace slm {

Vocabulary::Vocabulary() {
  add(bos_symbol());
  add(eos_symbol());
  add(unk_symbol());
}

uint32_t Vocabulary::add(const std::string &symbol, uint64_t count) {
  auto it = ids_.find(symbol);
  if (it != ids_.end()) {
    counts_[it->second] += count;
    return it->second;
  }
  uint32_t id = (uint32_t)symbols_.size();
  symbols_.push_back(symbol);
  counts_.push_back(count);
  ids_.emplace(symbol, id);
  return id;
}

uint32_t Vocabulary::id(const std::string &symbol) const {
  auto it = ids_.find(symbol);
  return it == ids_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(const std::string &symbol) const {
  return ids_.count(symbol) != 0;
}

const std::string &Vocabulary::symbol(uint32_t id) const {
  if (id >= symbols_.size()) throw DataError("vocabulary id out of range");
  return symbols_[id];
}

void Vocabulary::write(std::ostream &os) const {
  for (size_t i = 0; i < symbols_.size(); ++i)
    os << symbols_[i] << '\t' << i << '\t' << counts_[i] << '\n';
}

Vocabulary Vocabulary::read(std::istream &is, size_t n_lines) {
  Vocabulary v;
  std::string line;
  size_t seen = 0;
  while (seen < n_lines && std::getline(is, line)) {
    ++seen;
    if (line.empty()) break;
    size_t t1 = line.find('\t');
    size_t t2 = line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos)
      throw DataError("malformed vocabulary line: " + line);
    std::string sym = line.substr(0, t1);
    uint32_t id = (uint32_t)std::stoul(line.substr(t1 + 1, t2 - t1 - 1));
    uint64_t count = std::stoull(line.substr(t2 + 1));
    uint32_t got = v.add(sym, 0);
    if (got != id) throw DataError("non-sequential vocabulary id for " + sym);
    v.counts_[got] = count;
  }
  return v;
}

}  // namespace slm
