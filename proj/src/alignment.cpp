#include "vbphylo/alignment.hpp"

#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace vbphylo {

double PatternTable::total_sites() const {
  double total = 0.0;
  for (double w : weights) total += w;
  return total;
}

uint8_t state_mask(char c) {
  switch (std::toupper(static_cast<unsigned char>(c))) {
    case 'A': return 0b0001;
    case 'C': return 0b0010;
    case 'G': return 0b0100;
    case 'T': case 'U': return 0b1000;
    case 'R': return 0b0101;  // A|G
    case 'Y': return 0b1010;  // C|T
    case 'S': return 0b0110;  // C|G
    case 'W': return 0b1001;  // A|T
    case 'K': return 0b1100;  // G|T
    case 'M': return 0b0011;  // A|C
    case 'B': return 0b1110;
    case 'D': return 0b1101;
    case 'H': return 0b1011;
    case 'V': return 0b0111;
    case 'N': case '-': case '?': return 0b1111;
    default:
      throw std::invalid_argument(std::string("illegal sequence character: ") + c);
  }
}

std::array<double, 4> mask_indicators(uint8_t mask) {
  return {static_cast<double>(mask & 1), static_cast<double>((mask >> 1) & 1),
          static_cast<double>((mask >> 2) & 1), static_cast<double>((mask >> 3) & 1)};
}

Alignment parse_fasta(std::string_view text) {
  std::map<std::string, std::string> sequences;
  std::string current;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '>') {
      current = line.substr(1);
      while (!current.empty() && std::isspace(static_cast<unsigned char>(current.front()))) {
        current.erase(current.begin());
      }
      while (!current.empty() && std::isspace(static_cast<unsigned char>(current.back()))) {
        current.pop_back();
      }
      if (current.empty()) throw std::invalid_argument("empty FASTA header");
      if (!sequences.emplace(current, "").second) {
        throw std::invalid_argument("duplicate FASTA header: " + current);
      }
    } else {
      if (current.empty()) throw std::invalid_argument("FASTA sequence before any header");
      for (char c : line) {
        if (std::isspace(static_cast<unsigned char>(c))) continue;
        state_mask(c);  // validate
        sequences[current] += c;
      }
    }
  }
  if (sequences.empty()) throw std::invalid_argument("empty FASTA input");

  Alignment alignment;
  std::vector<std::string> names;
  for (const auto& [name, seq] : sequences) names.push_back(name);
  alignment.taxa = TaxonSet(std::move(names));
  alignment.rows.resize(alignment.taxa.size());
  size_t length = 0;
  for (int i = 0; i < alignment.taxa.size(); ++i) {
    alignment.rows[i] = sequences.at(alignment.taxa.name(i));
    if (i == 0) {
      length = alignment.rows[i].size();
    } else if (alignment.rows[i].size() != length) {
      throw std::invalid_argument("unequal sequence lengths in FASTA");
    }
  }
  if (length == 0) throw std::invalid_argument("empty sequences in FASTA");
  return alignment;
}

Alignment read_fasta_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open FASTA file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_fasta(buf.str());
}

std::string write_fasta(const Alignment& alignment) {
  std::string out;
  for (int i = 0; i < alignment.taxa.size(); ++i) {
    out += '>';
    out += alignment.taxa.name(i);
    out += '\n';
    out += alignment.rows[i];
    out += '\n';
  }
  return out;
}

PatternTable compress_patterns(const Alignment& alignment) {
  const int n = alignment.taxa.size();
  const int m = alignment.n_sites();
  PatternTable table;
  table.n_taxa = n;
  std::map<std::vector<uint8_t>, int> index;
  std::vector<uint8_t> column(n);
  for (int site = 0; site < m; ++site) {
    for (int t = 0; t < n; ++t) column[t] = state_mask(alignment.rows[t][site]);
    auto [it, inserted] = index.emplace(column, table.n_patterns());
    if (inserted) {
      table.masks.insert(table.masks.end(), column.begin(), column.end());
      table.weights.push_back(1.0);
    } else {
      table.weights[it->second] += 1.0;
    }
  }
  return table;
}

PatternTable site_patterns_uncompressed(const Alignment& alignment) {
  const int n = alignment.taxa.size();
  PatternTable table;
  table.n_taxa = n;
  for (int site = 0; site < alignment.n_sites(); ++site) {
    for (int t = 0; t < n; ++t) table.masks.push_back(state_mask(alignment.rows[t][site]));
    table.weights.push_back(1.0);
  }
  return table;
}

}  // namespace vbphylo
