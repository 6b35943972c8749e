// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sawtopics/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "sawtopics/rng.hpp"

namespace sawtopics {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<std::string> tokenize(const std::string& text, bool drop_stopwords) {
  std::vector<std::string> tokens;
  std::string current;
  bool all_digits = true;
  auto flush = [&] {
    if (!current.empty() && !all_digits &&
        !(drop_stopwords && is_stopword(current))) {
      tokens.push_back(current);
    }
    current.clear();
    all_digits = true;
  };
  for (unsigned char ch : text) {
    if (std::isalnum(ch)) {
      if (!std::isdigit(ch)) all_digits = false;
      current.push_back(static_cast<char>(std::tolower(ch)));
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& raw_docs,
                            int min_count, int max_vocab) {
  if (raw_docs.empty()) throw std::runtime_error("build_vocabulary: no documents");
  if (min_count < 1) throw std::runtime_error("build_vocabulary: min_count must be >= 1");

  std::map<std::string, std::int64_t> freq;       // ordered: deterministic iteration
  std::map<std::string, std::int64_t> doc_freq;
  for (const auto& doc : raw_docs) {
    std::map<std::string, std::int64_t> seen;
    for (const auto& tok : doc) {
      ++freq[tok];
      ++seen[tok];
    }
    for (const auto& [tok, n] : seen) ++doc_freq[tok];
  }

  std::vector<std::pair<std::string, std::int64_t>> retained;
  for (const auto& [tok, n] : freq) {
    if (n >= min_count) retained.emplace_back(tok, n);
  }
  if (retained.empty()) throw std::runtime_error("build_vocabulary: vocabulary empty");

  // Most frequent first, lexicographic tie-break; this also fixes the id order.
  std::sort(retained.begin(), retained.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (max_vocab > 0 && static_cast<int>(retained.size()) > max_vocab) {
    retained.resize(max_vocab);
  }

  Vocabulary vocab;
  vocab.total_docs = static_cast<std::int64_t>(raw_docs.size());
  vocab.terms.reserve(retained.size());
  for (const auto& [tok, n] : retained) {
    vocab.index.emplace(tok, static_cast<int>(vocab.terms.size()));
    vocab.terms.push_back(tok);
    vocab.corpus_freq.push_back(n);
    vocab.doc_freq.push_back(doc_freq[tok]);
  }
  return vocab;
}

SparseCorpus vectorize(const std::vector<std::vector<std::string>>& raw_docs,
                       const Vocabulary& vocab, const std::vector<int>& labels,
                       const std::vector<std::string>& label_names) {
  if (!labels.empty() && labels.size() != raw_docs.size()) {
    throw std::runtime_error("vectorize: labels/documents size mismatch");
  }
  SparseCorpus corpus;
  corpus.vocab_size = vocab.size();
  corpus.label_names = label_names;
  for (std::size_t d = 0; d < raw_docs.size(); ++d) {
    std::map<int, std::int64_t> counts;
    for (const auto& tok : raw_docs[d]) {
      auto it = vocab.index.find(tok);
      if (it != vocab.index.end()) ++counts[it->second];
    }
    if (counts.empty()) continue;  // dropped; callers may log the count
    corpus.docs.emplace_back(counts.begin(), counts.end());
    if (!labels.empty()) corpus.labels.push_back(labels[d]);
  }
  if (corpus.docs.empty()) throw std::runtime_error("vectorize: no nonempty documents");
  return corpus;
}

HeldoutSplit split_heldout(const SparseCorpus& corpus, double fraction,
                           std::uint32_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw std::runtime_error("split_heldout: fraction must be in (0,1)");
  }
  HeldoutSplit split;
  split.seed = seed;
  split.fraction = fraction;
  split.train.vocab_size = split.heldout.vocab_size = corpus.vocab_size;
  split.train.labels = split.heldout.labels = corpus.labels;
  split.train.label_names = split.heldout.label_names = corpus.label_names;

  for (std::size_t d = 0; d < corpus.docs.size(); ++d) {
    const auto& doc = corpus.docs[d];
    const std::int64_t total = corpus.doc_tokens(d);
    const std::int64_t held =
        total < 2 ? 0 : static_cast<std::int64_t>(std::floor(fraction * total));

    // Token instances ordered by (word id, occurrence); choose `held` of them
    // by partial Fisher-Yates on a per-document stream.
    std::vector<std::int64_t> position(total);
    for (std::int64_t i = 0; i < total; ++i) position[i] = i;
    Rng rng({seed, static_cast<std::uint32_t>(d), 0x5eedu});
    for (std::int64_t i = 0; i < held; ++i) {
      const std::int64_t j = i + static_cast<std::int64_t>(rng.below(total - i));
      std::swap(position[i], position[j]);
    }
    std::vector<bool> is_held(total, false);
    for (std::int64_t i = 0; i < held; ++i) is_held[position[i]] = true;

    std::vector<std::pair<int, std::int64_t>> train_doc, held_doc;
    std::int64_t cursor = 0;
    for (const auto& [word, count] : doc) {
      std::int64_t held_here = 0;
      for (std::int64_t k = 0; k < count; ++k) {
        if (is_held[cursor + k]) ++held_here;
      }
      cursor += count;
      if (count - held_here > 0) train_doc.emplace_back(word, count - held_here);
      if (held_here > 0) held_doc.emplace_back(word, held_here);
    }
    split.train.docs.push_back(std::move(train_doc));
    split.heldout.docs.push_back(std::move(held_doc));
  }
  return split;
}

RawInput read_raw_input(const fs::path& input, bool labeled) {
  RawInput raw;
  if (!fs::exists(input)) {
    throw std::runtime_error("input not readable: " + input.string());
  }
  if (fs::is_directory(input)) {
    std::vector<fs::path> subdirs, files;
    for (const auto& entry : fs::directory_iterator(input)) {
      if (entry.is_directory()) subdirs.push_back(entry.path());
      else if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(subdirs.begin(), subdirs.end());
    std::sort(files.begin(), files.end());

    auto read_whole = [](const fs::path& p) {
      std::ifstream in(p, std::ios::binary);
      std::ostringstream ss;
      ss << in.rdbuf();
      return ss.str();
    };

    if (!subdirs.empty()) {
      // Each subdirectory is a class.
      for (std::size_t c = 0; c < subdirs.size(); ++c) {
        raw.label_names.push_back(subdirs[c].filename().string());
        std::vector<fs::path> class_files;
        for (const auto& entry : fs::directory_iterator(subdirs[c])) {
          if (entry.is_regular_file()) class_files.push_back(entry.path());
        }
        std::sort(class_files.begin(), class_files.end());
        for (const auto& f : class_files) {
          raw.texts.push_back(read_whole(f));
          raw.labels.push_back(static_cast<int>(c));
        }
      }
    } else {
      for (const auto& f : files) raw.texts.push_back(read_whole(f));
    }
  } else {
    std::ifstream in(input);
    if (!in) throw std::runtime_error("input not readable: " + input.string());
    std::string line;
    std::map<std::string, int> name_to_id;
    while (std::getline(in, line)) {
      if (labeled) {
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
          throw std::runtime_error("labeled input line without <TAB>: " + line);
        }
        const std::string name = line.substr(0, tab);
        auto [it, inserted] = name_to_id.emplace(name, static_cast<int>(name_to_id.size()));
        if (inserted) raw.label_names.push_back(name);
        raw.labels.push_back(it->second);
        raw.texts.push_back(line.substr(tab + 1));
      } else {
        raw.texts.push_back(line);
      }
    }
  }
  if (raw.texts.empty()) throw std::runtime_error("no documents in " + input.string());
  return raw;
}

void save_corpus_artifacts(const fs::path& dir, const SparseCorpus& corpus,
                           const Vocabulary& vocab) {
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "vocab.txt", std::ios::binary);
    for (const auto& term : vocab.terms) out << term << "\n";
  }
  {
    std::ofstream out(dir / "corpus.triplets", std::ios::binary);
    for (std::size_t d = 0; d < corpus.docs.size(); ++d) {
      for (const auto& [word, count] : corpus.docs[d]) {
        out << d << " " << word << " " << count << "\n";
      }
    }
  }
  if (corpus.has_labels()) {
    std::ofstream out(dir / "labels.txt", std::ios::binary);
    for (int label : corpus.labels) out << label << "\n";
  }
  json manifest;
  manifest["num_docs"] = corpus.docs.size();
  manifest["vocab_size"] = corpus.vocab_size;
  manifest["has_labels"] = corpus.has_labels();
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  out << manifest.dump(2) << "\n";
}

CorpusArtifacts load_corpus_artifacts(const fs::path& dir) {
  CorpusArtifacts art;

  std::ifstream manifest_in(dir / "manifest.json");
  if (!manifest_in) {
    throw std::runtime_error("missing manifest.json in " + dir.string());
  }
  json manifest = json::parse(manifest_in);
  const std::size_t num_docs = manifest.at("num_docs").get<std::size_t>();
  const int vocab_size = manifest.at("vocab_size").get<int>();
  const bool has_labels = manifest.at("has_labels").get<bool>();

  std::ifstream vocab_in(dir / "vocab.txt");
  if (!vocab_in) throw std::runtime_error("missing vocab.txt in " + dir.string());
  std::string term;
  while (std::getline(vocab_in, term)) {
    if (term.empty()) continue;
    art.vocab.index.emplace(term, static_cast<int>(art.vocab.terms.size()));
    art.vocab.terms.push_back(term);
  }
  if (art.vocab.size() != vocab_size) {
    throw std::runtime_error("vocab.txt size disagrees with manifest");
  }
  art.vocab.total_docs = static_cast<std::int64_t>(num_docs);

  art.corpus.vocab_size = vocab_size;
  art.corpus.docs.resize(num_docs);
  std::ifstream triplets_in(dir / "corpus.triplets");
  if (!triplets_in) throw std::runtime_error("missing corpus.triplets in " + dir.string());
  std::size_t doc_id;
  int word_id;
  std::int64_t count;
  while (triplets_in >> doc_id >> word_id >> count) {
    if (doc_id >= num_docs || word_id < 0 || word_id >= vocab_size || count < 1) {
      throw std::runtime_error("corpus.triplets: entry out of range");
    }
    art.corpus.docs[doc_id].emplace_back(word_id, count);
  }
  for (auto& doc : art.corpus.docs) {
    std::sort(doc.begin(), doc.end());
  }

  if (has_labels) {
    std::ifstream labels_in(dir / "labels.txt");
    if (!labels_in) throw std::runtime_error("missing labels.txt in " + dir.string());
    int label;
    while (labels_in >> label) art.corpus.labels.push_back(label);
    if (art.corpus.labels.size() != num_docs) {
      throw std::runtime_error("labels.txt size disagrees with manifest");
    }
  }
  return art;
}

}  // namespace sawtopics
