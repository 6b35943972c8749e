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

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace sawtopics {

struct Vocabulary {
  std::vector<std::string> terms;               // id -> term, ids contiguous 0..V-1
  std::unordered_map<std::string, int> index;   // term -> id
  std::vector<std::int64_t> corpus_freq;        // id -> total occurrences in the corpus
  std::vector<std::int64_t> doc_freq;           // id -> number of documents containing it
  std::int64_t total_docs = 0;

  int size() const { return static_cast<int>(terms.size()); }
};

// Documents as sparse word-count rows over a fixed vocabulary. Entries are
// sorted by word id and counts are >= 1; split halves may contain empty
// documents so that train/heldout rows stay aligned.
struct SparseCorpus {
  std::vector<std::vector<std::pair<int, std::int64_t>>> docs;
  std::vector<int> labels;  // one per document when present, else empty
  std::vector<std::string> label_names;
  int vocab_size = 0;

  bool has_labels() const { return !labels.empty(); }
  std::size_t num_docs() const { return docs.size(); }
  std::int64_t doc_tokens(std::size_t d) const {
    std::int64_t n = 0;
    for (const auto& [w, c] : docs[d]) n += c;
    return n;
  }
  std::int64_t total_tokens() const {
    std::int64_t n = 0;
    for (std::size_t d = 0; d < docs.size(); ++d) n += doc_tokens(d);
    return n;
  }
};

struct HeldoutSplit {
  SparseCorpus train;    // T
  SparseCorpus heldout;  // Y, aligned with T; T + Y equals the input exactly
  std::uint32_t seed = 0;
  double fraction = 0.2;
};

// Lowercases, splits on non-alphanumeric runs, drops pure digits and (by
// default) the bundled stopword list.
std::vector<std::string> tokenize(const std::string& text, bool drop_stopwords = true);

bool is_stopword(const std::string& word);

// Keeps words occurring at least min_count times in the corpus; if more than
// max_vocab survive, keeps the most frequent with lexicographic tie-breaks.
Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& raw_docs,
                            int min_count, int max_vocab);

// Drops out-of-vocabulary tokens, aggregates per-document counts, and removes
// documents left empty. Labels, when given, stay aligned with kept documents.
SparseCorpus vectorize(const std::vector<std::vector<std::string>>& raw_docs,
                       const Vocabulary& vocab, const std::vector<int>& labels = {},
                       const std::vector<std::string>& label_names = {});

// Samples floor(fraction * tokens) token instances per document into the
// heldout half, uniformly without replacement; single-token documents keep
// their token in the train half. Deterministic given the seed.
HeldoutSplit split_heldout(const SparseCorpus& corpus, double fraction,
                           std::uint32_t seed);

struct RawInput {
  std::vector<std::string> texts;
  std::vector<int> labels;  // empty when the input carries no labels
  std::vector<std::string> label_names;
};

// Directory input: one document per file; immediate subdirectories, when
// present, are treated as class labels. File input: one document per line,
// optionally prefixed "label<TAB>" when labeled is set.
RawInput read_raw_input(const std::filesystem::path& input, bool labeled = false);

// On-disk artifacts: vocab.txt (one term per line), corpus.triplets
// ("doc_id word_id count" per line), labels.txt, manifest.json.
void save_corpus_artifacts(const std::filesystem::path& dir, const SparseCorpus& corpus,
                           const Vocabulary& vocab);

struct CorpusArtifacts {
  SparseCorpus corpus;
  Vocabulary vocab;
};

CorpusArtifacts load_corpus_artifacts(const std::filesystem::path& dir);

}  // namespace sawtopics
