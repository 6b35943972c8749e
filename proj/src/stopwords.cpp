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

#include <string>
#include <unordered_set>

#include "sawtopics/corpus.hpp"

namespace sawtopics {

namespace {

// Fixed English stopword list, compiled in so prep runs are reproducible
// everywhere. Same content as data/stopwords.txt.
const char* const kStopwords[] = {
    "a",       "about",   "above",   "after",   "again",    "against", "all",
    "am",      "an",      "and",     "any",     "are",      "aren",    "as",
    "at",      "be",      "because", "been",    "before",   "being",   "below",
    "between", "both",    "but",     "by",      "can",      "cannot",  "could",
    "couldn",  "did",     "didn",    "do",      "does",     "doesn",   "doing",
    "don",     "down",    "during",  "each",    "few",      "for",     "from",
    "further", "had",     "hadn",    "has",     "hasn",     "have",    "haven",
    "having",  "he",      "her",     "here",    "hers",     "herself", "him",
    "himself", "his",     "how",     "i",       "if",       "in",      "into",
    "is",      "isn",     "it",      "its",     "itself",   "just",    "ll",
    "me",      "more",    "most",    "mustn",   "my",       "myself",  "no",
    "nor",     "not",     "now",     "of",      "off",      "on",      "once",
    "only",    "or",      "other",   "ought",   "our",      "ours",    "ourselves",
    "out",     "over",    "own",     "re",      "s",        "same",    "shan",
    "she",     "should",  "shouldn", "so",      "some",     "such",    "t",
    "than",    "that",    "the",     "their",   "theirs",   "them",    "themselves",
    "then",    "there",   "these",   "they",    "this",     "those",   "through",
    "to",      "too",     "under",   "until",   "up",       "ve",      "very",
    "was",     "wasn",    "we",      "were",    "weren",    "what",    "when",
    "where",   "which",   "while",   "who",     "whom",     "why",     "will",
    "with",    "won",     "would",   "wouldn",  "you",      "your",    "yours",
    "yourself", "yourselves",
};

const std::unordered_set<std::string>& stopword_set() {
  static const std::unordered_set<std::string> set(std::begin(kStopwords),
                                                   std::end(kStopwords));
  return set;
}

}  // namespace

bool is_stopword(const std::string& word) { return stopword_set().count(word) > 0; }

}  // namespace sawtopics
