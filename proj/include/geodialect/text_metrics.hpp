#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace geodialect {

/// One hypothesis with at least one gold reference.
struct ScoredSegment {
  std::string hypothesis;
  std::vector<std::string> references;
};

/// Corpus-level character n-gram F-beta score in [0, 100]. Whitespace is
/// stripped before n-gram extraction; per-order precision/recall counts are
/// pooled over the corpus and averaged across orders 1..char_n. For each
/// segment the statistics against the reference with the highest segment
/// F-score are the ones pooled.
double chrf(const std::vector<ScoredSegment>& segments, std::size_t char_n = 6,
            double beta = 2.0);

/// Corpus-level BLEU in [0, 100]: clipped token n-gram precisions for
/// orders 1..max_n, geometric mean, brevity penalty against the reference
/// length closest to the hypothesis (ties to the shorter). Tokens are
/// split on Unicode whitespace; no smoothing. Text is expected in NFC form.
double bleu(const std::vector<ScoredSegment>& segments, std::size_t max_n = 4);

}  // namespace geodialect
