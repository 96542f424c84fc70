#include "geodialect/text_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <unordered_map>

namespace geodialect {

namespace {

std::u32string decode_utf8(const std::string& text) {
  std::u32string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const auto b0 = static_cast<unsigned char>(text[i]);
    char32_t cp = 0;
    std::size_t len = 0;
    if (b0 < 0x80) {
      cp = b0;
      len = 1;
    } else if ((b0 & 0xE0) == 0xC0) {
      cp = b0 & 0x1F;
      len = 2;
    } else if ((b0 & 0xF0) == 0xE0) {
      cp = b0 & 0x0F;
      len = 3;
    } else if ((b0 & 0xF8) == 0xF0) {
      cp = b0 & 0x07;
      len = 4;
    } else {
      throw std::runtime_error("invalid UTF-8 byte at offset " + std::to_string(i));
    }
    if (i + len > text.size()) {
      throw std::runtime_error("truncated UTF-8 sequence at offset " + std::to_string(i));
    }
    for (std::size_t k = 1; k < len; ++k) {
      const auto b = static_cast<unsigned char>(text[i + k]);
      if ((b & 0xC0) != 0x80) {
        throw std::runtime_error("invalid UTF-8 continuation at offset " +
                                 std::to_string(i + k));
      }
      cp = (cp << 6) | (b & 0x3F);
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

bool is_unicode_space(char32_t cp) {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D:
    case 0x20: case 0x85: case 0xA0: case 0x1680:
    case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

std::u32string strip_spaces(const std::u32string& text) {
  std::u32string out;
  out.reserve(text.size());
  for (char32_t cp : text) {
    if (!is_unicode_space(cp)) out.push_back(cp);
  }
  return out;
}

std::vector<std::u32string> split_tokens(const std::u32string& text) {
  std::vector<std::u32string> tokens;
  std::u32string cur;
  for (char32_t cp : text) {
    if (is_unicode_space(cp)) {
      if (!cur.empty()) tokens.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(cp);
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

using NgramCounts = std::unordered_map<std::u32string, std::size_t>;

NgramCounts char_ngrams(const std::u32string& chars, std::size_t order) {
  NgramCounts counts;
  if (chars.size() >= order) {
    for (std::size_t i = 0; i + order <= chars.size(); ++i) {
      counts[chars.substr(i, order)] += 1;
    }
  }
  return counts;
}

// match / hypothesis-total / reference-total per n-gram order.
struct OrderStats {
  std::size_t match = 0;
  std::size_t hyp_total = 0;
  std::size_t ref_total = 0;
};

std::vector<OrderStats> chrf_segment_stats(const std::u32string& hyp,
                                           const std::u32string& ref,
                                           std::size_t char_n) {
  std::vector<OrderStats> stats(char_n);
  for (std::size_t o = 1; o <= char_n; ++o) {
    const NgramCounts h = char_ngrams(hyp, o);
    const NgramCounts r = char_ngrams(ref, o);
    OrderStats& s = stats[o - 1];
    for (const auto& [gram, count] : h) {
      s.hyp_total += count;
      const auto it = r.find(gram);
      if (it != r.end()) s.match += std::min(count, it->second);
    }
    for (const auto& [gram, count] : r) s.ref_total += count;
  }
  return stats;
}

double f_beta_from_stats(const std::vector<OrderStats>& stats, double beta) {
  double precision_sum = 0.0;
  double recall_sum = 0.0;
  std::size_t effective_orders = 0;
  for (const OrderStats& s : stats) {
    if (s.hyp_total == 0 && s.ref_total == 0) continue;  // order longer than both texts
    ++effective_orders;
    if (s.hyp_total > 0) {
      precision_sum += static_cast<double>(s.match) / static_cast<double>(s.hyp_total);
    }
    if (s.ref_total > 0) {
      recall_sum += static_cast<double>(s.match) / static_cast<double>(s.ref_total);
    }
  }
  if (effective_orders == 0) return 0.0;
  const double precision = precision_sum / static_cast<double>(effective_orders);
  const double recall = recall_sum / static_cast<double>(effective_orders);
  const double beta_sq = beta * beta;
  const double denom = beta_sq * precision + recall;
  if (denom <= 0.0) return 0.0;
  return (1.0 + beta_sq) * precision * recall / denom;
}

void validate_segments(const std::vector<ScoredSegment>& segments) {
  if (segments.empty()) {
    throw std::invalid_argument("metric needs a non-empty segment list");
  }
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (segments[i].references.empty()) {
      throw std::invalid_argument("segment " + std::to_string(i + 1) +
                                  " has no references");
    }
  }
}

}  // namespace

double chrf(const std::vector<ScoredSegment>& segments, std::size_t char_n, double beta) {
  validate_segments(segments);
  if (char_n < 1) throw std::invalid_argument("chrF needs char_n >= 1");
  if (!(beta > 0.0)) throw std::invalid_argument("chrF needs beta > 0");

  std::vector<OrderStats> corpus(char_n);
  for (const ScoredSegment& seg : segments) {
    const std::u32string hyp = strip_spaces(decode_utf8(seg.hypothesis));
    std::vector<OrderStats> best;
    double best_f = -1.0;
    for (const std::string& ref_text : seg.references) {
      const std::u32string ref = strip_spaces(decode_utf8(ref_text));
      std::vector<OrderStats> stats = chrf_segment_stats(hyp, ref, char_n);
      const double f = f_beta_from_stats(stats, beta);
      if (f > best_f) {
        best_f = f;
        best = std::move(stats);
      }
    }
    for (std::size_t o = 0; o < char_n; ++o) {
      corpus[o].match += best[o].match;
      corpus[o].hyp_total += best[o].hyp_total;
      corpus[o].ref_total += best[o].ref_total;
    }
  }
  return 100.0 * f_beta_from_stats(corpus, beta);
}

double bleu(const std::vector<ScoredSegment>& segments, std::size_t max_n) {
  validate_segments(segments);
  if (max_n < 1) throw std::invalid_argument("BLEU needs max_n >= 1");

  std::vector<std::size_t> match(max_n, 0);
  std::vector<std::size_t> total(max_n, 0);
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;

  for (const ScoredSegment& seg : segments) {
    const std::vector<std::u32string> hyp = split_tokens(decode_utf8(seg.hypothesis));
    std::vector<std::vector<std::u32string>> refs;
    refs.reserve(seg.references.size());
    for (const std::string& r : seg.references) {
      refs.push_back(split_tokens(decode_utf8(r)));
    }

    hyp_len += hyp.size();
    std::size_t closest = refs.front().size();
    for (const auto& r : refs) {
      const auto diff = [&](std::size_t len) {
        return len > hyp.size() ? len - hyp.size() : hyp.size() - len;
      };
      if (diff(r.size()) < diff(closest) ||
          (diff(r.size()) == diff(closest) && r.size() < closest)) {
        closest = r.size();
      }
    }
    ref_len += closest;

    // Token ids local to the segment; n-gram keys pack the ids as char32_t.
    std::unordered_map<std::u32string, std::uint32_t> ids;
    auto id_of = [&](const std::u32string& token) {
      const auto [it, _] = ids.emplace(token, static_cast<std::uint32_t>(ids.size()));
      return static_cast<char32_t>(it->second);
    };
    std::u32string hyp_ids;
    hyp_ids.reserve(hyp.size());
    for (const auto& t : hyp) hyp_ids.push_back(id_of(t));
    std::vector<std::u32string> ref_ids(refs.size());
    for (std::size_t r = 0; r < refs.size(); ++r) {
      ref_ids[r].reserve(refs[r].size());
      for (const auto& t : refs[r]) ref_ids[r].push_back(id_of(t));
    }

    for (std::size_t o = 1; o <= max_n; ++o) {
      const NgramCounts h = char_ngrams(hyp_ids, o);
      NgramCounts clip;
      for (const auto& r : ref_ids) {
        for (const auto& [gram, count] : char_ngrams(r, o)) {
          auto& c = clip[gram];
          c = std::max(c, count);
        }
      }
      for (const auto& [gram, count] : h) {
        total[o - 1] += count;
        const auto it = clip.find(gram);
        if (it != clip.end()) match[o - 1] += std::min(count, it->second);
      }
    }
  }

  if (hyp_len == 0) return 0.0;
  double log_sum = 0.0;
  for (std::size_t o = 0; o < max_n; ++o) {
    if (match[o] == 0 || total[o] == 0) return 0.0;  // no smoothing
    log_sum += std::log(static_cast<double>(match[o]) / static_cast<double>(total[o]));
  }
  const double brevity =
      hyp_len >= ref_len
          ? 1.0
          : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
  return 100.0 * brevity * std::exp(log_sum / static_cast<double>(max_n));
}

}  // namespace geodialect
